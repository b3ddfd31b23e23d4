//! Algorithm selection, fitted models, and the versioned model file.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use lanemerge_core::{normalize_heading, FEATURE_COUNT, FEATURE_NAMES};
use serde::{Deserialize, Serialize};

use crate::bayes::GaussianNaiveBayes;
use crate::boosting::{BoostingParams, GradientBoosting};
use crate::data::{Matrix, Standardizer, Target, Task};
use crate::error::{MlError, Result};
use crate::forest::{ForestParams, RandomForest};
use crate::knn::KNearestNeighbors;
use crate::linear::{LinearModel, LinearVariant};
use crate::tree::{DecisionTree, TreeParams};

pub const MODEL_FORMAT: &str = "lanemerge-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    RandomForest,
    Knn,
    DecisionTree,
    GradientBoosting,
    Sgd,
    LogisticRegression,
    LinearSvc,
    NaiveBayes,
    Perceptron,
    LinearRegression,
}

impl Algorithm {
    pub const ALL: [Algorithm; 10] = [
        Algorithm::RandomForest,
        Algorithm::Knn,
        Algorithm::DecisionTree,
        Algorithm::GradientBoosting,
        Algorithm::Sgd,
        Algorithm::LogisticRegression,
        Algorithm::LinearSvc,
        Algorithm::NaiveBayes,
        Algorithm::Perceptron,
        Algorithm::LinearRegression,
    ];

    /// The merge classifiers, in reporting order.
    pub const CLASSIFIERS: [Algorithm; 9] = [
        Algorithm::RandomForest,
        Algorithm::Knn,
        Algorithm::DecisionTree,
        Algorithm::GradientBoosting,
        Algorithm::Sgd,
        Algorithm::LogisticRegression,
        Algorithm::LinearSvc,
        Algorithm::NaiveBayes,
        Algorithm::Perceptron,
    ];

    /// The acceleration and heading regressors, in reporting order.
    pub const REGRESSORS: [Algorithm; 3] = [
        Algorithm::RandomForest,
        Algorithm::GradientBoosting,
        Algorithm::LinearRegression,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::RandomForest => "random-forest",
            Algorithm::Knn => "knn",
            Algorithm::DecisionTree => "decision-tree",
            Algorithm::GradientBoosting => "gradient-boosting",
            Algorithm::Sgd => "sgd",
            Algorithm::LogisticRegression => "logistic-regression",
            Algorithm::LinearSvc => "linear-svc",
            Algorithm::NaiveBayes => "naive-bayes",
            Algorithm::Perceptron => "perceptron",
            Algorithm::LinearRegression => "linear-regression",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::RandomForest => "Random Forest",
            Algorithm::Knn => "K-Nearest Neighbours",
            Algorithm::DecisionTree => "Decision Tree",
            Algorithm::GradientBoosting => "Gradient Boosting",
            Algorithm::Sgd => "Stochastic Gradient Descent",
            Algorithm::LogisticRegression => "Logistic Regression",
            Algorithm::LinearSvc => "Linear SVC",
            Algorithm::NaiveBayes => "Naive Bayes",
            Algorithm::Perceptron => "Perceptron",
            Algorithm::LinearRegression => "Linear Regression",
        }
    }

    pub fn supports(self, task: Task) -> bool {
        match self {
            Algorithm::RandomForest
            | Algorithm::Knn
            | Algorithm::DecisionTree
            | Algorithm::GradientBoosting => true,
            Algorithm::LinearRegression => true,
            Algorithm::Sgd
            | Algorithm::LogisticRegression
            | Algorithm::LinearSvc
            | Algorithm::NaiveBayes
            | Algorithm::Perceptron => task == Task::Classification,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = MlError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| MlError::InvalidParameter(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub max_depth: usize,
    pub n_estimators: usize,
    pub k_neighbors: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub bootstrap: bool,
    pub max_features: Option<usize>,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            max_depth: 16,
            n_estimators: 100,
            k_neighbors: 50,
            learning_rate: 0.1,
            seed: 42,
            bootstrap: true,
            max_features: None,
        }
    }
}

impl Hyperparameters {
    /// Depths picked by the over-fitting analysis for each model and target.
    pub fn chosen(algorithm: Algorithm, target: Target, seed: u64) -> Self {
        let max_depth = match (algorithm, target) {
            (Algorithm::RandomForest, Target::Merge) => 16,
            (Algorithm::RandomForest, Target::Acceleration) => 18,
            (Algorithm::RandomForest, Target::Heading) => 11,
            (Algorithm::DecisionTree, _) => 11,
            (Algorithm::GradientBoosting, Target::Acceleration) => 11,
            (Algorithm::GradientBoosting, Target::Heading) => 6,
            (Algorithm::GradientBoosting, Target::Merge) => 3,
            _ => 16,
        };
        Self {
            max_depth,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 || self.k_neighbors == 0 {
            return Err(MlError::InvalidParameter(
                "n_estimators and k_neighbors must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(MlError::InvalidParameter(
                "learning_rate must be positive".into(),
            ));
        }
        if self.max_features == Some(0) {
            return Err(MlError::InvalidParameter(
                "max_features must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// What to fit: an algorithm for a target with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub algorithm: Algorithm,
    pub target: Target,
    pub params: Hyperparameters,
}

impl ModelSpec {
    pub fn new(algorithm: Algorithm, target: Target, params: Hyperparameters) -> Self {
        Self {
            algorithm,
            target,
            params,
        }
    }

    pub fn task(&self) -> Task {
        self.target.task()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum Estimator {
    Tree(DecisionTree),
    Forest(RandomForest),
    Boosting(GradientBoosting),
    Knn(KNearestNeighbors),
    Linear(LinearModel),
    NaiveBayes(GaussianNaiveBayes),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub n_features: usize,
    pub estimator: Estimator,
}

impl FittedModel {
    pub fn fit(spec: ModelSpec, x: &Matrix, y: &[f64]) -> Result<Self> {
        let task = spec.task();
        if !spec.algorithm.supports(task) {
            return Err(MlError::UnsupportedTask {
                algorithm: spec.algorithm.to_string(),
                task: task.to_string(),
            });
        }
        spec.params.validate()?;
        let p = &spec.params;
        let linear = |variant| LinearModel::fit(x, y, task, variant, p.seed).map(Estimator::Linear);
        let estimator = match spec.algorithm {
            Algorithm::DecisionTree => {
                let params = TreeParams {
                    max_features: p.max_features,
                    ..TreeParams::new(p.max_depth, p.seed)
                };
                Estimator::Tree(DecisionTree::fit(x, y, task, &params)?)
            }
            Algorithm::RandomForest => {
                let params = ForestParams {
                    n_estimators: p.n_estimators,
                    max_depth: p.max_depth,
                    bootstrap: p.bootstrap,
                    max_features: p.max_features,
                    seed: p.seed,
                };
                Estimator::Forest(RandomForest::fit(x, y, task, &params)?)
            }
            Algorithm::GradientBoosting => {
                let params = BoostingParams {
                    n_estimators: p.n_estimators,
                    max_depth: p.max_depth,
                    learning_rate: p.learning_rate,
                    seed: p.seed,
                };
                Estimator::Boosting(GradientBoosting::fit(x, y, task, &params)?)
            }
            Algorithm::Knn => Estimator::Knn(KNearestNeighbors::fit(x, y, task, p.k_neighbors)?),
            Algorithm::NaiveBayes => Estimator::NaiveBayes(GaussianNaiveBayes::fit(x, y)?),
            Algorithm::LinearRegression => linear(LinearVariant::LeastSquares)?,
            Algorithm::LogisticRegression => linear(LinearVariant::Logistic)?,
            Algorithm::LinearSvc => linear(LinearVariant::Hinge)?,
            Algorithm::Sgd => linear(LinearVariant::SgdLogistic)?,
            Algorithm::Perceptron => linear(LinearVariant::Perceptron)?,
        };
        Ok(Self {
            spec,
            n_features: x.cols(),
            estimator,
        })
    }

    /// Class as 0/1, acceleration in m/s², or heading in [0, 360).
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.n_features {
            return Err(MlError::DimensionMismatch {
                expected: self.n_features,
                found: features.len(),
            });
        }
        Ok(self.predict_unchecked(features))
    }

    fn predict_unchecked(&self, row: &[f64]) -> f64 {
        let raw = match &self.estimator {
            Estimator::Tree(m) => m.predict_row(row),
            Estimator::Forest(m) => m.predict_row(row),
            Estimator::Boosting(m) => m.predict_row(row),
            Estimator::Knn(m) => m.predict_row(row),
            Estimator::Linear(m) => m.predict_row(row),
            Estimator::NaiveBayes(m) => m.predict_row(row),
        };
        match self.spec.target {
            Target::Heading => normalize_heading(raw),
            _ => raw,
        }
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(MlError::DimensionMismatch {
                expected: self.n_features,
                found: x.cols(),
            });
        }
        Ok(x.iter_rows().map(|r| self.predict_unchecked(r)).collect())
    }

    /// Structural checks on a deserialized model.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let task = self.spec.task();
        if !self.spec.algorithm.supports(task) {
            return Err(format!(
                "{} cannot predict {}",
                self.spec.algorithm,
                self.spec.target.name()
            ));
        }
        let check_trees = |trees: &[DecisionTree]| -> std::result::Result<(), String> {
            if trees.is_empty() {
                return Err("ensemble has no trees".into());
            }
            for t in trees {
                t.validate()?;
                if t.n_features() != self.n_features {
                    return Err("tree width differs from model width".into());
                }
            }
            Ok(())
        };
        let width = match (&self.estimator, self.spec.algorithm) {
            (Estimator::Tree(t), Algorithm::DecisionTree) => {
                check_trees(std::slice::from_ref(t))?;
                self.n_features
            }
            (Estimator::Forest(f), Algorithm::RandomForest) => {
                check_trees(f.trees())?;
                self.n_features
            }
            (Estimator::Boosting(b), Algorithm::GradientBoosting) => {
                check_trees(b.stages())?;
                if !b.base().is_finite() {
                    return Err("non-finite boosting base".into());
                }
                self.n_features
            }
            (Estimator::Knn(k), Algorithm::Knn) => {
                k.validate()?;
                k.scaler().mean.len()
            }
            (Estimator::NaiveBayes(nb), Algorithm::NaiveBayes) => {
                nb.validate()?;
                nb.width()
            }
            (Estimator::Linear(l), _) => {
                l.validate()?;
                l.width()
            }
            _ => {
                return Err(format!(
                    "estimator kind does not match algorithm {}",
                    self.spec.algorithm
                ))
            }
        };
        if width != self.n_features {
            return Err(format!(
                "model width {width} differs from declared {}",
                self.n_features
            ));
        }
        Ok(())
    }
}

/// The merge classifier with the acceleration and heading regressors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub merge: FittedModel,
    pub acceleration: FittedModel,
    pub heading: FittedModel,
    /// Per-feature statistics of the training split.
    pub standardizer: Standardizer,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    feature_names: Vec<String>,
    #[serde(flatten)]
    bundle: ModelBundle,
}

impl ModelBundle {
    pub fn model(&self, target: Target) -> &FittedModel {
        match target {
            Target::Merge => &self.merge,
            Target::Acceleration => &self.acceleration,
            Target::Heading => &self.heading,
        }
    }

    /// Models that ignore their input: useful as a baseline and for exercising
    /// planners with a known classifier answer.
    pub fn constant(merge: bool, acceleration: f64, heading: f64) -> Result<Self> {
        let x = Matrix::new(1, FEATURE_COUNT, vec![0.0; FEATURE_COUNT])?;
        let params = Hyperparameters {
            max_depth: 0,
            ..Hyperparameters::default()
        };
        let fit = |target, value: f64| {
            FittedModel::fit(
                ModelSpec::new(Algorithm::DecisionTree, target, params),
                &x,
                &[value],
            )
        };
        Ok(Self {
            merge: fit(Target::Merge, f64::from(u8::from(merge)))?,
            acceleration: fit(Target::Acceleration, acceleration)?,
            heading: fit(Target::Heading, heading)?,
            standardizer: Standardizer::fit(&x)?,
        })
    }

    /// Merge flag, acceleration, heading.
    pub fn predict(&self, features: &[f64]) -> Result<(bool, f64, f64)> {
        Ok((
            self.merge.predict(features)? > 0.5,
            self.acceleration.predict(features)?,
            self.heading.predict(features)?,
        ))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            bundle: self.clone(),
        };
        serde_json::to_string(&file).map_err(|e| MlError::ModelFile(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let header: serde_json::Value =
            serde_json::from_str(text).map_err(|e| MlError::ModelFile(e.to_string()))?;
        match header.get("format").and_then(|f| f.as_str()) {
            Some(MODEL_FORMAT) => {}
            other => return Err(MlError::ModelFile(format!("unexpected format {other:?}"))),
        }
        match header.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(MODEL_VERSION) => {}
            other => return Err(MlError::ModelFile(format!("unsupported version {other:?}"))),
        }
        let file: ModelFile =
            serde_json::from_value(header).map_err(|e| MlError::ModelFile(e.to_string()))?;
        if file.feature_names.len() != FEATURE_COUNT
            || file
                .feature_names
                .iter()
                .zip(FEATURE_NAMES)
                .any(|(a, b)| a != b)
        {
            return Err(MlError::ModelFile(
                "feature names do not match this build".into(),
            ));
        }
        let bundle = file.bundle;
        for target in Target::ALL {
            let m = bundle.model(target);
            if m.spec.target != target {
                return Err(MlError::ModelFile(format!(
                    "{} slot holds a {} model",
                    target.name(),
                    m.spec.target.name()
                )));
            }
            if m.n_features != FEATURE_COUNT {
                return Err(MlError::ModelFile(format!(
                    "{} model has {} features",
                    target.name(),
                    m.n_features
                )));
            }
            m.validate()
                .map_err(|e| MlError::ModelFile(format!("{}: {e}", target.name())))?;
        }
        if bundle.standardizer.mean.len() != FEATURE_COUNT
            || bundle.standardizer.scale.len() != FEATURE_COUNT
        {
            return Err(MlError::ModelFile("standardizer width mismatch".into()));
        }
        Ok(bundle)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
