//! Training on split data, cross-validation, hyperparameter sweeps and the
//! results table.

use std::io::Write;

use lanemerge_core::LabeledSample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{feature_matrix, targets, Matrix, Standardizer, Target, Task};
use crate::error::{MlError, Result};
use crate::metrics::Scoring;
use crate::model::{Algorithm, FittedModel, Hyperparameters, ModelBundle, ModelSpec};
use crate::split::{
    plain_folds, split_dataset, stratified_folds, SplitIndices, SplitRatios, SplitTag,
};

pub const DEFAULT_FOLDS: usize = 10;
pub const ESTIMATOR_GRID: [usize; 9] = [1, 2, 5, 10, 20, 35, 50, 75, 100];

/// Features, all three targets, and a split tag per sample.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Matrix,
    pub merge: Vec<f64>,
    pub acceleration: Vec<f64>,
    pub heading: Vec<f64>,
    pub tags: Vec<SplitTag>,
}

impl Dataset {
    /// Split stratified on the merge label.
    pub fn from_samples(samples: &[LabeledSample], ratios: SplitRatios, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(MlError::EmptyInput);
        }
        let classes: Vec<bool> = samples.iter().map(|s| s.recommendation).collect();
        Ok(Self {
            x: feature_matrix(samples),
            merge: targets(samples, Target::Merge),
            acceleration: targets(samples, Target::Acceleration),
            heading: targets(samples, Target::Heading),
            tags: split_dataset(&classes, ratios, seed)?,
        })
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn targets(&self, target: Target) -> &[f64] {
        match target {
            Target::Merge => &self.merge,
            Target::Acceleration => &self.acceleration,
            Target::Heading => &self.heading,
        }
    }

    pub fn indices(&self) -> SplitIndices {
        SplitIndices::from_tags(&self.tags)
    }

    pub fn part(&self, tag: SplitTag, target: Target) -> (Matrix, Vec<f64>) {
        let idx = match tag {
            SplitTag::Train => self.indices().train,
            SplitTag::Validation => self.indices().validation,
            SplitTag::Test => self.indices().test,
        };
        let y = self.targets(target);
        (self.x.select(&idx), idx.iter().map(|&i| y[i]).collect())
    }
}

/// Accuracies of one model fitted on the training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub train: f64,
    pub validation: f64,
    /// `None` when the test split is empty.
    pub test: Option<f64>,
}

fn score_on(model: &FittedModel, x: &Matrix, y: &[f64], scoring: Scoring) -> Result<f64> {
    scoring.score(&model.predict_matrix(x)?, y)
}

pub fn fit_on_train(spec: ModelSpec, data: &Dataset) -> Result<FittedModel> {
    let (x, y) = data.part(SplitTag::Train, spec.target);
    FittedModel::fit(spec, &x, &y)
}

pub fn evaluate(
    spec: ModelSpec,
    data: &Dataset,
    scoring: Scoring,
) -> Result<(FittedModel, Evaluation)> {
    let model = fit_on_train(spec, data)?;
    let (xt, yt) = data.part(SplitTag::Train, spec.target);
    let (xv, yv) = data.part(SplitTag::Validation, spec.target);
    let (xs, ys) = data.part(SplitTag::Test, spec.target);
    let eval = Evaluation {
        train: score_on(&model, &xt, &yt, scoring)?,
        validation: score_on(&model, &xv, &yv, scoring)?,
        test: if ys.is_empty() {
            None
        } else {
            Some(score_on(&model, &xs, &ys, scoring)?)
        },
    };
    Ok((model, eval))
}

/// Fits the three models on the training split.
pub fn train_bundle(
    data: &Dataset,
    merge: ModelSpec,
    acceleration: ModelSpec,
    heading: ModelSpec,
) -> Result<ModelBundle> {
    for (spec, target) in [
        (merge, Target::Merge),
        (acceleration, Target::Acceleration),
        (heading, Target::Heading),
    ] {
        if spec.target != target {
            return Err(MlError::InvalidParameter(format!(
                "{} model given for the {} slot",
                spec.target.name(),
                target.name()
            )));
        }
    }
    let (x_train, _) = data.part(SplitTag::Train, Target::Merge);
    let fitted: Vec<FittedModel> = [merge, acceleration, heading]
        .into_par_iter()
        .map(|spec| fit_on_train(spec, data))
        .collect::<Result<_>>()?;
    let [merge, acceleration, heading]: [FittedModel; 3] = fitted.try_into().expect("three specs");
    Ok(ModelBundle {
        merge,
        acceleration,
        heading,
        standardizer: Standardizer::fit(&x_train)?,
    })
}

/// The configuration served by default: random forest for merges, gradient
/// boosting for acceleration and heading, at their chosen depths.
pub fn default_specs(seed: u64) -> [ModelSpec; 3] {
    let spec = |a, t| ModelSpec::new(a, t, Hyperparameters::chosen(a, t, seed));
    [
        spec(Algorithm::RandomForest, Target::Merge),
        spec(Algorithm::GradientBoosting, Target::Acceleration),
        spec(Algorithm::GradientBoosting, Target::Heading),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub scores: Vec<f64>,
    pub mean: f64,
}

/// k-fold scores: stratified folds for classification, shuffled plain folds
/// for regression.
pub fn cross_validate(
    spec: ModelSpec,
    x: &Matrix,
    y: &[f64],
    folds: usize,
    seed: u64,
    scoring: Scoring,
) -> Result<CrossValidation> {
    if x.rows() != y.len() {
        return Err(MlError::LengthMismatch(x.rows(), y.len()));
    }
    let assignment = match spec.task() {
        Task::Classification => {
            let classes: Vec<bool> = y.iter().map(|v| *v > 0.5).collect();
            stratified_folds(&classes, folds, seed)?
        }
        Task::Regression => plain_folds(y.len(), folds, seed)?,
    };
    let scores = (0..folds)
        .into_par_iter()
        .map(|fold| {
            let (held, kept): (Vec<usize>, Vec<usize>) =
                (0..y.len()).partition(|&i| assignment[i] == fold);
            let model = FittedModel::fit(
                spec,
                &x.select(&kept),
                &kept.iter().map(|&i| y[i]).collect::<Vec<_>>(),
            )?;
            score_on(
                &model,
                &x.select(&held),
                &held.iter().map(|&i| y[i]).collect::<Vec<_>>(),
                scoring,
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(CrossValidation { scores, mean })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    MaxDepth,
    Estimators,
    Neighbors,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::MaxDepth => "max_depth",
            SweepParam::Estimators => "n_estimators",
            SweepParam::Neighbors => "k_neighbors",
        }
    }

    fn apply(self, params: Hyperparameters, value: usize) -> Hyperparameters {
        match self {
            SweepParam::MaxDepth => Hyperparameters {
                max_depth: value,
                ..params
            },
            SweepParam::Estimators => Hyperparameters {
                n_estimators: value,
                ..params
            },
            SweepParam::Neighbors => Hyperparameters {
                k_neighbors: value,
                ..params
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub param: SweepParam,
    pub values: Vec<usize>,
    pub train: Vec<f64>,
    pub validation: Vec<f64>,
    pub chosen: usize,
}

impl SweepResult {
    /// `param,train_acc,val_acc`, one row per swept value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "param,train_acc,val_acc")?;
        for ((v, t), a) in self.values.iter().zip(&self.train).zip(&self.validation) {
            writeln!(out, "{v},{t:.6},{a:.6}")?;
        }
        Ok(())
    }
}

/// Largest acceptable train−validation gap when choosing a depth.
pub fn depth_gap(algorithm: Algorithm) -> f64 {
    match algorithm {
        Algorithm::DecisionTree => 0.01,
        _ => 0.015,
    }
}

fn run_sweep(
    spec: ModelSpec,
    data: &Dataset,
    param: SweepParam,
    values: &[usize],
    scoring: Scoring,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if values.is_empty() {
        return Err(MlError::InvalidParameter("nothing to sweep".into()));
    }
    let evals = values
        .par_iter()
        .map(|&v| {
            let s = ModelSpec {
                params: param.apply(spec.params, v),
                ..spec
            };
            evaluate(s, data, scoring).map(|(_, e)| e)
        })
        .collect::<Result<Vec<Evaluation>>>()?;
    Ok((
        evals.iter().map(|e| e.train).collect(),
        evals.iter().map(|e| e.validation).collect(),
    ))
}

/// One model per depth; chooses the largest depth whose validation accuracy
/// trails training accuracy by at most `gap`, or the first depth if none does.
pub fn sweep_max_depth(
    spec: ModelSpec,
    data: &Dataset,
    depths: &[usize],
    gap: f64,
    scoring: Scoring,
) -> Result<SweepResult> {
    let (train, validation) = run_sweep(spec, data, SweepParam::MaxDepth, depths, scoring)?;
    // a little slack so that a gap of exactly `gap` survives rounding
    let chosen = (0..depths.len())
        .filter(|&i| train[i] - validation[i] <= gap + 1e-12)
        .max_by_key(|&i| depths[i])
        .map_or(depths[0], |i| depths[i]);
    Ok(SweepResult {
        param: SweepParam::MaxDepth,
        values: depths.to_vec(),
        train,
        validation,
        chosen,
    })
}

/// One model per value of `param`; chooses the best validation accuracy,
/// earliest value on ties.
pub fn sweep_best(
    spec: ModelSpec,
    data: &Dataset,
    param: SweepParam,
    values: &[usize],
    scoring: Scoring,
) -> Result<SweepResult> {
    let (train, validation) = run_sweep(spec, data, param, values, scoring)?;
    let mut best = 0;
    for i in 1..values.len() {
        if validation[i] > validation[best] {
            best = i;
        }
    }
    Ok(SweepResult {
        param,
        values: values.to_vec(),
        train,
        validation,
        chosen: values[best],
    })
}

pub fn sweep_estimators(
    spec: ModelSpec,
    data: &Dataset,
    values: &[usize],
    scoring: Scoring,
) -> Result<SweepResult> {
    sweep_best(spec, data, SweepParam::Estimators, values, scoring)
}

/// Validation accuracy of each model per target; `None` where a model is not
/// reported for that target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub algorithm: Algorithm,
    pub merge: Option<Evaluation>,
    pub acceleration: Option<Evaluation>,
    pub heading: Option<Evaluation>,
}

/// Fits the nine merge classifiers and the three regressors for each of
/// acceleration and heading with their chosen hyperparameters.
pub fn results_table(
    data: &Dataset,
    seed: u64,
    accel_tolerance: Option<f64>,
    heading_tolerance: Option<f64>,
) -> Result<Vec<TableRow>> {
    let mut jobs = Vec::new();
    for a in Algorithm::CLASSIFIERS {
        jobs.push((a, Target::Merge));
    }
    for t in [Target::Acceleration, Target::Heading] {
        for a in Algorithm::REGRESSORS {
            jobs.push((a, t));
        }
    }
    let results = jobs
        .par_iter()
        .map(|&(a, t)| {
            let spec = ModelSpec::new(a, t, Hyperparameters::chosen(a, t, seed));
            let tol = match t {
                Target::Heading => heading_tolerance,
                _ => accel_tolerance,
            };
            evaluate(spec, data, Scoring::for_target(t, tol)).map(|(_, e)| (a, t, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<TableRow> = Vec::new();
    for (a, t, e) in results {
        let idx = match rows.iter().position(|r| r.algorithm == a) {
            Some(i) => i,
            None => {
                rows.push(TableRow {
                    algorithm: a,
                    merge: None,
                    acceleration: None,
                    heading: None,
                });
                rows.len() - 1
            }
        };
        let slot = match t {
            Target::Merge => &mut rows[idx].merge,
            Target::Acceleration => &mut rows[idx].acceleration,
            Target::Heading => &mut rows[idx].heading,
        };
        *slot = Some(e);
    }
    Ok(rows)
}

/// `model,merge,acceleration,heading` with validation accuracy in percent
/// and `-` for unreported cells.
pub fn write_table_csv<W: Write>(rows: &[TableRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "model,merge,acceleration,heading")?;
    for r in rows {
        let cell = |e: Option<Evaluation>| {
            e.map_or("-".to_string(), |e| format!("{:.2}", 100.0 * e.validation))
        };
        writeln!(
            out,
            "{},{},{},{}",
            r.algorithm.display_name(),
            cell(r.merge),
            cell(r.acceleration),
            cell(r.heading)
        )?;
    }
    Ok(())
}
