//! Gradient boosting with regression trees as stagewise base learners.
//!
//! Regression minimises squared error; each stage fits the residuals and adds
//! the shrunk tree. Classification minimises the logistic loss on the log-odds
//! scale, with one Newton step per leaf. A leaf step that would raise its own
//! loss is halved until it does not, so the training loss never increases.

use serde::{Deserialize, Serialize};

use crate::data::{Matrix, Task};
use crate::error::{MlError, Result};
use crate::tree::{DecisionTree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostingParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    task: Task,
    base: f64,
    learning_rate: f64,
    stages: Vec<DecisionTree>,
    /// Training loss before the first stage and after each one.
    train_loss: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// log(1 + e^-m) for margin m, computed without overflow.
fn logistic_loss(y: f64, f: f64) -> f64 {
    let m = if y > 0.5 { f } else { -f };
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

impl GradientBoosting {
    pub fn fit(x: &Matrix, y: &[f64], task: Task, params: &BoostingParams) -> Result<Self> {
        if params.n_estimators == 0 {
            return Err(MlError::InvalidParameter(
                "n_estimators must be at least 1".into(),
            ));
        }
        if !(params.learning_rate > 0.0 && params.learning_rate.is_finite()) {
            return Err(MlError::InvalidParameter(
                "learning_rate must be positive".into(),
            ));
        }
        if x.rows() != y.len() {
            return Err(MlError::LengthMismatch(x.rows(), y.len()));
        }
        if x.rows() == 0 {
            return Err(MlError::EmptyInput);
        }
        let n = y.len() as f64;
        let base = match task {
            Task::Regression => y.iter().sum::<f64>() / n,
            Task::Classification => {
                let p = (y.iter().sum::<f64>() / n).clamp(1e-6, 1.0 - 1e-6);
                (p / (1.0 - p)).ln()
            }
        };
        let mut model = Self {
            task,
            base,
            learning_rate: params.learning_rate,
            stages: Vec::with_capacity(params.n_estimators),
            train_loss: Vec::with_capacity(params.n_estimators + 1),
        };
        let mut f = vec![base; y.len()];
        model.train_loss.push(model.loss(y, &f));

        for stage in 0..params.n_estimators {
            let residual: Vec<f64> = match task {
                Task::Regression => y.iter().zip(&f).map(|(y, f)| y - f).collect(),
                Task::Classification => y.iter().zip(&f).map(|(y, f)| y - sigmoid(*f)).collect(),
            };
            let tree_params =
                TreeParams::new(params.max_depth, params.seed.wrapping_add(stage as u64));
            let mut tree = DecisionTree::fit(x, &residual, Task::Regression, &tree_params)?;
            let leaves: Vec<usize> = x.iter_rows().map(|r| tree.leaf_of(r)).collect();

            if task == Task::Classification {
                let mut members: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
                for (i, &leaf) in leaves.iter().enumerate() {
                    members.entry(leaf).or_default().push(i);
                }
                for (leaf, rows) in members {
                    let num: f64 = rows.iter().map(|&i| residual[i]).sum();
                    let den: f64 = rows
                        .iter()
                        .map(|&i| {
                            let p = sigmoid(f[i]);
                            p * (1.0 - p)
                        })
                        .sum();
                    let mut step = num / den.max(1e-12);
                    let before: f64 = rows.iter().map(|&i| logistic_loss(y[i], f[i])).sum();
                    let mut tries = 0;
                    loop {
                        let after: f64 = rows
                            .iter()
                            .map(|&i| logistic_loss(y[i], f[i] + params.learning_rate * step))
                            .sum();
                        if after <= before || tries >= 60 {
                            break;
                        }
                        step /= 2.0;
                        tries += 1;
                    }
                    if tries >= 60 {
                        step = 0.0;
                    }
                    tree.set_leaf_value(leaf, step);
                }
            }

            for (fi, &leaf) in f.iter_mut().zip(&leaves) {
                let value = match &tree.nodes()[leaf] {
                    crate::tree::Node::Leaf { value } => *value,
                    crate::tree::Node::Split { .. } => unreachable!(),
                };
                *fi += params.learning_rate * value;
            }
            model.stages.push(tree);
            model.train_loss.push(model.loss(y, &f));
        }
        Ok(model)
    }

    fn loss(&self, y: &[f64], f: &[f64]) -> f64 {
        let n = y.len() as f64;
        match self.task {
            Task::Regression => y.iter().zip(f).map(|(y, f)| (y - f) * (y - f)).sum::<f64>() / n,
            Task::Classification => {
                y.iter()
                    .zip(f)
                    .map(|(y, f)| logistic_loss(*y, *f))
                    .sum::<f64>()
                    / n
            }
        }
    }

    pub fn train_loss(&self) -> &[f64] {
        &self.train_loss
    }

    pub fn stages(&self) -> &[DecisionTree] {
        &self.stages
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Raw additive score: the regression value, or log-odds.
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.base
            + self
                .stages
                .iter()
                .map(|t| self.learning_rate * t.predict_row(row))
                .sum::<f64>()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let score = self.decision(row);
        match self.task {
            Task::Regression => score,
            Task::Classification => f64::from(u8::from(score > 0.0)),
        }
    }
}
