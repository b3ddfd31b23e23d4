//! Learners and evaluation tooling for merge recommendation.
//!
//! Trees, forests and boosting consume raw features; KNN and the linear
//! models standardize internally with statistics of their training data.

pub mod bayes;
pub mod boosting;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod forest;
pub mod knn;
pub mod linear;
pub mod metrics;
pub mod model;
pub mod split;
pub mod tree;

pub use data::{feature_matrix, targets, Matrix, Standardizer, Target, Task};
pub use error::{MlError, Result};
pub use evaluate::{
    cross_validate, default_specs, evaluate, results_table, sweep_estimators, sweep_max_depth,
    train_bundle, CrossValidation, Dataset, Evaluation, SweepParam, SweepResult, TableRow,
};
pub use metrics::{exact_match_accuracy, tolerance_accuracy, Scoring};
pub use model::{Algorithm, FittedModel, Hyperparameters, ModelBundle, ModelSpec};
pub use split::{split_dataset, SplitRatios, SplitTag};
