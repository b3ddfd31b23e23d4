//! Random forests: bagged CART trees with per-split feature subsampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Matrix, Task};
use crate::error::{MlError, Result};
use crate::tree::{DecisionTree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub bootstrap: bool,
    /// `None` picks √n for classification and n/3 for regression.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl ForestParams {
    pub fn new(n_estimators: usize, max_depth: usize, seed: u64) -> Self {
        Self {
            n_estimators,
            max_depth,
            bootstrap: true,
            max_features: None,
            seed,
        }
    }
}

pub fn default_max_features(task: Task, n_features: usize) -> usize {
    let k = match task {
        Task::Classification => (n_features as f64).sqrt().floor() as usize,
        Task::Regression => n_features / 3,
    };
    k.clamp(1, n_features.max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    task: Task,
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn fit(x: &Matrix, y: &[f64], task: Task, params: &ForestParams) -> Result<Self> {
        if params.n_estimators == 0 {
            return Err(MlError::InvalidParameter(
                "n_estimators must be at least 1".into(),
            ));
        }
        if x.rows() == 0 {
            return Err(MlError::EmptyInput);
        }
        let max_features = params
            .max_features
            .unwrap_or_else(|| default_max_features(task, x.cols()));
        let n = x.rows();
        let trees = (0..params.n_estimators)
            .into_par_iter()
            .map(|t| {
                // one independent stream per tree keeps results scheduling-free
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(t as u64);
                let indices: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let tree_params = TreeParams {
                    max_depth: params.max_depth,
                    max_features: Some(max_features),
                    min_samples_split: 2,
                    seed: rng.random(),
                };
                DecisionTree::fit_indices(x, y, &indices, task, &tree_params)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { task, trees })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Majority vote (ties negative) or mean of the trees.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        match self.task {
            Task::Classification => {
                if 2.0 * sum > self.trees.len() as f64 {
                    1.0
                } else {
                    0.0
                }
            }
            Task::Regression => sum / self.trees.len() as f64,
        }
    }

    #[cfg(test)]
    fn from_trees(task: Task, trees: Vec<DecisionTree>) -> Self {
        Self { task, trees }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_moons(n: usize) -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random_range(-3.0..3.0);
            let b: f64 = rng.random_range(-3.0..3.0);
            rows.push([a, b, rng.random_range(0.0..1.0)]);
            y.push(f64::from(u8::from(a * a + b < 2.0)));
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn single_unbagged_tree_equals_decision_tree() {
        let (x, y) = two_moons(300);
        let params = ForestParams {
            n_estimators: 1,
            max_depth: 6,
            bootstrap: false,
            max_features: Some(3),
            seed: 4,
        };
        let forest = RandomForest::fit(&x, &y, Task::Classification, &params).unwrap();
        let tree = DecisionTree::fit(&x, &y, Task::Classification, &TreeParams::new(6, 4)).unwrap();
        for row in x.iter_rows() {
            assert_eq!(forest.predict_row(row), tree.predict_row(row));
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = two_moons(200);
        let p = ForestParams::new(8, 5, 99);
        let a = RandomForest::fit(&x, &y, Task::Classification, &p).unwrap();
        let b = RandomForest::fit(&x, &y, Task::Classification, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vote_and_mean_rules() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let stump =
            |y: [f64; 2], task| DecisionTree::fit(&x, &y, task, &TreeParams::new(0, 0)).unwrap();
        let votes = RandomForest::from_trees(
            Task::Classification,
            vec![
                stump([1.0, 1.0], Task::Classification),
                stump([1.0, 1.0], Task::Classification),
                stump([0.0, 0.0], Task::Classification),
            ],
        );
        assert_eq!(votes.predict_row(&[0.5]), 1.0);
        let means = RandomForest::from_trees(
            Task::Regression,
            vec![
                stump([1.0, 1.0], Task::Regression),
                stump([2.0, 2.0], Task::Regression),
                stump([6.0, 6.0], Task::Regression),
            ],
        );
        assert_eq!(means.predict_row(&[0.5]), 3.0);
    }

    #[test]
    fn zero_estimators_rejected() {
        let (x, y) = two_moons(10);
        assert!(
            RandomForest::fit(&x, &y, Task::Classification, &ForestParams::new(0, 3, 0)).is_err()
        );
    }

    #[test]
    fn feature_subset_defaults() {
        assert_eq!(default_max_features(Task::Classification, 13), 3);
        assert_eq!(default_max_features(Task::Regression, 13), 4);
        assert_eq!(default_max_features(Task::Regression, 2), 1);
    }
}
