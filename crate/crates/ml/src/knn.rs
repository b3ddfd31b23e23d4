//! Brute-force k-nearest neighbours over standardized points.

use serde::{Deserialize, Serialize};

use crate::data::{Matrix, Standardizer, Task};
use crate::error::{MlError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KNearestNeighbors {
    task: Task,
    k: usize,
    scaler: Standardizer,
    cols: usize,
    points: Vec<f64>,
    targets: Vec<f64>,
}

impl KNearestNeighbors {
    pub fn fit(x: &Matrix, y: &[f64], task: Task, k: usize) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(MlError::LengthMismatch(x.rows(), y.len()));
        }
        if k == 0 || k > x.rows() {
            return Err(MlError::InvalidParameter(format!(
                "k = {k} must be in 1..={}",
                x.rows()
            )));
        }
        let scaler = Standardizer::fit(x)?;
        let points = x
            .iter_rows()
            .flat_map(|r| scaler.transform_row(r))
            .collect();
        Ok(Self {
            task,
            k,
            scaler,
            cols: x.cols(),
            points,
            targets: y.to_vec(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn scaler(&self) -> &Standardizer {
        &self.scaler
    }

    /// Indices of the k nearest training points, nearest first; equal
    /// distances rank the lower index first.
    pub fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let q = self.scaler.transform_row(row);
        let mut dist: Vec<(f64, usize)> = self
            .points
            .chunks_exact(self.cols)
            .enumerate()
            .map(|(i, p)| (p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
            dist.truncate(self.k);
        }
        dist.sort_by(cmp);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    /// Majority label (a tied vote takes the nearest neighbour's label) or the
    /// neighbours' mean target.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let nn = self.neighbours(row);
        match self.task {
            Task::Classification => {
                let pos = nn.iter().filter(|&&i| self.targets[i] > 0.5).count();
                match (2 * pos).cmp(&nn.len()) {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Less => 0.0,
                    std::cmp::Ordering::Equal => self.targets[nn[0]],
                }
            }
            Task::Regression => nn.iter().map(|&i| self.targets[i]).sum::<f64>() / nn.len() as f64,
        }
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        let n = self.targets.len();
        if self.cols == 0 || self.points.len() != n * self.cols || self.k == 0 || self.k > n {
            return Err("inconsistent knn model".into());
        }
        if self.scaler.mean.len() != self.cols || self.scaler.scale.len() != self.cols {
            return Err("knn scaler has wrong width".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Matrix, Vec<f64>) {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [5.0, 5.0], [5.0, 6.0], [6.0, 5.0]])
            .unwrap();
        (x, vec![0.0, 0.0, 1.0, 1.0, 1.0])
    }

    #[test]
    fn one_neighbour_recovers_training_label() {
        let (x, y) = data();
        let knn = KNearestNeighbors::fit(&x, &y, Task::Classification, 1).unwrap();
        for (row, label) in x.iter_rows().zip(&y) {
            assert_eq!(knn.predict_row(row), *label);
        }
    }

    #[test]
    fn full_k_is_global_majority() {
        let (x, y) = data();
        let knn = KNearestNeighbors::fit(&x, &y, Task::Classification, 5).unwrap();
        assert_eq!(knn.predict_row(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn k_larger_than_training_set_is_an_error() {
        let (x, y) = data();
        assert!(KNearestNeighbors::fit(&x, &y, Task::Classification, 6).is_err());
    }

    #[test]
    fn equal_distances_prefer_lower_index() {
        let x = Matrix::from_rows(&[[1.0], [-1.0], [1.0]]).unwrap();
        let knn = KNearestNeighbors::fit(&x, &[0.0, 1.0, 1.0], Task::Classification, 1).unwrap();
        assert_eq!(knn.neighbours(&[1.0]), vec![0]);
        assert_eq!(knn.predict_row(&[1.0]), 0.0);
    }
}
