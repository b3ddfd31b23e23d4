//! Gaussian naive Bayes for binary labels.

use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{MlError, Result};

pub const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNaiveBayes {
    /// Log prior per class (index 0 = negative); `None` when the class is
    /// absent from training.
    log_prior: [Option<f64>; 2],
    mean: [Vec<f64>; 2],
    var: [Vec<f64>; 2],
}

impl GaussianNaiveBayes {
    pub fn fit(x: &Matrix, y: &[f64]) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(MlError::LengthMismatch(x.rows(), y.len()));
        }
        if x.rows() == 0 {
            return Err(MlError::EmptyInput);
        }
        let cols = x.cols();
        let mut count = [0usize; 2];
        let mut mean = [vec![0.0; cols], vec![0.0; cols]];
        for (row, &label) in x.iter_rows().zip(y) {
            let c = usize::from(label > 0.5);
            count[c] += 1;
            mean[c].iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        for c in 0..2 {
            if count[c] > 0 {
                mean[c].iter_mut().for_each(|m| *m /= count[c] as f64);
            }
        }
        let mut var = [vec![0.0; cols], vec![0.0; cols]];
        for (row, &label) in x.iter_rows().zip(y) {
            let c = usize::from(label > 0.5);
            for ((s, v), m) in var[c].iter_mut().zip(row).zip(&mean[c]) {
                *s += (v - m) * (v - m);
            }
        }
        for c in 0..2 {
            let n = count[c].max(1) as f64;
            var[c]
                .iter_mut()
                .for_each(|s| *s = (*s / n).max(VARIANCE_FLOOR));
        }
        let total = x.rows() as f64;
        let log_prior = count.map(|c| (c > 0).then(|| (c as f64 / total).ln()));
        Ok(Self {
            log_prior,
            mean,
            var,
        })
    }

    pub fn log_posterior(&self, row: &[f64], class: usize) -> f64 {
        let Some(prior) = self.log_prior[class] else {
            return f64::NEG_INFINITY;
        };
        prior
            + row
                .iter()
                .zip(&self.mean[class])
                .zip(&self.var[class])
                .map(|((v, m), s)| {
                    -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + (v - m) * (v - m) / s)
                })
                .sum::<f64>()
    }

    /// Maximum posterior; ties go to the negative class.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        f64::from(u8::from(
            self.log_posterior(row, 1) > self.log_posterior(row, 0),
        ))
    }

    pub(crate) fn width(&self) -> usize {
        self.mean[0].len()
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        let w = self.width();
        if self.log_prior.iter().all(Option::is_none) {
            return Err("naive bayes has no class".into());
        }
        for c in 0..2 {
            if self.mean[c].len() != w || self.var[c].len() != w {
                return Err("naive bayes has inconsistent widths".into());
            }
            if self.var[c]
                .iter()
                .any(|v| !(*v >= VARIANCE_FLOOR) || !v.is_finite())
            {
                return Err("naive bayes variance below floor".into());
            }
        }
        Ok(())
    }
}
