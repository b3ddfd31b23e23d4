//! Linear models on z-scored features with an intercept.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Matrix, Standardizer, Task};
use crate::error::{MlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearVariant {
    /// Normal equations.
    LeastSquares,
    /// Full-batch gradient descent on the logistic loss.
    Logistic,
    /// SGD on the L2-regularised hinge loss (linear SVC).
    Hinge,
    /// Mistake-driven perceptron updates.
    Perceptron,
    /// SGD on the L2-regularised logistic loss.
    SgdLogistic,
}

pub const RIDGE: f64 = 1e-8;
const L2: f64 = 1e-4;
const GRADIENT_TOLERANCE: f64 = 1e-6;
const MAX_GD_ITERATIONS: usize = 10_000;
const SGD_EPOCHS: usize = 20;
const SGD_ETA0: f64 = 0.05;
const PERCEPTRON_EPOCHS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    variant: LinearVariant,
    task: Task,
    scaler: Standardizer,
    /// Feature weights followed by the intercept.
    weights: Vec<f64>,
}

fn with_intercept(scaler: &Standardizer, row: &[f64]) -> Vec<f64> {
    let mut z = scaler.transform_row(row);
    z.push(1.0);
    z
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LinearModel {
    pub fn fit(
        x: &Matrix,
        y: &[f64],
        task: Task,
        variant: LinearVariant,
        seed: u64,
    ) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(MlError::LengthMismatch(x.rows(), y.len()));
        }
        if x.rows() == 0 {
            return Err(MlError::EmptyInput);
        }
        if variant != LinearVariant::LeastSquares && task == Task::Regression {
            return Err(MlError::UnsupportedTask {
                algorithm: format!("{variant:?}"),
                task: task.to_string(),
            });
        }
        let scaler = Standardizer::fit(x)?;
        let z: Vec<Vec<f64>> = x.iter_rows().map(|r| with_intercept(&scaler, r)).collect();
        let weights = match variant {
            LinearVariant::LeastSquares => least_squares(&z, y),
            LinearVariant::Logistic => logistic_gd(&z, y),
            LinearVariant::Hinge => sgd(&z, y, seed, Loss::Hinge),
            LinearVariant::SgdLogistic => sgd(&z, y, seed, Loss::Logistic),
            LinearVariant::Perceptron => perceptron(&z, y),
        };
        Ok(Self {
            variant,
            task,
            scaler,
            weights,
        })
    }

    pub fn variant(&self) -> LinearVariant {
        self.variant
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        dot(&self.weights, &with_intercept(&self.scaler, row))
    }

    /// Regression value, or the class: least squares thresholds at 0.5,
    /// everything else at a zero margin.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let score = self.decision(row);
        match (self.task, self.variant) {
            (Task::Regression, _) => score,
            (Task::Classification, LinearVariant::LeastSquares) => f64::from(u8::from(score > 0.5)),
            (Task::Classification, _) => f64::from(u8::from(score > 0.0)),
        }
    }

    pub(crate) fn width(&self) -> usize {
        self.scaler.mean.len()
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if self.weights.len() != self.width() + 1 || self.scaler.scale.len() != self.width() {
            return Err("linear model has inconsistent widths".into());
        }
        Ok(())
    }
}

fn least_squares(z: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = z[0].len();
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    for (row, t) in z.iter().zip(y) {
        for i in 0..p {
            b[i] += row[i] * t;
            for j in 0..p {
                a[(i, j)] += row[i] * row[j];
            }
        }
    }
    let solved = a.clone().cholesky().map(|c| c.solve(&b)).or_else(|| {
        let ridged = a + DMatrix::<f64>::identity(p, p) * RIDGE;
        ridged.cholesky().map(|c| c.solve(&b))
    });
    solved.map_or_else(|| vec![0.0; p], |w| w.iter().copied().collect())
}

fn logistic_gd(z: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = z[0].len();
    let n = z.len() as f64;
    // the logistic Hessian is bounded by trace(ZᵀZ)/(4n) + L2
    let lipschitz = 0.25 * z.iter().map(|r| dot(r, r)).sum::<f64>() / n + L2;
    let step = 1.0 / lipschitz;
    let mut w = vec![0.0; p];
    let mut grad = vec![0.0; p];
    for _ in 0..MAX_GD_ITERATIONS {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (row, t) in z.iter().zip(y) {
            let err = sigmoid(dot(&w, row)) - t;
            grad.iter_mut().zip(row).for_each(|(g, v)| *g += err * v);
        }
        for (j, g) in grad.iter_mut().enumerate() {
            *g /= n;
            if j + 1 < p {
                *g += L2 * w[j];
            }
        }
        if dot(&grad, &grad).sqrt() < GRADIENT_TOLERANCE {
            break;
        }
        w.iter_mut().zip(&grad).for_each(|(wi, g)| *wi -= step * g);
    }
    w
}

#[derive(Clone, Copy)]
enum Loss {
    Hinge,
    Logistic,
}

fn sgd(z: &[Vec<f64>], y: &[f64], seed: u64, loss: Loss) -> Vec<f64> {
    let p = z[0].len();
    let mut w = vec![0.0; p];
    let mut order: Vec<usize> = (0..z.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0usize;
    for _ in 0..SGD_EPOCHS {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = SGD_ETA0 / (1.0 + SGD_ETA0 * L2 * t as f64);
            t += 1;
            let sign = if y[i] > 0.5 { 1.0 } else { -1.0 };
            let margin = sign * dot(&w, &z[i]);
            let coef = match loss {
                Loss::Hinge => {
                    if margin < 1.0 {
                        -sign
                    } else {
                        0.0
                    }
                }
                Loss::Logistic => -sign * sigmoid(-margin),
            };
            for j in 0..p {
                let reg = if j + 1 < p { L2 * w[j] } else { 0.0 };
                w[j] -= eta * (coef * z[i][j] + reg);
            }
        }
    }
    w
}

fn perceptron(z: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; z[0].len()];
    for _ in 0..PERCEPTRON_EPOCHS {
        let mut mistakes = 0;
        for (row, t) in z.iter().zip(y) {
            let sign = if *t > 0.5 { 1.0 } else { -1.0 };
            if sign * dot(&w, row) <= 0.0 {
                w.iter_mut().zip(row).for_each(|(wi, v)| *wi += sign * v);
                mistakes += 1;
            }
        }
        if mistakes == 0 {
            break;
        }
    }
    w
}
