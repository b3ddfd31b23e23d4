//! Scoring functions.

use lanemerge_core::angular_difference;
use serde::{Deserialize, Serialize};

use crate::data::Target;
use crate::error::{MlError, Result};

pub const DEFAULT_ACCEL_TOLERANCE: f64 = 1.0;
pub const DEFAULT_HEADING_TOLERANCE: f64 = 5.0;

/// How a prediction is compared with its label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "tolerance")]
pub enum Scoring {
    Exact,
    Linear(f64),
    /// Degrees; compares the wrapped difference.
    Angular(f64),
}

impl Scoring {
    /// Exact match for merges, otherwise the given tolerance or its default.
    pub fn for_target(target: Target, tolerance: Option<f64>) -> Self {
        match target {
            Target::Merge => Scoring::Exact,
            Target::Acceleration => Scoring::Linear(tolerance.unwrap_or(DEFAULT_ACCEL_TOLERANCE)),
            Target::Heading => Scoring::Angular(tolerance.unwrap_or(DEFAULT_HEADING_TOLERANCE)),
        }
    }

    pub fn score(self, predictions: &[f64], labels: &[f64]) -> Result<f64> {
        match self {
            Scoring::Exact => exact_match_accuracy(predictions, labels),
            Scoring::Linear(t) => tolerance_accuracy(predictions, labels, t, false),
            Scoring::Angular(t) => tolerance_accuracy(predictions, labels, t, true),
        }
    }
}

fn check(predictions: &[f64], labels: &[f64]) -> Result<()> {
    if predictions.len() != labels.len() {
        return Err(MlError::LengthMismatch(predictions.len(), labels.len()));
    }
    if predictions.is_empty() {
        return Err(MlError::EmptyInput);
    }
    Ok(())
}

/// Fraction of positions where prediction and label are equal.
pub fn exact_match_accuracy<T: PartialEq>(predictions: &[T], labels: &[T]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(MlError::LengthMismatch(predictions.len(), labels.len()));
    }
    if predictions.is_empty() {
        return Err(MlError::EmptyInput);
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Fraction with |prediction − label| ≤ tolerance; `angular` wraps the
/// difference at 360°.
pub fn tolerance_accuracy(
    predictions: &[f64],
    labels: &[f64],
    tolerance: f64,
    angular: bool,
) -> Result<f64> {
    check(predictions, labels)?;
    if !(tolerance >= 0.0) {
        return Err(MlError::InvalidParameter(format!(
            "tolerance {tolerance} must be non-negative"
        )));
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| {
            let err = if angular {
                angular_difference(**p, **l)
            } else {
                (*p - *l).abs()
            };
            err <= tolerance
        })
        .count();
    Ok(hits as f64 / labels.len() as f64)
}
