//! Train/validation/test partitioning and k-fold assignment.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitTag {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = Self {
            train,
            validation,
            test,
        };
        let parts = [train, validation, test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p))
            || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(MlError::InvalidParameter(format!(
                "split ratios must be in [0, 1] and sum to 1, got {parts:?}"
            )));
        }
        Ok(r)
    }
}

/// Index lists of each split.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn from_tags(tags: &[SplitTag]) -> Self {
        let mut out = SplitIndices::default();
        for (i, t) in tags.iter().enumerate() {
            match t {
                SplitTag::Train => out.train.push(i),
                SplitTag::Validation => out.validation.push(i),
                SplitTag::Test => out.test.push(i),
            }
        }
        out
    }
}

/// Stratified split: each class is shuffled and cut by the ratios, so every
/// split keeps the class proportions up to rounding.
pub fn split_dataset(classes: &[bool], ratios: SplitRatios, seed: u64) -> Result<Vec<SplitTag>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tags = vec![SplitTag::Train; classes.len()];
    for class in [false, true] {
        let mut members: Vec<usize> = (0..classes.len())
            .filter(|&i| classes[i] == class)
            .collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let n = members.len() as f64;
        let n_train = (n * ratios.train).round() as usize;
        let n_val = ((n * ratios.validation).round() as usize).min(members.len() - n_train);
        let n_test = members.len() - n_train - n_val;
        for (name, wanted, got) in [
            ("train", ratios.train, n_train),
            ("validation", ratios.validation, n_val),
            ("test", ratios.test, n_test),
        ] {
            if wanted > 0.0 && got == 0 {
                return Err(MlError::Stratification(format!(
                    "class {class} has no member in the {name} split"
                )));
            }
        }
        for (k, &i) in members.iter().enumerate() {
            tags[i] = if k < n_train {
                SplitTag::Train
            } else if k < n_train + n_val {
                SplitTag::Validation
            } else {
                SplitTag::Test
            };
        }
    }
    Ok(tags)
}

/// Fold number per sample. Classes are dealt round-robin after shuffling, so
/// fold class counts differ from the ideal by at most one.
pub fn stratified_folds(classes: &[bool], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(MlError::InvalidParameter(
            "at least two folds are required".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; classes.len()];
    let mut next = 0;
    for class in [false, true] {
        let mut members: Vec<usize> = (0..classes.len())
            .filter(|&i| classes[i] == class)
            .collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < folds {
            return Err(MlError::Stratification(format!(
                "class {class} has {} members, fewer than {folds} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

/// Fold number per sample for continuous targets: shuffled, then cut into
/// contiguous blocks of near-equal size.
pub fn plain_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || folds > n {
        return Err(MlError::InvalidParameter(format!(
            "cannot make {folds} folds from {n} samples"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos * folds / n;
    }
    Ok(assignment)
}
