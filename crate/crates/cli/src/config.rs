//! Run configuration: a TOML file with `[safety]`, `[train]` and `[service]`
//! sections, overridden by `LANEMERGE_*` environment variables and then by
//! command-line flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use lanemerge_core::SafetyConfig;
use lanemerge_ml::SplitRatios;
use lanemerge_orchestrator::ServiceConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub train_ratio: f64,
    pub validation_ratio: f64,
    pub test_ratio: f64,
    /// m/s².
    pub accel_tolerance: f64,
    /// Degrees.
    pub heading_tolerance: f64,
    pub max_depth: Option<usize>,
    pub n_estimators: Option<usize>,
    pub k_neighbors: Option<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            train_ratio: 0.6,
            validation_ratio: 0.2,
            test_ratio: 0.2,
            accel_tolerance: 1.0,
            heading_tolerance: 5.0,
            max_depth: None,
            n_estimators: None,
            k_neighbors: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub safety: SafetyConfig,
    pub train: TrainSection,
    pub service: ServiceConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("invalid config")?;
        Ok(cfg)
    }

    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read config {}", p.display()))?;
                Self::from_toml(&text).with_context(|| format!("in {}", p.display()))
            }
        }
    }

    /// `LANEMERGE_CLEARANCE_FACTOR` plus the service variables.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(v) = lookup("LANEMERGE_CLEARANCE_FACTOR") {
            self.safety.clearance_factor = v
                .parse()
                .with_context(|| format!("invalid LANEMERGE_CLEARANCE_FACTOR {v:?}"))?;
        }
        self.service.apply_env(lookup)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.safety.validate()?;
        self.split()?;
        for (name, v) in [
            ("accel_tolerance", self.train.accel_tolerance),
            ("heading_tolerance", self.train.heading_tolerance),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                bail!("{name} must be a non-negative number");
            }
        }
        self.service.validate()?;
        Ok(())
    }

    pub fn split(&self) -> Result<SplitRatios> {
        let t = &self.train;
        Ok(SplitRatios::new(
            t.train_ratio,
            t.validation_ratio,
            t.test_ratio,
        )?)
    }
}
