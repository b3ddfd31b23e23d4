//! Geometric merge-safety rules.
//!
//! The merging vehicle is modelled as a disc whose radius (metres) equals the
//! clearance factor times its speed in km/h; every other vehicle is a disc
//! whose radius is its length. Any contact between the discs is unsafe. The
//! same speed-proportional distance is demanded as longitudinal clearance
//! between bumpers when checking the gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::TrajectorySample;

pub const MS_TO_KMH: f64 = 3.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyConfig {
    /// Metres of clearance per km/h of merging-vehicle speed.
    pub clearance_factor: f64,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            clearance_factor: 0.1,
        }
    }
}

impl SafetyConfig {
    pub fn new(clearance_factor: f64) -> Result<Self> {
        let cfg = Self { clearance_factor };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clearance_factor.is_finite() && self.clearance_factor > 0.0) {
            return Err(Error::Config(format!(
                "clearance_factor must be positive, got {}",
                self.clearance_factor
            )));
        }
        Ok(())
    }

    /// Safe distance (and disc radius) for a merging vehicle at `speed` m/s.
    pub fn safe_distance(&self, speed: f64) -> f64 {
        self.clearance_factor * speed * MS_TO_KMH
    }
}

/// Kinematic state of one vehicle at one instant; positions are the centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub acceleration: f64,
    pub length: f64,
    pub width: f64,
}

impl VehicleState {
    pub fn front(&self) -> f64 {
        self.y + self.length / 2.0
    }

    pub fn rear(&self) -> f64 {
        self.y - self.length / 2.0
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

impl From<&TrajectorySample> for VehicleState {
    fn from(s: &TrajectorySample) -> Self {
        Self {
            x: s.x,
            y: s.y,
            speed: s.speed,
            acceleration: s.acceleration,
            length: s.length,
            width: s.width,
        }
    }
}

/// `true` when the merging vehicle's disc stays strictly clear of `other`'s.
pub fn circle_safety_check(
    merger: &VehicleState,
    other: &VehicleState,
    cfg: &SafetyConfig,
) -> bool {
    let distance = (merger.x - other.x).hypot(merger.y - other.y);
    distance > cfg.safe_distance(merger.speed) + other.length
}

/// Longitudinal gap rule: the safe distance must fit between the merger's
/// front and the preceding vehicle's rear, and between the following
/// vehicle's front and the merger's rear. Absent neighbours impose nothing.
pub fn gap_admissible(
    merger: &VehicleState,
    preceding: Option<&VehicleState>,
    following: Option<&VehicleState>,
    cfg: &SafetyConfig,
) -> bool {
    let safe = cfg.safe_distance(merger.speed);
    let ahead_ok = preceding.is_none_or(|p| merger.front() + safe <= p.rear());
    let behind_ok = following.is_none_or(|f| f.front() + safe <= merger.rear());
    ahead_ok && behind_ok
}

/// Full merge verdict for one instant: never when the merger is behind the
/// following vehicle, otherwise both disc checks and the gap rule must hold.
pub fn merge_is_safe(
    merger: &VehicleState,
    preceding: Option<&VehicleState>,
    following: Option<&VehicleState>,
    cfg: &SafetyConfig,
) -> bool {
    if following.is_some_and(|f| merger.y < f.y) {
        return false;
    }
    preceding.is_none_or(|p| circle_safety_check(merger, p, cfg))
        && following.is_none_or(|f| circle_safety_check(merger, f, cfg))
        && gap_admissible(merger, preceding, following, cfg)
}
