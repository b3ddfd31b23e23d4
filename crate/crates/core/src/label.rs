//! Per-sample labels for a scenario window: merge recommendation, recommended
//! acceleration and recommended heading.
//!
//! Acceleration labels average M's recorded accelerations between the sample
//! and an anchor: the most desired position (MSP) for recommended samples, the
//! next recommended sample for the others. Range means come from prefix sums.

use serde::{Deserialize, Serialize};

use crate::angle::{bearing, normalize_heading};
use crate::features::{merge_features, FEATURE_COUNT};
use crate::safety::{merge_is_safe, SafetyConfig, VehicleState};
use crate::trajectory::VehicleId;
use crate::window::{ScenarioWindow, EVENT_OFFSET, WINDOW_LEN};

/// Recommendation for sample `index` of the window.
pub fn label_recommendation(window: &ScenarioWindow, index: usize, cfg: &SafetyConfig) -> bool {
    let m = VehicleState::from(&window.m_samples[index]);
    let p = window.preceding_at(index).map(VehicleState::from);
    let f = window.following_at(index).map(VehicleState::from);
    merge_is_safe(&m, p.as_ref(), f.as_ref(), cfg)
}

pub fn recommendations(window: &ScenarioWindow, cfg: &SafetyConfig) -> Vec<bool> {
    (0..window.m_samples.len())
        .map(|i| label_recommendation(window, i, cfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MostDesiredPosition {
    pub index: usize,
    /// Target point (x, y) in metres.
    pub target: (f64, f64),
}

/// The gap midpoint between P's rear and F's front at the event instant, or
/// M's own event position when either neighbour is missing. The index is the
/// M sample nearest to that point, earliest on ties.
///
/// The midpoint already maximises the smaller of the two bumper clearances, so
/// it satisfies both safe-distance constraints whenever any point does.
pub fn compute_msp(window: &ScenarioWindow) -> MostDesiredPosition {
    let m = window.event_sample();
    let target = match (
        window.preceding_at(EVENT_OFFSET),
        window.following_at(EVENT_OFFSET),
    ) {
        (Some(p), Some(f)) => ((p.x + f.x) / 2.0, (p.rear() + f.front()) / 2.0),
        _ => (m.x, m.y),
    };
    let index = nearest_index(window, target);
    MostDesiredPosition { index, target }
}

fn nearest_index(window: &ScenarioWindow, target: (f64, f64)) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, s) in window.m_samples.iter().enumerate() {
        let d = (s.x - target.0).hypot(s.y - target.1);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelerationLabel {
    pub value: f64,
    /// Set when a non-recommended sample has no recommended sample after it.
    pub flagged: bool,
}

/// Mean accelerations over inclusive index ranges in constant time.
#[derive(Debug, Clone)]
pub struct RangeMean {
    prefix: Vec<f64>,
}

impl RangeMean {
    pub fn new(values: &[f64]) -> Self {
        let mut prefix = Vec::with_capacity(values.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for v in values {
            acc += v;
            prefix.push(acc);
        }
        Self { prefix }
    }

    /// Mean over `[a, b]`, inclusive, in either order.
    pub fn mean(&self, a: usize, b: usize) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        (self.prefix[hi + 1] - self.prefix[lo]) / (hi - lo + 1) as f64
    }
}

/// First recommended index strictly after `index`.
fn next_recommended(recs: &[bool], index: usize) -> Option<usize> {
    recs.iter()
        .enumerate()
        .skip(index + 1)
        .find_map(|(j, &r)| r.then_some(j))
}

pub fn label_acceleration(
    means: &RangeMean,
    recs: &[bool],
    index: usize,
    msp: &MostDesiredPosition,
) -> AccelerationLabel {
    let last = recs.len() - 1;
    if !recs[index] {
        return match next_recommended(recs, index) {
            Some(j) => AccelerationLabel {
                value: means.mean(index, j),
                flagged: false,
            },
            None => AccelerationLabel {
                value: means.mean(index, last),
                flagged: true,
            },
        };
    }
    AccelerationLabel {
        value: means.mean(index, msp.index),
        flagged: false,
    }
}

/// Bearing from sample `index` to the MSP target (recommended samples) or to
/// the next recommended sample's position (the others, falling back to the
/// MSP target when none follows). A sample sitting on its target takes the
/// direction of its own motion.
pub fn label_heading(
    window: &ScenarioWindow,
    recs: &[bool],
    index: usize,
    msp: &MostDesiredPosition,
) -> f64 {
    let here = &window.m_samples[index];
    let target = if recs[index] {
        msp.target
    } else {
        next_recommended(recs, index)
            .map(|j| (window.m_samples[j].x, window.m_samples[j].y))
            .unwrap_or(msp.target)
    };
    bearing((here.x, here.y), target).unwrap_or_else(|| motion_heading(window, index))
}

fn motion_heading(window: &ScenarioWindow, index: usize) -> f64 {
    let s = &window.m_samples;
    let (a, b) = if index + 1 < s.len() {
        (&s[index], &s[index + 1])
    } else {
        (&s[index - 1], &s[index])
    };
    // stationary vehicles point down the road
    bearing((a.x, a.y), (b.x, b.y)).unwrap_or(90.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    /// Position of the source window in the window file.
    pub window: usize,
    pub index: usize,
    pub vehicle_id: VehicleId,
    pub features: [f64; FEATURE_COUNT],
    pub recommendation: bool,
    /// Integer-valued, m/s².
    pub accel_label: f64,
    /// Degrees in `[0, 360)`.
    pub heading_label: f64,
    pub flagged: bool,
}

/// Labels every sample of one window.
pub fn label_window(
    window_id: usize,
    window: &ScenarioWindow,
    cfg: &SafetyConfig,
) -> Vec<LabeledSample> {
    let recs = recommendations(window, cfg);
    let msp = compute_msp(window);
    let accels: Vec<f64> = window.m_samples.iter().map(|s| s.acceleration).collect();
    let means = RangeMean::new(&accels);

    (0..window.m_samples.len())
        .map(|i| {
            let m = VehicleState::from(&window.m_samples[i]);
            let p = window.preceding_at(i).map(VehicleState::from);
            let f = window.following_at(i).map(VehicleState::from);
            let accel = label_acceleration(&means, &recs, i, &msp);
            LabeledSample {
                window: window_id,
                index: i,
                vehicle_id: window.event.vehicle_id,
                features: merge_features(&m, p.as_ref(), f.as_ref()),
                recommendation: recs[i],
                accel_label: accel.value.round(),
                heading_label: normalize_heading(label_heading(window, &recs, i, &msp)),
                flagged: accel.flagged,
            }
        })
        .collect()
}

/// Labels all windows, 70 samples each, in window order.
pub fn build_dataset(windows: &[ScenarioWindow], cfg: &SafetyConfig) -> Vec<LabeledSample> {
    let mut out = Vec::with_capacity(windows.len() * WINDOW_LEN);
    for (id, w) in windows.iter().enumerate() {
        out.extend(label_window(id, w, cfg));
    }
    out
}
