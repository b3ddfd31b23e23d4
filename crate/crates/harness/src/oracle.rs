//! Independent re-check of merge recommendations against the trace.

use lanemerge_core::SafetyConfig;
use lanemerge_orchestrator::protocol::{RoadUserDescription, TrajectoryRecommendation};
use serde::{Deserialize, Serialize};

use crate::scenario::ScenarioTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    /// Centre distance not larger than the merger's clearance radius plus the
    /// other vehicle's length.
    DiscOverlap { distance: f64, required: f64 },
    /// The merger is behind the following vehicle.
    BehindFollowing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub recommendation_id: String,
    pub waypoint: usize,
    pub other: String,
    pub kind: ViolationKind,
}

/// Position of `r` at `t_ms`, moving at constant velocity along its heading.
fn position_at(r: &RoadUserDescription, t_ms: u64) -> (f64, f64) {
    let dt = (t_ms as f64 - r.timestamp as f64) / 1000.0;
    let (sin, cos) = r.heading.to_radians().sin_cos();
    (
        r.position.x + r.speed * cos * dt,
        r.position.y + r.speed * sin * dt,
    )
}

/// Re-evaluates every waypoint of every `merge_flag = true` recommendation.
/// P and F are the nearest target-lane vehicles ahead of and level with or
/// behind the merger at the update the plan was based on, extrapolated at
/// constant velocity; the disc radius is the clearance factor times the
/// merger's speed in km/h.
pub fn oracle_check(
    trace: &ScenarioTrace,
    recommendations: &[TrajectoryRecommendation],
    cfg: &SafetyConfig,
) -> Vec<Violation> {
    let lane = trace.meta.subscription.target_lane;
    let mut out = Vec::new();
    for rec in recommendations.iter().filter(|r| r.merge_flag) {
        let state = trace.state_at(rec.based_on_ms);
        let Some(m) = state.iter().find(|r| r.user_id == rec.user_id) else {
            continue;
        };
        let in_lane = state
            .iter()
            .filter(|r| r.user_id != m.user_id && r.lane_id == lane);
        let p = in_lane
            .clone()
            .filter(|r| r.position.y > m.position.y)
            .min_by(|a, b| a.position.y.total_cmp(&b.position.y));
        let f = in_lane
            .filter(|r| r.position.y <= m.position.y)
            .max_by(|a, b| a.position.y.total_cmp(&b.position.y));
        for (i, w) in rec.waypoints.iter().enumerate() {
            let radius = cfg.clearance_factor * w.speed * 3.6;
            let mut push = |other: &str, kind| {
                out.push(Violation {
                    recommendation_id: rec.recommendation_id.clone(),
                    waypoint: i,
                    other: other.to_string(),
                    kind,
                })
            };
            for n in [p, f].into_iter().flatten() {
                let (x, y) = position_at(n, w.timestamp);
                let distance = ((w.position.x - x).powi(2) + (w.position.y - y).powi(2)).sqrt();
                let required = radius + n.length;
                if distance <= required {
                    push(
                        &n.user_id,
                        ViolationKind::DiscOverlap { distance, required },
                    );
                }
            }
            if let Some(f) = f {
                if w.position.y < position_at(f, w.timestamp).1 {
                    push(&f.user_id, ViolationKind::BehindFollowing);
                }
            }
        }
    }
    out
}
