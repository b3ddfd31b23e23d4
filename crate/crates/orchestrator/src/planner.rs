//! Merge planning from a Knowledge Base snapshot.
//!
//! Local frame: y is the direction of travel, x is lateral. The merging
//! vehicle follows the predicted acceleration and heading for 30 steps of
//! 0.1 s; neighbours move at constant velocity. Each waypoint is checked
//! against the neighbours' discs and the behind-F rule, and any failure turns
//! the merge flag off. Without a merge, the plan keeps the current lane and
//! picks the constant acceleration that soonest reaches a position where
//! merging would be safe.

use lanemerge_core::{
    circle_safety_check, merge_features, merge_is_safe, normalize_heading, SafetyConfig,
    VehicleState,
};
use lanemerge_ml::{MlError, ModelBundle};
use thiserror::Error;

use crate::protocol::{Position, RoadUserDescription, TrajectoryRecommendation, Waypoint};

pub const HORIZON_STEPS: usize = 30;
pub const STEP_MS: u64 = 100;
const STEP_S: f64 = STEP_MS as f64 / 1000.0;
/// Heading of the direction of travel.
pub const ROAD_HEADING: f64 = 90.0;
/// Constant accelerations tried when looking for the first safe position,
/// in order of preference.
/// Largest angle between the executed heading and the road axis.
pub const MAX_STEER: f64 = 30.0;
const RETARGET_ACCELERATIONS: [f64; 11] =
    [0.0, -0.5, 0.5, -1.0, 1.0, -1.5, 1.5, -2.0, 2.0, -3.0, -4.0];

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("merging vehicle {0} is not in the snapshot")]
    MergingVehicleAbsent(String),
    #[error("no model loaded")]
    NoModel,
    #[error("model failure: {0}")]
    Model(#[from] MlError),
}

impl PlanError {
    pub fn code(&self) -> &'static str {
        match self {
            PlanError::MergingVehicleAbsent(_) => "unknown_vehicle",
            PlanError::NoModel => "no_model",
            PlanError::Model(_) => "model_error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeTarget {
    pub lane: u16,
    /// Lateral position of the lane centre.
    pub lane_x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub recommendation: TrajectoryRecommendation,
    /// The classifier's own answer before the geometric checks.
    pub model_flag: bool,
    /// Set when a waypoint failed a geometric check.
    pub overridden: bool,
    /// Where the lane-keeping plan first reaches a safe merge position.
    pub first_safe: Option<Position>,
}

/// P is the nearest vehicle ahead of M in the target lane and F the nearest
/// one behind (or level with) it.
pub fn find_neighbours<'a>(
    snapshot: &'a [RoadUserDescription],
    merger: &RoadUserDescription,
    target_lane: u16,
) -> (
    Option<&'a RoadUserDescription>,
    Option<&'a RoadUserDescription>,
) {
    let mut preceding: Option<&RoadUserDescription> = None;
    let mut following: Option<&RoadUserDescription> = None;
    for r in snapshot {
        if r.user_id == merger.user_id || r.lane_id != target_lane {
            continue;
        }
        if r.position.y > merger.position.y {
            if preceding.is_none_or(|p| r.position.y < p.position.y) {
                preceding = Some(r);
            }
        } else if following.is_none_or(|f| r.position.y > f.position.y) {
            following = Some(r);
        }
    }
    (preceding, following)
}

/// Constant-velocity position of `r` at absolute time `t_ms`.
/// Turns a predicted heading into a direction of travel. The model predicts a
/// bearing toward a desired position, which can point backwards or away from
/// the target lane; the vehicle keeps moving forward and only its lateral
/// drift toward the lane is taken from the bearing, capped at `MAX_STEER`.
pub fn steering_heading(predicted: f64, x: f64, lane_x: f64) -> f64 {
    let h = predicted.to_radians();
    let off_axis = h
        .cos()
        .abs()
        .atan2(h.sin().abs())
        .to_degrees()
        .min(MAX_STEER);
    if lane_x < x {
        ROAD_HEADING + off_axis
    } else if lane_x > x {
        ROAD_HEADING - off_axis
    } else {
        ROAD_HEADING
    }
}

pub fn extrapolate(r: &RoadUserDescription, t_ms: u64) -> VehicleState {
    let dt = (t_ms as f64 - r.timestamp as f64) / 1000.0;
    let h = r.heading.to_radians();
    VehicleState {
        x: r.position.x + r.speed * h.cos() * dt,
        y: r.position.y + r.speed * h.sin() * dt,
        acceleration: 0.0,
        ..r.state()
    }
}

/// Disc clearance against both neighbours and M not behind F.
pub fn waypoint_is_safe(
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
}

fn advance(state: &mut VehicleState, accel: f64, heading: f64) {
    let v0 = state.speed;
    let v1 = (v0 + accel * STEP_S).max(0.0);
    let d = 0.5 * (v0 + v1) * STEP_S;
    let h = heading.to_radians();
    state.x += d * h.cos();
    state.y += d * h.sin();
    state.speed = v1;
    state.acceleration = (v1 - v0) / STEP_S;
}

fn waypoint(t_ms: u64, s: &VehicleState, heading: f64) -> Waypoint {
    Waypoint {
        timestamp: t_ms,
        position: Position { x: s.x, y: s.y },
        speed: s.speed,
        acceleration: s.acceleration,
        heading: normalize_heading(heading),
    }
}

struct Neighbours<'a> {
    preceding: Option<&'a RoadUserDescription>,
    following: Option<&'a RoadUserDescription>,
}

impl Neighbours<'_> {
    fn at(&self, t_ms: u64) -> (Option<VehicleState>, Option<VehicleState>) {
        (
            self.preceding.map(|p| extrapolate(p, t_ms)),
            self.following.map(|f| extrapolate(f, t_ms)),
        )
    }
}

/// Plans one recommendation for `merging_id`.
pub fn plan_merge(
    snapshot: &[RoadUserDescription],
    merging_id: &str,
    target: MergeTarget,
    bundle: Option<&ModelBundle>,
    cfg: &SafetyConfig,
    recommendation_id: String,
) -> Result<Plan, PlanError> {
    let merger = snapshot
        .iter()
        .find(|r| r.user_id == merging_id)
        .ok_or_else(|| PlanError::MergingVehicleAbsent(merging_id.to_string()))?;
    let bundle = bundle.ok_or(PlanError::NoModel)?;
    let (preceding, following) = find_neighbours(snapshot, merger, target.lane);
    let neighbours = Neighbours {
        preceding,
        following,
    };
    let t0 = merger.timestamp;

    let mut state = merger.state();
    let (p0, f0) = neighbours.at(t0);
    let features = merge_features(&state, p0.as_ref(), f0.as_ref());
    let model_flag = bundle.merge.predict(&features)? > 0.5;

    let mut waypoints = Vec::with_capacity(HORIZON_STEPS);
    let mut all_safe = true;
    let mut neighbour_now = (p0, f0);
    for k in 1..=HORIZON_STEPS as u64 {
        let features = merge_features(&state, neighbour_now.0.as_ref(), neighbour_now.1.as_ref());
        let accel = bundle.acceleration.predict(&features)?;
        let heading = if state.x == target.lane_x {
            ROAD_HEADING
        } else {
            steering_heading(bundle.heading.predict(&features)?, state.x, target.lane_x)
        };
        let before = state.x;
        advance(&mut state, accel, heading);
        if (before - target.lane_x) * (state.x - target.lane_x) <= 0.0 {
            state.x = target.lane_x;
        }
        let t = t0 + k * STEP_MS;
        neighbour_now = neighbours.at(t);
        all_safe &= waypoint_is_safe(
            &state,
            neighbour_now.0.as_ref(),
            neighbour_now.1.as_ref(),
            cfg,
        );
        waypoints.push(waypoint(t, &state, heading));
    }

    let merge_flag = model_flag && all_safe;
    let mut first_safe = None;
    if !merge_flag {
        let (wps, safe_at) = lane_keeping(merger, &neighbours, target, cfg);
        waypoints = wps;
        first_safe = safe_at;
    }
    Ok(Plan {
        recommendation: TrajectoryRecommendation {
            recommendation_id,
            user_id: merger.user_id.clone(),
            based_on_ms: t0,
            merge_flag,
            waypoints,
        },
        model_flag,
        overridden: model_flag && !all_safe,
        first_safe,
    })
}

/// Straight-ahead waypoints under the constant acceleration that reaches a
/// safe merge position (M moved across to the lane centre) at the earliest
/// step, and that position.
fn lane_keeping(
    merger: &RoadUserDescription,
    neighbours: &Neighbours<'_>,
    target: MergeTarget,
    cfg: &SafetyConfig,
) -> (Vec<Waypoint>, Option<Position>) {
    let rollout = |accel: f64| {
        let mut s = merger.state();
        let mut wps = Vec::with_capacity(HORIZON_STEPS);
        let mut first = None;
        for k in 1..=HORIZON_STEPS as u64 {
            advance(&mut s, accel, ROAD_HEADING);
            let t = merger.timestamp + k * STEP_MS;
            if first.is_none() {
                let (p, f) = neighbours.at(t);
                let there = VehicleState {
                    x: target.lane_x,
                    ..s
                };
                if merge_is_safe(&there, p.as_ref(), f.as_ref(), cfg) {
                    first = Some((
                        k,
                        Position {
                            x: target.lane_x,
                            y: s.y,
                        },
                    ));
                }
            }
            wps.push(waypoint(t, &s, ROAD_HEADING));
        }
        (wps, first)
    };
    let mut best: Option<(Vec<Waypoint>, (u64, Position))> = None;
    for a in RETARGET_ACCELERATIONS {
        let (wps, first) = rollout(a);
        if let Some(hit) = first {
            if best.as_ref().is_none_or(|(_, b)| hit.0 < b.0) {
                best = Some((wps, hit));
            }
        }
    }
    match best {
        Some((wps, (_, pos))) => (wps, Some(pos)),
        None => (rollout(0.0).0, None),
    }
}
