//! Synthetic three-vehicle merge scenarios: M on the ramp, P and F in the
//! target lane.

use lanemerge_core::synth::{RAMP_CENTRE_X, RAMP_LANE, TARGET_CENTRE_X, TARGET_LANE};
use lanemerge_orchestrator::protocol::{
    Bounds, Position, RoadUserDescription, Source, Subscription,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Update period of every vehicle in a synthetic trace.
pub const TICK_MS: u64 = 100;
pub const MERGING_ID: &str = "merger";
pub const PRECEDING_ID: &str = "preceding";
pub const FOLLOWING_ID: &str = "following";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampGeometry {
    pub ramp_lane: u16,
    pub ramp_x: f64,
    pub target_lane: u16,
    pub target_x: f64,
    /// Longitudinal position where the ramp joins the carriageway.
    pub ramp_start_y: f64,
    pub ramp_length: f64,
}

impl Default for RampGeometry {
    fn default() -> Self {
        Self {
            ramp_lane: RAMP_LANE,
            ramp_x: RAMP_CENTRE_X,
            target_lane: TARGET_LANE,
            target_x: TARGET_CENTRE_X,
            ramp_start_y: 100.0,
            ramp_length: 250.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    /// Initial speeds, m/s.
    pub speed_m: f64,
    pub speed_p: f64,
    pub speed_f: f64,
    /// Constant accelerations, m/s². Vehicles stop rather than reverse.
    pub accel_m: f64,
    pub accel_p: f64,
    pub accel_f: f64,
    /// Bumper gap between F's front and P's rear at the start, metres.
    pub gap: f64,
    /// M's initial offset from the gap midpoint, metres (positive is ahead).
    pub m_offset: f64,
    pub geometry: RampGeometry,
    pub duration_s: f64,
    /// Timestamp of the first tick, ms since the epoch.
    pub start_ms: u64,
    /// Drives vehicle dimensions.
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            speed_m: 25.0,
            speed_p: 25.0,
            speed_f: 25.0,
            accel_m: 0.0,
            accel_p: 0.0,
            accel_f: 0.0,
            gap: 40.0,
            m_offset: 0.0,
            geometry: RampGeometry::default(),
            duration_s: 7.0,
            start_ms: 1_700_000_000_000,
            seed: 42,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(HarnessError::Scenario(msg.to_string()));
        if !self.duration_s.is_finite() || self.duration_s < 0.0 {
            return bad("duration must be a non-negative number of seconds");
        }
        let g = &self.geometry;
        let values = [
            self.speed_m,
            self.speed_p,
            self.speed_f,
            self.accel_m,
            self.accel_p,
            self.accel_f,
            self.gap,
            self.m_offset,
            g.ramp_x,
            g.target_x,
            g.ramp_start_y,
            g.ramp_length,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite");
        }
        if self.speed_m < 0.0 || self.speed_p < 0.0 || self.speed_f < 0.0 {
            return bad("speeds must be non-negative");
        }
        if self.gap < 0.0 {
            return bad("gap must be non-negative");
        }
        if g.ramp_length <= 0.0 {
            return bad("ramp length must be positive");
        }
        if g.ramp_lane == g.target_lane {
            return bad("ramp and target lane must differ");
        }
        if self.start_ms == 0 {
            return bad("start timestamp must be positive");
        }
        Ok(())
    }

    /// A few scenario shapes used as the default regression suite.
    pub fn suite() -> Vec<ScenarioParams> {
        let base = ScenarioParams::default();
        vec![
            base,
            ScenarioParams { gap: 12.0, ..base },
            ScenarioParams {
                speed_f: 30.0,
                m_offset: -8.0,
                ..base
            },
            ScenarioParams {
                speed_p: 20.0,
                accel_p: -1.0,
                m_offset: 10.0,
                ..base
            },
            ScenarioParams {
                speed_m: 18.0,
                accel_m: 1.5,
                gap: 60.0,
                seed: 7,
                ..base
            },
            ScenarioParams {
                gap: 90.0,
                speed_m: 28.0,
                speed_f: 22.0,
                seed: 9,
                ..base
            },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Merging,
    Preceding,
    Following,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub user_id: String,
    pub role: Role,
    pub lane_id: u16,
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub seed: u64,
    pub geometry: RampGeometry,
    pub roster: Vec<RosterEntry>,
    /// Sent before the first update when the trace is replayed.
    pub subscription: Subscription,
    /// Generation parameters, absent for recorded traces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ScenarioParams>,
}

/// Timed updates in timestamp order, plus what is needed to replay them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTrace {
    pub meta: TraceMeta,
    pub messages: Vec<RoadUserDescription>,
}

impl ScenarioTrace {
    pub fn merging_id(&self) -> &str {
        &self.meta.subscription.user_id
    }

    /// Updates of one user, in order.
    pub fn of<'a>(
        &'a self,
        user_id: &'a str,
    ) -> impl Iterator<Item = &'a RoadUserDescription> + 'a {
        self.messages.iter().filter(move |m| m.user_id == user_id)
    }

    /// The newest update of every user at or before `t_ms`, sorted by id.
    pub fn state_at(&self, t_ms: u64) -> Vec<&RoadUserDescription> {
        let mut latest: Vec<&RoadUserDescription> = Vec::new();
        for m in self.messages.iter().take_while(|m| m.timestamp <= t_ms) {
            match latest.iter_mut().find(|l| l.user_id == m.user_id) {
                Some(slot) => *slot = m,
                None => latest.push(m),
            }
        }
        latest.sort_by(|a, b| a.user_id.cmp(&b.user_id));
        latest
    }
}

/// Longitudinal motion under constant acceleration, held at rest once stopped.
fn kinematics(v0: f64, a: f64, t: f64) -> (f64, f64) {
    if a < 0.0 && v0 + a * t <= 0.0 {
        let stop = v0 / -a;
        (v0 * stop + 0.5 * a * stop * stop, 0.0)
    } else {
        (v0 * t + 0.5 * a * t * t, v0 + a * t)
    }
}

fn dimensions(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let length = (rng.random_range(4.2..5.2f64) * 100.0).round() / 100.0;
    let width = (rng.random_range(1.7..2.0f64) * 100.0).round() / 100.0;
    (length, width)
}

/// Generates the trace. The same parameters always give the same trace; P and
/// F updates precede M's within each tick so a plan sees the current lane.
pub fn synth_scenario(params: &ScenarioParams) -> Result<ScenarioTrace> {
    params.validate()?;
    let g = params.geometry;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (len_m, wid_m) = dimensions(&mut rng);
    let (len_p, wid_p) = dimensions(&mut rng);
    let (len_f, wid_f) = dimensions(&mut rng);

    let f0 = g.ramp_start_y;
    let p0 = f0 + len_f / 2.0 + params.gap + len_p / 2.0;
    let m0 = f0 + len_f / 2.0 + params.gap / 2.0 + params.m_offset;

    struct Vehicle {
        id: &'static str,
        lane: u16,
        x: f64,
        y0: f64,
        v0: f64,
        a: f64,
        length: f64,
        width: f64,
    }
    let vehicles = [
        Vehicle {
            id: PRECEDING_ID,
            lane: g.target_lane,
            x: g.target_x,
            y0: p0,
            v0: params.speed_p,
            a: params.accel_p,
            length: len_p,
            width: wid_p,
        },
        Vehicle {
            id: FOLLOWING_ID,
            lane: g.target_lane,
            x: g.target_x,
            y0: f0,
            v0: params.speed_f,
            a: params.accel_f,
            length: len_f,
            width: wid_f,
        },
        Vehicle {
            id: MERGING_ID,
            lane: g.ramp_lane,
            x: g.ramp_x,
            y0: m0,
            v0: params.speed_m,
            a: params.accel_m,
            length: len_m,
            width: wid_m,
        },
    ];

    let ticks = (params.duration_s * 1000.0 / TICK_MS as f64).round() as u64;
    let mut messages = Vec::with_capacity(ticks as usize * vehicles.len());
    for k in 0..ticks {
        let t = (k * TICK_MS) as f64 / 1000.0;
        for v in &vehicles {
            let (d, speed) = kinematics(v.v0, v.a, t);
            messages.push(RoadUserDescription {
                user_id: v.id.to_string(),
                timestamp: params.start_ms + k * TICK_MS,
                position: Position {
                    x: v.x,
                    y: v.y0 + d,
                },
                speed,
                acceleration: if speed > 0.0 || v.a > 0.0 { v.a } else { 0.0 },
                heading: 90.0,
                lane_id: v.lane,
                length: v.length,
                width: v.width,
                connected: true,
                source: Source::Vehicle,
            });
        }
    }

    let roster = vehicles
        .iter()
        .map(|v| RosterEntry {
            user_id: v.id.to_string(),
            role: match v.id {
                MERGING_ID => Role::Merging,
                PRECEDING_ID => Role::Preceding,
                _ => Role::Following,
            },
            lane_id: v.lane,
            length: v.length,
            width: v.width,
        })
        .collect();
    let x_lo = g.ramp_x.min(g.target_x) - 10.0;
    let x_hi = g.ramp_x.max(g.target_x) + 10.0;
    let subscription = Subscription {
        user_id: MERGING_ID.to_string(),
        target_lane: g.target_lane,
        target_lane_x: g.target_x,
        region: Bounds {
            x_min: x_lo,
            x_max: x_hi,
            y_min: g.ramp_start_y - 1000.0,
            y_max: g.ramp_start_y + g.ramp_length + 1000.0,
        },
    };
    Ok(ScenarioTrace {
        meta: TraceMeta {
            seed: params.seed,
            geometry: g,
            roster,
            subscription,
            params: Some(*params),
        },
        messages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn braking_vehicle_stops() {
        let (d, v) = kinematics(10.0, -5.0, 4.0);
        assert_eq!(v, 0.0);
        assert!((d - 10.0).abs() < 1e-12);
        let (d, v) = kinematics(10.0, 1.0, 2.0);
        assert_eq!((d, v), (22.0, 12.0));
    }

    #[test]
    fn state_at_takes_latest_per_user() {
        let t = synth_scenario(&ScenarioParams::default()).unwrap();
        let start = t.meta.params.unwrap().start_ms;
        let s = t.state_at(start + 250);
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|r| r.timestamp == start + 200));
        assert!(t.state_at(start - 1).is_empty());
    }
}
