//! Seeded generator of NGSIM-like on-ramp merge episodes.
//!
//! Each episode lasts 8 s at 10 Hz. A merging vehicle drifts from the ramp
//! lane into the target lane, crossing the lane boundary once; up to four
//! vehicles travel the target lane around it under constant acceleration.
//! Episodes are 100 s apart so they never interact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::label::{build_dataset, LabeledSample};
use crate::safety::SafetyConfig;
use crate::trajectory::{tick_to_time, TrajectorySample, VehicleId, VehicleTrack};
use crate::window::{extract_windows, ExtractOptions, WINDOW_LEN};

pub const RAMP_LANE: u16 = 7;
pub const TARGET_LANE: u16 = 6;
pub const RAMP_CENTRE_X: f64 = 22.2;
pub const TARGET_CENTRE_X: f64 = 18.5;

const EPISODE_TICKS: i64 = 80;
const EPISODE_SPACING: i64 = 1000;

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub episodes: usize,
    pub seed: u64,
    /// Probability that the target lane has nothing ahead of the merger.
    pub p_no_preceding: f64,
    /// Probability that the target lane has nothing behind the merger.
    pub p_no_following: f64,
}

impl SynthConfig {
    pub fn new(episodes: usize, seed: u64) -> Self {
        Self {
            episodes,
            seed,
            p_no_preceding: 0.1,
            p_no_following: 0.1,
        }
    }
}

struct Motion {
    id: VehicleId,
    lane: u16,
    x: f64,
    /// Longitudinal centre position at the event instant.
    y_event: f64,
    speed_event: f64,
    accel: f64,
    length: f64,
    width: f64,
}

impl Motion {
    fn sample(&self, rng: &mut ChaCha8Rng, tick: i64, event_tick: i64) -> TrajectorySample {
        let dt = (tick - event_tick) as f64 / 10.0;
        TrajectorySample {
            vehicle_id: self.id,
            timestamp: tick_to_time(tick),
            x: self.x,
            y: self.y_event + self.speed_event * dt + 0.5 * self.accel * dt * dt,
            lane_id: self.lane,
            speed: (self.speed_event + self.accel * dt).max(0.0),
            acceleration: self.accel + rng.random_range(-0.4..0.4),
            length: self.length,
            width: self.width,
        }
    }
}

fn dimensions(rng: &mut ChaCha8Rng) -> (f64, f64) {
    if rng.random_bool(0.1) {
        (rng.random_range(10.0..16.0), 2.5)
    } else {
        (rng.random_range(3.8..5.2), rng.random_range(1.7..2.1))
    }
}

/// All tracks of `cfg.episodes` episodes; every episode holds exactly one
/// complete lane change.
pub fn synth_tracks(cfg: &SynthConfig) -> Vec<VehicleTrack> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tracks = Vec::new();
    for k in 0..cfg.episodes {
        let start = k as i64 * EPISODE_SPACING;
        let event_tick = start + rng.random_range(42..=48);
        let base_id = k as u32 * 10 + 1;

        let v_m = rng.random_range(15.0..30.0);
        let (len_m, wid_m) = dimensions(&mut rng);
        let merger = Motion {
            id: VehicleId(base_id),
            lane: RAMP_LANE,
            x: RAMP_CENTRE_X,
            y_event: 150.0,
            speed_event: v_m,
            accel: rng.random_range(-1.5..1.5),
            length: len_m,
            width: wid_m,
        };

        let mut others = Vec::new();
        let neighbour = |rng: &mut ChaCha8Rng, slot: u32, offset: f64| {
            let (length, width) = dimensions(rng);
            Motion {
                id: VehicleId(base_id + slot),
                lane: TARGET_LANE,
                x: TARGET_CENTRE_X + rng.random_range(-0.3..0.3),
                y_event: 150.0 + offset,
                speed_event: v_m + rng.random_range(-5.0..5.0),
                accel: rng.random_range(-1.0..1.0),
                length,
                width,
            }
        };
        if !rng.random_bool(cfg.p_no_preceding) {
            let d_p = rng.random_range(3.0..50.0);
            others.push(neighbour(&mut rng, 1, d_p));
            let d_p2 = d_p + rng.random_range(15.0..40.0);
            others.push(neighbour(&mut rng, 2, d_p2));
        }
        if !rng.random_bool(cfg.p_no_following) {
            let d_f = -rng.random_range(3.0..50.0);
            others.push(neighbour(&mut rng, 3, d_f));
            let d_f2 = d_f - rng.random_range(15.0..40.0);
            others.push(neighbour(&mut rng, 4, d_f2));
        }

        let mut m_samples = Vec::new();
        for tick in start..=start + EPISODE_TICKS {
            let mut s = merger.sample(&mut rng, tick, event_tick);
            let tau = (tick - event_tick) as f64 / 10.0;
            let progress = 1.0 / (1.0 + (-tau / 0.6).exp());
            s.x = RAMP_CENTRE_X + (TARGET_CENTRE_X - RAMP_CENTRE_X) * progress;
            s.lane_id = if tick >= event_tick {
                TARGET_LANE
            } else {
                RAMP_LANE
            };
            m_samples.push(s);
        }
        tracks.push(VehicleTrack::new(merger.id, m_samples).expect("ascending by construction"));

        for motion in &others {
            let samples = (start..=start + EPISODE_TICKS)
                .map(|tick| motion.sample(&mut rng, tick, event_tick))
                .collect();
            tracks.push(VehicleTrack::new(motion.id, samples).expect("ascending by construction"));
        }
    }
    tracks.sort_by_key(VehicleTrack::vehicle_id);
    tracks
}

/// Exactly `n_samples` labeled samples drawn from freshly generated episodes.
pub fn synth_dataset(n_samples: usize, seed: u64, safety: &SafetyConfig) -> Vec<LabeledSample> {
    let episodes = n_samples.div_ceil(WINDOW_LEN);
    let tracks = synth_tracks(&SynthConfig::new(episodes, seed));
    let report = extract_windows(&tracks, ExtractOptions::default());
    let mut data = build_dataset(&report.windows, safety);
    data.truncate(n_samples);
    data
}
