use lanemerge_core::label::{label_acceleration, label_window, recommendations, RangeMean};
use lanemerge_core::safety::MS_TO_KMH;
use lanemerge_core::synth::{synth_tracks, SynthConfig};
use lanemerge_core::trajectory::{parse_trajectories, write_trajectories};
use lanemerge_core::window::{extract_windows, ExtractOptions};
use lanemerge_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two closed discs share a point iff some point of the segment joining
/// their centres lies in both; probe that segment densely.
fn discs_touch_by_sampling(c1: (f64, f64), r1: f64, c2: (f64, f64), r2: f64) -> bool {
    const STEPS: usize = 20_000;
    (0..=STEPS).any(|k| {
        let t = k as f64 / STEPS as f64;
        let p = (c1.0 + (c2.0 - c1.0) * t, c1.1 + (c2.1 - c1.1) * t);
        let in1 = (p.0 - c1.0).hypot(p.1 - c1.1) <= r1;
        let in2 = (p.0 - c2.0).hypot(p.1 - c2.1) <= r2;
        in1 && in2
    })
}

fn vehicle(x: f64, y: f64, speed: f64, length: f64) -> VehicleState {
    VehicleState {
        x,
        y,
        speed,
        acceleration: 0.0,
        length,
        width: 2.0,
    }
}

#[test]
fn circle_check_matches_point_sampling() {
    let cfg = SafetyConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut compared = 0;
    for _ in 0..2_000 {
        let m = vehicle(
            rng.random_range(-5.0..5.0),
            rng.random_range(-30.0..30.0),
            rng.random_range(0.0..40.0),
            4.5,
        );
        let o = vehicle(
            rng.random_range(-5.0..5.0),
            rng.random_range(-30.0..30.0),
            0.0,
            rng.random_range(3.0..16.0),
        );
        let r1 = cfg.safe_distance(m.speed);
        let d = (m.x - o.x).hypot(m.y - o.y);
        // sampling resolution is d / 20000; stay clear of tangency by more than that
        if (d - (r1 + o.length)).abs() < 1e-2 {
            continue;
        }
        compared += 1;
        let touching = discs_touch_by_sampling((m.x, m.y), r1, (o.x, o.y), o.length);
        assert_eq!(circle_safety_check(&m, &o, &cfg), !touching, "{m:?} {o:?}");
    }
    assert!(compared > 1_900);
}

#[test]
fn range_mean_matches_naive_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(1..100);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let means = RangeMean::new(&values);
        for _ in 0..20 {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            let (lo, hi) = (a.min(b), a.max(b));
            let naive = values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
            assert!((means.mean(a, b) - naive).abs() <= 1e-9 * naive.abs().max(1.0));
        }
    }
}

#[test]
fn acceleration_labels_use_true_anchor_or_msp() {
    let tracks = synth_tracks(&SynthConfig::new(20, 3));
    let report = extract_windows(&tracks, ExtractOptions::default());
    let cfg = SafetyConfig::default();
    for w in &report.windows {
        let recs = recommendations(w, &cfg);
        let msp = compute_msp(w);
        let acc: Vec<f64> = w.m_samples.iter().map(|s| s.acceleration).collect();
        let means = RangeMean::new(&acc);
        for i in 0..WINDOW_LEN {
            let label = label_acceleration(&means, &recs, i, &msp);
            let (lo, hi) = if !recs[i] {
                match (i + 1..WINDOW_LEN).find(|&j| recs[j]) {
                    Some(j) => (i, j),
                    None => (i, WINDOW_LEN - 1),
                }
            } else {
                (i.min(msp.index), i.max(msp.index))
            };
            let naive = acc[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
            assert!((label.value - naive).abs() <= 1e-9 * naive.abs().max(1.0));
        }
    }
}

#[test]
fn behind_following_samples_are_never_recommended() {
    let tracks = synth_tracks(&SynthConfig::new(60, 9));
    let report = extract_windows(&tracks, ExtractOptions::default());
    let cfg = SafetyConfig::default();
    let mut behind = 0;
    for (id, w) in report.windows.iter().enumerate() {
        let labeled = label_window(id, w, &cfg);
        for (i, s) in labeled.iter().enumerate() {
            if let Some(f) = w.following_at(i) {
                if w.m_samples[i].y < f.y {
                    behind += 1;
                    assert!(!s.recommendation);
                }
            }
        }
    }
    assert!(behind > 0, "fixture never places M behind F");
}

#[test]
fn larger_clearance_never_adds_recommendations() {
    let tracks = synth_tracks(&SynthConfig::new(40, 21));
    let report = extract_windows(&tracks, ExtractOptions::default());
    for w in &report.windows {
        let mut previous = recommendations(w, &SafetyConfig::new(0.05).unwrap());
        for factor in [0.1, 0.15, 0.2, 0.4] {
            let current = recommendations(w, &SafetyConfig::new(factor).unwrap());
            for (a, b) in previous.iter().zip(&current) {
                assert!(!(*b && !*a), "factor {factor} turned a false label true");
            }
            previous = current;
        }
    }
}

#[test]
fn kmh_conversion() {
    assert_eq!(
        SafetyConfig::default().safe_distance(10.0),
        0.1 * 10.0 * MS_TO_KMH
    );
}

fn arb_lanes() -> impl Strategy<Value = Vec<u16>> {
    prop::collection::vec(1u16..4, 1..60)
}

proptest! {
    #[test]
    fn lane_change_count_matches_transitions(lanes in arb_lanes()) {
        let samples = lanes
            .iter()
            .enumerate()
            .map(|(i, &lane)| TrajectorySample {
                vehicle_id: VehicleId(1),
                timestamp: i as f64 / 10.0,
                x: 0.0,
                y: i as f64,
                lane_id: lane,
                speed: 10.0,
                acceleration: 0.0,
                length: 4.0,
                width: 2.0,
            })
            .collect();
        let track = VehicleTrack::new(VehicleId(1), samples).unwrap();
        let expected = lanes.windows(2).filter(|w| w[0] != w[1]).count();
        let events = detect_lane_changes(&track);
        prop_assert_eq!(events.len(), expected);
        prop_assert_eq!(detect_lane_changes(&track), events);
    }

    #[test]
    fn trajectory_file_round_trip(seed in 0u64..500, episodes in 1usize..4) {
        let tracks = synth_tracks(&SynthConfig::new(episodes, seed));
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &tracks).unwrap();
        let back = parse_trajectories(buf.as_slice(), DatasetFormat::NgsimText).unwrap();
        prop_assert_eq!(back.len(), tracks.len());
        for (a, b) in tracks.iter().zip(&back) {
            prop_assert_eq!(a.vehicle_id(), b.vehicle_id());
            prop_assert_eq!(a.len(), b.len());
            for (s, t) in a.samples().iter().zip(b.samples()) {
                prop_assert_eq!(s.lane_id, t.lane_id);
                prop_assert_eq!(s.timestamp, t.timestamp);
                for (u, v) in [(s.x, t.x), (s.y, t.y), (s.speed, t.speed), (s.acceleration, t.acceleration), (s.length, t.length), (s.width, t.width)] {
                    prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn windows_are_on_an_arithmetic_grid(seed in 0u64..200) {
        let tracks = synth_tracks(&SynthConfig::new(3, seed));
        let report = extract_windows(&tracks, ExtractOptions::default());
        for w in &report.windows {
            prop_assert_eq!(w.m_samples.len(), WINDOW_LEN);
            for pair in w.m_samples.windows(2) {
                prop_assert_eq!(pair[1].tick() - pair[0].tick(), 1);
                prop_assert!((pair[1].timestamp - pair[0].timestamp - 0.1).abs() < 1e-9);
            }
            if let (Some(p), Some(f)) = (w.preceding_at(EVENT_OFFSET), w.following_at(EVENT_OFFSET)) {
                let m = w.event_sample().y;
                prop_assert!(f.y < m && m < p.y);
            }
        }
    }
}
