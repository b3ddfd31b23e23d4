//! Acceptance run: one PASS/FAIL line per criterion. Tolerances and time
//! limits are pinned below. Criterion 5 needs recorded highway data and is
//! reported as not exercised unless `LANEMERGE_NGSIM_DATA` lists the files.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use lanemerge_core::label::{compute_msp, label_acceleration, recommendations, RangeMean};
use lanemerge_core::synth::{synth_dataset, synth_tracks, SynthConfig};
use lanemerge_core::window::ExtractOptions;
use lanemerge_core::{
    build_dataset, circle_safety_check, extract_windows, normalize_heading, parse_trajectory_file,
    DatasetFormat, SafetyConfig, ScenarioWindow, VehicleState, WINDOW_LEN,
};
use lanemerge_harness::{oracle_check, read_trace, replay, ReplayOptions};
use lanemerge_ml::boosting::{BoostingParams, GradientBoosting};
use lanemerge_ml::{
    default_specs, evaluate, results_table, sweep_max_depth, tolerance_accuracy, train_bundle,
    Algorithm, Dataset, Hyperparameters, ModelSpec, Scoring, SplitRatios, SplitTag, Target, Task,
};
use lanemerge_orchestrator::protocol::{
    decode_message, encode_frame, Bounds, ErrorReport, FrameDecoder, ManeuverFeedback, Message,
    Position, RoadUserDescription, Source, Subscription, TrajectoryRecommendation, Verdict,
    Waypoint,
};
use lanemerge_orchestrator::server::{spawn, ServerOptions};
use lanemerge_orchestrator::{KnowledgeBase, Orchestrator};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 42;

// Pinned tolerances.
const LABEL_REL_TOL: f64 = 1e-9;
const NORMALIZE_TOL_DEG: f64 = 1e-9;
const RF_MIN_ACCURACY: f64 = 0.95;
/// "Materially worse": at least this many accuracy points below the forest.
const PERCEPTRON_MARGIN: f64 = 0.10;
const RF_MAX_GAP: f64 = 0.015;
const DT_MAX_GAP: f64 = 0.01;
const GB_LOSS_SLACK: f64 = 1e-12;
const P99_BUDGET_MS: f64 = 30.0;

enum Outcome {
    Pass(String),
    Fail(String),
    NotExercised(String),
}
use Outcome::*;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture_windows() -> Vec<ScenarioWindow> {
    let tracks = parse_trajectory_file(
        &fixtures().join("ngsim_50_events.txt"),
        DatasetFormat::NgsimText,
    )
    .unwrap();
    extract_windows(&tracks, ExtractOptions::default()).windows
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lanemerge"))
}

fn run_bin(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "lanemerge {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn state(rng: &mut ChaCha8Rng) -> VehicleState {
    VehicleState {
        x: rng.random_range(-10.0..40.0),
        y: rng.random_range(0.0..120.0),
        speed: rng.random_range(0.0..40.0),
        acceleration: rng.random_range(-4.0..4.0),
        length: rng.random_range(3.0..18.0),
        width: rng.random_range(1.5..2.6),
    }
}

fn c1_geometry() -> Outcome {
    let cfg = SafetyConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let n = 10_000;
    let mut agree = 0;
    let mut safe = 0;
    for _ in 0..n {
        let m = state(&mut rng);
        let o = state(&mut rng);
        // discs: merger radius from its speed in km/h, other radius its length
        let r = cfg.clearance_factor * m.speed * 3.6 + o.length;
        let d2 = (m.x - o.x).powi(2) + (m.y - o.y).powi(2);
        let expected = d2 > r * r;
        safe += expected as usize;
        agree += (circle_safety_check(&m, &o, &cfg) == expected) as usize;
    }
    ensure(
        agree == n && safe > 0 && safe < n,
        format!("{agree}/{n} agree ({safe} clear)"),
    )
}

fn c2_labels() -> Outcome {
    let cfg = SafetyConfig::default();
    let tracks = synth_tracks(&SynthConfig::new(1100, SEED));
    let mut windows = extract_windows(&tracks, ExtractOptions::default()).windows;
    if windows.len() < 1000 {
        return Fail(format!("only {} windows generated", windows.len()));
    }
    windows.truncate(1000);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for w in &mut windows {
        // fresh random accelerations so the averages are not smooth
        for s in &mut w.m_samples {
            s.acceleration = rng.random_range(-8.0..8.0);
        }
        let recs = recommendations(w, &cfg);
        let msp = compute_msp(w);
        let acc: Vec<f64> = w.m_samples.iter().map(|s| s.acceleration).collect();
        let means = RangeMean::new(&acc);
        for i in 0..WINDOW_LEN {
            let anchor = if recs[i] {
                msp.index
            } else {
                ((i + 1)..WINDOW_LEN)
                    .find(|&j| recs[j])
                    .unwrap_or(WINDOW_LEN - 1)
            };
            let (lo, hi) = (i.min(anchor), i.max(anchor));
            let mut sum = 0.0;
            let mut abs = 0.0;
            for a in &acc[lo..=hi] {
                sum += a;
                abs += a.abs();
            }
            let count = (hi - lo + 1) as f64;
            let naive = sum / count;
            let got = label_acceleration(&means, &recs, i, &msp).value;
            // relative to the magnitude of the averaged values
            let scale = abs / count;
            let rel = if scale == 0.0 {
                (got - naive).abs()
            } else {
                (got - naive).abs() / scale
            };
            worst = worst.max(rel);
            checked += 1;
        }
    }
    let mut norm_ok = true;
    for _ in 0..10_000 {
        let k = rng.random_range(-50..=50) as f64;
        let exact = (rng.random_range(-2_000_000i64..2_000_000) as f64) / 1024.0;
        let real = rng.random_range(-1.0e4..1.0e4);
        let a = normalize_heading(exact + 360.0 * k);
        let b = normalize_heading(exact);
        norm_ok &= a == b && (0.0..360.0).contains(&a);
        let d = (normalize_heading(real + 360.0 * k) - normalize_heading(real)).abs();
        norm_ok &= d.min(360.0 - d) <= NORMALIZE_TOL_DEG;
    }
    ensure(
        worst <= LABEL_REL_TOL && norm_ok,
        format!(
            "{checked} indices, worst relative error {worst:.2e}; normalize periodic: {norm_ok}"
        ),
    )
}

fn c3_pipeline() -> Outcome {
    let cfg = SafetyConfig::default();
    let windows = fixture_windows();
    let n = windows.len();
    let samples = build_dataset(&windows, &cfg);
    let mut behind = 0;
    let mut behind_true = 0;
    for s in &samples {
        let w = &windows[s.window];
        if let Some(f) = w.following_at(s.index) {
            if w.m_samples[s.index].y < f.y {
                behind += 1;
                behind_true += s.recommendation as usize;
            }
        }
    }
    // the same through the command line
    let dir = tempfile::tempdir().unwrap();
    let wpath = dir.path().join("windows.jsonl");
    let dpath = dir.path().join("dataset.csv");
    let input = fixtures().join("ngsim_50_events.txt");
    run_bin(&[
        "extract",
        "--input",
        input.to_str().unwrap(),
        "--output",
        wpath.to_str().unwrap(),
    ]);
    run_bin(&[
        "label",
        "--input",
        wpath.to_str().unwrap(),
        "--output",
        dpath.to_str().unwrap(),
    ]);
    let rows = std::fs::read_to_string(&dpath).unwrap().lines().count() - 1;
    ensure(
        n == 50 && samples.len() == 70 * n && rows == 70 * n && behind > 0 && behind_true == 0,
        format!(
            "N={n}, {} samples, {rows} CSV rows; {behind} samples behind F, {behind_true} labelled true",
            samples.len()
        ),
    )
}

fn c4_learnability() -> Outcome {
    let samples = synth_dataset(10_000, SEED, &SafetyConfig::default());
    let data = Dataset::from_samples(&samples, SplitRatios::default(), SEED).unwrap();
    let rf = ModelSpec::new(
        Algorithm::RandomForest,
        Target::Merge,
        Hyperparameters {
            n_estimators: 100,
            ..Hyperparameters::chosen(Algorithm::RandomForest, Target::Merge, SEED)
        },
    );
    let pc = ModelSpec::new(
        Algorithm::Perceptron,
        Target::Merge,
        Hyperparameters::chosen(Algorithm::Perceptron, Target::Merge, SEED),
    );
    let (_, rf_e) = evaluate(rf, &data, Scoring::Exact).unwrap();
    let (_, pc_e) = evaluate(pc, &data, Scoring::Exact).unwrap();
    ensure(
        rf_e.validation >= RF_MIN_ACCURACY
            && pc_e.validation <= rf_e.validation - PERCEPTRON_MARGIN,
        format!(
            "random forest {:.2}%, perceptron {:.2}% (validation)",
            100.0 * rf_e.validation,
            100.0 * pc_e.validation
        ),
    )
}

fn c5_recorded_data() -> Outcome {
    let Some(list) = std::env::var_os("LANEMERGE_NGSIM_DATA") else {
        return NotExercised(
            "LANEMERGE_NGSIM_DATA not set; recorded trajectory data not supplied".into(),
        );
    };
    let cfg = SafetyConfig::default();
    let mut samples = Vec::new();
    for path in std::env::split_paths(&list) {
        let tracks = parse_trajectory_file(&path, DatasetFormat::from_path(&path)).unwrap();
        let windows = extract_windows(&tracks, ExtractOptions::default()).windows;
        let mut s = build_dataset(&windows, &cfg);
        samples.append(&mut s);
    }
    let data = Dataset::from_samples(&samples, SplitRatios::default(), SEED).unwrap();
    let rows = results_table(&data, SEED, None, None).unwrap();
    let mut merge: Vec<(Algorithm, f64, f64)> = rows
        .iter()
        .filter_map(|r| r.merge.map(|e| (r.algorithm, e.train, e.validation)))
        .collect();
    merge.sort_by(|a, b| b.2.total_cmp(&a.2));
    let rank = |a: Algorithm| merge.iter().position(|m| m.0 == a).unwrap();
    let gap = |a: Algorithm| merge.iter().find(|m| m.0 == a).map(|m| m.1 - m.2).unwrap();
    let n = merge.len();
    let table: Vec<String> = merge
        .iter()
        .map(|m| format!("{} {:.2}", m.0.name(), 100.0 * m.2))
        .collect();
    ensure(
        n == 9
            && rank(Algorithm::RandomForest) == 0
            && rank(Algorithm::NaiveBayes) >= n - 2
            && rank(Algorithm::Perceptron) >= n - 2
            && gap(Algorithm::RandomForest) <= RF_MAX_GAP
            && gap(Algorithm::DecisionTree) <= DT_MAX_GAP,
        format!(
            "{} samples; {}; gaps RF {:.3} DT {:.3}",
            samples.len(),
            table.join(", "),
            gap(Algorithm::RandomForest),
            gap(Algorithm::DecisionTree)
        ),
    )
}

fn fixture_dataset() -> Dataset {
    let samples = build_dataset(&fixture_windows(), &SafetyConfig::default());
    Dataset::from_samples(&samples, SplitRatios::default(), SEED).unwrap()
}

fn c6_sweep() -> Outcome {
    let data = fixture_dataset();
    let spec = ModelSpec::new(
        Algorithm::DecisionTree,
        Target::Merge,
        Hyperparameters::default(),
    );
    let depths: Vec<usize> = (1..=30).collect();
    let sweep = sweep_max_depth(spec, &data, &depths, DT_MAX_GAP, Scoring::Exact).unwrap();
    let monotone = sweep.train.windows(2).all(|w| w[1] >= w[0]);

    let dir = tempfile::tempdir().unwrap();
    let wpath = dir.path().join("windows.jsonl");
    let dpath = dir.path().join("dataset.csv");
    let spath = dir.path().join("sweep.csv");
    let input = fixtures().join("ngsim_50_events.txt");
    run_bin(&[
        "extract",
        "--input",
        input.to_str().unwrap(),
        "--output",
        wpath.to_str().unwrap(),
    ]);
    run_bin(&[
        "label",
        "--input",
        wpath.to_str().unwrap(),
        "--output",
        dpath.to_str().unwrap(),
    ]);
    run_bin(&[
        "sweep",
        "--input",
        dpath.to_str().unwrap(),
        "--output",
        spath.to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(&spath).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let csv_monotone = rows.windows(2).all(|w| w[1][1] >= w[0][1]);
    let depths_ok = rows.iter().enumerate().all(|(i, r)| r[0] == (i + 1) as f64);
    ensure(
        monotone && csv_monotone && depths_ok && rows.len() == 30,
        format!(
            "train accuracy {:.4} at depth 1 to {:.4} at depth 30, non-decreasing: {}; CSV rows {}",
            sweep.train[0],
            sweep.train[29],
            monotone && csv_monotone,
            rows.len()
        ),
    )
}

fn c7_tolerance() -> Outcome {
    let cases: [([f64; 10], [f64; 10], usize); 3] = [
        (
            [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
            [0.0, 2.0, 2.0, 5.0, 4.0, 5.5, 9.0, 7.0, 8.0, -1.0],
            7,
        ),
        (
            [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
            [1.0, 0.0, 3.0000001, 1.5, 4.999, 5.0, 8.0, 6.5, 9.0, 12.0],
            6,
        ),
        (
            [-3.0, -2.5, 10.0, 10.0, 100.0, 0.0, 0.0, 0.0, 7.0, 7.0],
            [-4.5, -2.0, 9.0, 11.25, 99.5, 0.75, -1.0, -2.0, 7.0, 5.0],
            6,
        ),
    ];
    let mut hand = Vec::new();
    let mut ok = true;
    for (p, l, hits) in &cases {
        let acc = tolerance_accuracy(p, l, 1.0, false).unwrap();
        ok &= acc == *hits as f64 / 10.0;
        hand.push(format!("{acc:.1}"));
    }
    let data = fixture_dataset();
    let (x, y) = data.part(SplitTag::Train, Target::Acceleration);
    let params = BoostingParams {
        n_estimators: 100,
        max_depth: 11,
        learning_rate: 0.1,
        seed: SEED,
    };
    let gb = GradientBoosting::fit(&x, &y, Task::Regression, &params).unwrap();
    let loss = gb.train_loss();
    let non_increasing = loss
        .windows(2)
        .all(|w| w[1] <= w[0] + GB_LOSS_SLACK * w[0].abs());
    ensure(
        ok && non_increasing,
        format!(
            "hand cases {} (expected 0.7, 0.6, 0.6); boosting loss {:.4} -> {:.4} over {} stages, non-increasing: {non_increasing}",
            hand.join(", "),
            loss[0],
            loss[loss.len() - 1],
            loss.len() - 1
        ),
    )
}

fn user_id(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..=24);
    (0..n)
        .map(|_| {
            *b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_"
                .choose(rng)
                .unwrap() as char
        })
        .collect()
}

fn random_message(kind: usize, rng: &mut ChaCha8Rng) -> Message {
    let pos = |rng: &mut ChaCha8Rng| Position {
        x: rng.random_range(-1e5..1e5),
        y: rng.random_range(-1e5..1e5),
    };
    match kind {
        0 => Message::RudUpdate(RoadUserDescription {
            user_id: user_id(rng),
            timestamp: rng.random_range(1..u64::MAX / 2),
            position: pos(rng),
            speed: rng.random_range(0.0..60.0),
            acceleration: rng.random_range(-8.0..8.0),
            heading: rng.random_range(0.0..360.0),
            lane_id: rng.random(),
            length: rng.random_range(0.5..30.0),
            width: rng.random_range(0.5..4.0),
            connected: rng.random(),
            source: if rng.random() {
                Source::Vehicle
            } else {
                Source::Perception
            },
        }),
        1 => {
            let (x_min, y_min) = (rng.random_range(-1e4..1e4), rng.random_range(-1e4..1e4));
            Message::Subscribe(Subscription {
                user_id: user_id(rng),
                target_lane: rng.random(),
                target_lane_x: rng.random_range(-100.0..100.0),
                region: Bounds {
                    x_min,
                    x_max: x_min + rng.random_range(0.0..1e4),
                    y_min,
                    y_max: y_min + rng.random_range(0.0..1e4),
                },
            })
        }
        2 => {
            let based_on_ms = rng.random_range(1..u64::MAX / 4);
            let mut t = based_on_ms;
            let waypoints = (0..rng.random_range(0..40))
                .map(|_| {
                    t += rng.random_range(1..1000);
                    Waypoint {
                        timestamp: t,
                        position: pos(rng),
                        speed: rng.random_range(0.0..60.0),
                        acceleration: rng.random_range(-8.0..8.0),
                        heading: rng.random_range(0.0..360.0),
                    }
                })
                .collect();
            Message::Recommendation(TrajectoryRecommendation {
                recommendation_id: user_id(rng),
                user_id: user_id(rng),
                based_on_ms,
                merge_flag: rng.random(),
                waypoints,
            })
        }
        3 => Message::Feedback(ManeuverFeedback {
            recommendation_id: user_id(rng),
            user_id: user_id(rng),
            verdict: *[Verdict::Accept, Verdict::Reject, Verdict::Abort]
                .choose(rng)
                .unwrap(),
        }),
        _ => Message::Error(ErrorReport {
            code: user_id(rng),
            message: format!(
                "{} \"quoted\" \\ ünïcode \t{}",
                user_id(rng),
                rng.random::<u32>()
            ),
        }),
    }
}

fn mutate(frame: &mut Vec<u8>, rng: &mut ChaCha8Rng) {
    for _ in 0..rng.random_range(1..=4) {
        if frame.is_empty() {
            frame.push(rng.random());
            continue;
        }
        let i = rng.random_range(0..frame.len());
        match rng.random_range(0..5) {
            0 => frame[i] ^= 1 << rng.random_range(0..8),
            1 => frame[i] = rng.random(),
            2 => {
                frame.remove(i);
            }
            3 => frame.insert(i, *b"{}[]\":,0-e.\\\n\xff".choose(rng).unwrap()),
            _ => frame.truncate(i),
        }
    }
}

fn c8_protocol() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut round_trips = [0usize; 5];
    let mut frames = Vec::new();
    for (kind, count) in round_trips.iter_mut().enumerate() {
        for _ in 0..1000 {
            let msg = random_message(kind, &mut rng);
            let frame = encode_frame(&msg);
            let back = decode_message(&frame[..frame.len() - 1]);
            *count += matches!(back, Ok(ref m) if *m == msg) as usize;
            frames.push(frame);
        }
    }
    let bundle = lanemerge_ml::ModelBundle::constant(true, 0.0, 90.0).unwrap();
    let orch = Orchestrator::new(
        KnowledgeBase::new(1000),
        Some(Arc::new(bundle)),
        SafetyConfig::default(),
    );
    let mut panics = 0;
    let mut rejected = 0;
    for n in 0..10_000u64 {
        let mut frame = frames.choose(&mut rng).unwrap().clone();
        mutate(&mut frame, &mut rng);
        let r = catch_unwind(AssertUnwindSafe(|| {
            let mut dec = FrameDecoder::new(4096);
            dec.push(&frame);
            let mut bad = 0;
            while let Some(f) = dec.next_frame() {
                match f {
                    Ok(f) => {
                        bad += orch
                            .handle_frame(n % 7, &f)
                            .iter()
                            .filter(|o| matches!(o.message, Message::Error(_)))
                            .count();
                    }
                    Err(_) => bad += 1,
                }
            }
            let _ = dec.finish();
            bad
        }));
        match r {
            Ok(bad) => rejected += bad.min(1),
            Err(_) => panics += 1,
        }
    }
    ensure(
        round_trips.iter().all(|&n| n == 1000) && panics == 0,
        format!("round trips per type {round_trips:?} of 1000; 10000 mutated frames, {rejected} rejected, {panics} panics"),
    )
}

fn c9_knowledge_base() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let ids: Vec<String> = (0..64).map(|i| format!("v{i}")).collect();
    // unique timestamps per id so the newest entry is unambiguous
    let mut msgs: Vec<RoadUserDescription> = (0..10_000u64)
        .map(|k| {
            let id = ids[rng.random_range(0..ids.len())].clone();
            RoadUserDescription {
                user_id: id,
                timestamp: 1 + k * 7 + rng.random_range(0..7),
                position: Position {
                    x: rng.random_range(0.0..30.0),
                    y: rng.random_range(0.0..500.0),
                },
                speed: rng.random_range(0.0..40.0),
                acceleration: 0.0,
                heading: 90.0,
                lane_id: 6,
                length: 4.5,
                width: 1.8,
                connected: true,
                source: Source::Vehicle,
            }
        })
        .collect();
    msgs.shuffle(&mut rng);
    let mut newest: HashMap<&str, &RoadUserDescription> = HashMap::new();
    for m in &msgs {
        let e = newest.entry(&m.user_id).or_insert(m);
        if m.timestamp > e.timestamp {
            *e = m;
        }
    }
    let kb = KnowledgeBase::new(1_000_000_000);
    std::thread::scope(|s| {
        for chunk in msgs.chunks(msgs.len() / 4) {
            let kb = &kb;
            s.spawn(move || {
                for m in chunk {
                    kb.upsert(m.clone());
                }
            });
        }
    });
    let marks = kb.high_water_marks();
    let lost = newest
        .iter()
        .filter(|(id, m)| kb.get(id).as_ref() != Some(*m))
        .count();
    let marks_ok = newest
        .iter()
        .all(|(id, m)| marks.get(*id) == Some(&m.timestamp));
    ensure(
        kb.len() == newest.len() && lost == 0 && marks_ok,
        format!(
            "4 sessions, {} messages, {} ids stored of {}, {lost} lost",
            msgs.len(),
            kb.len(),
            newest.len()
        ),
    )
}

fn c10_latency() -> Outcome {
    let safety = SafetyConfig::default();
    let samples = synth_dataset(10_000, SEED, &safety);
    let data = Dataset::from_samples(&samples, SplitRatios::default(), SEED).unwrap();
    let [m, a, h] = default_specs(SEED);
    let bundle = train_bundle(&data, m, a, h).unwrap();
    let trace = read_trace(std::io::BufReader::new(
        std::fs::File::open(fixtures().join("merge_scenario.trace.jsonl")).unwrap(),
    ))
    .unwrap();
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .unwrap();
    let outcome = rt.block_on(async {
        let orch = Orchestrator::new(KnowledgeBase::new(1000), Some(Arc::new(bundle)), safety);
        let srv = spawn("127.0.0.1:0", Arc::new(orch), ServerOptions::default())
            .await
            .unwrap();
        let opts = ReplayOptions {
            speed_factor: 1.0,
            ..ReplayOptions::default()
        };
        let out = replay(&trace, &srv.addr.to_string(), opts).await.unwrap();
        srv.shutdown().await.unwrap();
        out
    });
    let r = &outcome.report;
    let flagged = outcome
        .recommendations
        .iter()
        .filter(|r| r.merge_flag)
        .count();
    let violations = oracle_check(&trace, &outcome.recommendations, &safety);
    let noted = r.summary().contains("not included");
    ensure(
        r.complete && r.p99_ms <= P99_BUDGET_MS && violations.is_empty() && noted,
        format!(
            "{} recommendations ({flagged} merge), p50 {:.2} ms, p99 {:.2} ms, max {:.2} ms, {} oracle violations, network share excluded",
            outcome.recommendations.len(),
            r.p50_ms,
            r.p99_ms,
            r.max_ms,
            violations.len()
        ),
    )
}

/// Number, name, time limit, check.
type Criterion = (u32, &'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            1,
            "circle check matches analytic predicate",
            Some(Duration::from_secs(1)),
            c1_geometry,
        ),
        (
            2,
            "prefix-sum labels match naive averaging",
            Some(Duration::from_secs(10)),
            c2_labels,
        ),
        (
            3,
            "70 samples per event, behind F is never a merge",
            None,
            c3_pipeline,
        ),
        (
            4,
            "forest learns the labeller, perceptron trails",
            Some(Duration::from_secs(120)),
            c4_learnability,
        ),
        (
            5,
            "classifier ranking on recorded data",
            Some(Duration::from_secs(1800)),
            c5_recorded_data,
        ),
        (
            6,
            "tree depth sweep is monotone, 30 rows",
            Some(Duration::from_secs(300)),
            c6_sweep,
        ),
        (
            7,
            "tolerance accuracy and boosting loss",
            None,
            c7_tolerance,
        ),
        (
            8,
            "protocol round trips and mutated frames",
            None,
            c8_protocol,
        ),
        (
            9,
            "knowledge base under concurrent sessions",
            None,
            c9_knowledge_base,
        ),
        (
            10,
            "replay p99 within budget, oracle clean",
            None,
            c10_latency,
        ),
    ];
    let mut failed = 0;
    for (n, name, limit, check) in criteria {
        let start = Instant::now();
        let verdict = catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Fail(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let verdict = match (verdict, limit) {
            (Pass(d), Some(l)) if elapsed > l => {
                Fail(format!("{d}; took {elapsed:.2?}, limit {l:?}"))
            }
            (v, _) => v,
        };
        let (tag, detail) = match verdict {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            NotExercised(d) => ("NOT EXERCISED", d),
        };
        println!("criterion {n:>2} {tag}: {name} | {detail} | {elapsed:.2?}");
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
