use std::sync::Arc;
use std::time::Duration;

use lanemerge_core::SafetyConfig;
use lanemerge_harness::replay::{by_update, expected_recommendations};
use lanemerge_harness::scenario::{FOLLOWING_ID, MERGING_ID, PRECEDING_ID};
use lanemerge_harness::{
    oracle_check, read_trace, replay, synth_scenario, write_trace, BandwidthEstimate, HarnessError,
    ReplayOptions, ScenarioParams, ViolationKind,
};
use lanemerge_ml::ModelBundle;
use lanemerge_orchestrator::server::{spawn, ServerHandle, ServerOptions};
use lanemerge_orchestrator::{KnowledgeBase, Orchestrator};
use tokio::io::{AsyncBufReadExt, BufReader};
use tokio::net::TcpListener;

async fn server(flag: bool) -> ServerHandle {
    let bundle = ModelBundle::constant(flag, 0.0, 100.0).unwrap();
    let orch = Orchestrator::new(
        KnowledgeBase::new(1000),
        Some(Arc::new(bundle)),
        SafetyConfig::default(),
    );
    spawn("127.0.0.1:0", Arc::new(orch), ServerOptions::default())
        .await
        .unwrap()
}

#[test]
fn seven_seconds_is_seventy_updates_per_vehicle() {
    let t = synth_scenario(&ScenarioParams::default()).unwrap();
    for id in [MERGING_ID, PRECEDING_ID, FOLLOWING_ID] {
        assert_eq!(t.of(id).count(), 70, "{id}");
    }
    assert!(t
        .messages
        .windows(2)
        .all(|w| w[0].timestamp <= w[1].timestamp));
    assert_eq!(t.meta.roster.len(), 3);
}

#[test]
fn same_seed_same_trace() {
    let p = ScenarioParams {
        seed: 5,
        ..ScenarioParams::default()
    };
    assert_eq!(synth_scenario(&p).unwrap(), synth_scenario(&p).unwrap());
    let q = ScenarioParams { seed: 6, ..p };
    assert_ne!(synth_scenario(&p).unwrap(), synth_scenario(&q).unwrap());
}

#[test]
fn invalid_parameters_are_rejected() {
    for p in [
        ScenarioParams {
            duration_s: -1.0,
            ..ScenarioParams::default()
        },
        ScenarioParams {
            speed_m: -3.0,
            ..ScenarioParams::default()
        },
        ScenarioParams {
            gap: f64::NAN,
            ..ScenarioParams::default()
        },
    ] {
        assert!(matches!(synth_scenario(&p), Err(HarnessError::Scenario(_))));
    }
    assert!(synth_scenario(&ScenarioParams {
        duration_s: 0.0,
        ..ScenarioParams::default()
    })
    .unwrap()
    .messages
    .is_empty());
}

#[test]
fn following_never_overtakes_preceding_at_equal_speeds() {
    let t = synth_scenario(&ScenarioParams {
        gap: 40.0,
        ..ScenarioParams::default()
    })
    .unwrap();
    for (p, f) in t.of(PRECEDING_ID).zip(t.of(FOLLOWING_ID)) {
        assert_eq!(p.timestamp, f.timestamp);
        let bumper_gap = (p.position.y - p.length / 2.0) - (f.position.y + f.length / 2.0);
        assert!((bumper_gap - 40.0).abs() < 1e-9);
    }
}

#[test]
fn trace_file_round_trip_and_rejections() {
    let t = synth_scenario(&ScenarioParams::default()).unwrap();
    let mut buf = Vec::new();
    write_trace(&t, &mut buf).unwrap();
    assert_eq!(read_trace(&buf[..]).unwrap(), t);

    let text = String::from_utf8(buf).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    assert!(
        read_trace(lines[1..].join("\n").as_bytes()).is_err(),
        "no metadata"
    );
    lines.swap(5, 40);
    let err = read_trace(lines.join("\n").as_bytes()).unwrap_err();
    assert!(err.to_string().contains("timestamp order"), "{err}");
    assert!(read_trace(&b""[..]).is_err());
    let bad = format!(
        "{}\n{{\"type\":\"subscribe\"}}\n",
        text.lines().next().unwrap()
    );
    assert!(read_trace(bad.as_bytes()).is_err());
}

#[tokio::test]
async fn fast_replay_delivers_everything() {
    let srv = server(true).await;
    let t = synth_scenario(&ScenarioParams::default()).unwrap();
    let out = replay(&t, &srv.addr.to_string(), ReplayOptions::default())
        .await
        .unwrap();
    assert_eq!(out.sent, 210);
    assert_eq!(expected_recommendations(&t), 70);
    assert_eq!(out.recommendations.len(), 70);
    assert_eq!(out.report.samples.len(), 70);
    assert!(out.report.complete);
    assert!(out.errors.is_empty());
    let r = &out.report;
    assert!(r.p50_ms <= r.p95_ms && r.p95_ms <= r.p99_ms && r.p99_ms <= r.max_ms);
    let mut csv = Vec::new();
    r.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 71);
    assert!(r.summary().contains("loopback"));
    let bw = BandwidthEstimate::from_replay(&t, &out.recommendations);
    assert!(bw.uplink_bps > 0.0 && bw.downlink_bps > 0.0);
    srv.shutdown().await.unwrap();
}

#[tokio::test]
async fn pacing_does_not_change_recommendations() {
    let t = synth_scenario(&ScenarioParams {
        duration_s: 1.5,
        ..ScenarioParams::default()
    })
    .unwrap();
    let mut runs = Vec::new();
    for speed_factor in [0.0, 1.0] {
        let srv = server(true).await;
        let opts = ReplayOptions {
            speed_factor,
            ..ReplayOptions::default()
        };
        runs.push(
            replay(&t, &srv.addr.to_string(), opts)
                .await
                .unwrap()
                .recommendations,
        );
        srv.shutdown().await.unwrap();
    }
    assert_eq!(runs[0].len(), 15);
    assert_eq!(runs[0], runs[1]);
    assert_eq!(by_update(&runs[0]).len(), 15);
}

#[tokio::test]
async fn unreachable_endpoint_fails_at_once() {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let t = synth_scenario(&ScenarioParams::default()).unwrap();
    let started = std::time::Instant::now();
    let err = replay(&t, &addr.to_string(), ReplayOptions::default())
        .await
        .unwrap_err();
    assert!(matches!(err, HarnessError::Connect { .. }));
    assert!(started.elapsed() < Duration::from_secs(5));
}

#[tokio::test]
async fn lost_connection_gives_partial_report() {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    // Reads a handful of frames, then hangs up without answering.
    tokio::spawn(async move {
        let (s, _) = listener.accept().await.unwrap();
        let mut lines = BufReader::new(s).lines();
        for _ in 0..5 {
            lines.next_line().await.unwrap();
        }
    });
    let t = synth_scenario(&ScenarioParams::default()).unwrap();
    let out = replay(&t, &addr.to_string(), ReplayOptions::default())
        .await
        .unwrap();
    assert!(!out.report.complete);
    assert!(out.recommendations.is_empty());
    assert!(out.report.summary().contains("INCOMPLETE"));
}

#[tokio::test]
async fn suite_has_no_oracle_violations_and_doctored_trace_does() {
    let cfg = SafetyConfig::default();
    let mut flagged = 0;
    for params in ScenarioParams::suite() {
        let srv = server(true).await;
        let t = synth_scenario(&params).unwrap();
        let out = replay(&t, &srv.addr.to_string(), ReplayOptions::default())
            .await
            .unwrap();
        srv.shutdown().await.unwrap();
        assert!(out.report.complete);
        assert_eq!(
            oracle_check(&t, &out.recommendations, &cfg),
            Vec::new(),
            "{params:?}"
        );
        flagged += out.recommendations.iter().filter(|r| r.merge_flag).count();
    }
    assert!(flagged > 0);

    // Replay the default scenario, then shrink the gap in the trace only.
    let srv = server(true).await;
    let mut t = synth_scenario(&ScenarioParams::default()).unwrap();
    let out = replay(&t, &srv.addr.to_string(), ReplayOptions::default())
        .await
        .unwrap();
    srv.shutdown().await.unwrap();
    assert!(out.recommendations.iter().any(|r| r.merge_flag));
    for m in t.messages.iter_mut().filter(|m| m.user_id == PRECEDING_ID) {
        m.position.y -= 15.0;
    }
    let violations = oracle_check(&t, &out.recommendations, &cfg);
    assert!(!violations.is_empty());
    assert!(violations
        .iter()
        .any(|v| v.other == PRECEDING_ID && matches!(v.kind, ViolationKind::DiscOverlap { .. })));
    assert!(oracle_check(&t, &[], &cfg).is_empty());
}
