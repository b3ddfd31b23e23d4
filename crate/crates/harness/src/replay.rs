//! Streams a trace to a running orchestrator and times the answers.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use lanemerge_orchestrator::protocol::{
    decode_message, encode_frame, ErrorReport, Message, TrajectoryRecommendation,
};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::TcpStream;
use tokio::sync::watch;
use tokio::time::{timeout, Instant};
use tracing::{debug, warn};

use crate::error::{HarnessError, Result};
use crate::report::{LatencyReport, LatencySample, LATENCY_BUDGET_MS};
use crate::scenario::ScenarioTrace;

#[derive(Debug, Clone, Copy)]
pub struct ReplayOptions {
    /// 1 replays in real time, 2 twice as fast; 0 sends as fast as possible.
    pub speed_factor: f64,
    pub budget_ms: f64,
    pub connect_timeout: Duration,
    /// How long to wait for outstanding answers after the last send.
    pub drain_timeout: Duration,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self {
            speed_factor: 0.0,
            budget_ms: LATENCY_BUDGET_MS,
            connect_timeout: Duration::from_secs(5),
            drain_timeout: Duration::from_secs(3),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub recommendations: Vec<TrajectoryRecommendation>,
    pub errors: Vec<ErrorReport>,
    pub sent: usize,
    pub report: LatencyReport,
}

/// Send instants keyed by (user, timestamp).
#[derive(Default)]
struct SendLog(Mutex<HashMap<(String, u64), Instant>>);

impl SendLog {
    fn record(&self, user: &str, ts: u64, at: Instant) {
        self.0
            .lock()
            .expect("send log")
            .insert((user.to_string(), ts), at);
    }

    fn get(&self, user: &str, ts: u64) -> Option<Instant> {
        self.0
            .lock()
            .expect("send log")
            .get(&(user.to_string(), ts))
            .copied()
    }
}

/// Updates that should each produce one recommendation: those of the
/// subscribed vehicle that are newer than its previous one and inside the
/// subscribed region.
pub fn expected_recommendations(trace: &ScenarioTrace) -> usize {
    let sub = &trace.meta.subscription;
    let mut last = None;
    trace
        .of(&sub.user_id)
        .filter(|m| {
            let newer = last.is_none_or(|t| m.timestamp >= t);
            if newer {
                last = Some(m.timestamp);
            }
            newer && sub.region.contains(m.position)
        })
        .count()
}

fn validate_speed(f: f64) -> Result<()> {
    if f.is_finite() && f >= 0.0 {
        Ok(())
    } else {
        Err(HarnessError::Scenario(format!(
            "speed factor must be a non-negative number, got {f}"
        )))
    }
}

/// Sends the subscription, then every update at its scaled time offset,
/// while a concurrent receiver collects recommendations. A dropped
/// connection yields a partial outcome whose report is marked incomplete; an
/// unreachable endpoint fails immediately.
pub async fn replay(
    trace: &ScenarioTrace,
    endpoint: &str,
    options: ReplayOptions,
) -> Result<ReplayOutcome> {
    validate_speed(options.speed_factor)?;
    let connect_err = |source| HarnessError::Connect {
        endpoint: endpoint.to_string(),
        source,
    };
    let stream = match timeout(options.connect_timeout, TcpStream::connect(endpoint)).await {
        Ok(r) => r.map_err(connect_err)?,
        Err(_) => return Err(connect_err(std::io::ErrorKind::TimedOut.into())),
    };
    let _ = stream.set_nodelay(true);
    let (rd, mut wr) = stream.into_split();
    let log = Arc::new(SendLog::default());
    let (done_tx, mut done_rx) = watch::channel(false);

    let frames: Vec<(String, u64, u64, Vec<u8>)> = trace
        .messages
        .iter()
        .map(|m| {
            (
                m.user_id.clone(),
                m.timestamp,
                m.timestamp.saturating_sub(trace.messages[0].timestamp),
                encode_frame(&Message::RudUpdate(m.clone())),
            )
        })
        .collect();
    let subscribe = encode_frame(&Message::Subscribe(trace.meta.subscription.clone()));
    let speed = options.speed_factor;
    let sender_log = log.clone();
    let sender = tokio::spawn(async move {
        let mut sent = 0usize;
        let ok = async {
            wr.write_all(&subscribe).await?;
            let start = Instant::now();
            for (user, ts, offset_ms, bytes) in &frames {
                if speed > 0.0 {
                    tokio::time::sleep_until(
                        start + Duration::from_secs_f64(*offset_ms as f64 / 1000.0 / speed),
                    )
                    .await;
                }
                sender_log.record(user, *ts, Instant::now());
                wr.write_all(bytes).await?;
                sent += 1;
            }
            wr.flush().await
        }
        .await;
        let _ = done_tx.send(true);
        if let Err(e) = &ok {
            warn!(error = %e, "send failed");
        }
        (sent, ok.is_ok(), wr)
    });

    let expected = expected_recommendations(trace);
    let mut lines = BufReader::new(rd).lines();
    let mut recommendations = Vec::new();
    let mut errors = Vec::new();
    let mut samples = Vec::new();
    let mut lost = false;
    let mut drain_deadline: Option<Instant> = None;
    while recommendations.len() < expected {
        if drain_deadline.is_none() && *done_rx.borrow() {
            drain_deadline = Some(Instant::now() + options.drain_timeout);
        }
        let deadline = drain_deadline.unwrap_or_else(|| Instant::now() + Duration::from_secs(3600));
        tokio::select! {
            line = lines.next_line() => match line {
                Ok(Some(line)) => {
                    let received = Instant::now();
                    match decode_message(line.as_bytes()) {
                        Ok(Message::Recommendation(rec)) => {
                            if let Some(sent_at) = log.get(&rec.user_id, rec.based_on_ms) {
                                samples.push(LatencySample {
                                    user_id: rec.user_id.clone(),
                                    based_on_ms: rec.based_on_ms,
                                    latency_ms: (received - sent_at).as_secs_f64() * 1000.0,
                                });
                            }
                            recommendations.push(rec);
                        }
                        Ok(Message::Error(e)) => {
                            debug!(code = %e.code, "orchestrator error");
                            errors.push(e);
                        }
                        Ok(other) => debug!(kind = other.kind(), "ignored message"),
                        Err(e) => warn!(error = %e, "undecodable reply"),
                    }
                }
                Ok(None) | Err(_) => {
                    lost = true;
                    break;
                }
            },
            _ = done_rx.changed(), if drain_deadline.is_none() => {}
            _ = tokio::time::sleep_until(deadline), if drain_deadline.is_some() => break,
        }
    }
    let (sent, send_ok, mut wr) = sender.await.map_err(std::io::Error::other)?;
    let _ = wr.shutdown().await;
    let complete =
        !lost && send_ok && sent == trace.messages.len() && recommendations.len() == expected;
    Ok(ReplayOutcome {
        report: LatencyReport::new(samples, options.budget_ms, expected, complete),
        recommendations,
        errors,
        sent,
    })
}

/// Recommendations grouped by the update they answer, for comparing runs.
pub fn by_update(
    recs: &[TrajectoryRecommendation],
) -> HashMap<(String, u64), &TrajectoryRecommendation> {
    recs.iter()
        .map(|r| ((r.user_id.clone(), r.based_on_ms), r))
        .collect()
}
