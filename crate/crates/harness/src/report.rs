//! Latency statistics and link-capacity arithmetic for a replay.

use std::fmt::Write as _;
use std::io::Write;

use lanemerge_orchestrator::protocol::{encode_frame, Message, TrajectoryRecommendation};
use serde::{Deserialize, Serialize};

use crate::scenario::ScenarioTrace;

/// End-to-end latency allowed for a recommendation, ms.
pub const LATENCY_BUDGET_MS: f64 = 30.0;
/// Minimum link rates per vehicle, bits per second.
pub const UPLINK_BPS: f64 = 320_000.0;
pub const DOWNLINK_BPS: f64 = 4_700_000.0;

/// One RUD update matched with the recommendation planned from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub user_id: String,
    pub based_on_ms: u64,
    pub latency_ms: f64,
}

/// Nearest-rank percentile of sorted values.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub samples: Vec<LatencySample>,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
    pub budget_ms: f64,
    /// Updates that should have produced a recommendation.
    pub expected: usize,
    /// False when the connection dropped or answers went missing.
    pub complete: bool,
}

impl LatencyReport {
    pub fn new(
        samples: Vec<LatencySample>,
        budget_ms: f64,
        expected: usize,
        complete: bool,
    ) -> Self {
        let mut sorted: Vec<f64> = samples.iter().map(|s| s.latency_ms).collect();
        sorted.sort_by(f64::total_cmp);
        Self {
            p50_ms: percentile(&sorted, 50.0),
            p95_ms: percentile(&sorted, 95.0),
            p99_ms: percentile(&sorted, 99.0),
            max_ms: sorted.last().copied().unwrap_or(0.0),
            samples,
            budget_ms,
            expected,
            complete,
        }
    }

    pub fn within_budget(&self) -> bool {
        !self.samples.is_empty() && self.p99_ms <= self.budget_ms
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "user_id,based_on_ms,latency_ms")?;
        for s in &self.samples {
            writeln!(out, "{},{},{:.3}", s.user_id, s.based_on_ms, s.latency_ms)?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let verdict = if self.within_budget() { "PASS" } else { "FAIL" };
        let _ = writeln!(
            s,
            "recommendations: {} of {} expected{}",
            self.samples.len(),
            self.expected,
            if self.complete { "" } else { " (INCOMPLETE)" }
        );
        let _ = writeln!(
            s,
            "latency ms: p50 {:.3}  p95 {:.3}  p99 {:.3}  max {:.3}",
            self.p50_ms, self.p95_ms, self.p99_ms, self.max_ms
        );
        let _ = writeln!(s, "budget: p99 <= {:.1} ms: {verdict}", self.budget_ms);
        let _ = writeln!(
            s,
            "note: measured application to application on loopback; the radio link and \
             gateway share of the end-to-end budget is not included"
        );
        s
    }
}

/// Bit rates one vehicle needs, from actual frame sizes and message rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthEstimate {
    pub uplink_bps: f64,
    pub downlink_bps: f64,
}

impl BandwidthEstimate {
    /// Uplink: the busiest vehicle's update stream. Downlink: the
    /// recommendations sent to the merging vehicle.
    pub fn from_replay(
        trace: &ScenarioTrace,
        recommendations: &[TrajectoryRecommendation],
    ) -> Self {
        let span_s = match (trace.messages.first(), trace.messages.last()) {
            (Some(a), Some(b)) if b.timestamp > a.timestamp => {
                (b.timestamp - a.timestamp) as f64 / 1000.0
            }
            _ => {
                return Self {
                    uplink_bps: 0.0,
                    downlink_bps: 0.0,
                }
            }
        };
        let mut uplink_bits: std::collections::HashMap<&str, usize> = Default::default();
        for m in &trace.messages {
            *uplink_bits.entry(m.user_id.as_str()).or_default() +=
                8 * encode_frame(&Message::RudUpdate(m.clone())).len();
        }
        let uplink = uplink_bits.values().copied().max().unwrap_or(0);
        let downlink: usize = recommendations
            .iter()
            .map(|r| 8 * encode_frame(&Message::Recommendation(r.clone())).len())
            .sum();
        Self {
            uplink_bps: uplink as f64 / span_s,
            downlink_bps: downlink as f64 / span_s,
        }
    }

    pub fn fits(&self) -> bool {
        self.uplink_bps <= UPLINK_BPS && self.downlink_bps <= DOWNLINK_BPS
    }

    pub fn summary(&self) -> String {
        format!(
            "uplink per vehicle: {:.1} kbps needed, link provides at least {:.0} kbps\n\
             downlink per vehicle: {:.1} kbps needed, link provides at least {:.0} kbps\n",
            self.uplink_bps / 1000.0,
            UPLINK_BPS / 1000.0,
            self.downlink_bps / 1000.0,
            DOWNLINK_BPS / 1000.0
        )
    }
}
