//! Scenario generation and replay for the lane-merge orchestrator: synthetic
//! three-vehicle traces, a replay client that measures
//! update-to-recommendation latency, and an independent safety check of the
//! recommendations received.

pub mod error;
pub mod oracle;
pub mod replay;
pub mod report;
pub mod scenario;
pub mod trace;

pub use error::{HarnessError, Result};
pub use oracle::{oracle_check, Violation, ViolationKind};
pub use replay::{replay, ReplayOptions, ReplayOutcome};
pub use report::{BandwidthEstimate, LatencyReport, LatencySample, LATENCY_BUDGET_MS};
pub use scenario::{synth_scenario, RampGeometry, Role, ScenarioParams, ScenarioTrace, TraceMeta};
pub use trace::{read_trace, write_trace};
