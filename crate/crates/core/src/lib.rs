//! Lane-merge data pipeline: recorded highway trajectories in, labeled merge
//! recommendation datasets out.
//!
//! The flow is [`trajectory`] parsing, [`window`] extraction around each lane
//! change, then [`label`] with the geometric rules in [`safety`].

pub mod angle;
pub mod dataset;
pub mod error;
pub mod features;
pub mod label;
pub mod safety;
pub mod synth;
pub mod trajectory;
pub mod window;

pub use angle::{angular_difference, bearing, normalize_heading};
pub use error::{Error, Result};
pub use features::{merge_features, FEATURE_COUNT, FEATURE_NAMES};
pub use label::{build_dataset, compute_msp, LabeledSample, MostDesiredPosition};
pub use safety::{circle_safety_check, gap_admissible, merge_is_safe, SafetyConfig, VehicleState};
pub use trajectory::{
    parse_trajectory_file, parse_trajectory_str, DatasetFormat, TrajectorySample, VehicleId,
    VehicleTrack,
};
pub use window::{
    assign_neighbors, detect_lane_changes, extract_window, extract_windows, LaneChangeEvent,
    ScenarioWindow, EVENT_OFFSET, WINDOW_LEN,
};
