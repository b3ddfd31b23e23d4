//! The Traffic Orchestrator: ingests road-user descriptions, keeps the
//! Knowledge Base current, and sends trajectory recommendations to merging
//! vehicles.

pub mod config;
pub mod kb;
pub mod planner;
pub mod protocol;
pub mod server;
pub mod service;

pub use config::ServiceConfig;
pub use kb::{Clock, KnowledgeBase, ManualClock, SystemClock};
pub use planner::{plan_merge, MergeTarget, Plan, PlanError};
pub use protocol::{
    decode_message, encode_frame, encode_message, Bounds, FrameDecoder, ManeuverFeedback, Message,
    Position, ProtocolError, RoadUserDescription, Source, Subscription, TrajectoryRecommendation,
    Verdict, Waypoint,
};
pub use service::{FeedbackAction, Orchestrator};
