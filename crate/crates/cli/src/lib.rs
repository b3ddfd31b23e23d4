//! The `lanemerge` command: dataset pipeline, training, serving and replay.

pub mod cli;
pub mod commands;
pub mod config;
pub mod io;

pub use cli::Cli;
pub use commands::run;
pub use config::RunConfig;
