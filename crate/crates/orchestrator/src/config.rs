//! Service configuration: TOML file plus `LANEMERGE_*` environment overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::DEFAULT_STALENESS_MS;
use crate::protocol::DEFAULT_MAX_FRAME;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:7878";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid value for {name}: {value:?}")]
    Env { name: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub staleness_ms: u64,
    pub model: Option<PathBuf>,
    pub max_frame_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: DEFAULT_LISTEN.to_string(),
            staleness_ms: DEFAULT_STALENESS_MS,
            model: None,
            max_frame_bytes: DEFAULT_MAX_FRAME,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Applies `LANEMERGE_LISTEN`, `LANEMERGE_STALENESS_MS`, `LANEMERGE_MODEL`
    /// and `LANEMERGE_MAX_FRAME_BYTES` as returned by `lookup`.
    pub fn apply_env(
        &mut self,
        lookup: impl Fn(&str) -> Option<String>,
    ) -> Result<(), ConfigError> {
        let parse = |name: &str, value: String| {
            value.parse::<u64>().map_err(|_| ConfigError::Env {
                name: name.to_string(),
                value,
            })
        };
        if let Some(v) = lookup("LANEMERGE_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = lookup("LANEMERGE_STALENESS_MS") {
            self.staleness_ms = parse("LANEMERGE_STALENESS_MS", v)?;
        }
        if let Some(v) = lookup("LANEMERGE_MODEL") {
            self.model = Some(PathBuf::from(v));
        }
        if let Some(v) = lookup("LANEMERGE_MAX_FRAME_BYTES") {
            self.max_frame_bytes = parse("LANEMERGE_MAX_FRAME_BYTES", v)? as usize;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.listen.parse::<std::net::SocketAddr>().is_err() {
            return Err(ConfigError::Parse(format!(
                "listen address {:?} is not host:port",
                self.listen
            )));
        }
        if self.max_frame_bytes < 256 {
            return Err(ConfigError::Parse(
                "max_frame_bytes must be at least 256".into(),
            ));
        }
        Ok(())
    }
}
