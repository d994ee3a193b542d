use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;

pub const BIND_ENV: &str = "STAKEWEIGH_BIND";
pub const DATA_DIR_ENV: &str = "STAKEWEIGH_DATA_DIR";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogFormat {
    #[default]
    Json,
    Pretty,
}

/// Server settings. Read from a TOML file; the bind address and data
/// directory can be overridden from the environment.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub data_dir: PathBuf,
    /// Write a snapshot after this many events.
    pub snapshot_every: u64,
    pub log_format: LogFormat,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: PathBuf::from("stakeweigh-data"),
            snapshot_every: 100,
            log_format: LogFormat::Json,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid {var}: {message}")]
    Env { var: &'static str, message: String },
    #[error("snapshot_every must be at least 1")]
    SnapshotInterval,
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Loads `path` (or the defaults when `None`) and applies environment
    /// overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.to_owned(),
                    source,
                })?;
                Self::from_toml(&text).map_err(|source| ConfigError::Parse {
                    path: path.to_owned(),
                    source,
                })?
            }
            None => Self::default(),
        };
        config.apply_overrides(|var| std::env::var(var).ok())?;
        Ok(config)
    }

    pub fn apply_overrides(
        &mut self,
        lookup: impl Fn(&str) -> Option<String>,
    ) -> Result<(), ConfigError> {
        if let Some(bind) = lookup(BIND_ENV) {
            self.bind = bind
                .parse()
                .map_err(|e: std::net::AddrParseError| ConfigError::Env {
                    var: BIND_ENV,
                    message: e.to_string(),
                })?;
        }
        if let Some(dir) = lookup(DATA_DIR_ENV) {
            if dir.is_empty() {
                return Err(ConfigError::Env {
                    var: DATA_DIR_ENV,
                    message: "empty path".into(),
                });
            }
            self.data_dir = PathBuf::from(dir);
        }
        if self.snapshot_every == 0 {
            return Err(ConfigError::SnapshotInterval);
        }
        Ok(())
    }
}
