//! Server configuration file (TOML).
//!
//! ```toml
//! regions = "regions.json"
//! directory = "directory.json"
//! listen = "127.0.0.1:8080"
//! neighbor_radius_m = 10000
//! event_log = "events.log"
//! snapshot = "snapshot.json"
//! snapshot_every = 100
//!
//! [verification]
//! official_weight = 3
//! user_weight = 1
//! auto_threshold = 10
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::geo::DEFAULT_NEIGHBOR_RADIUS_M;
use crate::ledger::Weights;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationConfig {
    #[serde(default = "default_official")]
    pub official_weight: f64,
    #[serde(default = "default_user")]
    pub user_weight: f64,
    #[serde(default = "default_threshold")]
    pub auto_threshold: f64,
}

fn default_official() -> f64 {
    Weights::default().official
}

fn default_user() -> f64 {
    Weights::default().user
}

fn default_threshold() -> f64 {
    10.0
}

fn default_radius() -> f64 {
    DEFAULT_NEIGHBOR_RADIUS_M
}

fn default_listen() -> String {
    "127.0.0.1:8080".to_string()
}

fn default_snapshot_every() -> u64 {
    100
}

impl Default for VerificationConfig {
    fn default() -> Self {
        Self {
            official_weight: default_official(),
            user_weight: default_user(),
            auto_threshold: default_threshold(),
        }
    }
}

impl VerificationConfig {
    pub fn weights(&self) -> Weights {
        Weights {
            official: self.official_weight,
            user: self.user_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub regions: PathBuf,
    pub directory: PathBuf,
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default = "default_radius")]
    pub neighbor_radius_m: f64,
    #[serde(default)]
    pub event_log: Option<PathBuf>,
    #[serde(default)]
    pub snapshot: Option<PathBuf>,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: u64,
    #[serde(default)]
    pub verification: VerificationConfig,
}

impl Config {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut config: Config = toml::from_str(text)?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut config.regions);
        resolve(&mut config.directory);
        config.event_log.as_mut().map(resolve);
        config.snapshot.as_mut().map(resolve);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&std::fs::read_to_string(path)?, base)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.neighbor_radius_m > 0.0) {
            return Err(ConfigError::Invalid("neighbor_radius_m must be positive".into()));
        }
        let v = &self.verification;
        if !(v.official_weight >= 0.0 && v.user_weight >= 0.0) {
            return Err(ConfigError::Invalid("verification weights must be non-negative".into()));
        }
        if self.snapshot.is_some() && self.event_log.is_none() {
            return Err(ConfigError::Invalid("snapshot needs an event_log".into()));
        }
        Ok(())
    }
}
