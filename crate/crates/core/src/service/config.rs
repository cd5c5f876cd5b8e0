use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ENV_LISTEN: &str = "VISA_LISTEN";
pub const ENV_CATALOG_ROOT: &str = "VISA_CATALOG_ROOT";

/// Service settings, read from TOML with environment overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen: String,
    pub catalog_root: PathBuf,
    pub frame_pattern: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            catalog_root: PathBuf::from("catalog"),
            frame_pattern: "*".into(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Applies `VISA_LISTEN` and `VISA_CATALOG_ROOT` when set.
    pub fn with_env(self) -> Self {
        self.with_overrides(|k| std::env::var(k).ok())
    }

    pub fn with_overrides(mut self, get: impl Fn(&str) -> Option<String>) -> Self {
        if let Some(v) = get(ENV_LISTEN) {
            self.listen = v;
        }
        if let Some(v) = get(ENV_CATALOG_ROOT) {
            self.catalog_root = v.into();
        }
        self
    }
}
