//! Declarative configuration (`eln.toml`).
//!
//! Relative paths are resolved against the directory of the config file.
//! `ELN_STAMP_URL` and `ELN_STAMP_KEY` override the `[stamp]` keys.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ingest::{IngestSettings, RecencyPolicy, TreeRoots};
use crate::linker::LinkWindows;
use crate::stamper::RetryPolicy;
use crate::tabular::TabularConfig;

pub const ENV_CONFIG: &str = "ELN_CONFIG";
pub const ENV_STAMP_URL: &str = "ELN_STAMP_URL";
pub const ENV_STAMP_KEY: &str = "ELN_STAMP_KEY";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StampConfig {
    /// Base URL of an HTTP anchoring service; the bundled mock is used when unset.
    pub url: Option<String>,
    pub key: Option<String>,
    pub retry: RetryPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
    /// Origin allowed to call the API from a browser.
    pub cors_origin: Option<String>,
    /// Directory with the built web client, served under `/`.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { bind: "127.0.0.1".into(), port: 8000, cors_origin: None, ui_dir: None }
    }
}

/// Per-device validation profile: default `extra` values set at ingest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceProfile {
    pub defaults: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub data_root: PathBuf,
    pub store_path: PathBuf,
    pub convention: TreeRoots,
    pub recency: RecencyPolicy,
    pub link: LinkWindows,
    pub tabular: TabularConfig,
    pub stamp: StampConfig,
    pub server: ServerConfig,
    pub profiles: HashMap<String, DeviceProfile>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            data_root: PathBuf::from("data"),
            store_path: PathBuf::from("eln.db"),
            convention: TreeRoots::default(),
            recency: RecencyPolicy::default(),
            link: LinkWindows::default(),
            tabular: TabularConfig::default(),
            stamp: StampConfig::default(),
            server: ServerConfig::default(),
            profiles: HashMap::new(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, toml::de::Error> {
        let mut config: Config = toml::from_str(text)?;
        config.resolve_relative(base);
        Ok(config)
    }

    /// Reads a config file and applies environment overrides.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut config =
            Self::from_toml(&text, base).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })?;
        config.apply_env(|k| std::env::var(k).ok());
        config.validate()?;
        Ok(config)
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_root);
        fix(&mut self.store_path);
        if let Some(ui) = self.server.ui_dir.as_mut() {
            fix(ui);
        }
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(url) = get(ENV_STAMP_URL).filter(|s| !s.is_empty()) {
            self.stamp.url = Some(url);
        }
        if let Some(key) = get(ENV_STAMP_KEY).filter(|s| !s.is_empty()) {
            self.stamp.key = Some(key);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.recency.max_age_s <= 0 {
            return Err(ConfigError::Invalid("recency.max_age_s must be positive".into()));
        }
        if self.link.sub_pre_s < 0 || self.link.sub_post_s < 0 || self.link.note_window_s < 0 {
            return Err(ConfigError::Invalid("link windows must not be negative".into()));
        }
        if self.convention.main_root == self.convention.sub_root {
            return Err(ConfigError::Invalid("main and sub tree roots must differ".into()));
        }
        Ok(())
    }

    pub fn ingest_settings(&self) -> IngestSettings {
        IngestSettings {
            roots: self.convention.clone(),
            policy: self.recency,
            windows: self.link,
            profiles: self.profiles.iter().map(|(k, v)| (k.clone(), v.defaults.clone())).collect(),
        }
    }

    /// Starter config written by `eln init`.
    pub fn sample_toml() -> &'static str {
        SAMPLE_CONFIG
    }
}

const SAMPLE_CONFIG: &str = r#"# Lab notebook configuration. Relative paths are relative to this file.
data_root = "data"
store_path = "eln.db"

[convention]
main_root = "01_Main_Exp"
sub_root = "02_Sub_Exp"

[recency]
# files whose timestamp is older than this are ignored by ingest
max_age_s = 432000
enabled = true

[link]
sub_pre_s = 0
sub_post_s = 7200
note_window_s = 43200

[tabular]
extensions = ["csv", "txt", "dat"]

[tabular.format]
delimiter = ","
decimal_separator = "."
time_column = 0

[stamp]
# url = "https://stamp.example.org/api"   (unset: in-process mock backend)

[stamp.retry]
max_attempts = 4
initial_delay_ms = 500
factor = 2

[server]
bind = "127.0.0.1"
port = 8000

# [profiles.OCA.defaults]
# liquid = ""
"#;
