use std::path::{Path, PathBuf};

use plantwatch::eval::DatasetSource;
use plantwatch::pipeline::EngineConfig;
use serde::{Deserialize, Serialize};

use crate::schema::Speed;
use crate::ServiceError;

/// Environment variable holding the listen address.
pub const BIND_ENV: &str = "PLANTWATCH_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:8737";

/// Bind address from [`BIND_ENV`], falling back to [`DEFAULT_BIND`].
pub fn bind_address() -> String {
    std::env::var(BIND_ENV)
        .ok()
        .filter(|s| !s.trim().is_empty())
        .unwrap_or_else(|| DEFAULT_BIND.to_string())
}

/// Service config file. Relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    /// Records replayed are the test split of this source.
    pub dataset: DatasetSource,
    /// Directory written by `plantwatch train`. Without it the service
    /// starts but refuses to run a session.
    #[serde(default)]
    pub model_dir: Option<PathBuf>,
    #[serde(default = "EngineConfig::synthetic")]
    pub engine: EngineConfig,
    #[serde(default = "default_alarm_log")]
    pub alarm_log: PathBuf,
    /// Events kept for slow subscribers and reconnects.
    #[serde(default = "default_event_buffer")]
    pub event_buffer: usize,
    #[serde(default)]
    pub speed: Speed,
}

fn default_alarm_log() -> PathBuf {
    PathBuf::from("alarms.jsonl")
}

fn default_event_buffer() -> usize {
    1024
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_slice(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.alarm_log = base.join(&cfg.alarm_log);
        cfg.model_dir = cfg.model_dir.map(|d| base.join(d));
        if let DatasetSource::Csv { normal, test, .. } = &mut cfg.dataset {
            *normal = base.join(&*normal);
            *test = base.join(&*test);
        }
        Ok(cfg)
    }
}
