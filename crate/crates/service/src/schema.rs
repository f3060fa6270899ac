//! Wire payloads. Every body carries a `schema` tag of the form
//! `plantwatch.<name>/<version>`; consumers should reject majors they do
//! not know.

use plantwatch::adapt::{AdaptReport, FaFlags};
use plantwatch::detector::AlarmSource;
use serde::{Deserialize, Serialize};

pub const STATUS: &str = "plantwatch.status/1";
pub const SESSION: &str = "plantwatch.session/1";
pub const EVENT: &str = "plantwatch.event/1";
pub const GAP: &str = "plantwatch.gap/1";
pub const ALARMS: &str = "plantwatch.alarms/1";
pub const ALARM_LOG: &str = "plantwatch.alarm-log/1";
pub const FEEDBACK: &str = "plantwatch.feedback/1";
pub const MODEL_VERSION: &str = "plantwatch.model-version/1";
pub const ERROR: &str = "plantwatch.error/1";

/// Playback rate: a multiplier on wall time, or `"max"` for batch speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Speed {
    Factor(f64),
    Named(NamedSpeed),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedSpeed {
    Max,
}

impl Default for Speed {
    fn default() -> Self {
        Speed::Factor(1.0)
    }
}

impl Speed {
    pub const MAX: Speed = Speed::Named(NamedSpeed::Max);

    pub fn is_valid(self) -> bool {
        match self {
            Speed::Factor(f) => f.is_finite() && f > 0.0,
            Speed::Named(_) => true,
        }
    }

    /// Wall seconds per one-second record; `None` means no pacing.
    pub fn period(self) -> Option<f64> {
        match self {
            Speed::Factor(f) => Some(1.0 / f),
            Speed::Named(NamedSpeed::Max) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Idle,
    Running,
    Paused,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: u64,
    pub state: SessionState,
    pub speed: Speed,
    /// Index of the next record to replay.
    pub cursor: usize,
    pub total: usize,
    pub dataset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum SessionCommand {
    Start {
        #[serde(default)]
        speed: Option<Speed>,
    },
    Pause,
    Speed {
        speed: Speed,
    },
    /// Fast-forward to record `to`; backwards is refused.
    Seek {
        to: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlarmStatus {
    Open,
    /// A verdict is being applied.
    Resolving,
    Confirmed,
    Dismissed,
}

/// One contiguous run of reported alarm points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alarm {
    pub id: u64,
    /// First reported point; feedback targets the interval holding it.
    pub t: usize,
    pub timestamp: i64,
    /// Last reported point so far.
    pub end: usize,
    pub source: AlarmSource,
    pub sources: Vec<AlarmSource>,
    pub mse: Option<f64>,
    pub threshold: Option<f64>,
    pub status: AlarmStatus,
    pub model_version: u64,
}

impl Alarm {
    pub fn points(&self) -> usize {
        self.end - self.t + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    TrueAnomaly,
    FalseAlarm,
}

/// Body of `POST /alarms/{id}/feedback`. `flags` is required for a false
/// alarm and forbidden otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRequest {
    pub verdict: Verdict,
    #[serde(default)]
    pub flags: Option<FaFlags>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackResponse {
    pub schema: String,
    pub alarm_id: u64,
    pub verdict: Verdict,
    pub model_version: u64,
    pub adaptation: Option<AdaptReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub t_start: usize,
    pub t_end: usize,
    /// Per step, per section; `null` during warm-up.
    pub mse: Vec<Vec<Option<f64>>>,
    pub thresholds: Vec<f64>,
    pub t_base: Vec<f64>,
    /// `L_t` per step.
    pub labels: Vec<u8>,
    pub alarm_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventBody {
    Session { session: SessionView },
    Telemetry(Telemetry),
    Alarm { alarm: Alarm },
    Feedback {
        alarm_id: u64,
        verdict: Verdict,
        adaptation: Option<AdaptReport>,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::Session { .. } => "session",
            EventBody::Telemetry(_) => "telemetry",
            EventBody::Alarm { .. } => "alarm",
            EventBody::Feedback { .. } => "feedback",
        }
    }
}

/// One stream event. `seq` strictly increases for the life of the process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub schema: String,
    pub seq: u64,
    pub session: u64,
    pub model_version: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

/// Marker sent to a subscriber that fell behind the buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub schema: String,
    pub missed: u64,
}
