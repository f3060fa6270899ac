use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use plantwatch::detector::{AlarmEvent, AlarmSource};
use serde_json::json;

use crate::schema::{Alarm, AlarmStatus, FeedbackResponse, ALARM_LOG};
use crate::ServiceError;

/// Reported points grouped into alarms. A point joins the alarm of an
/// adjacent reported point, otherwise it opens a new one, so every alarm
/// covers a contiguous run.
#[derive(Debug, Default)]
pub struct AlarmBook {
    alarms: Vec<Alarm>,
    owner: Vec<Option<usize>>,
}

impl AlarmBook {
    pub fn all(&self) -> &[Alarm] {
        &self.alarms
    }

    pub fn get_mut(&mut self, id: u64) -> Option<&mut Alarm> {
        self.index(id).map(move |i| &mut self.alarms[i])
    }

    fn index(&self, id: u64) -> Option<usize> {
        (id as usize).checked_sub(1).filter(|&i| i < self.alarms.len())
    }

    pub fn open_count(&self) -> usize {
        self.alarms.iter().filter(|a| a.status == AlarmStatus::Open).count()
    }

    /// Records reported point `t`; returns the alarm when it is new.
    pub fn observe(&mut self, t: usize, timestamp: i64, event: Option<&AlarmEvent>, version: u64) -> Option<&Alarm> {
        if self.owner.len() <= t + 1 {
            self.owner.resize(t + 2, None);
        }
        let source = event.map_or(AlarmSource::Actuator, |e| e.source);
        let neighbour = t.checked_sub(1).and_then(|p| self.owner[p]).or(self.owner[t + 1]);
        if let Some(i) = neighbour {
            let a = &mut self.alarms[i];
            a.t = a.t.min(t);
            a.end = a.end.max(t);
            if !a.sources.contains(&source) {
                a.sources.push(source);
            }
            self.owner[t] = Some(i);
            return None;
        }
        let id = self.alarms.len() as u64 + 1;
        self.alarms.push(Alarm {
            id,
            t,
            timestamp,
            end: t,
            source,
            sources: vec![source],
            mse: event.and_then(|e| e.mse),
            threshold: event.and_then(|e| e.threshold),
            status: AlarmStatus::Open,
            model_version: version,
        });
        self.owner[t] = Some(self.alarms.len() - 1);
        self.alarms.last()
    }
}

/// Append-only JSONL audit trail of alarms and verdicts.
#[derive(Debug)]
pub struct AlarmLog {
    file: File,
}

impl AlarmLog {
    pub fn open(path: &Path) -> Result<Self, ServiceError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| ServiceError::Io(format!("{}: {e}", dir.display())))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self { file })
    }

    fn line(&mut self, value: serde_json::Value) -> Result<(), ServiceError> {
        let mut text = value.to_string();
        text.push('\n');
        self.file
            .write_all(text.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| ServiceError::Io(format!("alarm log: {e}")))
    }

    pub fn alarm(&mut self, session: u64, alarm: &Alarm) -> Result<(), ServiceError> {
        self.line(json!({ "schema": ALARM_LOG, "kind": "alarm", "session": session, "alarm": alarm }))
    }

    pub fn feedback(&mut self, session: u64, response: &FeedbackResponse) -> Result<(), ServiceError> {
        self.line(json!({ "schema": ALARM_LOG, "kind": "feedback", "session": session, "feedback": response }))
    }
}
