use serde::{Deserialize, Serialize};

/// Ground-truth annotation of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Normal,
    Attack,
}

impl Label {
    pub fn is_attack(self) -> bool {
        matches!(self, Label::Attack)
    }
}

/// One per-second snapshot of the plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    /// Seconds; consecutive records are one second apart.
    pub timestamp: i64,
    pub sensors: Vec<f64>,
    pub actuators: Vec<u8>,
    #[serde(default)]
    pub label: Option<Label>,
}

impl SampleRecord {
    pub fn is_attack(&self) -> bool {
        self.label.is_some_and(Label::is_attack)
    }
}

/// Ground-truth labels as booleans (missing labels count as normal).
pub fn attack_labels(records: &[SampleRecord]) -> Vec<bool> {
    records.iter().map(SampleRecord::is_attack).collect()
}
