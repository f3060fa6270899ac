use serde::{Deserialize, Serialize};

use super::record::SampleRecord;
use crate::error::{Error, Result};

/// Per-column min/max scaling fitted on training data.
///
/// Sensors map to `(x - min) / (max - min)`; out-of-range test values are not
/// clamped. Constant columns map to 0. Actuator states use the same rule over
/// their observed state range when building network inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub sensor_min: Vec<f64>,
    pub sensor_max: Vec<f64>,
    pub actuator_min: Vec<f64>,
    pub actuator_max: Vec<f64>,
}

fn scale(x: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (x - lo) / (hi - lo)
    } else {
        0.0
    }
}

impl Normalizer {
    pub fn fit(train: &[SampleRecord]) -> Result<Self> {
        let first = train
            .first()
            .ok_or_else(|| Error::dim("cannot fit a normalizer on an empty training set"))?;
        let (m_se, m_ac) = (first.sensors.len(), first.actuators.len());
        let mut n = Self {
            sensor_min: vec![f64::INFINITY; m_se],
            sensor_max: vec![f64::NEG_INFINITY; m_se],
            actuator_min: vec![f64::INFINITY; m_ac],
            actuator_max: vec![f64::NEG_INFINITY; m_ac],
        };
        for (row, r) in train.iter().enumerate() {
            if r.sensors.len() != m_se || r.actuators.len() != m_ac {
                return Err(Error::Ingestion {
                    row,
                    reason: "record width differs from the first record".into(),
                });
            }
            for (i, &v) in r.sensors.iter().enumerate() {
                n.sensor_min[i] = n.sensor_min[i].min(v);
                n.sensor_max[i] = n.sensor_max[i].max(v);
            }
            for (i, &a) in r.actuators.iter().enumerate() {
                n.actuator_min[i] = n.actuator_min[i].min(f64::from(a));
                n.actuator_max[i] = n.actuator_max[i].max(f64::from(a));
            }
        }
        Ok(n)
    }

    pub fn m_se(&self) -> usize {
        self.sensor_min.len()
    }

    pub fn m_ac(&self) -> usize {
        self.actuator_min.len()
    }

    pub fn normalize_sensors(&self, sensors: &[f64]) -> Vec<f64> {
        sensors
            .iter()
            .enumerate()
            .map(|(i, &x)| scale(x, self.sensor_min[i], self.sensor_max[i]))
            .collect()
    }

    pub fn denormalize_sensors(&self, sensors: &[f64]) -> Vec<f64> {
        sensors
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let (lo, hi) = (self.sensor_min[i], self.sensor_max[i]);
                if hi > lo {
                    x * (hi - lo) + lo
                } else {
                    lo
                }
            })
            .collect()
    }

    pub fn normalize_actuators(&self, actuators: &[u8]) -> Vec<f64> {
        actuators
            .iter()
            .enumerate()
            .map(|(i, &a)| scale(f64::from(a), self.actuator_min[i], self.actuator_max[i]))
            .collect()
    }

    /// Records with sensor columns rescaled; actuators and labels untouched.
    pub fn apply(&self, records: &[SampleRecord]) -> Result<Vec<SampleRecord>> {
        records
            .iter()
            .enumerate()
            .map(|(row, r)| {
                if r.sensors.len() != self.m_se() {
                    return Err(Error::Ingestion {
                        row,
                        reason: format!("expected {} sensors", self.m_se()),
                    });
                }
                Ok(SampleRecord {
                    sensors: self.normalize_sensors(&r.sensors),
                    ..r.clone()
                })
            })
            .collect()
    }

    /// Network feature row `[sensors..., actuators...]`, both normalized.
    pub fn feature_row(&self, r: &SampleRecord) -> Vec<f64> {
        let mut row = self.normalize_sensors(&r.sensors);
        row.extend(self.normalize_actuators(&r.actuators));
        row
    }

    pub fn features(&self, records: &[SampleRecord]) -> Result<FeatureMatrix> {
        let m = self.m_se() + self.m_ac();
        let mut rows = Vec::with_capacity(records.len() * m);
        for (row, r) in records.iter().enumerate() {
            if r.sensors.len() != self.m_se() || r.actuators.len() != self.m_ac() {
                return Err(Error::Ingestion {
                    row,
                    reason: "record width does not match the normalizer".into(),
                });
            }
            rows.extend(self.feature_row(r));
        }
        Ok(FeatureMatrix {
            m_se: self.m_se(),
            m_ac: self.m_ac(),
            rows,
        })
    }
}

/// Time-major matrix of normalized features, one row per second.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub m_se: usize,
    pub m_ac: usize,
    pub rows: Vec<f64>,
}

impl FeatureMatrix {
    pub fn width(&self) -> usize {
        self.m_se + self.m_ac
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.width().max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let m = self.width();
        &self.rows[t * m..(t + 1) * m]
    }
}
