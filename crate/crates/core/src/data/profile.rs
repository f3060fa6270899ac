use serde::{Deserialize, Serialize};

use super::record::SampleRecord;
use crate::error::{Error, Result};
use crate::wdnn::SectionLayout;

/// Column schema and split rules of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub name: String,
    pub timestamp_column: String,
    /// `chrono` format string; integer seconds when absent.
    #[serde(default)]
    pub timestamp_format: Option<String>,
    pub sensors: Vec<String>,
    pub actuators: Vec<String>,
    #[serde(default)]
    pub label_column: Option<String>,
    /// Sensor names per output section.
    pub sections: Vec<Vec<String>>,
    /// Share of the normal region held out, taken from its end.
    pub validation_fraction: f64,
}

const SWAT_SECTIONS: [&[&str]; 6] = [
    &["FIT101", "LIT101"],
    &["AIT201", "AIT202", "AIT203", "FIT201"],
    &["DPIT301", "FIT301", "LIT301"],
    &["AIT401", "AIT402", "FIT401", "LIT401"],
    &[
        "AIT501", "AIT502", "AIT503", "AIT504", "FIT501", "FIT502", "FIT503", "FIT504", "PIT501",
        "PIT502", "PIT503",
    ],
    &["FIT601"],
];

const SWAT_ACTUATORS: [&str; 26] = [
    "MV101", "P101", "P102", "MV201", "P201", "P202", "P203", "P204", "P205", "P206", "MV301",
    "MV302", "MV303", "MV304", "P301", "P302", "P401", "P402", "P403", "P404", "UV401", "P501",
    "P502", "P601", "P602", "P603",
];

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl DatasetProfile {
    /// Secure Water Treatment testbed: 25 sensors in six PLC stages, 26 actuators.
    pub fn swat() -> Self {
        let sections: Vec<Vec<String>> = SWAT_SECTIONS.iter().map(|s| strings(s)).collect();
        Self {
            name: "swat".into(),
            timestamp_column: "Timestamp".into(),
            timestamp_format: Some("%d/%m/%Y %I:%M:%S %p".into()),
            sensors: sections.concat(),
            actuators: strings(&SWAT_ACTUATORS),
            label_column: Some("Normal/Attack".into()),
            sections,
            validation_fraction: 0.2,
        }
    }

    /// Water Distribution testbed. Column names vary between releases, so
    /// they are supplied by the caller; sections group sensors by their
    /// leading stage digit (`1_AIT_001_PV` belongs to stage 1).
    pub fn wadi(sensors: Vec<String>, actuators: Vec<String>) -> Self {
        let mut sections: Vec<(String, Vec<String>)> = Vec::new();
        for s in &sensors {
            let stage = s.split('_').next().unwrap_or("").to_string();
            match sections.iter_mut().find(|(k, _)| *k == stage) {
                Some((_, v)) => v.push(s.clone()),
                None => sections.push((stage, vec![s.clone()])),
            }
        }
        Self {
            name: "wadi".into(),
            timestamp_column: "Timestamp".into(),
            timestamp_format: None,
            sensors,
            actuators,
            label_column: Some("Attack".into()),
            sections: sections.into_iter().map(|(_, v)| v).collect(),
            validation_fraction: 0.05,
        }
    }

    pub fn m_se(&self) -> usize {
        self.sensors.len()
    }

    pub fn m_ac(&self) -> usize {
        self.actuators.len()
    }

    /// Section layout expressed as sensor indices.
    pub fn layout(&self) -> Result<SectionLayout> {
        let groups = self
            .sections
            .iter()
            .map(|sec| {
                sec.iter()
                    .map(|name| {
                        self.sensors.iter().position(|s| s == name).ok_or_else(|| {
                            Error::Config(format!("section sensor {name} is not a sensor column"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let layout = SectionLayout::new(groups);
        layout.validate(self.m_se())?;
        Ok(layout)
    }

    /// Contiguous split of normal records into training and validation.
    pub fn split_train_validation(&self, normal: &[SampleRecord]) -> Result<(Vec<SampleRecord>, Vec<SampleRecord>)> {
        split_tail(normal, self.validation_fraction)
    }
}

/// Holds out the last `fraction` of `records`.
pub fn split_tail(records: &[SampleRecord], fraction: f64) -> Result<(Vec<SampleRecord>, Vec<SampleRecord>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!("validation fraction must be in [0, 1), got {fraction}")));
    }
    let n_val = (records.len() as f64 * fraction).round() as usize;
    let cut = records.len() - n_val;
    Ok((records[..cut].to_vec(), records[cut..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swat_shape() {
        let p = DatasetProfile::swat();
        assert_eq!(p.m_se(), 25);
        assert_eq!(p.m_ac(), 26);
        assert_eq!(p.m_se() + p.m_ac(), 51);
        assert_eq!(p.layout().unwrap().sizes(), vec![2, 4, 3, 4, 11, 1]);
    }

    #[test]
    fn wadi_groups_by_stage() {
        let p = DatasetProfile::wadi(
            strings(&["1_AIT_001_PV", "1_FIT_001_PV", "2_LT_001_PV", "3_AIT_001_PV"]),
            strings(&["1_MV_001_STATUS"]),
        );
        assert_eq!(p.layout().unwrap().groups(), &[vec![0, 1], vec![2], vec![3]]);
    }

    #[test]
    fn tail_split() {
        let recs: Vec<SampleRecord> = (0..10)
            .map(|t| SampleRecord {
                timestamp: t,
                sensors: vec![],
                actuators: vec![],
                label: None,
            })
            .collect();
        let (a, b) = split_tail(&recs, 0.2).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(b[0].timestamp, 8);
        assert!(split_tail(&recs, 1.0).is_err());
    }
}
