//! Set of actuator-state combinations accepted as normal.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::data::SampleRecord;
use crate::error::{Error, Result};

/// One combination of actuator states observed at a single time step.
pub type ActuatorTuple = Vec<u8>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActuatorDb {
    m_ac: usize,
    devices: Vec<String>,
    tuples: BTreeSet<ActuatorTuple>,
}

impl ActuatorDb {
    pub fn new(m_ac: usize) -> Self {
        Self {
            m_ac,
            devices: (0..m_ac).map(|i| format!("a{i}")).collect(),
            tuples: BTreeSet::new(),
        }
    }

    pub fn with_devices(devices: Vec<String>) -> Self {
        Self {
            m_ac: devices.len(),
            devices,
            tuples: BTreeSet::new(),
        }
    }

    /// Every distinct combination in `records`.
    pub fn build(records: &[SampleRecord], devices: Option<Vec<String>>) -> Result<Self> {
        let m_ac = records.first().map_or(0, |r| r.actuators.len());
        let mut db = match devices {
            Some(d) if d.len() == m_ac => Self::with_devices(d),
            Some(d) => {
                return Err(Error::Schema(format!(
                    "{} device names for {m_ac} actuators",
                    d.len()
                )))
            }
            None => Self::new(m_ac),
        };
        for (row, r) in records.iter().enumerate() {
            if r.actuators.len() != m_ac {
                return Err(Error::Schema(format!(
                    "record {row} has {} actuators, expected {m_ac}",
                    r.actuators.len()
                )));
            }
            db.tuples.insert(r.actuators.clone());
        }
        Ok(db)
    }

    pub fn m_ac(&self) -> usize {
        self.m_ac
    }

    pub fn devices(&self) -> &[String] {
        &self.devices
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ActuatorTuple> {
        self.tuples.iter()
    }

    fn check(&self, nu: &[u8]) -> Result<()> {
        if nu.len() != self.m_ac {
            return Err(Error::Schema(format!(
                "actuator tuple has {} states, expected {}",
                nu.len(),
                self.m_ac
            )));
        }
        Ok(())
    }

    pub fn contains(&self, nu: &[u8]) -> Result<bool> {
        self.check(nu)?;
        Ok(self.tuples.contains(nu))
    }

    /// Returns whether the tuple was new.
    pub fn insert(&mut self, nu: &[u8]) -> Result<bool> {
        self.check(nu)?;
        Ok(self.tuples.insert(nu.to_vec()))
    }

    /// Header `# m_ac=<n> devices=<a,b,..>` followed by one sorted tuple per line.
    pub fn to_snapshot(&self) -> String {
        let mut out = format!("# m_ac={} devices={}\n", self.m_ac, self.devices.join(","));
        for t in &self.tuples {
            let line: Vec<String> = t.iter().map(u8::to_string).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Schema("empty actuator snapshot".into()))?;
        let rest = header
            .strip_prefix("# m_ac=")
            .ok_or_else(|| Error::Schema(format!("bad snapshot header: {header}")))?;
        let (n, devices) = rest
            .split_once(" devices=")
            .ok_or_else(|| Error::Schema(format!("bad snapshot header: {header}")))?;
        let m_ac: usize = n
            .parse()
            .map_err(|_| Error::Schema(format!("bad m_ac in header: {n}")))?;
        let devices: Vec<String> = if devices.is_empty() {
            Vec::new()
        } else {
            devices.split(',').map(str::to_string).collect()
        };
        if devices.len() != m_ac {
            return Err(Error::Schema(format!(
                "header lists {} devices for m_ac={m_ac}",
                devices.len()
            )));
        }
        let mut db = Self::with_devices(devices);
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let tuple = line
                .split(',')
                .map(|c| c.trim().parse::<u8>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Schema(format!("snapshot line {}: {e}", i + 2)))?;
            db.insert(&tuple)?;
        }
        Ok(db)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_snapshot()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_snapshot(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(a: &[u8]) -> SampleRecord {
        SampleRecord {
            timestamp: 0,
            sensors: vec![0.0],
            actuators: a.to_vec(),
            label: None,
        }
    }

    #[test]
    fn set_semantics() {
        let db = ActuatorDb::build(&[rec(&[1, 2]), rec(&[1, 2]), rec(&[2, 2])], None).unwrap();
        assert_eq!(db.len(), 2);
        assert!(db.contains(&[1, 2]).unwrap());
        assert!(!db.contains(&[1, 1]).unwrap());
    }

    #[test]
    fn insert_is_idempotent() {
        let mut db = ActuatorDb::new(2);
        assert!(db.insert(&[0, 1]).unwrap());
        let before = db.clone();
        assert!(!db.insert(&[0, 1]).unwrap());
        assert_eq!(db, before);
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(
            ActuatorDb::build(&[rec(&[1, 2]), rec(&[1])], None),
            Err(Error::Schema(_))
        ));
        assert!(ActuatorDb::new(2).contains(&[1]).is_err());
        assert!(ActuatorDb::new(2).clone().insert(&[1, 1, 1]).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let mut db = ActuatorDb::with_devices(vec!["MV101".into(), "P101".into()]);
        db.insert(&[2, 1]).unwrap();
        db.insert(&[1, 2]).unwrap();
        let text = db.to_snapshot();
        assert_eq!(text, "# m_ac=2 devices=MV101,P101\n1,2\n2,1\n");
        assert_eq!(ActuatorDb::from_snapshot(&text).unwrap(), db);
    }
}
