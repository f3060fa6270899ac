use std::path::Path;

use chrono::NaiveDateTime;

use super::profile::DatasetProfile;
use super::record::{Label, SampleRecord};
use crate::error::{Error, Result};

fn parse_label(cell: &str) -> Option<Label> {
    let c: String = cell.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
    match c.as_str() {
        "" => None,
        "normal" | "0" => Some(Label::Normal),
        "attack" | "1" => Some(Label::Attack),
        _ => None,
    }
}

fn parse_timestamp(cell: &str, format: Option<&str>) -> std::result::Result<i64, String> {
    match format {
        None => cell.parse::<i64>().map_err(|e| format!("timestamp {cell:?}: {e}")),
        Some(f) => NaiveDateTime::parse_from_str(cell, f)
            .map(|d| d.and_utc().timestamp())
            .map_err(|e| format!("timestamp {cell:?} does not match {f:?}: {e}")),
    }
}

/// Reads records in file order. Row indices in errors count data rows from 1.
pub fn load_csv(path: &Path, profile: &DatasetProfile) -> Result<Vec<SampleRecord>> {
    if !path.exists() {
        return Err(Error::MissingDataset {
            path: path.to_path_buf(),
            hint: format!(
                "the {} dataset is not bundled; obtain it from its owner and place the CSV at this path",
                profile.name
            ),
        });
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, profile)
}

pub fn read_csv<R: std::io::Read>(reader: R, profile: &DatasetProfile) -> Result<Vec<SampleRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Ingestion {
                row: 0,
                reason: format!("missing column {name}"),
            })
    };
    let ts = col(&profile.timestamp_column)?;
    let sensors = profile.sensors.iter().map(|s| col(s)).collect::<Result<Vec<_>>>()?;
    let actuators = profile.actuators.iter().map(|s| col(s)).collect::<Result<Vec<_>>>()?;
    let label = profile.label_column.as_deref().map(col).transpose()?;
    let fmt = profile.timestamp_format.as_deref();

    let mut out: Vec<SampleRecord> = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let bad = |reason: String| Error::Ingestion { row: row_no, reason };
        let row = row.map_err(|e| bad(e.to_string()))?;
        let cell = |c: usize| row.get(c).unwrap_or("");
        let timestamp = parse_timestamp(cell(ts), fmt).map_err(bad)?;
        if let Some(prev) = out.last() {
            if timestamp != prev.timestamp + 1 {
                return Err(bad(format!(
                    "timestamp {timestamp} does not follow {} by one second",
                    prev.timestamp
                )));
            }
        }
        let sensor_values = sensors
            .iter()
            .zip(&profile.sensors)
            .map(|(&c, name)| match cell(c).parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(bad(format!("{name} is {v}"))),
                Err(_) => Err(bad(format!("{name} is not numeric: {:?}", cell(c)))),
            })
            .collect::<Result<Vec<_>>>()?;
        let actuator_values = actuators
            .iter()
            .zip(&profile.actuators)
            .map(|(&c, name)| {
                cell(c)
                    .parse::<u8>()
                    .map_err(|_| bad(format!("{name} is not an integer state: {:?}", cell(c))))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(SampleRecord {
            timestamp,
            sensors: sensor_values,
            actuators: actuator_values,
            label: label.and_then(|c| parse_label(cell(c))),
        });
    }
    Ok(out)
}

/// Writes records with integer timestamps and `Normal`/`Attack` labels.
pub fn write_csv(path: &Path, records: &[SampleRecord], profile: &DatasetProfile) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec![profile.timestamp_column.clone()];
    header.extend(profile.sensors.iter().cloned());
    header.extend(profile.actuators.iter().cloned());
    if let Some(l) = &profile.label_column {
        header.push(l.clone());
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.timestamp.to_string()];
        row.extend(r.sensors.iter().map(|v| v.to_string()));
        row.extend(r.actuators.iter().map(|v| v.to_string()));
        if profile.label_column.is_some() {
            row.push(
                match r.label {
                    Some(Label::Attack) => "Attack",
                    Some(Label::Normal) => "Normal",
                    None => "",
                }
                .into(),
            );
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> DatasetProfile {
        DatasetProfile {
            name: "toy".into(),
            timestamp_column: "t".into(),
            timestamp_format: None,
            sensors: vec!["L1".into(), "F1".into()],
            actuators: vec!["P1".into()],
            label_column: Some("label".into()),
            sections: vec![vec!["L1".into(), "F1".into()]],
            validation_fraction: 0.2,
        }
    }

    #[test]
    fn round_trip() {
        let text = "t,F1,L1,P1,label\n10,0.5,1.25,2,Normal\n11,0.75,-3,1,Attack\n12,1e-3,0,1,\n";
        let r = read_csv(text.as_bytes(), &profile()).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[0].sensors, vec![1.25, 0.5]);
        assert_eq!(r[1].actuators, vec![1]);
        assert_eq!(r[1].label, Some(Label::Attack));
        assert_eq!(r[2].label, None);
        assert_eq!(r[2].timestamp, 12);
    }

    #[test]
    fn row_errors() {
        let p = profile();
        let err = |text: &str| match read_csv(text.as_bytes(), &p) {
            Err(Error::Ingestion { row, .. }) => row,
            other => panic!("expected ingestion error, got {other:?}"),
        };
        assert_eq!(err("t,F1,L1,P1,label\n1,0,0,1,Normal\n2,NaN,0,1,Normal\n"), 2);
        assert_eq!(err("t,F1,L1,P1,label\n1,0,x,1,Normal\n"), 1);
        assert_eq!(err("t,F1,L1,P1,label\n1,0,0,1.0,Normal\n"), 1);
        assert_eq!(err("t,F1,L1,P1,label\n1,0,0,1,Normal\n3,0,0,1,Normal\n"), 2);
        assert_eq!(err("t,F1,P1,label\n1,0,1,Normal\n"), 0);
    }

    #[test]
    fn swat_timestamps() {
        let p = DatasetProfile::swat();
        let a = parse_timestamp("28/12/2015 10:00:00 AM", p.timestamp_format.as_deref()).unwrap();
        let b = parse_timestamp("28/12/2015 10:00:01 AM", p.timestamp_format.as_deref()).unwrap();
        assert_eq!(b - a, 1);
        assert_eq!(parse_label(" A ttack"), Some(Label::Attack));
    }

    #[test]
    fn missing_file_gives_hint() {
        let r = load_csv(Path::new("/nonexistent/swat.csv"), &DatasetProfile::swat());
        assert!(matches!(r, Err(Error::MissingDataset { .. })));
    }
}
