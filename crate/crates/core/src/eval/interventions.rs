use crate::error::{Error, Result};

/// Maximal runs of reported points that fall outside labeled attacks. Each
/// run is one technician intervention.
pub fn false_alarm_episodes(reported: &[bool], labels: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for t in 0..reported.len() {
        let fa = reported[t] && !labels.get(t).copied().unwrap_or(false);
        match (fa, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                out.push((s, t - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, reported.len() - 1));
    }
    out
}

/// False alarms per hour of monitored time.
pub fn interventions_rate(false_alarms: usize, duration_seconds: f64) -> Result<f64> {
    if !(duration_seconds > 0.0) {
        return Err(Error::dim(format!(
            "duration must be positive, got {duration_seconds} s"
        )));
    }
    Ok(false_alarms as f64 / (duration_seconds / 3600.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates() {
        assert_eq!(interventions_rate(0, 3600.0).unwrap(), 0.0);
        assert_eq!(interventions_rate(10, 7200.0).unwrap(), 5.0);
        assert!(interventions_rate(1, 0.0).is_err());
    }

    #[test]
    fn episodes_exclude_attacks() {
        let r = [true, true, false, true, true, true, false, true];
        let l = [false, false, false, false, true, false, false, false];
        assert_eq!(false_alarm_episodes(&r, &l), vec![(0, 1), (3, 3), (5, 5), (7, 7)]);
    }
}
