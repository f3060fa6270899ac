use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[start, end]` of labeled attack records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackInterval {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub interval: AttackInterval,
    pub detected_during: bool,
    /// First alarm after the end falls within `delta_after` seconds, with no
    /// alarm during the attack.
    pub detected_after: bool,
    pub time_to_detect: Option<usize>,
}

impl AttackOutcome {
    pub fn detected(&self) -> bool {
        self.detected_during || self.detected_after
    }
}

/// Maximal runs of `true` labels.
pub fn intervals_from_labels(labels: &[bool]) -> Vec<AttackInterval> {
    let mut out = Vec::new();
    let mut start = None;
    for (t, &l) in labels.iter().enumerate() {
        match (l, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                out.push(AttackInterval { start: s, end: t - 1 });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(AttackInterval {
            start: s,
            end: labels.len() - 1,
        });
    }
    out
}

/// Per-attack detection and the number of detected attacks.
pub fn attack_outcomes(
    alarms: &[bool],
    intervals: &[AttackInterval],
    delta_after: usize,
) -> Result<(Vec<AttackOutcome>, usize)> {
    for (i, a) in intervals.iter().enumerate() {
        if a.start > a.end {
            return Err(Error::Input(format!("attack interval {i} ends before it starts")));
        }
        if i > 0 && intervals[i - 1].end >= a.start {
            return Err(Error::Input(format!(
                "attack intervals {} and {i} overlap or are out of order",
                i - 1
            )));
        }
    }
    let first_alarm = |from: usize, to: usize| {
        (from..=to)
            .take_while(|&t| t < alarms.len())
            .find(|&t| alarms[t])
    };
    let outcomes: Vec<AttackOutcome> = intervals
        .iter()
        .map(|&a| {
            let during = first_alarm(a.start, a.end);
            let after = during.is_none() && first_alarm(a.end + 1, a.end + delta_after).is_some();
            AttackOutcome {
                interval: a,
                detected_during: during.is_some(),
                detected_after: after,
                time_to_detect: during.map(|t| t - a.start),
            }
        })
        .collect();
    let n = outcomes.iter().filter(|o| o.detected()).count();
    Ok((outcomes, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let iv = [AttackInterval { start: 10, end: 20 }];
        let mut alarms = vec![false; 100];
        assert_eq!(attack_outcomes(&alarms, &iv, 60).unwrap().1, 0);
        alarms[15] = true;
        let (o, n) = attack_outcomes(&alarms, &iv, 60).unwrap();
        assert!(o[0].detected_during && !o[0].detected_after);
        assert_eq!((n, o[0].time_to_detect), (1, Some(5)));
        alarms[15] = false;
        alarms[50] = true;
        let (o, _) = attack_outcomes(&alarms, &iv, 60).unwrap();
        assert!(o[0].detected_after);
        let (o, _) = attack_outcomes(&alarms, &iv, 20).unwrap();
        assert!(!o[0].detected_after);
    }

    #[test]
    fn overlapping_rejected() {
        let iv = [AttackInterval { start: 0, end: 5 }, AttackInterval { start: 5, end: 8 }];
        assert!(attack_outcomes(&[false; 10], &iv, 0).is_err());
    }

    #[test]
    fn label_runs() {
        let l = [false, true, true, false, true];
        assert_eq!(
            intervals_from_labels(&l),
            vec![AttackInterval { start: 1, end: 2 }, AttackInterval { start: 4, end: 4 }]
        );
    }
}
