//! Online anomaly decision.

use serde::{Deserialize, Serialize};

use crate::actuator_db::ActuatorDb;
use crate::error::{Error, Result};
use crate::nn::mse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// A sensor alarm needs `w_anom + 1` consecutive exceedances
    /// (the closed interval `[t - w_anom, t]`).
    pub w_anom: usize,
    /// Minimum length of a reported alarm run, in samples.
    pub w_grace: usize,
    /// Interval length `s` between threshold updates.
    pub interval: usize,
    /// Whether grace time also gates actuator alarms.
    #[serde(default)]
    pub grace_actuators: bool,
}

impl DetectorConfig {
    pub fn new(w_anom: usize, w_grace: usize, interval: usize) -> Self {
        Self {
            w_anom,
            w_grace,
            interval,
            grace_actuators: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_anom == 0 {
            return Err(Error::Config("W_anom must be >= 1".into()));
        }
        if self.interval == 0 {
            return Err(Error::Config("interval length must be >= 1".into()));
        }
        Ok(())
    }
}

/// `MSE_{g,t}` between observed and predicted sensors of one section.
pub fn mse_section(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    mse(predicted, observed)
}

/// Bounds `[t', t' + W_in)` of the input window that predicts time `t`.
pub fn input_window_for(t: usize, w_in: usize, horizon: usize) -> Result<(usize, usize)> {
    let first = w_in + horizon;
    if t < first {
        return Err(Error::WarmUp {
            t,
            first,
        });
    }
    let start = t - first;
    Ok((start, start + w_in))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "section", rename_all = "snake_case")]
pub enum AlarmSource {
    Actuator,
    Section(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub t: usize,
    pub source: AlarmSource,
    /// Offending section when the sensor branch fired (largest MSE/T ratio).
    pub section: Option<usize>,
    pub mse: Option<f64>,
    pub threshold: Option<f64>,
    pub label: u8,
}

/// Result of one detection step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub t: usize,
    pub label: bool,
    pub actuator_alarm: bool,
    /// Sections whose counter reached `W_anom + 1`.
    pub sections: Vec<usize>,
    pub mse: Vec<f64>,
    pub alarm: Option<AlarmEvent>,
}

impl StepOutcome {
    pub fn sensor_alarm(&self) -> bool {
        !self.sections.is_empty()
    }
}

/// Per-section consecutive-exceedance counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detector {
    config: DetectorConfig,
    first_t: usize,
    counters: Vec<usize>,
    last_t: Option<usize>,
}

impl Detector {
    /// `first_t` is the earliest time with a prediction, `W_in + H`.
    pub fn new(config: DetectorConfig, sections: usize, first_t: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            first_t,
            counters: vec![0; sections],
            last_t: None,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn counters(&self) -> &[usize] {
        &self.counters
    }

    pub fn reset(&mut self) {
        self.counters.iter_mut().for_each(|c| *c = 0);
        self.last_t = None;
    }

    /// Decision at `t` from already computed section errors.
    pub fn step_mse(&mut self, t: usize, actuator_known: bool, mse: &[f64], thresholds: &[f64]) -> Result<StepOutcome> {
        if t < self.first_t {
            return Err(Error::WarmUp {
                t,
                first: self.first_t,
            });
        }
        if mse.len() != self.counters.len() || thresholds.len() != self.counters.len() {
            return Err(Error::PipelineOrder(format!(
                "detector has {} sections but got {} errors and {} thresholds at t={t}",
                self.counters.len(),
                mse.len(),
                thresholds.len()
            )));
        }
        if self.last_t.is_some_and(|p| t <= p) {
            return Err(Error::PipelineOrder(format!("time {t} is not after the previous step")));
        }
        self.last_t = Some(t);
        let need = self.config.w_anom + 1;
        let mut sections = Vec::new();
        for (g, c) in self.counters.iter_mut().enumerate() {
            if mse[g] > thresholds[g] {
                *c += 1;
            } else {
                *c = 0;
            }
            if *c >= need {
                sections.push(g);
            }
        }
        let actuator_alarm = !actuator_known;
        let label = actuator_alarm || !sections.is_empty();
        let worst = sections.iter().copied().max_by(|&a, &b| {
            ratio(mse[a], thresholds[a]).total_cmp(&ratio(mse[b], thresholds[b]))
        });
        let alarm = label.then(|| AlarmEvent {
            t,
            source: if actuator_alarm {
                AlarmSource::Actuator
            } else {
                AlarmSource::Section(worst.expect("sensor branch fired"))
            },
            section: worst,
            mse: worst.map(|g| mse[g]),
            threshold: worst.map(|g| thresholds[g]),
            label: 1,
        });
        Ok(StepOutcome {
            t,
            label,
            actuator_alarm,
            sections,
            mse: mse.to_vec(),
            alarm,
        })
    }

    /// Decision at `t` from per-section observations and predictions.
    pub fn step(
        &mut self,
        t: usize,
        actuators: &[u8],
        observed: &[Vec<f64>],
        predicted: &[Option<Vec<f64>>],
        thresholds: &[f64],
        db: &ActuatorDb,
    ) -> Result<StepOutcome> {
        if observed.len() != predicted.len() {
            return Err(Error::PipelineOrder("observation/prediction count mismatch".into()));
        }
        let mut errors = Vec::with_capacity(observed.len());
        for (g, (o, p)) in observed.iter().zip(predicted).enumerate() {
            let p = p.as_ref().ok_or_else(|| {
                Error::PipelineOrder(format!("no prediction for section {g} at t={t}"))
            })?;
            errors.push(mse_section(o, &p[..o.len().min(p.len())])?);
        }
        let known = db.contains(actuators)?;
        self.step_mse(t, known, &errors, thresholds)
    }
}

fn ratio(mse: f64, threshold: f64) -> f64 {
    if threshold > 0.0 {
        mse / threshold
    } else {
        f64::INFINITY
    }
}

/// Keeps only alarm runs lasting at least `w_grace` samples.
pub fn apply_grace(alarms: &[bool], w_grace: usize) -> Vec<bool> {
    let mut out = vec![false; alarms.len()];
    let mut i = 0;
    while i < alarms.len() {
        if !alarms[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < alarms.len() && alarms[i] {
            i += 1;
        }
        if i - start >= w_grace {
            out[start..i].iter_mut().for_each(|o| *o = true);
        }
    }
    out
}

/// Streaming form of [`apply_grace`]. A run is released once it reaches
/// `w_grace` samples, including the samples that were held back.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GraceFilter {
    w_grace: usize,
    run_start: Option<usize>,
    run_len: usize,
}

impl GraceFilter {
    pub fn new(w_grace: usize) -> Self {
        Self {
            w_grace,
            run_start: None,
            run_len: 0,
        }
    }

    /// Times newly reported after observing `alarm` at `t`. Times must be
    /// consecutive for runs to join.
    pub fn push(&mut self, t: usize, alarm: bool) -> Vec<usize> {
        if !alarm {
            self.run_start = None;
            self.run_len = 0;
            return Vec::new();
        }
        let start = *self.run_start.get_or_insert(t);
        self.run_len += 1;
        match self.run_len.cmp(&self.w_grace.max(1)) {
            std::cmp::Ordering::Less => Vec::new(),
            std::cmp::Ordering::Equal => (start..=t).collect(),
            std::cmp::Ordering::Greater => vec![t],
        }
    }

    pub fn in_run(&self) -> bool {
        self.run_start.is_some()
    }
}

/// Combines sensor and actuator alarm streams into the reported stream.
pub fn reported_alarms(sensor: &[bool], actuator: &[bool], cfg: &DetectorConfig) -> Vec<bool> {
    if cfg.grace_actuators {
        let any: Vec<bool> = sensor.iter().zip(actuator).map(|(s, a)| *s || *a).collect();
        apply_grace(&any, cfg.w_grace)
    } else {
        apply_grace(sensor, cfg.w_grace)
            .into_iter()
            .zip(actuator)
            .map(|(s, a)| s || *a)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_bounds() {
        assert_eq!(input_window_for(110, 60, 50).unwrap(), (0, 60));
        assert_eq!(input_window_for(70, 50, 20).unwrap(), (0, 50));
        assert_eq!(input_window_for(200, 60, 50).unwrap(), (90, 150));
        assert!(matches!(input_window_for(109, 60, 50), Err(Error::WarmUp { .. })));
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_section(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_section(&[0.5; 4], &[0.0; 4]).unwrap(), 0.25);
        assert!(mse_section(&[0.5; 4], &[0.0; 3]).is_err());
    }

    #[test]
    fn unknown_actuators_alarm_immediately() {
        let mut d = Detector::new(DetectorConfig::new(30, 0, 32), 1, 0).unwrap();
        let o = d.step_mse(0, false, &[0.0], &[1.0]).unwrap();
        assert!(o.label && o.actuator_alarm);
        assert_eq!(o.alarm.unwrap().source, AlarmSource::Actuator);
    }

    #[test]
    fn short_exceedance_resets() {
        let mut d = Detector::new(DetectorConfig::new(3, 0, 32), 1, 0).unwrap();
        for t in 0..2 {
            assert!(!d.step_mse(t, true, &[2.0], &[1.0]).unwrap().label);
        }
        assert!(!d.step_mse(2, true, &[0.5], &[1.0]).unwrap().label);
        assert_eq!(d.counters(), &[0]);
        for t in 3..6 {
            assert!(!d.step_mse(t, true, &[2.0], &[1.0]).unwrap().label);
        }
        let o = d.step_mse(6, true, &[2.0], &[1.0]).unwrap();
        assert!(o.label);
        assert_eq!(o.alarm.unwrap().source, AlarmSource::Section(0));
    }

    #[test]
    fn warm_up_and_ordering() {
        let mut d = Detector::new(DetectorConfig::new(1, 0, 4), 2, 10).unwrap();
        assert!(matches!(d.step_mse(9, true, &[0.0, 0.0], &[1.0, 1.0]), Err(Error::WarmUp { .. })));
        d.step_mse(10, true, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(matches!(d.step_mse(10, true, &[0.0, 0.0], &[1.0, 1.0]), Err(Error::PipelineOrder(_))));
        assert!(matches!(d.step_mse(11, true, &[0.0], &[1.0, 1.0]), Err(Error::PipelineOrder(_))));
    }

    #[test]
    fn missing_prediction() {
        let mut d = Detector::new(DetectorConfig::new(1, 0, 4), 1, 0).unwrap();
        let mut db = ActuatorDb::new(1);
        db.insert(&[1]).unwrap();
        let r = d.step(0, &[1], &[vec![0.0]], &[None], &[1.0], &db);
        assert!(matches!(r, Err(Error::PipelineOrder(_))));
    }

    #[test]
    fn grace_examples() {
        let s = [true, true, true, false, true];
        assert_eq!(apply_grace(&s, 0), s.to_vec());
        assert_eq!(apply_grace(&s, 5), vec![false; 5]);
        assert_eq!(apply_grace(&s, 2), vec![true, true, true, false, false]);
    }

    #[test]
    fn streaming_grace_matches_batch() {
        let s = [true, true, false, true, true, true, true, false, true];
        for w in 0..6 {
            let mut f = GraceFilter::new(w);
            let mut out = vec![false; s.len()];
            for (t, &a) in s.iter().enumerate() {
                for r in f.push(t, a) {
                    out[r] = true;
                }
            }
            assert_eq!(out, apply_grace(&s, w), "w_grace={w}");
        }
    }

    #[test]
    fn actuator_alarms_bypass_grace() {
        let cfg = DetectorConfig::new(1, 5, 4);
        let r = reported_alarms(&[false, true, false], &[true, false, false], &cfg);
        assert_eq!(r, vec![true, false, false]);
        let r = reported_alarms(&[false, true, false], &[true, false, false], &DetectorConfig { grace_actuators: true, ..cfg });
        assert_eq!(r, vec![false; 3]);
    }
}
