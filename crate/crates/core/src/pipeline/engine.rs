use serde::{Deserialize, Serialize};

use super::fit::TrainedSystem;
use crate::adapt::{handle_feedback, AdaptReport, FaFlags, FeedbackBatch, FeedbackDecision, TuningConfig};
use crate::data::{input_window, FeatureMatrix, SampleRecord};
use crate::detector::{mse_section, AlarmEvent, Detector, DetectorConfig, GraceFilter};
use crate::error::{Error, Result};
use crate::nn::SgdConfig;
use crate::threshold::{online_update, tune_threshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Forecast from recent errors every interval.
    Adaptive,
    /// Fixed at the validation offset.
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub detector: DetectorConfig,
    pub median_kernel: usize,
    pub threshold_mode: ThresholdMode,
    /// Per-interval threshold-model update; `None` freezes it.
    pub online_update: Option<SgdConfig>,
    pub tuning: TuningConfig,
}

impl EngineConfig {
    pub fn new(detector: DetectorConfig, median_kernel: usize) -> Self {
        Self {
            detector,
            median_kernel,
            threshold_mode: ThresholdMode::Adaptive,
            online_update: Some(SgdConfig::new(0.01, 32).with_max_grad_norm(1.0)),
            tuning: TuningConfig::default(),
        }
    }

    /// `W_anom=30`, `W_grace=10`, `s=32` and the 59-sample median kernel.
    pub fn synthetic() -> Self {
        Self::default()
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self::new(DetectorConfig::new(30, 10, 32), 59)
    }
}

/// What happened when one record was processed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub t: usize,
    pub timestamp: i64,
    pub warm_up: bool,
    pub mse: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub label: bool,
    pub actuator_alarm: bool,
    pub sensor_sections: Vec<usize>,
    pub alarm: Option<AlarmEvent>,
    /// Alarm times that became reportable at this step, possibly earlier
    /// than `t` when a run just outlasted the grace time.
    pub reported: Vec<usize>,
    pub interval_start: bool,
    pub adaptations: Vec<AdaptReport>,
    pub model_version: u64,
}

/// Streaming detector over a trained system. Feed records in time order
/// with [`Engine::push`].
#[derive(Debug, Clone)]
pub struct Engine {
    system: TrainedSystem,
    cfg: EngineConfig,
    first_t: usize,
    features: FeatureMatrix,
    timestamps: Vec<i64>,
    actuators: Vec<Vec<u8>>,
    /// Error history per section; index `prefix + t - first_t`.
    history: Vec<Vec<f64>>,
    prefix: usize,
    thresholds: Vec<f64>,
    /// Start index (in history) and series of the last tuning batch.
    last_batch: Option<(usize, Vec<Vec<f64>>)>,
    detector: Detector,
    grace: GraceFilter,
    alarms: Vec<Option<AlarmEvent>>,
    reported: Vec<bool>,
    queued: Vec<(usize, FaFlags)>,
    version: u64,
    adaptations: Vec<AdaptReport>,
    seed: u64,
}

impl Engine {
    pub fn new(system: TrainedSystem, cfg: EngineConfig) -> Result<Self> {
        cfg.detector.validate()?;
        let mc = system.model.config().clone();
        let g = mc.sections();
        if system.thresholds.len() != g {
            return Err(Error::Config("one threshold model per section is required".into()));
        }
        let s = cfg.detector.interval;
        let want = mc.w_in + mc.horizon + s;
        let history: Vec<Vec<f64>> = system
            .validation_mse
            .iter()
            .map(|v| v[v.len().saturating_sub(want)..].to_vec())
            .collect();
        let prefix = history.first().map_or(0, Vec::len);
        if prefix < mc.w_in {
            return Err(Error::Config(format!(
                "validation error history of {prefix} values is shorter than W_in={}",
                mc.w_in
            )));
        }
        let thresholds = system.thresholds.iter().map(|t| t.t_base).collect();
        Ok(Self {
            first_t: mc.w_in + mc.horizon,
            features: FeatureMatrix {
                m_se: mc.m_se,
                m_ac: mc.m_ac,
                rows: Vec::new(),
            },
            timestamps: Vec::new(),
            actuators: Vec::new(),
            history,
            prefix,
            thresholds,
            last_batch: None,
            detector: Detector::new(cfg.detector, g, mc.w_in + mc.horizon)?,
            grace: GraceFilter::new(cfg.detector.w_grace),
            alarms: Vec::new(),
            reported: Vec::new(),
            queued: Vec::new(),
            version: 0,
            adaptations: Vec::new(),
            seed: 0x5eed,
            system,
            cfg,
        })
    }

    pub fn system(&self) -> &TrainedSystem {
        &self.system
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn model_version(&self) -> u64 {
        self.version
    }

    /// Records processed so far.
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn first_detectable(&self) -> usize {
        self.first_t
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn alarm(&self, t: usize) -> Option<&AlarmEvent> {
        self.alarms.get(t).and_then(Option::as_ref)
    }

    pub fn adaptations(&self) -> &[AdaptReport] {
        &self.adaptations
    }

    /// Start of the interval that contains `t`.
    pub fn interval_of(&self, t: usize) -> Option<usize> {
        let s = self.cfg.detector.interval;
        (t >= self.first_t).then(|| self.first_t + (t - self.first_t) / s * s)
    }

    fn hist_index(&self, t: usize) -> usize {
        self.prefix + t - self.first_t
    }

    fn begin_interval(&mut self, t: usize, adaptations: &mut Vec<AdaptReport>) -> Result<()> {
        for (ft, flags) in std::mem::take(&mut self.queued) {
            adaptations.push(self.feedback(ft, &flags)?);
        }
        if self.cfg.threshold_mode == ThresholdMode::Static {
            return Ok(());
        }
        let mc = self.system.model.config();
        let (w_in, h, s) = (mc.w_in, mc.horizon, self.cfg.detector.interval);
        let kernel = self.cfg.median_kernel;
        if let (Some(sgd), Some((start, series))) = (self.cfg.online_update, self.last_batch.take()) {
            for (g, th) in self.system.thresholds.iter_mut().enumerate() {
                let first = start + w_in + h;
                let targets = &self.history[g][first..first + series[g].len() - w_in + 1];
                self.seed = self.seed.wrapping_add(1);
                let before = th.ttnn.clone();
                if online_update(&mut th.ttnn, &series[g], targets, kernel, sgd, self.seed).is_err() {
                    th.ttnn = before;
                }
            }
        }
        let now = self.hist_index(t);
        let len = w_in + s - 1;
        let end = (now + s).saturating_sub(h + 1).min(now).max(len.min(now));
        let start = end.saturating_sub(len);
        let mut batch = Vec::with_capacity(self.history.len());
        for (g, th) in self.system.thresholds.iter().enumerate() {
            let series = self.history[g][start..end].to_vec();
            self.thresholds[g] = tune_threshold(&th.ttnn, &series, kernel, th.t_base)?.threshold;
            batch.push(series);
        }
        if end - start == len {
            self.last_batch = Some((start, batch));
        }
        Ok(())
    }

    /// Processes the next record.
    pub fn push(&mut self, record: &SampleRecord) -> Result<StepReport> {
        let sys = &self.system;
        if record.sensors.len() != sys.normalizer.m_se() || record.actuators.len() != sys.normalizer.m_ac() {
            return Err(Error::Schema("record width does not match the trained system".into()));
        }
        if let Some(&prev) = self.timestamps.last() {
            if record.timestamp <= prev {
                return Err(Error::PipelineOrder(format!(
                    "timestamp {} does not advance past {prev}",
                    record.timestamp
                )));
            }
        }
        let t = self.timestamps.len();
        self.features.rows.extend(sys.normalizer.feature_row(record));
        self.timestamps.push(record.timestamp);
        self.actuators.push(record.actuators.clone());
        self.alarms.push(None);
        self.reported.push(false);
        let g = self.history.len();
        if t < self.first_t {
            return Ok(StepReport {
                t,
                timestamp: record.timestamp,
                warm_up: true,
                mse: vec![f64::NAN; g],
                thresholds: self.thresholds.clone(),
                label: false,
                actuator_alarm: false,
                sensor_sections: Vec::new(),
                alarm: None,
                reported: Vec::new(),
                interval_start: false,
                adaptations: Vec::new(),
                model_version: self.version,
            });
        }
        let mut adaptations = Vec::new();
        let interval_start = (t - self.first_t) % self.cfg.detector.interval == 0;
        if interval_start {
            self.begin_interval(t, &mut adaptations)?;
        }

        let model = &self.system.model;
        let mc = model.config();
        let x = input_window(&self.features, t - self.first_t, mc.w_in);
        let preds = model.forward(&x)?;
        let observed = &self.features.row(t)[..mc.m_se];
        let mut errors = Vec::with_capacity(g);
        for (k, p) in preds.iter().enumerate() {
            let obs: Vec<f64> = mc.layout.group(k).iter().map(|&i| observed[i]).collect();
            errors.push(mse_section(&obs, &p[..obs.len()])?);
        }
        for (k, e) in errors.iter().enumerate() {
            self.history[k].push(*e);
        }
        let known = self.system.db.contains(&record.actuators)?;
        let out = self.detector.step_mse(t, known, &errors, &self.thresholds)?;
        self.alarms[t] = out.alarm.clone();

        let mut newly = Vec::new();
        let graced = if self.cfg.detector.grace_actuators {
            self.grace.push(t, out.label)
        } else {
            if out.actuator_alarm {
                newly.push(t);
            }
            self.grace.push(t, out.sensor_alarm())
        };
        newly.extend(graced);
        newly.retain(|&r| !std::mem::replace(&mut self.reported[r], true));
        newly.sort_unstable();

        Ok(StepReport {
            t,
            timestamp: record.timestamp,
            warm_up: false,
            mse: errors,
            thresholds: self.thresholds.clone(),
            label: out.label,
            actuator_alarm: out.actuator_alarm,
            sensor_sections: out.sections,
            alarm: out.alarm,
            reported: newly,
            interval_start,
            adaptations,
            model_version: self.version,
        })
    }

    /// Instances whose targets fall in the interval containing `t`.
    pub fn feedback_batch(&self, t: usize) -> Result<FeedbackBatch> {
        let start = self
            .interval_of(t)
            .filter(|_| t < self.len())
            .ok_or_else(|| Error::Input(format!("no detection result at t={t}")))?;
        let mc = self.system.model.config();
        let steps = mc.predict_steps;
        let end = (start + self.cfg.detector.interval).min(self.len() + 1 - steps);
        let mut batch = FeedbackBatch::default();
        for tau in start..end {
            batch.inputs.push(input_window(&self.features, tau - self.first_t, mc.w_in));
            batch.targets.push(
                (0..steps)
                    .flat_map(|k| self.features.row(tau + k)[..mc.m_se].iter().copied())
                    .collect(),
            );
        }
        Ok(batch)
    }

    /// Applies a false-alarm verdict for the alarm at `t` right away.
    pub fn feedback(&mut self, t: usize, flags: &FaFlags) -> Result<AdaptReport> {
        let decision = FeedbackDecision {
            t,
            flags: flags.clone(),
            actuators: self
                .actuators
                .get(t)
                .cloned()
                .ok_or_else(|| Error::Input(format!("no record at t={t}")))?,
            batch: self.feedback_batch(t)?,
        };
        let report = handle_feedback(&decision, &mut self.system.model, &mut self.system.db, &self.cfg.tuning)?;
        self.version += 1;
        self.adaptations.push(report.clone());
        Ok(report)
    }

    /// Defers a verdict to the next interval boundary, when the interval
    /// containing `t` has been fully observed.
    pub fn queue_feedback(&mut self, t: usize, flags: FaFlags) {
        self.queued.push((t, flags));
    }
}
