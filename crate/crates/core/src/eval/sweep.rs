use std::path::Path;

use serde::{Deserialize, Serialize};

use super::replay::{redetect, replay, summarize, summarize_trace, FeedbackPolicy, RunSummary, RunTrace, Technician};
use crate::data::{add_gaussian_noise, attack_labels, NoiseConfig, SampleRecord};
use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::pipeline::{Engine, EngineConfig, ThresholdMode, TrainedSystem};

/// One sweep setting and how the detector scored under it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: String,
    pub value: f64,
    pub threshold_mode: ThresholdMode,
    pub summary: RunSummary,
}

fn mode_name(m: ThresholdMode) -> &'static str {
    match m {
        ThresholdMode::Adaptive => "adaptive",
        ThresholdMode::Static => "static",
    }
}

/// Re-scores a feedback-free replay for every `W_anom` in `values`.
pub fn sweep_w_anom(
    trace: &RunTrace,
    base: &DetectorConfig,
    values: &[usize],
    mode: ThresholdMode,
    delta_after: usize,
) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&w| {
            let cfg = DetectorConfig { w_anom: w, ..*base };
            redetect_point(trace, &cfg, "w_anom", w as f64, mode, delta_after)
        })
        .collect()
}

/// Re-scores a feedback-free replay for every `W_grace` in `values`.
pub fn sweep_w_grace(
    trace: &RunTrace,
    base: &DetectorConfig,
    values: &[usize],
    mode: ThresholdMode,
    delta_after: usize,
) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&w| {
            let cfg = DetectorConfig { w_grace: w, ..*base };
            redetect_point(trace, &cfg, "w_grace", w as f64, mode, delta_after)
        })
        .collect()
}

fn redetect_point(
    trace: &RunTrace,
    cfg: &DetectorConfig,
    parameter: &str,
    value: f64,
    mode: ThresholdMode,
    delta_after: usize,
) -> Result<SweepPoint> {
    let (label, reported) = redetect(trace, cfg)?;
    Ok(SweepPoint {
        parameter: parameter.into(),
        value,
        threshold_mode: mode,
        summary: summarize(&label, &reported, &trace.truth, delta_after)?,
    })
}

/// Replays `test` once per noise level and threshold mode, without feedback.
/// Noise is seeded per level so every mode sees the same perturbed stream.
pub fn sweep_noise(
    system: &TrainedSystem,
    engine: &EngineConfig,
    test: &[SampleRecord],
    sigmas: &[f64],
    modes: &[ThresholdMode],
    noise_seed: u64,
    delta_after: usize,
) -> Result<Vec<SweepPoint>> {
    let truth = attack_labels(test);
    let mut out = Vec::with_capacity(sigmas.len() * modes.len());
    for &sigma in sigmas {
        // Keyed on the level itself so a subsampled sweep draws the same noise.
        let noisy = add_gaussian_noise(test, &NoiseConfig::new(sigma, noise_seed ^ sigma.to_bits()))?;
        for &mode in modes {
            let cfg = EngineConfig {
                threshold_mode: mode,
                ..*engine
            };
            let mut e = Engine::new(system.clone(), cfg)?;
            let trace = replay(&mut e, &noisy, &Technician::new(FeedbackPolicy::None))?;
            out.push(SweepPoint {
                parameter: "sigma".into(),
                value: sigma,
                threshold_mode: mode,
                summary: summarize_trace(&trace, &truth, delta_after)?,
            });
        }
    }
    Ok(out)
}

/// Plot-ready table, one row per point.
pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "parameter",
        "value",
        "threshold_mode",
        "alarm_points",
        "reported_points",
        "tp",
        "fp",
        "fn",
        "tn",
        "precision",
        "recall",
        "f1",
        "detected_attacks",
        "false_alarm_episodes",
    ])?;
    for p in points {
        let s = &p.summary;
        let m = &s.metrics;
        w.write_record([
            p.parameter.clone(),
            p.value.to_string(),
            mode_name(p.threshold_mode).into(),
            s.alarm_points.to_string(),
            s.reported_points.to_string(),
            m.tp.to_string(),
            m.fp.to_string(),
            m.fn_.to_string(),
            m.tn.to_string(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.f1.to_string(),
            s.detected_attacks.to_string(),
            s.false_alarm_episodes.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
