//! Few-time-steps learning from technician feedback.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::actuator_db::ActuatorDb;
use crate::error::{Error, Result};
use crate::nn::{mse, mse_grad, Gradients, Parameterized, Sequential, Sgd, SgdConfig, Tensor};
use crate::wdnn::{section_targets, Wdnn};

/// Which sources the technician marked as false alarms.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaFlags {
    pub actuators: bool,
    /// One flag per output section, 0-based.
    pub sections: Vec<bool>,
}

impl FaFlags {
    pub fn any(&self) -> bool {
        self.actuators || self.sections.iter().any(|&f| f)
    }

    pub fn section(sections: usize, g: usize) -> Self {
        let mut f = vec![false; sections];
        f[g] = true;
        Self {
            actuators: false,
            sections: f,
        }
    }
}

/// Model inputs and full sensor targets of the instances around the alarm.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeedbackBatch {
    pub inputs: Vec<Tensor>,
    pub targets: Vec<Vec<f64>>,
}

impl FeedbackBatch {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackDecision {
    pub t: usize,
    pub flags: FaFlags,
    /// Actuator tuple observed at `t`.
    pub actuators: Vec<u8>,
    pub batch: FeedbackBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    pub epochs: usize,
    pub sgd: SgdConfig,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            sgd: SgdConfig::new(0.01, 32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionTuning {
    pub section: usize,
    pub epochs: usize,
    pub cost_before: f64,
    pub cost_after: f64,
}

/// One line of the adaptation audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptReport {
    pub t: usize,
    pub flags: FaFlags,
    pub db_inserted: bool,
    pub sections: Vec<SectionTuning>,
    pub wall_ms: f64,
}

fn section_cost_on(head: &Sequential, features: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    let mut sum = 0.0;
    for (f, t) in features.iter().zip(targets) {
        sum += mse(head.forward(Tensor::vector(f.clone()))?.data(), t)?;
    }
    Ok(sum / features.len() as f64)
}

/// Fine-tunes a copy of one section head on fixed aggregation-layer features.
fn tune_head(
    head: &Sequential,
    features: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &TuningConfig,
    section: usize,
) -> Result<(Sequential, SectionTuning)> {
    let fail = |reason: String| Error::AdaptationFailure { section, reason };
    let mut head = head.clone();
    let cost_before = section_cost_on(&head, features, targets)?;
    let mut sgd = Sgd::new(cfg.sgd)?;
    let n = features.len();
    for epoch in 1..=cfg.epochs {
        for batch in (0..n).collect::<Vec<_>>().chunks(cfg.sgd.batch_size) {
            let mut grads = Gradients::zeros_like(&head.params());
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (y, tape) = head.forward_taped(Tensor::vector(features[i].clone()))?;
                let dy = mse_grad(y.data(), &targets[i], scale);
                head.backward(&tape, Tensor::vector(dy), grads.tensors_mut(), false)?;
            }
            sgd.step(head.params_mut(), &grads, epoch)
                .map_err(|e| fail(e.to_string()))?;
        }
        if head.params().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(fail(format!("non-finite parameters after epoch {epoch}")));
        }
    }
    let cost_after = section_cost_on(&head, features, targets)?;
    if !cost_after.is_finite() {
        return Err(fail("non-finite cost after tuning".into()));
    }
    Ok((
        head,
        SectionTuning {
            section,
            epochs: cfg.epochs,
            cost_before,
            cost_after,
        },
    ))
}

/// Applies a false-alarm verdict. Either every change lands or none does.
pub fn handle_feedback(
    decision: &FeedbackDecision,
    model: &mut Wdnn,
    db: &mut ActuatorDb,
    cfg: &TuningConfig,
) -> Result<AdaptReport> {
    let started = Instant::now();
    let flags = &decision.flags;
    if !flags.any() {
        return Err(Error::Input("feedback marks no source as a false alarm".into()));
    }
    if flags.sections.len() != model.sections() {
        return Err(Error::Input(format!(
            "{} section flags for a model with {} sections",
            flags.sections.len(),
            model.sections()
        )));
    }
    if cfg.epochs == 0 {
        return Err(Error::Config("tuning epochs must be >= 1".into()));
    }
    let tuned_sections: Vec<usize> = (0..model.sections()).filter(|&g| flags.sections[g]).collect();
    let mut new_heads = Vec::new();
    if !tuned_sections.is_empty() {
        let batch = &decision.batch;
        if batch.is_empty() || batch.inputs.len() != batch.targets.len() {
            return Err(Error::Input("section feedback needs a non-empty, aligned batch".into()));
        }
        let features = batch
            .inputs
            .iter()
            .map(|x| model.features(x))
            .collect::<Result<Vec<_>>>()?;
        let split: Vec<Vec<Vec<f64>>> = batch
            .targets
            .iter()
            .map(|t| section_targets(model, t))
            .collect();
        for &g in &tuned_sections {
            let targets: Vec<Vec<f64>> = split.iter().map(|s| s[g].clone()).collect();
            new_heads.push(tune_head(model.section(g), &features, &targets, cfg, g)?);
        }
    }
    let db_inserted = if flags.actuators {
        db.insert(&decision.actuators)?
    } else {
        false
    };
    let mut sections = Vec::with_capacity(new_heads.len());
    for (head, report) in new_heads {
        model.replace_section(report.section, head)?;
        sections.push(report);
    }
    Ok(AdaptReport {
        t: decision.t,
        flags: flags.clone(),
        db_inserted,
        sections,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// True iff every parameter outside section `g`'s head is bit-identical.
pub fn frozen_parameter_check(before: &Wdnn, after: &Wdnn, g: usize) -> Result<bool> {
    let (a, b) = (before.param_views(), after.param_views());
    if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.name != y.name || x.shape != y.shape) {
        return Err(Error::Comparison("models have different architectures".into()));
    }
    let prefix = Wdnn::section_prefix(g);
    Ok(a.iter().zip(&b).filter(|(x, _)| !x.name.starts_with(&prefix)).all(|(x, y)| {
        x.values.iter().zip(y.values).all(|(p, q)| p.to_bits() == q.to_bits())
    }))
}
