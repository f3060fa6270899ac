use serde::{Deserialize, Serialize};

use super::attacks::{attack_outcomes, intervals_from_labels, AttackOutcome};
use super::interventions::{false_alarm_episodes, interventions_rate};
use super::metrics::{point_metrics, PointMetrics};
use crate::adapt::{AdaptReport, FaFlags};
use crate::data::{attack_labels, SampleRecord};
use crate::detector::{reported_alarms, AlarmSource, Detector, DetectorConfig};
use crate::error::Result;
use crate::pipeline::Engine;

/// Who answers alarms during a replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackPolicy {
    /// Nobody; the model never changes.
    None,
    /// A technician who knows the ground truth dismisses the first false
    /// alarm from each source (the actuator database or a section).
    FirstPerSource,
    /// Like `FirstPerSource` but dismisses every false alarm.
    Every,
}

/// The simulated technician answering alarms during a replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Technician {
    pub policy: FeedbackPolicy,
    /// Alarms within this many seconds after an attack ends are blamed on
    /// the attack and left unanswered.
    pub settle_after_attack: usize,
}

impl Technician {
    pub fn new(policy: FeedbackPolicy) -> Self {
        Self {
            policy,
            settle_after_attack: 600,
        }
    }
}

/// Everything a replay produced, indexed by record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub first_t: usize,
    /// `[t][g]`; NaN during warm-up.
    pub mse: Vec<Vec<f64>>,
    pub thresholds: Vec<Vec<f64>>,
    pub label: Vec<bool>,
    /// Ground truth of each record.
    pub truth: Vec<bool>,
    pub actuator: Vec<bool>,
    pub sensor: Vec<bool>,
    pub reported: Vec<bool>,
    pub sources: Vec<Option<AlarmSource>>,
    pub adaptations: Vec<AdaptReport>,
    /// Time of each queued verdict.
    pub feedback_times: Vec<usize>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label.is_empty()
    }
}

fn flags_for(source: AlarmSource, sections: usize) -> FaFlags {
    match source {
        AlarmSource::Actuator => FaFlags {
            actuators: true,
            sections: vec![false; sections],
        },
        AlarmSource::Section(g) => FaFlags::section(sections, g),
    }
}

/// Streams `records` through `engine`, letting `technician` answer alarms.
pub fn replay(engine: &mut Engine, records: &[SampleRecord], technician: &Technician) -> Result<RunTrace> {
    let labels = attack_labels(records);
    let policy = technician.policy;
    // Records blamed on an attack: the attack itself and its settling time.
    let mut blamed = labels.clone();
    for iv in intervals_from_labels(&labels) {
        let end = (iv.end + 1 + technician.settle_after_attack).min(blamed.len());
        blamed[iv.end + 1..end].iter_mut().for_each(|b| *b = true);
    }
    let g = engine.system().model.sections();
    let mut trace = RunTrace {
        first_t: engine.first_detectable(),
        truth: labels.clone(),
        ..RunTrace::default()
    };
    let mut answered: Vec<AlarmSource> = Vec::new();
    for r in records {
        let step = engine.push(r)?;
        trace.mse.push(step.mse);
        trace.thresholds.push(step.thresholds);
        trace.label.push(step.label);
        trace.actuator.push(step.actuator_alarm);
        trace.sensor.push(!step.sensor_sections.is_empty());
        trace.reported.push(false);
        trace.sources.push(step.alarm.as_ref().map(|a| a.source));
        trace.adaptations.extend(step.adaptations);
        for t in step.reported {
            trace.reported[t] = true;
            if policy == FeedbackPolicy::None || blamed[t] {
                continue;
            }
            let Some(source) = engine.alarm(t).map(|a| a.source) else {
                continue;
            };
            if policy == FeedbackPolicy::FirstPerSource && answered.contains(&source) {
                continue;
            }
            answered.push(source);
            engine.queue_feedback(t, flags_for(source, g));
            trace.feedback_times.push(t);
        }
    }
    Ok(trace)
}

/// Alarm streams recomputed from recorded errors and thresholds under a
/// different detector setting. Thresholds do not depend on detection, so
/// this matches a fresh replay without feedback.
pub fn redetect(trace: &RunTrace, cfg: &DetectorConfig) -> Result<(Vec<bool>, Vec<bool>)> {
    let g = trace.mse.first().map_or(0, Vec::len);
    let mut det = Detector::new(*cfg, g, trace.first_t)?;
    let n = trace.len();
    let (mut sensor, mut label) = (vec![false; n], vec![false; n]);
    for t in trace.first_t..n {
        let o = det.step_mse(t, !trace.actuator[t], &trace.mse[t], &trace.thresholds[t])?;
        sensor[t] = o.sensor_alarm();
        label[t] = o.label;
    }
    let reported = reported_alarms(&sensor, &trace.actuator, cfg);
    Ok((label, reported))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub metrics: PointMetrics,
    pub attacks: Vec<AttackOutcome>,
    pub detected_attacks: usize,
    pub alarm_points: usize,
    pub reported_points: usize,
    pub false_alarm_episodes: usize,
    pub interventions_per_hour: f64,
}

/// Scores a reported-alarm stream against ground-truth labels.
pub fn summarize(alarm_points: &[bool], reported: &[bool], labels: &[bool], delta_after: usize) -> Result<RunSummary> {
    let metrics = point_metrics(labels, reported)?;
    let (attacks, detected) = attack_outcomes(reported, &intervals_from_labels(labels), delta_after)?;
    let episodes = false_alarm_episodes(reported, labels).len();
    Ok(RunSummary {
        metrics,
        attacks,
        detected_attacks: detected,
        alarm_points: alarm_points.iter().filter(|&&a| a).count(),
        reported_points: reported.iter().filter(|&&a| a).count(),
        false_alarm_episodes: episodes,
        interventions_per_hour: interventions_rate(episodes, labels.len().max(1) as f64)?,
    })
}

pub fn summarize_trace(trace: &RunTrace, labels: &[bool], delta_after: usize) -> Result<RunSummary> {
    summarize(&trace.label, &trace.reported, labels, delta_after)
}
