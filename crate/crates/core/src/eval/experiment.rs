use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::replay::{replay, summarize_trace, FeedbackPolicy, RunSummary, RunTrace, Technician};
use super::sweep::{sweep_noise, sweep_w_anom, sweep_w_grace, write_sweep_csv, SweepPoint};
use crate::adapt::AdaptReport;
use crate::data::{attack_labels, generate_synthetic_plant, load_csv, synthetic_profile, DatasetProfile, PlantConfig, SampleRecord};
use crate::error::{Error, Result};
use crate::pipeline::{fit_system, Engine, EngineConfig, FitConfig, FitReport, ThresholdMode, TrainedSystem};

/// A dataset profile given by name (`swat`, `two-tank`) or spelled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileRef {
    Named(String),
    Inline(DatasetProfile),
}

impl ProfileRef {
    pub fn resolve(&self) -> Result<DatasetProfile> {
        match self {
            ProfileRef::Inline(p) => Ok(p.clone()),
            ProfileRef::Named(n) => match n.as_str() {
                "swat" => Ok(DatasetProfile::swat()),
                "two-tank" | "synthetic" => Ok(synthetic_profile()),
                other => Err(Error::Config(format!(
                    "unknown profile {other:?}; use \"swat\", \"two-tank\" or an inline profile (WADI column names vary by release)"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    /// Generated on the fly from a plant description.
    Synthetic { plant: PlantConfig },
    /// Normal-operation and attack CSV exports.
    Csv {
        profile: ProfileRef,
        normal: PathBuf,
        test: PathBuf,
    },
}

/// Training, validation and test records with column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub profile: DatasetProfile,
    pub train: Vec<SampleRecord>,
    pub validation: Vec<SampleRecord>,
    pub test: Vec<SampleRecord>,
}

impl Splits {
    pub fn names(&self) -> (Vec<String>, Vec<String>) {
        (self.profile.sensors.clone(), self.profile.actuators.clone())
    }
}

impl DatasetSource {
    /// Paths are resolved against `base` when relative.
    pub fn load(&self, base: &Path) -> Result<Splits> {
        match self {
            DatasetSource::Synthetic { plant } => {
                let d = generate_synthetic_plant(plant)?;
                Ok(Splits {
                    profile: synthetic_profile(),
                    train: d.train,
                    validation: d.validation,
                    test: d.test,
                })
            }
            DatasetSource::Csv { profile, normal, test } => {
                let profile = profile.resolve()?;
                let normal = load_csv(&base.join(normal), &profile)?;
                let test = load_csv(&base.join(test), &profile)?;
                let (train, validation) = profile.split_train_validation(&normal)?;
                Ok(Splits {
                    profile,
                    train,
                    validation,
                    test,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    #[serde(default)]
    pub w_anom: Vec<usize>,
    #[serde(default)]
    pub w_grace: Vec<usize>,
    #[serde(default)]
    pub sigma: Vec<f64>,
    #[serde(default = "default_noise_seed")]
    pub noise_seed: u64,
}

fn default_noise_seed() -> u64 {
    1
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self {
            w_anom: (27..=39).collect(),
            w_grace: (0..=20).collect(),
            sigma: vec![0.0, 1.0, 2.0, 3.0, 5.0, 10.0, 15.0],
            noise_seed: default_noise_seed(),
        }
    }
}

/// Everything one experiment run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub dataset: DatasetSource,
    pub fit: FitConfig,
    pub engine: EngineConfig,
    pub technician: Technician,
    #[serde(default)]
    pub sweeps: SweepAxes,
    #[serde(default = "default_delta_after")]
    pub delta_after: usize,
}

fn default_delta_after() -> usize {
    60
}

impl Manifest {
    /// The seeded two-tank scenario with desk-scale settings.
    pub fn synthetic(seed: u64) -> Result<Self> {
        Ok(Self {
            name: "two-tank".into(),
            dataset: DatasetSource::Synthetic {
                plant: PlantConfig::scenario(seed),
            },
            fit: FitConfig::synthetic(seed)?,
            engine: EngineConfig::synthetic(),
            technician: Technician::new(FeedbackPolicy::FirstPerSource),
            sweeps: SweepAxes::default(),
            delta_after: default_delta_after(),
        })
    }

    /// Manifest for recorded data at table settings.
    pub fn csv(profile: ProfileRef, normal: PathBuf, test: PathBuf, epochs: usize, seed: u64) -> Result<Self> {
        let resolved = profile.resolve()?;
        Ok(Self {
            name: resolved.name.clone(),
            fit: FitConfig::for_profile(&resolved, epochs, seed)?,
            dataset: DatasetSource::Csv { profile, normal, test },
            engine: EngineConfig::default(),
            technician: Technician::new(FeedbackPolicy::FirstPerSource),
            sweeps: SweepAxes::default(),
            delta_after: default_delta_after(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResults {
    pub w_anom: Vec<SweepPoint>,
    pub w_grace: Vec<SweepPoint>,
    pub sigma: Vec<SweepPoint>,
}

/// Deterministic part of a run; wall-clock timings live in [`Timing`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub test_records: usize,
    pub fit: FitReport,
    /// No feedback.
    pub baseline: RunSummary,
    /// Feedback from the manifest's technician.
    pub adapted: RunSummary,
    pub adaptations: Vec<AdaptReport>,
    pub sweeps: SweepResults,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub fit_s: f64,
    pub replay_s: f64,
    pub sweeps_s: f64,
    pub total_s: f64,
    pub mean_adaptation_ms: Option<f64>,
}

/// Fits, replays with and without feedback, runs the sweeps and writes
/// `report.json`, `timing.json`, `attacks.csv`, `thresholds.csv`,
/// `sweep_<axis>.csv` and the trained model under `model/` into `out`.
/// Relative dataset paths resolve against `base`.
pub fn run_experiment(manifest: &Manifest, base: &Path, out: &Path) -> Result<(ExperimentReport, Timing)> {
    let started = Instant::now();
    let splits = manifest.dataset.load(base)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let t0 = Instant::now();
    let (system, fit) = fit_system(&splits.train, &splits.validation, &manifest.fit, Some(splits.names()))?;
    system.save(&out.join("model"))?;
    let fit_s = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let labels = attack_labels(&splits.test);
    let engine = Engine::new(system.clone(), manifest.engine)?;
    let base_trace = replay(&mut engine.clone(), &splits.test, &Technician::new(FeedbackPolicy::None))?;
    let adapted_trace = replay(&mut engine.clone(), &splits.test, &manifest.technician)?;
    let baseline = summarize_trace(&base_trace, &labels, manifest.delta_after)?;
    let adapted = summarize_trace(&adapted_trace, &labels, manifest.delta_after)?;
    let replay_s = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let sweeps = run_sweeps(manifest, &system, &base_trace, &splits.test)?;
    let sweeps_s = t0.elapsed().as_secs_f64();

    write_attacks_csv(&out.join("attacks.csv"), &[("baseline", &baseline), ("adapted", &adapted)])?;
    write_threshold_trace(&out.join("thresholds.csv"), &base_trace, &adapted_trace)?;
    write_sweep_csv(&out.join("sweep_w_anom.csv"), &sweeps.w_anom)?;
    write_sweep_csv(&out.join("sweep_w_grace.csv"), &sweeps.w_grace)?;
    write_sweep_csv(&out.join("sweep_sigma.csv"), &sweeps.sigma)?;

    let report = ExperimentReport {
        name: manifest.name.clone(),
        test_records: splits.test.len(),
        fit,
        baseline,
        adapted,
        adaptations: adapted_trace.adaptations.clone(),
        sweeps,
    };
    let path = out.join("report.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&report)?).map_err(|e| Error::io(&path, e))?;
    let n = report.adaptations.len();
    let timing = Timing {
        fit_s,
        replay_s,
        sweeps_s,
        total_s: started.elapsed().as_secs_f64(),
        mean_adaptation_ms: (n > 0).then(|| report.adaptations.iter().map(|a| a.wall_ms).sum::<f64>() / n as f64),
    };
    let path = out.join("timing.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&timing)?).map_err(|e| Error::io(&path, e))?;
    Ok((report, timing))
}

fn run_sweeps(manifest: &Manifest, system: &TrainedSystem, trace: &RunTrace, test: &[SampleRecord]) -> Result<SweepResults> {
    let axes = &manifest.sweeps;
    let det = &manifest.engine.detector;
    let mode = manifest.engine.threshold_mode;
    let sigma = if axes.sigma.is_empty() {
        Vec::new()
    } else {
        sweep_noise(
            system,
            &manifest.engine,
            test,
            &axes.sigma,
            &[ThresholdMode::Adaptive, ThresholdMode::Static],
            axes.noise_seed,
            manifest.delta_after,
        )?
    };
    Ok(SweepResults {
        w_anom: sweep_w_anom(trace, det, &axes.w_anom, mode, manifest.delta_after)?,
        w_grace: sweep_w_grace(trace, det, &axes.w_grace, mode, manifest.delta_after)?,
        sigma,
    })
}

pub fn write_attacks_csv(path: &Path, runs: &[(&str, &RunSummary)]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["run", "start", "end", "detected_during", "detected_after", "time_to_detect"])?;
    for (run, s) in runs {
        for a in &s.attacks {
            w.write_record([
                run.to_string(),
                a.interval.start.to_string(),
                a.interval.end.to_string(),
                a.detected_during.to_string(),
                a.detected_after.to_string(),
                a.time_to_detect.map(|t| t.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per record: truth, both runs' reported alarms, then error and
/// threshold per section for each run. Warm-up cells are empty.
pub fn write_threshold_trace(path: &Path, baseline: &RunTrace, adapted: &RunTrace) -> Result<()> {
    let g = baseline.mse.first().map_or(0, Vec::len);
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["t".to_string(), "attack".into(), "reported_baseline".into(), "reported_adapted".into()];
    for run in ["baseline", "adapted"] {
        for k in 0..g {
            header.push(format!("mse{k}_{run}"));
            header.push(format!("threshold{k}_{run}"));
        }
    }
    w.write_record(&header)?;
    let cell = |v: f64| if v.is_finite() { v.to_string() } else { String::new() };
    for t in 0..baseline.len() {
        let mut row = vec![
            t.to_string(),
            u8::from(baseline.truth[t]).to_string(),
            u8::from(baseline.reported[t]).to_string(),
            u8::from(adapted.reported.get(t).copied().unwrap_or(false)).to_string(),
        ];
        for tr in [baseline, adapted] {
            for k in 0..g {
                let warm = t < tr.first_t;
                row.push(if warm { String::new() } else { cell(tr.mse[t][k]) });
                row.push(if warm { String::new() } else { cell(tr.thresholds[t][k]) });
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
