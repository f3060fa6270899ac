use std::fmt;
use std::path::{Path, PathBuf};

use plantwatch::data::{generate_synthetic_plant, load_csv, make_windows, synthetic_profile, write_csv, PlantConfig};
use plantwatch::eval::{
    replay, run_experiment, summarize_trace, sweep_noise, sweep_w_anom, sweep_w_grace, write_sweep_csv,
    DatasetSource, FeedbackPolicy, Manifest, ProfileRef, RunSummary, RunTrace, Splits, SweepAxes, Technician,
};
use plantwatch::pipeline::{fit_system, fit_thresholds, section_errors, Engine, ThresholdMode, TrainedSystem};
use plantwatch_service::{bind_address, Service, ServiceConfig};
use serde::Serialize;

use crate::{Axis, DetectArgs, EvaluateArgs, RunChoice, ServeArgs, SweepArgs, SynthArgs, TrainArgs, TuneArgs};

pub enum Failure {
    /// The command ran; a requested gate did not hold.
    Gate(String),
    /// The command could not run.
    Setup(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Gate(_) => 1,
            Failure::Setup(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Gate(m) => write!(f, "gate failed: {m}"),
            Failure::Setup(m) => f.write_str(m),
        }
    }
}

impl From<plantwatch::Error> for Failure {
    fn from(e: plantwatch::Error) -> Self {
        Failure::Setup(e.to_string())
    }
}

impl From<plantwatch_service::ServiceError> for Failure {
    fn from(e: plantwatch_service::ServiceError) -> Self {
        Failure::Setup(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Setup(format!("{}: {e}", path.display()))
}

fn print_json(value: &impl Serialize) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Setup(e.to_string()))?;
    println!("{text}");
    Ok(())
}

/// Manifest plus the directory its relative paths resolve against.
fn manifest(path: &Path) -> Result<(Manifest, PathBuf), Failure> {
    let m = Manifest::load(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((m, base))
}

fn splits(m: &Manifest, base: &Path) -> Result<Splits, Failure> {
    Ok(m.dataset.load(base)?)
}

pub fn synth(a: SynthArgs) -> Outcome {
    let mut plant = PlantConfig::scenario(a.seed);
    if let Some(n) = a.normal_seconds {
        plant.normal_seconds = n;
    }
    let data = generate_synthetic_plant(&plant)?;
    std::fs::create_dir_all(&a.out).map_err(io(&a.out))?;
    let profile = synthetic_profile();
    let normal: Vec<_> = data.train.iter().chain(&data.validation).cloned().collect();
    write_csv(&a.out.join("normal.csv"), &normal, &profile)?;
    write_csv(&a.out.join("attack.csv"), &data.test, &profile)?;

    let mut m = Manifest::synthetic(a.seed)?;
    m.dataset = DatasetSource::Csv {
        profile: ProfileRef::Named(profile.name.clone()),
        normal: "normal.csv".into(),
        test: "attack.csv".into(),
    };
    if let Some(e) = a.epochs {
        m.fit.train.epochs = e;
    }
    if let Some(e) = a.ttnn_epochs {
        m.fit.ttnn_epochs = e;
    }
    m.save(&a.out.join("manifest.json"))?;
    println!(
        "wrote {} normal and {} test records with {} attacks to {}",
        normal.len(),
        data.test.len(),
        data.attacks.len(),
        a.out.display()
    );
    Ok(())
}

pub fn train(a: TrainArgs) -> Outcome {
    let (mut m, base) = manifest(&a.manifest.manifest)?;
    if let Some(e) = a.epochs {
        m.fit.train.epochs = e;
    }
    let s = splits(&m, &base)?;
    let (system, report) = fit_system(&s.train, &s.validation, &m.fit, Some(s.names()))?;
    system.save(&a.model)?;
    let path = a.model.join("fit-report.json");
    let text = serde_json::to_vec_pretty(&report).map_err(|e| Failure::Setup(e.to_string()))?;
    std::fs::write(&path, text).map_err(io(&path))?;
    println!(
        "trained on {} windows; validation loss {:.3e}; T_base {:?}; model in {}",
        report.train_instances,
        report.wdnn.validation_cost.last().copied().unwrap_or(f64::NAN),
        report.t_base,
        a.model.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TuneReport {
    t_base: Vec<f64>,
    final_loss: Vec<f64>,
    validation_instances: usize,
}

pub fn tune(a: TuneArgs) -> Outcome {
    let (m, base) = manifest(&a.manifest.manifest)?;
    let mut system = TrainedSystem::load(&a.model)?;
    let s = splits(&m, &base)?;
    let mut cfg = m.fit.clone();
    cfg.wdnn = system.model.config().clone();
    if let Some(k) = a.median_kernel {
        cfg.median_kernel = k;
    }
    if let Some(e) = a.ttnn_epochs {
        cfg.ttnn_epochs = e;
    }
    let set = make_windows(system.normalizer.features(&s.validation)?, cfg.wdnn.geometry())?;
    let mse = section_errors(&system.model, &set)?;
    let (thresholds, final_loss) = fit_thresholds(&mse, &cfg)?;
    let report = TuneReport {
        t_base: thresholds.iter().map(|t| t.t_base).collect(),
        final_loss,
        validation_instances: set.len(),
    };
    system.thresholds = thresholds;
    system.validation_mse = mse;
    system.save(&a.model)?;
    print_json(&report)
}

fn technician(m: &Manifest, feedback: bool) -> Technician {
    if feedback {
        m.technician
    } else {
        Technician::new(FeedbackPolicy::None)
    }
}

pub fn detect(a: DetectArgs) -> Outcome {
    let (m, base) = manifest(&a.manifest.manifest)?;
    let system = TrainedSystem::load(&a.model)?;
    let records = match &a.input {
        Some(p) => {
            let profile = match &m.dataset {
                DatasetSource::Csv { profile, .. } => profile.resolve()?,
                DatasetSource::Synthetic { .. } => synthetic_profile(),
            };
            load_csv(p, &profile)?
        }
        None => splits(&m, &base)?.test,
    };
    let mut engine = Engine::new(system, m.engine)?;
    let trace = replay(&mut engine, &records, &technician(&m, a.feedback))?;
    write_detections(&a.out, &records.iter().map(|r| r.timestamp).collect::<Vec<_>>(), &trace)?;
    let summary = summarize_trace(&trace, &trace.truth, m.delta_after)?;
    println!(
        "{} records, {} reported, {} adaptations; F1 {:.4} against labels; rows in {}",
        trace.len(),
        summary.reported_points,
        trace.adaptations.len(),
        summary.metrics.f1,
        a.out.display()
    );
    Ok(())
}

fn write_detections(path: &Path, timestamps: &[i64], trace: &RunTrace) -> Outcome {
    let csv_err = |e: csv::Error| Failure::Setup(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let g = trace.mse.first().map_or(0, Vec::len);
    let mut header: Vec<String> = ["t", "timestamp", "attack", "alarm", "reported", "actuator", "sensor"]
        .map(String::from)
        .into();
    for k in 0..g {
        header.push(format!("mse{k}"));
        header.push(format!("threshold{k}"));
    }
    w.write_record(&header).map_err(csv_err)?;
    let bit = |b: bool| u8::from(b).to_string();
    let cell = |v: f64| if v.is_finite() { v.to_string() } else { String::new() };
    for t in 0..trace.len() {
        let mut row = vec![
            t.to_string(),
            timestamps[t].to_string(),
            bit(trace.truth[t]),
            bit(trace.label[t]),
            bit(trace.reported[t]),
            bit(trace.actuator[t]),
            bit(trace.sensor[t]),
        ];
        for k in 0..g {
            row.push(cell(trace.mse[t][k]));
            row.push(cell(trace.thresholds[t][k]));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io(path))
}

#[derive(Serialize)]
struct RunLine {
    precision: f64,
    recall: f64,
    f1: f64,
    detected_attacks: usize,
    attacks: usize,
    false_alarm_episodes: usize,
    interventions_per_hour: f64,
}

impl From<&RunSummary> for RunLine {
    fn from(s: &RunSummary) -> Self {
        Self {
            precision: s.metrics.precision,
            recall: s.metrics.recall,
            f1: s.metrics.f1,
            detected_attacks: s.detected_attacks,
            attacks: s.attacks.len(),
            false_alarm_episodes: s.false_alarm_episodes,
            interventions_per_hour: s.interventions_per_hour,
        }
    }
}

pub fn evaluate(a: EvaluateArgs) -> Outcome {
    let (mut m, base) = manifest(&a.manifest.manifest)?;
    if let Some(e) = a.epochs {
        m.fit.train.epochs = e;
    }
    if a.no_sweeps {
        m.sweeps = SweepAxes {
            w_anom: vec![],
            w_grace: vec![],
            sigma: vec![],
            noise_seed: m.sweeps.noise_seed,
        };
    }
    let (report, timing) = run_experiment(&m, &base, &a.out)?;
    print_json(&serde_json::json!({
        "name": report.name,
        "baseline": RunLine::from(&report.baseline),
        "adapted": RunLine::from(&report.adapted),
        "adaptations": report.adaptations.len(),
        "timing": timing,
        "out": a.out,
    }))?;

    let judged = match a.gate_run {
        RunChoice::Baseline => &report.baseline,
        RunChoice::Adapted => &report.adapted,
    };
    let mut failed = Vec::new();
    if let Some(min) = a.min_f1 {
        if !(judged.metrics.f1 >= min) {
            failed.push(format!("F1 {:.4} < {min}", judged.metrics.f1));
        }
    }
    if let Some(min) = a.min_detected {
        if judged.detected_attacks < min {
            failed.push(format!("detected {} < {min}", judged.detected_attacks));
        }
    }
    if let Some(max) = a.max_interventions_per_hour {
        if !(judged.interventions_per_hour <= max) {
            failed.push(format!("{:.2} interventions/h > {max}", judged.interventions_per_hour));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Gate(failed.join("; ")))
    }
}

fn as_counts(values: &[f64]) -> Result<Vec<usize>, Failure> {
    values
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Failure::Setup(format!("window sizes are whole numbers, got {v}")))
            }
        })
        .collect()
}

pub fn sweep(a: SweepArgs) -> Outcome {
    let (m, base) = manifest(&a.manifest.manifest)?;
    let system = TrainedSystem::load(&a.model)?;
    let test = splits(&m, &base)?.test;
    let det = &m.engine.detector;
    let mode = m.engine.threshold_mode;
    let points = match a.axis {
        Axis::Sigma => {
            let sigmas = if a.values.is_empty() { m.sweeps.sigma.clone() } else { a.values.clone() };
            sweep_noise(
                &system,
                &m.engine,
                &test,
                &sigmas,
                &[ThresholdMode::Adaptive, ThresholdMode::Static],
                m.sweeps.noise_seed,
                m.delta_after,
            )?
        }
        Axis::WAnom | Axis::WGrace => {
            let mut engine = Engine::new(system, m.engine)?;
            let trace = replay(&mut engine, &test, &Technician::new(FeedbackPolicy::None))?;
            if let Axis::WAnom = a.axis {
                let v = if a.values.is_empty() { m.sweeps.w_anom.clone() } else { as_counts(&a.values)? };
                sweep_w_anom(&trace, det, &v, mode, m.delta_after)?
            } else {
                let v = if a.values.is_empty() { m.sweeps.w_grace.clone() } else { as_counts(&a.values)? };
                sweep_w_grace(&trace, det, &v, mode, m.delta_after)?
            }
        }
    };
    write_sweep_csv(&a.out, &points)?;
    println!("{} points written to {}", points.len(), a.out.display());
    Ok(())
}

pub fn serve(a: ServeArgs) -> Outcome {
    let cfg = ServiceConfig::load(&a.config)?;
    let addr = a.bind.unwrap_or_else(bind_address);
    let service = Service::from_config(&cfg)?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Setup(e.to_string()))?;
    rt.block_on(plantwatch_service::serve(service, &addr))?;
    Ok(())
}
