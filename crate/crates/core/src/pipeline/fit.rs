use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::actuator_db::ActuatorDb;
use crate::data::{make_windows, Normalizer, SampleRecord, WindowSet};
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, SgdConfig};
use crate::threshold::{compute_t_base, train_ttnn, Ttnn, TtnnConfig, TtnnTrainOptions};
use crate::wdnn::{section_targets, train_wdnn, TrainOptions, TrainReport, Wdnn, WdnnConfig};

/// Everything needed to turn training and validation records into a
/// deployable detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub wdnn: WdnnConfig,
    pub train: TrainOptions,
    /// Use every `stride`-th training window.
    #[serde(default = "one")]
    pub window_stride: usize,
    pub ttnn_sgd: SgdConfig,
    pub ttnn_epochs: usize,
    pub median_kernel: usize,
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl FitConfig {
    /// Table settings for a SWaT- or WADI-shaped profile (chosen by name;
    /// anything else gets the SWaT column). Training runs `epochs` passes.
    pub fn for_profile(profile: &crate::data::DatasetProfile, epochs: usize, seed: u64) -> Result<Self> {
        let layout = profile.layout()?;
        let wadi = profile.name.eq_ignore_ascii_case("wadi");
        let wdnn = if wadi {
            WdnnConfig::wadi(profile.m_se(), profile.m_ac(), layout)
        } else {
            WdnnConfig::swat(profile.m_se(), profile.m_ac(), layout)
        };
        Ok(Self {
            wdnn,
            train: TrainOptions {
                sgd: SgdConfig::new(if wadi { 0.001 } else { 0.01 }, 32),
                epochs,
                seed,
            },
            window_stride: 1,
            ttnn_sgd: SgdConfig::new(0.01, 32),
            ttnn_epochs: 30,
            median_kernel: 59,
            seed: seed + 10,
        })
    }

    /// Desk-scale settings for the synthetic two-tank plant: a narrower
    /// convolution stack, `W_in=24`, `H=32` and ten epochs.
    pub fn synthetic(seed: u64) -> Result<Self> {
        let layout = crate::data::synthetic_profile().layout()?;
        let mut wdnn = WdnnConfig::swat(crate::data::synth::SENSORS.len(), crate::data::synth::ACTUATORS.len(), layout);
        wdnn.w_in = 24;
        wdnn.horizon = 32;
        wdnn.cl1_kernels = 16;
        wdnn.cl2_kernels = 32;
        Ok(Self {
            wdnn,
            train: TrainOptions {
                sgd: SgdConfig::new(0.01, 32),
                epochs: 10,
                seed,
            },
            window_stride: 1,
            ttnn_sgd: SgdConfig::new(0.01, 32),
            ttnn_epochs: 30,
            median_kernel: 59,
            seed: seed + 10,
        })
    }
}

/// Per-section threshold model and its fixed offset.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionThreshold {
    pub ttnn: Ttnn,
    pub t_base: f64,
}

/// A trained forecaster with everything calibrated on validation data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedSystem {
    pub model: Wdnn,
    pub normalizer: Normalizer,
    pub db: ActuatorDb,
    pub thresholds: Vec<SectionThreshold>,
    /// Validation error series per section, used to seed threshold history.
    pub validation_mse: Vec<Vec<f64>>,
    pub sensor_names: Vec<String>,
    pub actuator_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub wdnn: TrainReport,
    pub ttnn_final_loss: Vec<f64>,
    pub t_base: Vec<f64>,
    pub actuator_tuples: usize,
    pub train_instances: usize,
}

/// Per-section prediction error of every instance in `set`.
pub fn section_errors(model: &Wdnn, set: &WindowSet) -> Result<Vec<Vec<f64>>> {
    let g = model.sections();
    let mut out = vec![Vec::with_capacity(set.len()); g];
    for i in 0..set.len() {
        let preds = model.forward(&set.input(i))?;
        let targets = section_targets(model, &set.target(i));
        for k in 0..g {
            let n = targets[k].len() / model.config().predict_steps;
            out[k].push(crate::detector::mse_section(&targets[k][..n], &preds[k][..n])?);
        }
    }
    Ok(out)
}

/// Threshold models and `T_base` for each section's validation error
/// series. Returns the final TTNN training loss per section alongside.
pub fn fit_thresholds(validation_mse: &[Vec<f64>], cfg: &FitConfig) -> Result<(Vec<SectionThreshold>, Vec<f64>)> {
    let mut thresholds = Vec::with_capacity(validation_mse.len());
    let mut losses = Vec::with_capacity(validation_mse.len());
    for (g, series) in validation_mse.iter().enumerate() {
        let base = compute_t_base(series)?;
        let mut ttnn = Ttnn::build(
            TtnnConfig::new(cfg.wdnn.w_in, cfg.wdnn.horizon, cfg.wdnn.w_out),
            cfg.seed.wrapping_add(1 + g as u64),
        )?;
        let trace = train_ttnn(
            &mut ttnn,
            series,
            &TtnnTrainOptions {
                sgd: cfg.ttnn_sgd,
                epochs: cfg.ttnn_epochs,
                median_kernel: cfg.median_kernel,
                seed: cfg.seed.wrapping_add(100 + g as u64),
            },
        )?;
        losses.push(trace.last().copied().unwrap_or(f64::NAN));
        thresholds.push(SectionThreshold { ttnn, t_base: base });
    }
    Ok((thresholds, losses))
}

pub fn fit_system(
    train: &[SampleRecord],
    validation: &[SampleRecord],
    cfg: &FitConfig,
    names: Option<(Vec<String>, Vec<String>)>,
) -> Result<(TrainedSystem, FitReport)> {
    let normalizer = Normalizer::fit(train)?;
    if normalizer.m_se() != cfg.wdnn.m_se || normalizer.m_ac() != cfg.wdnn.m_ac {
        return Err(Error::Config(format!(
            "records have {} sensors and {} actuators but the model expects {} and {}",
            normalizer.m_se(),
            normalizer.m_ac(),
            cfg.wdnn.m_se,
            cfg.wdnn.m_ac
        )));
    }
    let (sensor_names, actuator_names) = names.unwrap_or_else(|| {
        (
            (0..cfg.wdnn.m_se).map(|i| format!("s{i}")).collect(),
            (0..cfg.wdnn.m_ac).map(|i| format!("a{i}")).collect(),
        )
    });
    let db = ActuatorDb::build(train, Some(actuator_names.clone()))?;
    let geometry = cfg.wdnn.geometry();
    let train_set = make_windows(normalizer.features(train)?, geometry)?.strided(cfg.window_stride);
    let val_set = make_windows(normalizer.features(validation)?, geometry)?;

    let mut model = Wdnn::build(cfg.wdnn.clone(), cfg.seed)?;
    let wdnn_report = train_wdnn(&mut model, &train_set, Some(&val_set), &cfg.train)?;

    let validation_mse = section_errors(&model, &val_set)?;
    let (thresholds, ttnn_final_loss) = fit_thresholds(&validation_mse, cfg)?;
    let t_base = thresholds.iter().map(|t| t.t_base).collect();
    let report = FitReport {
        wdnn: wdnn_report,
        ttnn_final_loss,
        t_base,
        actuator_tuples: db.len(),
        train_instances: train_set.len(),
    };
    Ok((
        TrainedSystem {
            model,
            normalizer,
            db,
            thresholds,
            validation_mse,
            sensor_names,
            actuator_names,
        },
        report,
    ))
}

/// Sidecar document stored next to the parameter checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    format: String,
    version: u32,
    wdnn: WdnnConfig,
    normalizer: Normalizer,
    ttnn: Vec<TtnnSidecar>,
    validation_mse: Vec<Vec<f64>>,
    sensor_names: Vec<String>,
    actuator_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TtnnSidecar {
    config: TtnnConfig,
    scale: f64,
    t_base: f64,
}

const SIDECAR_FORMAT: &str = "plantwatch-system";

impl TrainedSystem {
    /// Writes `system.json`, `wdnn.json`, `ttnn-<g>.json` and `actuators.txt`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let sidecar = Sidecar {
            format: SIDECAR_FORMAT.into(),
            version: 1,
            wdnn: self.model.config().clone(),
            normalizer: self.normalizer.clone(),
            ttnn: self
                .thresholds
                .iter()
                .map(|t| TtnnSidecar {
                    config: *t.ttnn.config(),
                    scale: t.ttnn.scale(),
                    t_base: t.t_base,
                })
                .collect(),
            validation_mse: self.validation_mse.clone(),
            sensor_names: self.sensor_names.clone(),
            actuator_names: self.actuator_names.clone(),
        };
        let path = dir.join("system.json");
        std::fs::write(&path, serde_json::to_vec_pretty(&sidecar)?).map_err(|e| Error::io(&path, e))?;
        Checkpoint::capture(&self.model, self.model.seed()).save(&dir.join("wdnn.json"))?;
        for (g, t) in self.thresholds.iter().enumerate() {
            Checkpoint::capture(&t.ttnn, 0).save(&dir.join(format!("ttnn-{g}.json")))?;
        }
        self.db.save(&dir.join("actuators.txt"))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("system.json");
        if !path.exists() {
            return Err(Error::MissingDataset {
                path,
                hint: "no trained model here; run `plantwatch train` first".into(),
            });
        }
        let text = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let sc: Sidecar = serde_json::from_slice(&text)?;
        if sc.format != SIDECAR_FORMAT {
            return Err(Error::Config(format!("{} is not a {SIDECAR_FORMAT} document", path.display())));
        }
        let ckpt = Checkpoint::load(&dir.join("wdnn.json"))?;
        let mut model = Wdnn::build(sc.wdnn, ckpt.seed)?;
        ckpt.restore(&mut model)?;
        let mut thresholds = Vec::new();
        for (g, t) in sc.ttnn.iter().enumerate() {
            let mut ttnn = Ttnn::build(t.config, 0)?;
            Checkpoint::load(&dir.join(format!("ttnn-{g}.json")))?.restore(&mut ttnn)?;
            ttnn.set_scale(t.scale)?;
            thresholds.push(SectionThreshold { ttnn, t_base: t.t_base });
        }
        Ok(Self {
            model,
            normalizer: sc.normalizer,
            db: ActuatorDb::load(&dir.join("actuators.txt"))?,
            thresholds,
            validation_mse: sc.validation_mse,
            sensor_names: sc.sensor_names,
            actuator_names: sc.actuator_names,
        })
    }
}
