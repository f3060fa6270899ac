//! Two-tank water plant under level control, with scripted attacks and
//! domain shift.
//!
//! Tank 1 is filled through valve MV101 with a supply throttled towards a
//! level setpoint. The duty pump P101 (or its standby twin P102) transfers
//! water to tank 2 at a rate set by the tank 2 level, and P301 drains tank 2
//! against a slowly varying demand. Levels integrate the flows,
//! `dL/dt = k (q_in - q_out)` in mm/s with flows in L/min. In normal
//! operation every actuator holds its state; only the dry-run and overflow
//! interlocks switch them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::profile::{split_tail, DatasetProfile};
use super::record::{Label, SampleRecord};
use crate::error::{Error, Result};

pub const SENSORS: [&str; 5] = ["FIT101", "LIT101", "FIT201", "LIT301", "FIT301"];
pub const ACTUATORS: [&str; 4] = ["MV101", "P101", "P102", "P301"];

const OFF: u8 = 1;
const ON: u8 = 2;

/// mm/s of level change per L/min of net flow.
pub const LEVEL_GAIN: f64 = 0.1;
const FLOW_LAG: f64 = 5.0;
const TANK_MAX: f64 = 1100.0;
const L1_SETPOINT: f64 = 700.0;
const L2_SETPOINT: f64 = 600.0;
/// L/min of flow correction per mm of level error.
const LEVEL_LOOP_GAIN: f64 = 0.1;
const BASE_FLOW: f64 = 20.0;
const SUPPLY_MAX: f64 = 50.0;
const TRANSFER_MAX: f64 = 40.0;
const DEMAND_SWING: f64 = 4.0;
const DEMAND_PERIOD: f64 = 2700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Manipulation {
    /// Reported value drifts from the true one by `rate` units per second.
    SpoofRamp { rate: f64 },
    /// Reported value pinned to `value`.
    SpoofConstant { value: f64 },
    /// Actuator forced into `state` regardless of the PLC.
    ActuatorFlip { state: u8 },
}

/// One scripted attack. Times are seconds from the start of the test split,
/// `end` exclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub start: usize,
    pub end: usize,
    pub device: String,
    pub manipulation: Manipulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn contains(&self, t: usize) -> bool {
        (self.start..self.end).contains(&t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorOffset {
    pub sensor: String,
    pub span: Span,
    pub magnitude: f64,
    /// Seconds over which the offset drifts in linearly; 0 is a step.
    #[serde(default)]
    pub ramp: usize,
}

impl SensorOffset {
    /// Offset applied at test time `t`.
    pub fn at(&self, t: usize) -> f64 {
        if !self.span.contains(t) {
            return 0.0;
        }
        let elapsed = (t - self.span.start + 1) as f64;
        self.magnitude * (elapsed / self.ramp.max(1) as f64).min(1.0)
    }
}

/// Benign changes of normal behaviour, test split only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    /// Spans during which P101 is tripped and P102 runs in its place.
    #[serde(default)]
    pub redundant_pump: Vec<Span>,
    /// Constant calibration offset on one sensor.
    #[serde(default)]
    pub sensor_offset: Option<SensorOffset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    pub seed: u64,
    /// Attack-free, shift-free seconds split into training and validation.
    pub normal_seconds: usize,
    pub test_seconds: usize,
    pub validation_fraction: f64,
    /// Measurement noise std of level sensors (mm).
    pub level_noise: f64,
    /// Measurement noise std of flow sensors (L/min).
    pub flow_noise: f64,
    #[serde(default)]
    pub attacks: Vec<AttackSpec>,
    #[serde(default)]
    pub shift: ShiftSpec,
}

impl PlantConfig {
    /// Normal operation only.
    pub fn quiet(seed: u64, normal_seconds: usize, test_seconds: usize) -> Self {
        Self {
            seed,
            normal_seconds,
            test_seconds,
            validation_fraction: 0.2,
            level_noise: 0.5,
            flow_noise: 0.3,
            attacks: Vec::new(),
            shift: ShiftSpec::default(),
        }
    }

    /// Three hours of test data: a forced-shut inflow valve, a flow-meter
    /// calibration drift, a level spoof and three standby-pump takeovers.
    pub fn scenario(seed: u64) -> Self {
        Self {
            attacks: vec![
                AttackSpec {
                    start: 900,
                    end: 1500,
                    device: "MV101".into(),
                    manipulation: Manipulation::ActuatorFlip { state: OFF },
                },
                AttackSpec {
                    start: 6000,
                    end: 6600,
                    device: "LIT101".into(),
                    manipulation: Manipulation::SpoofRamp { rate: -0.5 },
                },
            ],
            shift: ShiftSpec {
                redundant_pump: vec![
                    Span { start: 4800, end: 5400 },
                    Span { start: 7800, end: 8400 },
                    Span { start: 9600, end: 10_200 },
                ],
                sensor_offset: Some(SensorOffset {
                    sensor: "FIT201".into(),
                    span: Span { start: 2400, end: 10_800 },
                    magnitude: 4.0,
                    ramp: 1200,
                }),
            },
            ..Self::quiet(seed, 4 * 3600, 3 * 3600)
        }
    }

    fn validate(&self) -> Result<()> {
        let script = |m: String| Err(Error::Script(m));
        for a in &self.attacks {
            if a.start >= a.end || a.end > self.test_seconds {
                return script(format!(
                    "attack on {} [{}, {}) is outside the {}-second test split",
                    a.device, a.start, a.end, self.test_seconds
                ));
            }
            let is_sensor = SENSORS.contains(&a.device.as_str());
            let is_actuator = ACTUATORS.contains(&a.device.as_str());
            match a.manipulation {
                Manipulation::ActuatorFlip { state } if is_actuator => {
                    if state != ON && state != OFF {
                        return script(format!("actuator state {state} is not 1 or 2"));
                    }
                }
                Manipulation::SpoofRamp { .. } | Manipulation::SpoofConstant { .. } if is_sensor => {}
                _ => return script(format!("manipulation does not apply to device {}", a.device)),
            }
        }
        for (i, a) in self.attacks.iter().enumerate() {
            for b in &self.attacks[i + 1..] {
                if a.device == b.device && a.start < b.end && b.start < a.end {
                    return script(format!("overlapping attacks on {}", a.device));
                }
            }
        }
        if let Some(o) = &self.shift.sensor_offset {
            if !SENSORS.contains(&o.sensor.as_str()) {
                return script(format!("offset on unknown sensor {}", o.sensor));
            }
        }
        if self.level_noise < 0.0 || self.flow_noise < 0.0 {
            return Err(Error::Config("noise levels must be >= 0".into()));
        }
        Ok(())
    }
}

/// Generated splits and the attack intervals of the test split.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantData {
    pub train: Vec<SampleRecord>,
    pub validation: Vec<SampleRecord>,
    pub test: Vec<SampleRecord>,
    /// Attack spans as test-record indices.
    pub attacks: Vec<Span>,
}

pub fn synthetic_profile() -> DatasetProfile {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    DatasetProfile {
        name: "two-tank".into(),
        timestamp_column: "Timestamp".into(),
        timestamp_format: None,
        sensors: s(&SENSORS),
        actuators: s(&ACTUATORS),
        label_column: Some("Normal/Attack".into()),
        sections: vec![s(&["FIT101", "LIT101"]), s(&["FIT201", "LIT301", "FIT301"])],
        validation_fraction: 0.2,
    }
}

struct Plant {
    l1: f64,
    l3: f64,
    f101: f64,
    f201: f64,
    f301: f64,
    supply: f64,
    mv101: bool,
    transfer: bool,
    p301: bool,
}

fn sensor_index(name: &str) -> usize {
    SENSORS.iter().position(|s| *s == name).expect("validated sensor")
}

fn actuator_index(name: &str) -> usize {
    ACTUATORS.iter().position(|s| *s == name).expect("validated actuator")
}

fn state(on: bool) -> u8 {
    if on {
        ON
    } else {
        OFF
    }
}

pub fn generate_synthetic_plant(cfg: &PlantConfig) -> Result<PlantData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut p = Plant {
        l1: L1_SETPOINT,
        l3: L2_SETPOINT,
        f101: BASE_FLOW,
        f201: BASE_FLOW,
        f301: BASE_FLOW,
        supply: 0.0,
        mv101: true,
        transfer: true,
        p301: true,
    };
    let total = cfg.normal_seconds + cfg.test_seconds;
    let mut records = Vec::with_capacity(total);
    // Readings the PLC acted on in the previous step.
    let mut reported = [p.f101, p.l1, p.f201, p.l3, p.f301];
    for step in 0..total {
        let test_t = step.checked_sub(cfg.normal_seconds);
        let active = |a: &&AttackSpec| test_t.is_some_and(|t| (a.start..a.end).contains(&t));
        let tripped = test_t.is_some_and(|t| cfg.shift.redundant_pump.iter().any(|s| s.contains(t)));

        // Interlocks: overflow on tank 1, dry running on both pumps.
        let (l1, l3) = (reported[1], reported[3]);
        if l1 >= TANK_MAX - 100.0 {
            p.mv101 = false;
        } else if l1 <= TANK_MAX - 200.0 {
            p.mv101 = true;
        }
        if l1 <= 100.0 {
            p.transfer = false;
        } else if l1 >= 200.0 {
            p.transfer = true;
        }
        if l3 <= 100.0 {
            p.p301 = false;
        } else if l3 >= 200.0 {
            p.p301 = true;
        }
        let mut acts = [
            state(p.mv101),
            state(p.transfer && !tripped),
            state(p.transfer && tripped),
            state(p.p301),
        ];
        for a in cfg.attacks.iter().filter(active) {
            if let Manipulation::ActuatorFlip { state } = a.manipulation {
                acts[actuator_index(&a.device)] = state;
            }
        }

        // Process: two proportional level loops and a sinusoidal demand.
        let secs = step as f64;
        p.supply = 0.995 * p.supply + 0.05 * unit.sample(&mut rng);
        let demand = BASE_FLOW + DEMAND_SWING * (2.0 * std::f64::consts::PI * secs / DEMAND_PERIOD).sin();
        let q101 = if acts[0] == ON {
            (BASE_FLOW + LEVEL_LOOP_GAIN * (L1_SETPOINT - l1) + p.supply).clamp(0.0, SUPPLY_MAX)
        } else {
            0.0
        };
        let q201 = if acts[1] == ON || acts[2] == ON {
            (BASE_FLOW + LEVEL_LOOP_GAIN * (L2_SETPOINT - l3)).clamp(0.0, TRANSFER_MAX)
        } else {
            0.0
        };
        let q301 = if acts[3] == ON { demand } else { 0.0 };
        p.f101 += (q101 - p.f101) / FLOW_LAG;
        p.f201 += (q201 - p.f201) / FLOW_LAG;
        p.f301 += (q301 - p.f301) / FLOW_LAG;
        p.l1 = (p.l1 + LEVEL_GAIN * (p.f101 - p.f201)).clamp(0.0, TANK_MAX);
        p.l3 = (p.l3 + LEVEL_GAIN * (p.f201 - p.f301)).clamp(0.0, TANK_MAX);

        // Measurement.
        let truth = [p.f101, p.l1, p.f201, p.l3, p.f301];
        let mut sensors = [0.0; 5];
        for (i, v) in truth.iter().enumerate() {
            let sigma = if i == 1 || i == 3 { cfg.level_noise } else { cfg.flow_noise };
            sensors[i] = v + sigma * unit.sample(&mut rng);
        }
        if let (Some(t), Some(o)) = (test_t, &cfg.shift.sensor_offset) {
            sensors[sensor_index(&o.sensor)] += o.at(t);
        }
        let mut attacked = false;
        for a in cfg.attacks.iter().filter(active) {
            attacked = true;
            let elapsed = (test_t.unwrap() - a.start) as f64;
            match a.manipulation {
                Manipulation::SpoofRamp { rate } => sensors[sensor_index(&a.device)] += rate * elapsed,
                Manipulation::SpoofConstant { value } => sensors[sensor_index(&a.device)] = value,
                Manipulation::ActuatorFlip { .. } => {}
            }
        }
        reported = sensors;
        records.push(SampleRecord {
            timestamp: step as i64,
            sensors: sensors.to_vec(),
            actuators: acts.to_vec(),
            label: Some(if attacked { Label::Attack } else { Label::Normal }),
        });
    }
    let test = records.split_off(cfg.normal_seconds);
    let (train, validation) = split_tail(&records, cfg.validation_fraction)?;
    let mut attacks: Vec<Span> = cfg
        .attacks
        .iter()
        .map(|a| Span {
            start: a.start,
            end: a.end,
        })
        .collect();
    attacks.sort_by_key(|s| s.start);
    Ok(PlantData {
        train,
        validation,
        test,
        attacks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn tuples(r: &[SampleRecord]) -> BTreeSet<Vec<u8>> {
        r.iter().map(|x| x.actuators.clone()).collect()
    }

    #[test]
    fn quiet_plant_is_closed_world() {
        let d = generate_synthetic_plant(&PlantConfig::quiet(1, 7200, 3600)).unwrap();
        assert!(d.test.iter().all(|r| !r.is_attack()));
        let train = tuples(&d.train);
        assert!(tuples(&d.test).is_subset(&train));
        assert_eq!(train.len(), 1);
        // Levels stay near their setpoints.
        assert!(d.test.iter().all(|r| (500.0..900.0).contains(&r.sensors[1])));
        assert!(d.test.iter().all(|r| (400.0..800.0).contains(&r.sensors[3])));
    }

    #[test]
    fn redundant_pump_creates_new_tuples() {
        let mut cfg = PlantConfig::quiet(2, 7200, 3600);
        cfg.shift.redundant_pump = vec![Span { start: 600, end: 900 }, Span { start: 2000, end: 2400 }];
        let d = generate_synthetic_plant(&cfg).unwrap();
        let novel: BTreeSet<_> = tuples(&d.test).difference(&tuples(&d.train)).cloned().collect();
        assert_eq!(novel.len(), 1);
        let takeover = |t: usize| (600..900).contains(&t) || (2000..2400).contains(&t);
        assert!((0..d.test.len()).all(|t| novel.contains(&d.test[t].actuators) == takeover(t)));
    }

    #[test]
    fn pump_takeover_leaves_sensors_untouched() {
        let quiet = PlantConfig::quiet(4, 3600, 3600);
        let mut swapped = quiet.clone();
        swapped.shift.redundant_pump = vec![Span { start: 100, end: 3000 }];
        let (a, b) = (generate_synthetic_plant(&quiet).unwrap(), generate_synthetic_plant(&swapped).unwrap());
        assert!(a.test.iter().zip(&b.test).all(|(x, y)| x.sensors == y.sensors));
        assert_ne!(a.test, b.test);
    }

    #[test]
    fn attack_labels_match_script() {
        let mut cfg = PlantConfig::quiet(3, 3600, 3600);
        cfg.attacks.push(AttackSpec {
            start: 1000,
            end: 1600,
            device: "LIT101".into(),
            manipulation: Manipulation::SpoofRamp { rate: -0.5 },
        });
        let d = generate_synthetic_plant(&cfg).unwrap();
        let labeled: Vec<usize> = (0..d.test.len()).filter(|&t| d.test[t].is_attack()).collect();
        assert_eq!(labeled, (1000..1600).collect::<Vec<_>>());
        assert_eq!(d.attacks, vec![Span { start: 1000, end: 1600 }]);
    }

    #[test]
    fn script_errors() {
        let mut cfg = PlantConfig::quiet(3, 100, 100);
        let a = AttackSpec {
            start: 10,
            end: 50,
            device: "LIT101".into(),
            manipulation: Manipulation::SpoofConstant { value: 0.0 },
        };
        cfg.attacks = vec![a.clone(), AttackSpec { start: 40, end: 60, ..a.clone() }];
        assert!(matches!(generate_synthetic_plant(&cfg), Err(Error::Script(_))));
        cfg.attacks = vec![AttackSpec { end: 101, ..a.clone() }];
        assert!(matches!(generate_synthetic_plant(&cfg), Err(Error::Script(_))));
        cfg.attacks = vec![AttackSpec { device: "P101".into(), ..a }];
        assert!(matches!(generate_synthetic_plant(&cfg), Err(Error::Script(_))));
    }

    #[test]
    fn deterministic() {
        let c = PlantConfig::scenario(5);
        let a = generate_synthetic_plant(&PlantConfig { normal_seconds: 600, test_seconds: 10_800, ..c.clone() }).unwrap();
        let b = generate_synthetic_plant(&PlantConfig { normal_seconds: 600, test_seconds: 10_800, ..c }).unwrap();
        assert_eq!(a, b);
    }
}
