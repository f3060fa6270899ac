//! Independent oracles shared by the focused test files and the acceptance
//! target. Every check returns `Ok(detail)` or `Err(detail)`.

#![allow(dead_code)]

use std::sync::OnceLock;
use std::time::Instant;

use plantwatch::actuator_db::ActuatorDb;
use plantwatch::adapt::{frozen_parameter_check, handle_feedback, FaFlags, FeedbackBatch, FeedbackDecision, TuningConfig};
use plantwatch::data::{attack_labels, generate_synthetic_plant, DatasetProfile, PlantConfig, PlantData, SampleRecord};
use plantwatch::detector::{apply_grace, mse_section, reported_alarms, AlarmSource, Detector, DetectorConfig, GraceFilter};
use plantwatch::eval::{
    false_alarm_episodes, interventions_rate, point_metrics, replay, summarize_trace, sweep_noise, sweep_w_anom,
    sweep_w_grace, FeedbackPolicy, RunTrace, Technician,
};
use plantwatch::nn::{mse, Gradients, Op, Parameterized, Sequential, Tensor, LEAKY_SLOPE};
use plantwatch::pipeline::{fit_system, Engine, EngineConfig, FitConfig, ThresholdMode, TrainedSystem};
use plantwatch::threshold::{median_filter, tune_threshold, Ttnn, TtnnConfig};
use plantwatch::wdnn::{section_cost, section_targets, SectionLayout, Wdnn, WdnnConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Straight-line forward passes

fn leaky(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        LEAKY_SLOPE * v
    }
}

/// Row-major `channels × len` activation.
#[derive(Clone)]
pub struct Act {
    pub channels: usize,
    pub data: Vec<f64>,
}

fn dense_loop(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let (out, inp) = (b.len(), x.len());
    let mut y = vec![0.0; out];
    for o in 0..out {
        let mut acc = b[o];
        for i in 0..inp {
            acc += w[o * inp + i] * x[i];
        }
        y[o] = acc;
    }
    y
}

fn conv_loop(w: &[f64], b: &[f64], cin: usize, k: usize, stride: usize, x: &Act) -> Act {
    let len = x.data.len() / x.channels;
    let out_len = (len - k) / stride + 1;
    let kernels = b.len();
    let mut y = vec![0.0; kernels * out_len];
    for o in 0..kernels {
        for t in 0..out_len {
            let mut acc = b[o];
            for c in 0..cin {
                for j in 0..k {
                    acc += w[(o * cin + c) * k + j] * x.data[c * len + t * stride + j];
                }
            }
            y[o * out_len + t] = acc;
        }
    }
    Act {
        channels: kernels,
        data: y,
    }
}

fn pool_loop(x: &Act, factor: usize) -> Act {
    let len = x.data.len() / x.channels;
    let out_len = len.div_ceil(factor);
    let mut y = Vec::with_capacity(x.channels * out_len);
    for c in 0..x.channels {
        for t in 0..out_len {
            let mut m = f64::NEG_INFINITY;
            for j in t * factor..((t + 1) * factor).min(len) {
                if x.data[c * len + j] > m {
                    m = x.data[c * len + j];
                }
            }
            y.push(m);
        }
    }
    Act {
        channels: x.channels,
        data: y,
    }
}

/// Forward pass of a chain written against the raw parameter arrays.
pub fn sequential_oracle(net: &Sequential, x: Act) -> Act {
    let mut cur = x;
    for n in net.nodes() {
        cur = match &n.op {
            Op::Dense(d) => Act {
                channels: 1,
                data: dense_loop(d.weights(), d.bias(), &cur.data),
            },
            Op::Conv1d(c) => conv_loop(c.weights(), c.bias(), c.in_channels(), c.kernel_size(), c.stride(), &cur),
            Op::MaxPool1d { factor } => pool_loop(&cur, *factor),
            Op::LeakyRelu => Act {
                channels: cur.channels,
                data: cur.data.iter().map(|&v| leaky(v)).collect(),
            },
            Op::Reshape { channels } => Act {
                channels: *channels,
                data: cur.data,
            },
        };
    }
    cur
}

/// WDNN forward rebuilt from named parameters and the published layer order.
pub fn wdnn_oracle(model: &Wdnn, x: &[f64]) -> Vec<Vec<f64>> {
    let cfg = model.config();
    let views = model.param_views();
    let get = |name: &str| -> &[f64] {
        views
            .iter()
            .find(|v| v.name == name)
            .unwrap_or_else(|| panic!("no parameter {name}"))
            .values
    };
    let act = |v: Vec<f64>| v.into_iter().map(leaky).collect::<Vec<_>>();
    let wide = act(dense_loop(get("dl1.weight"), get("dl1.bias"), x));
    let dl2 = act(dense_loop(get("dl2.weight"), get("dl2.bias"), x));
    let mut a = Act {
        channels: cfg.dl2_factor,
        data: dl2,
    };
    a = conv_loop(get("cl1.weight"), get("cl1.bias"), cfg.dl2_factor, cfg.cl1_size, 1, &a);
    a.data.iter_mut().for_each(|v| *v = leaky(*v));
    a = pool_loop(&a, cfg.pool_factor);
    a = conv_loop(get("cl2.weight"), get("cl2.bias"), cfg.cl1_kernels, cfg.cl2_size, 1, &a);
    a.data.iter_mut().for_each(|v| *v = leaky(*v));
    a = pool_loop(&a, cfg.pool_factor);
    let deep = act(dense_loop(get("dl3.weight"), get("dl3.bias"), &a.data));
    let mut joined = wide;
    joined.extend(deep);
    let f = act(dense_loop(get("dl4.weight"), get("dl4.bias"), &joined));
    (0..cfg.sections())
        .map(|g| {
            let p = |l: &str, k: &str| format!("section{g}.{l}.{k}");
            let h5 = act(dense_loop(get(&p("dl5", "weight")), get(&p("dl5", "bias")), &f));
            let h6 = act(dense_loop(get(&p("dl6", "weight")), get(&p("dl6", "bias")), &h5));
            let y = dense_loop(get(&p("dl7", "weight")), get(&p("dl7", "bias")), &h6);
            if cfg.output_activation {
                act(y)
            } else {
                y
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Finite differences

/// `|a - b| / max(|a|, |b|, 1e-6)`; the floor keeps vanishing gradients from
/// turning rounding noise into a large ratio.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

const H: f64 = 1e-5;

/// Comparison tally. A probe whose one-sided slopes disagree straddles a
/// LeakyReLU or max-pool kink, where no finite difference is meaningful; it
/// is counted as skipped instead of compared.
#[derive(Debug, Default, Clone, Copy)]
pub struct FdStats {
    pub worst: f64,
    pub compared: usize,
    pub skipped: usize,
}

impl FdStats {
    fn probe(&mut self, analytic: f64, plus: f64, at: f64, minus: f64) {
        let (fwd, bwd) = ((plus - at) / H, (at - minus) / H);
        if rel_err(fwd, bwd) > 1e-2 {
            self.skipped += 1;
            return;
        }
        self.compared += 1;
        self.worst = self.worst.max(rel_err(analytic, (plus - minus) / (2.0 * H)));
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            worst: self.worst.max(other.worst),
            compared: self.compared + other.compared,
            skipped: self.skipped + other.skipped,
        }
    }
}

fn weighted_output(net: &Sequential, x: &Tensor, r: &[f64]) -> f64 {
    let y = net.forward(x.clone()).unwrap();
    y.data().iter().zip(r).map(|(a, b)| a * b).sum()
}

/// Every parameter and input gradient of `net` under the loss `Σ r_i y_i`.
pub fn sequential_fd(net: &Sequential, x: &Tensor, r: &[f64]) -> FdStats {
    let (y, tape) = net.forward_taped(x.clone()).unwrap();
    let mut grads = Gradients::zeros_like(&net.params());
    let dx = net
        .backward(&tape, Tensor::new(y.channels(), r.to_vec()).unwrap(), grads.tensors_mut(), true)
        .unwrap()
        .unwrap();
    let at = weighted_output(net, x, r);
    let mut stats = FdStats::default();
    for (ti, g) in grads.tensors().iter().enumerate() {
        for j in 0..g.len() {
            let mut p = net.clone();
            p.params_mut()[ti][j] += H;
            let mut m = net.clone();
            m.params_mut()[ti][j] -= H;
            stats.probe(g[j], weighted_output(&p, x, r), at, weighted_output(&m, x, r));
        }
    }
    for j in 0..x.data().len() {
        let mut xp = x.clone();
        xp.data_mut()[j] += H;
        let mut xm = x.clone();
        xm.data_mut()[j] -= H;
        stats.probe(dx.data()[j], weighted_output(net, &xp, r), at, weighted_output(net, &xm, r));
    }
    stats
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn small_wdnn_config() -> WdnnConfig {
    let mut c = WdnnConfig::swat(4, 2, SectionLayout::contiguous(&[2, 2]));
    c.w_in = 12;
    c.horizon = 3;
    c.cl1_kernels = 6;
    c.cl2_kernels = 8;
    c.dl4_width = 10;
    c
}

fn wdnn_loss(model: &Wdnn, x: &Tensor, targets: &[Vec<f64>]) -> f64 {
    model
        .forward(x)
        .unwrap()
        .iter()
        .zip(targets)
        .map(|(p, t)| mse(p, t).unwrap())
        .sum()
}

fn locate(sizes: &[usize], mut k: usize) -> (usize, usize) {
    let mut ti = 0;
    while k >= sizes[ti] {
        k -= sizes[ti];
        ti += 1;
    }
    (ti, k)
}

/// `samples` randomly chosen WDNN parameters.
pub fn wdnn_fd(seed: u64, samples: usize) -> FdStats {
    let mut r = rng(seed);
    let cfg = small_wdnn_config();
    let model = Wdnn::build(cfg.clone(), seed).unwrap();
    let x = Tensor::new(cfg.features(), (0..cfg.features() * cfg.w_in).map(|_| r.random_range(0.0..1.0)).collect())
        .unwrap();
    let targets: Vec<Vec<f64>> = (0..cfg.sections()).map(|g| uniform_vec(&mut r, cfg.dl7_width(g))).collect();
    let mut grads = model.zero_grads();
    model.accumulate(&x, &targets, 1.0, &mut grads).unwrap();
    let sizes: Vec<usize> = grads.tensors().iter().map(Vec::len).collect();
    let total: usize = sizes.iter().sum();
    let at = wdnn_loss(&model, &x, &targets);
    let mut stats = FdStats::default();
    for _ in 0..samples {
        let (ti, k) = locate(&sizes, r.random_range(0..total));
        let mut p = model.clone();
        p.params_mut()[ti][k] += H;
        let mut m = model.clone();
        m.params_mut()[ti][k] -= H;
        stats.probe(grads.tensors()[ti][k], wdnn_loss(&p, &x, &targets), at, wdnn_loss(&m, &x, &targets));
    }
    stats
}

/// `samples` TTNN parameters, or all of them if there are fewer.
pub fn ttnn_fd(seed: u64, samples: usize) -> FdStats {
    let mut r = rng(seed);
    let ttnn = Ttnn::build(TtnnConfig::new(16, 4, 4), seed).unwrap();
    let net = ttnn.net().clone();
    let x = Tensor::new(1, (0..16).map(|_| r.random_range(0.0..2.0)).collect()).unwrap();
    let target = r.random_range(0.0..1.0);
    let loss = |n: &Sequential| (n.forward(x.clone()).unwrap().data()[0] - target).powi(2);
    let (y, tape) = net.forward_taped(x.clone()).unwrap();
    let mut grads = Gradients::zeros_like(&net.params());
    let dy = 2.0 * (y.data()[0] - target);
    net.backward(&tape, Tensor::vector(vec![dy]), grads.tensors_mut(), false).unwrap();
    let sizes: Vec<usize> = grads.tensors().iter().map(Vec::len).collect();
    let total: usize = sizes.iter().sum();
    let picks: Vec<usize> = if total <= samples {
        (0..total).collect()
    } else {
        (0..samples).map(|_| r.random_range(0..total)).collect()
    };
    let at = loss(&net);
    let mut stats = FdStats::default();
    for pick in picks {
        let (ti, k) = locate(&sizes, pick);
        let mut p = net.clone();
        p.params_mut()[ti][k] += H;
        let mut m = net.clone();
        m.params_mut()[ti][k] -= H;
        stats.probe(grads.tensors()[ti][k], loss(&p), at, loss(&m));
    }
    stats
}

/// A random single-layer chain of the given kind plus a matching input.
pub fn random_layer(kind: usize, seed: u64) -> (Sequential, Tensor) {
    use plantwatch::nn::{Conv1dLayerParams, DenseLayerParams};
    let mut r = rng(seed);
    let mut net = Sequential::new();
    let x = match kind {
        0 | 1 => {
            let (i, o) = (r.random_range(1..7), r.random_range(1..7));
            let d = DenseLayerParams::new(i, o, uniform_vec(&mut r, i * o), uniform_vec(&mut r, o)).unwrap();
            net.dense("d", d, kind == 1);
            Tensor::vector(uniform_vec(&mut r, i))
        }
        2 => {
            let (cin, kernels, k, stride) = (r.random_range(1..4), r.random_range(1..5), r.random_range(1..4), r.random_range(1..3));
            let len = k + r.random_range(0..9);
            let c = Conv1dLayerParams::new(cin, k, stride, uniform_vec(&mut r, kernels * cin * k), uniform_vec(&mut r, kernels))
                .unwrap();
            net.conv("c", c);
            Tensor::new(cin, uniform_vec(&mut r, cin * len)).unwrap()
        }
        3 => {
            let (c, len, factor) = (r.random_range(1..4), r.random_range(1..12), r.random_range(1..4));
            net.push("p", Op::MaxPool1d { factor });
            Tensor::new(c, uniform_vec(&mut r, c * len)).unwrap()
        }
        _ => {
            net.push("a", Op::LeakyRelu);
            let n = r.random_range(1..10);
            Tensor::vector(uniform_vec(&mut r, n))
        }
    };
    (net, x)
}

pub const LAYER_KINDS: [&str; 5] = ["dense", "dense+leaky", "conv1d+leaky", "maxpool", "leaky_relu"];

fn judge(name: &str, stats: FdStats, tol: f64) -> Result<String, String> {
    let FdStats { worst, compared, skipped } = stats;
    ensure(worst <= tol, || format!("{name}: worst relative error {worst:.2e} > {tol:.0e}"))?;
    // Kinks are rare; a large skip share would mean the check compared little.
    ensure(skipped * 100 <= compared + skipped, || format!("{name}: {skipped} of {} probes straddled a kink", compared + skipped))?;
    Ok(format!("{name} {worst:.1e} ({compared} probes, {skipped} at kinks)"))
}

pub fn gradient_oracle() -> Check {
    let mut detail = Vec::new();
    for (kind, name) in LAYER_KINDS.iter().enumerate() {
        let mut stats = FdStats::default();
        for seed in 0..100 {
            let (net, x) = random_layer(kind, 1000 * kind as u64 + seed);
            let out = net.forward(x.clone()).unwrap();
            let r = uniform_vec(&mut rng(seed + 7), out.data().len());
            stats = stats.merge(sequential_fd(&net, &x, &r));
        }
        detail.push(judge(name, stats, 1e-4)?);
    }
    let wdnn = (0..20).map(|s| wdnn_fd(s, 100)).fold(FdStats::default(), FdStats::merge);
    detail.push(judge("WDNN", wdnn, 1e-3)?);
    let ttnn = (0..20).map(|s| ttnn_fd(s, 100)).fold(FdStats::default(), FdStats::merge);
    detail.push(judge("TTNN", ttnn, 1e-3)?);
    Ok(detail.join("; "))
}

// ---------------------------------------------------------------------------
// Cost and error

pub fn cost_equivalence() -> Check {
    let mut r = rng(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (s, n) = (r.random_range(1..40), r.random_range(1..12));
        let preds: Vec<Vec<f64>> = (0..s).map(|_| uniform_vec(&mut r, n)).collect();
        let targets: Vec<Vec<f64>> = (0..s).map(|_| uniform_vec(&mut r, n)).collect();
        let mut outer = 0.0;
        for t in 0..s {
            let mut inner = 0.0;
            for i in 0..n {
                inner += (targets[t][i] - preds[t][i]) * (targets[t][i] - preds[t][i]);
            }
            outer += inner / n as f64;
        }
        let brute = outer / s as f64;
        worst = worst.max((section_cost(&preds, &targets).unwrap() - brute).abs());

        let mut sq = 0.0;
        for i in 0..n {
            sq += (targets[0][i] - preds[0][i]).powi(2);
        }
        worst = worst.max((mse_section(&targets[0], &preds[0]).unwrap() - sq / n as f64).abs());
    }
    ensure(worst <= 1e-12, || format!("worst absolute difference {worst:.2e} > 1e-12"))?;
    Ok(format!("1000 instances, worst difference {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// Detection

/// Random exceedance stream with long runs so that `W_anom = 30` fires.
pub fn random_stream(r: &mut ChaCha8Rng, g: usize, n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<bool>) {
    let mut state = vec![false; g];
    let mut mse = Vec::with_capacity(n);
    let mut thr = Vec::with_capacity(n);
    let mut known = Vec::with_capacity(n);
    for _ in 0..n {
        let mut m = Vec::with_capacity(g);
        let mut th = Vec::with_capacity(g);
        for s in state.iter_mut() {
            if r.random_bool(0.06) {
                *s = !*s;
            }
            let t = r.random_range(0.1..1.0);
            // Equality never counts as an exceedance.
            let v = if *s {
                t * r.random_range(1.01..2.0)
            } else if r.random_bool(0.1) {
                t
            } else {
                t * r.random_range(0.0..0.99)
            };
            m.push(v);
            th.push(t);
        }
        mse.push(m);
        thr.push(th);
        known.push(!r.random_bool(0.01));
    }
    (mse, thr, known)
}

/// Sections flagged at `t` by scanning the closed window `[t - w, t]`.
pub fn brute_sections(mse: &[Vec<f64>], thr: &[Vec<f64>], first_t: usize, w: usize, t: usize) -> Vec<usize> {
    let g = mse[0].len();
    (0..g)
        .filter(|&k| t >= first_t + w && (t - w..=t).all(|tau| mse[tau][k] > thr[tau][k]))
        .collect()
}

/// Reported stream by explicit run-length measurement.
pub fn brute_grace(alarms: &[bool], w_grace: usize) -> Vec<bool> {
    let n = alarms.len();
    (0..n)
        .map(|t| {
            if !alarms[t] {
                return false;
            }
            let mut lo = t;
            while lo > 0 && alarms[lo - 1] {
                lo -= 1;
            }
            let mut hi = t;
            while hi + 1 < n && alarms[hi + 1] {
                hi += 1;
            }
            hi - lo + 1 >= w_grace
        })
        .collect()
}

pub fn detection_oracle() -> Check {
    let mut r = rng(23);
    let mut checked = 0usize;
    for stream in 0..1000u64 {
        let g = r.random_range(1..4);
        let n = r.random_range(60..260);
        let first_t = r.random_range(0..12);
        let (mse, thr, known) = random_stream(&mut r, g, n);
        for w_anom in [1usize, 2, 3, 30] {
            let cfg = DetectorConfig::new(w_anom, 0, 32);
            let mut det = Detector::new(cfg, g, first_t).unwrap();
            let mut sensor = vec![false; n];
            let mut actuator = vec![false; n];
            for t in first_t..n {
                let out = det.step_mse(t, known[t], &mse[t], &thr[t]).unwrap();
                let want = brute_sections(&mse, &thr, first_t, w_anom, t);
                ensure(out.sections == want, || {
                    format!("stream {stream}, W_anom={w_anom}, t={t}: sections {:?} != {want:?}", out.sections)
                })?;
                ensure(out.label == (!known[t] || !want.is_empty()), || {
                    format!("stream {stream}, W_anom={w_anom}, t={t}: label mismatch")
                })?;
                sensor[t] = out.sensor_alarm();
                actuator[t] = out.actuator_alarm;
                checked += 1;
            }
            for w_grace in [0usize, 5, 20] {
                let want = brute_grace(&sensor, w_grace);
                ensure(apply_grace(&sensor, w_grace) == want, || {
                    format!("stream {stream}: grace {w_grace} differs from run-length scan")
                })?;
                let mut f = GraceFilter::new(w_grace);
                let mut streamed = vec![false; n];
                for (t, &a) in sensor.iter().enumerate() {
                    for u in f.push(t, a) {
                        streamed[u] = true;
                    }
                }
                ensure(streamed == want, || format!("stream {stream}: streaming grace {w_grace} differs"))?;
                let rep = reported_alarms(&sensor, &actuator, &DetectorConfig::new(w_anom, w_grace, 32));
                let brute: Vec<bool> = want.iter().zip(&actuator).map(|(s, a)| *s || *a).collect();
                ensure(rep == brute, || format!("stream {stream}: reported stream differs"))?;
            }
        }
    }
    Ok(format!("1000 streams, {checked} detector steps, W_anom {{1,2,3,30}} x W_grace {{0,5,20}}"))
}

// ---------------------------------------------------------------------------
// Thresholds

pub fn median_oracle_one(series: &[f64], kernel: usize) -> Vec<f64> {
    let half = kernel / 2;
    (0..series.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(series.len());
            let mut w = series[lo..hi].to_vec();
            w.sort_by(f64::total_cmp);
            let m = w.len() / 2;
            if w.len() % 2 == 1 {
                w[m]
            } else {
                (w[m - 1] + w[m]) / 2.0
            }
        })
        .collect()
}

pub fn median_oracle() -> Check {
    let mut r = rng(31);
    for case in 0..1000 {
        let n = r.random_range(1..200);
        let kernel = 2 * r.random_range(0..31) + 1;
        // Coarse values make ties common.
        let coarse = r.random_bool(0.3);
        let series: Vec<f64> = (0..n)
            .map(|_| {
                let v: f64 = r.random_range(-5.0..5.0);
                if coarse {
                    v.round()
                } else {
                    v
                }
            })
            .collect();
        let got = median_filter(&series, kernel).unwrap();
        let want = median_oracle_one(&series, kernel);
        ensure(got.iter().zip(&want).all(|(a, b)| a.to_bits() == b.to_bits()), || {
            format!("case {case}: n={n} kernel={kernel} differs from sort oracle")
        })?;
    }
    Ok("1000 series, bit-identical".into())
}

pub fn tuning_oracle() -> Check {
    let mut r = rng(41);
    let mut worst: f64 = 0.0;
    for case in 0..50u64 {
        let w = r.random_range(8..40);
        let s = r.random_range(1..40);
        let kernel = 2 * r.random_range(0..30) + 1;
        let mut ttnn = Ttnn::build(TtnnConfig::new(w, 4, 4), case).unwrap();
        let scale = r.random_range(0.01..2.0);
        ttnn.set_scale(scale).unwrap();
        let series: Vec<f64> = (0..w + s - 1).map(|_| r.random_range(0.0..0.2)).collect();
        let t_base = r.random_range(0.0..0.5);

        let filtered = median_oracle_one(&series, kernel);
        let mut max_est: f64 = 0.0;
        for start in 0..s {
            let window: Vec<f64> = filtered[start..start + w].iter().map(|v| v / scale).collect();
            let y = sequential_oracle(ttnn.net(), Act { channels: 1, data: window }).data[0] * scale;
            max_est = max_est.max(y.max(0.0));
        }
        let want = t_base + max_est;
        let got = tune_threshold(&ttnn, &series, kernel, t_base).unwrap();
        worst = worst.max((got.threshold - want).abs());
        ensure((got.threshold - want).abs() <= 1e-9, || {
            format!("case {case}: threshold {} vs oracle {want}", got.threshold)
        })?;
        ensure(got.threshold >= t_base, || format!("case {case}: threshold below T_base"))?;
        let shifted = tune_threshold(&ttnn, &series, kernel, t_base + 0.25).unwrap();
        ensure(
            shifted.max_estimate.to_bits() == got.max_estimate.to_bits()
                && shifted.threshold.to_bits() == (t_base + 0.25 + got.max_estimate).to_bits(),
            || format!("case {case}: T_base shift changed the estimate"),
        )?;
    }
    Ok(format!("50 series, worst difference {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// Metrics

pub fn metrics_oracle() -> Check {
    let mut r = rng(53);
    for case in 0..1000 {
        let n = r.random_range(0..300);
        let labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.3)).collect();
        let preds: Vec<bool> = (0..n).map(|_| r.random_bool(0.4)).collect();
        let m = point_metrics(&labels, &preds).unwrap();
        let mut c = [[0usize; 2]; 2];
        for (l, p) in labels.iter().zip(&preds) {
            c[usize::from(*l)][usize::from(*p)] += 1;
        }
        let (tp, fp, fn_, tn) = (c[1][1], c[0][1], c[1][0], c[0][0]);
        let pr = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let re = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f1 = if pr + re == 0.0 { 0.0 } else { 2.0 * pr * re / (pr + re) };
        ensure(
            (m.tp, m.fp, m.fn_, m.tn) == (tp, fp, fn_, tn) && m.precision == pr && m.recall == re && m.f1 == f1,
            || format!("case {case}: {m:?} differs from enumeration"),
        )?;
    }
    // 645 false alarms over the four-day test window.
    let rate = interventions_rate(645, 4.0 * 24.0 * 3600.0).map_err(|e| e.to_string())?;
    ensure((rate - 6.6).abs() <= 0.15, || format!("645 alarms in 96 h gives {rate:.3}/h, not about 6.6"))?;
    Ok(format!("1000 random pairs exact; 645/96 h = {rate:.2}/h"))
}

// ---------------------------------------------------------------------------
// Shared synthetic system

pub const PLANT_SEED: u64 = 7;
pub const FIT_SEED: u64 = 1;

pub struct Synthetic {
    /// Attacks, pump takeovers and the flow-meter drift.
    pub data: PlantData,
    /// The same test window with attacks only.
    pub attacks_only: Vec<SampleRecord>,
    /// The same test window with the drift only.
    pub drift_only: Vec<SampleRecord>,
    pub system: TrainedSystem,
    pub fit_seconds: f64,
}

pub fn drift_only_config() -> PlantConfig {
    let mut c = PlantConfig::scenario(PLANT_SEED);
    c.attacks.clear();
    c.shift.redundant_pump.clear();
    c
}

pub fn synthetic() -> &'static Synthetic {
    static CELL: OnceLock<Synthetic> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = PlantConfig::scenario(PLANT_SEED);
        let data = generate_synthetic_plant(&cfg).unwrap();
        let mut clean = cfg.clone();
        clean.shift = Default::default();
        let attacks_only = generate_synthetic_plant(&clean).unwrap().test;
        let drift_only = generate_synthetic_plant(&drift_only_config()).unwrap().test;
        let started = Instant::now();
        let (system, _) = fit_system(&data.train, &data.validation, &FitConfig::synthetic(FIT_SEED).unwrap(), None).unwrap();
        Synthetic {
            data,
            attacks_only,
            drift_only,
            system,
            fit_seconds: started.elapsed().as_secs_f64(),
        }
    })
}

pub fn engine(sys: &TrainedSystem) -> Engine {
    Engine::new(sys.clone(), EngineConfig::synthetic()).unwrap()
}

pub fn run(sys: &TrainedSystem, records: &[SampleRecord], policy: FeedbackPolicy) -> RunTrace {
    replay(&mut engine(sys), records, &Technician::new(policy)).unwrap()
}

fn param_bits(model: &Wdnn) -> Vec<(String, Vec<u64>)> {
    model
        .param_views()
        .into_iter()
        .map(|v| (v.name, v.values.iter().map(|x| x.to_bits()).collect()))
        .collect()
}

pub fn section_cost_on(model: &Wdnn, batch: &FeedbackBatch, g: usize) -> f64 {
    let preds: Vec<Vec<f64>> = batch.inputs.iter().map(|x| model.forward(x).unwrap()[g].clone()).collect();
    let targets: Vec<Vec<f64>> = batch.targets.iter().map(|t| section_targets(model, t)[g].clone()).collect();
    section_cost(&preds, &targets).unwrap()
}

/// Engine fed with `records[..=t]`.
pub fn engine_at(sys: &TrainedSystem, records: &[SampleRecord], t: usize) -> Engine {
    let mut e = engine(sys);
    for r in &records[..=t] {
        e.push(r).unwrap();
    }
    e
}

pub fn feedback_scope(sys: &TrainedSystem, records: &[SampleRecord], t: usize) -> Check {
    let started = Instant::now();
    let e = engine_at(sys, records, t);
    let batch = e.feedback_batch(t).map_err(|x| x.to_string())?;
    let g_count = sys.model.sections();
    let cfg = TuningConfig::default();
    let mut costs = Vec::new();
    for g in 0..g_count {
        let mut model = sys.model.clone();
        let mut db = sys.db.clone();
        let decision = FeedbackDecision {
            t,
            flags: FaFlags::section(g_count, g),
            actuators: records[t].actuators.clone(),
            batch: batch.clone(),
        };
        let before = section_cost_on(&model, &batch, g);
        let report = handle_feedback(&decision, &mut model, &mut db, &cfg).map_err(|x| x.to_string())?;
        let after = section_cost_on(&model, &batch, g);
        let prefix = Wdnn::section_prefix(g);
        let (a, b) = (param_bits(&sys.model), param_bits(&model));
        for ((name, x), (_, y)) in a.iter().zip(&b) {
            if !name.starts_with(&prefix) {
                ensure(x == y, || format!("section {g} feedback changed {name}"))?;
            }
        }
        ensure(a.iter().zip(&b).any(|((n, x), (_, y))| n.starts_with(&prefix) && x != y), || {
            format!("section {g} feedback left its own head unchanged")
        })?;
        ensure(frozen_parameter_check(&sys.model, &model, g).unwrap(), || "frozen_parameter_check disagrees".into())?;
        ensure(after <= before, || format!("section {g}: c_g rose from {before:.3e} to {after:.3e}"))?;
        ensure((report.sections[0].cost_after - after).abs() <= 1e-12 * after.max(1.0), || {
            format!("section {g}: reported cost {} differs from recomputed {after}", report.sections[0].cost_after)
        })?;
        ensure(db == sys.db, || "section feedback touched the actuator database".into())?;
        costs.push(format!("c_{g} {before:.2e}->{after:.2e}"));
    }

    // Actuator verdicts: insert once, then a no-op.
    let novel = {
        let mut v = records[t].actuators.clone();
        v.iter_mut().for_each(|a| *a = if *a == 2 { 1 } else { 2 });
        v
    };
    let mut model = sys.model.clone();
    let mut db = sys.db.clone();
    let flags = FaFlags {
        actuators: true,
        sections: vec![false; g_count],
    };
    let decision = FeedbackDecision {
        t,
        flags,
        actuators: novel.clone(),
        batch: FeedbackBatch::default(),
    };
    let first = handle_feedback(&decision, &mut model, &mut db, &cfg).map_err(|x| x.to_string())?;
    let snapshot = db.to_snapshot();
    let second = handle_feedback(&decision, &mut model, &mut db, &cfg).map_err(|x| x.to_string())?;
    ensure(first.db_inserted && !second.db_inserted && db.to_snapshot() == snapshot, || {
        "repeated actuator feedback changed the database".into()
    })?;
    ensure(db.contains(&novel).unwrap() && db.len() == sys.db.len() + 1, || "tuple not inserted".into())?;
    ensure(param_bits(&model) == param_bits(&sys.model), || "actuator feedback touched the model".into())?;
    Ok(format!("{}; db idempotent; {:.2} s", costs.join(", "), started.elapsed().as_secs_f64()))
}

pub fn swat_latency() -> Result<(f64, f64), String> {
    let profile = DatasetProfile::swat();
    let cfg = WdnnConfig::swat(profile.m_se(), profile.m_ac(), profile.layout().unwrap());
    let model = Wdnn::build(cfg.clone(), 5).unwrap();
    let mut r = rng(5);
    let batch = FeedbackBatch {
        inputs: (0..32)
            .map(|_| Tensor::new(cfg.features(), (0..cfg.features() * cfg.w_in).map(|_| r.random_range(0.0..1.0)).collect()).unwrap())
            .collect(),
        targets: (0..32).map(|_| (0..cfg.m_se).map(|_| r.random_range(0.0..1.0)).collect()).collect(),
    };
    let mut timings = Vec::new();
    for flags in [FaFlags::section(cfg.sections(), 1), FaFlags {
        actuators: true,
        sections: vec![true; cfg.sections()],
    }] {
        let mut m = model.clone();
        let mut db = ActuatorDb::new(cfg.m_ac);
        let decision = FeedbackDecision {
            t: 0,
            flags,
            actuators: vec![1; cfg.m_ac],
            batch: batch.clone(),
        };
        let started = Instant::now();
        let report = handle_feedback(&decision, &mut m, &mut db, &TuningConfig::default()).map_err(|e| e.to_string())?;
        let secs = started.elapsed().as_secs_f64();
        ensure(report.sections.iter().all(|s| s.epochs == 100), || "tuning did not run 100 epochs".into())?;
        timings.push(secs);
    }
    Ok((timings[0], timings[1]))
}

pub fn latency() -> Check {
    let (one, all) = swat_latency()?;
    ensure(all < 2.0, || format!("handle_feedback took {all:.3} s with every section flagged"))?;
    Ok(format!("one section {:.0} ms, all six sections {:.0} ms", one * 1e3, all * 1e3))
}

// ---------------------------------------------------------------------------
// End-to-end scenarios

pub fn false_alarm_points(trace: &RunTrace) -> usize {
    trace.reported.iter().zip(&trace.truth).filter(|(r, l)| **r && !**l).count()
}

pub fn domain_shift(s: &Synthetic) -> Check {
    let started = Instant::now();
    let labels = attack_labels(&s.data.test);
    let none = run(&s.system, &s.data.test, FeedbackPolicy::None);
    let adapted = run(&s.system, &s.data.test, FeedbackPolicy::FirstPerSource);
    let (fa_none, fa_adapt) = (false_alarm_points(&none), false_alarm_points(&adapted));
    let sn = summarize_trace(&none, &labels, 60).unwrap();
    let sa = summarize_trace(&adapted, &labels, 60).unwrap();
    let episodes = (
        false_alarm_episodes(&none.reported, &labels).len(),
        false_alarm_episodes(&adapted.reported, &labels).len(),
    );
    let elapsed = started.elapsed().as_secs_f64() + s.fit_seconds;
    let detail = format!(
        "false alarms {fa_none} -> {fa_adapt} (episodes {} -> {}), attacks detected {}/{} with feedback at t={:?}, {:.0} s incl. training",
        episodes.0,
        episodes.1,
        sa.detected_attacks,
        sa.attacks.len(),
        adapted.feedback_times,
        elapsed
    );
    ensure(!adapted.feedback_times.is_empty(), || format!("no feedback was given; {detail}"))?;
    ensure(fa_adapt < fa_none, || format!("adaptation did not reduce false alarms; {detail}"))?;
    ensure(sa.detected_attacks == 2 && sa.attacks.len() == 2, || format!("an attack was missed; {detail}"))?;
    ensure(sn.attacks.len() == 2, || format!("scenario should script two attacks; {detail}"))?;
    ensure(elapsed < 600.0, || format!("took longer than 10 minutes; {detail}"))?;
    Ok(detail)
}

/// False alarms blamed on the section holding `sensor` during the hour after
/// the first section feedback, with and without adaptation.
pub fn next_hour(s: &Synthetic) -> Result<(usize, usize, usize), String> {
    let none = run(&s.system, &s.drift_only, FeedbackPolicy::None);
    let adapted = run(&s.system, &s.drift_only, FeedbackPolicy::FirstPerSource);
    let layout = &s.system.model.config().layout;
    let sensor = s.system.sensor_names.iter().position(|n| n == "FIT201").unwrap_or(2);
    let g = (0..layout.len()).find(|&g| layout.group(g).contains(&sensor)).unwrap();
    let tf = *adapted.feedback_times.first().ok_or("no feedback in the drift-only replay")?;
    let count = |tr: &RunTrace| {
        (tf..(tf + 3600).min(tr.len()))
            .filter(|&t| tr.reported[t] && tr.sources[t] == Some(AlarmSource::Section(g)))
            .count()
    };
    Ok((tf, count(&none), count(&adapted)))
}

pub fn monotonicity(s: &Synthetic) -> Check {
    let started = Instant::now();
    let trace = run(&s.system, &s.data.test, FeedbackPolicy::None);
    let det = EngineConfig::synthetic().detector;
    let wa = sweep_w_anom(&trace, &det, &(27..=39).collect::<Vec<_>>(), ThresholdMode::Adaptive, 60).unwrap();
    let wg = sweep_w_grace(&trace, &det, &(0..=20).collect::<Vec<_>>(), ThresholdMode::Adaptive, 60).unwrap();
    let anom: Vec<usize> = wa.iter().map(|p| p.summary.alarm_points).collect();
    let anom_rep: Vec<usize> = wa.iter().map(|p| p.summary.reported_points).collect();
    let grace: Vec<usize> = wg.iter().map(|p| p.summary.reported_points).collect();
    let non_inc = |v: &[usize]| v.windows(2).all(|w| w[1] <= w[0]);
    ensure(non_inc(&anom) && non_inc(&anom_rep), || format!("W_anom sweep not non-increasing: {anom:?}"))?;
    ensure(non_inc(&grace), || format!("W_grace sweep not non-increasing: {grace:?}"))?;
    ensure(anom.first() > anom.last() || grace.first() > grace.last(), || "sweeps are flat".into())?;
    Ok(format!(
        "W_anom 27..39: {}->{} points; W_grace 0..20: {}->{} points; {:.1} s",
        anom[0],
        anom[anom.len() - 1],
        grace[0],
        grace[grace.len() - 1],
        started.elapsed().as_secs_f64()
    ))
}

pub fn noise(s: &Synthetic) -> Check {
    let started = Instant::now();
    let pts = sweep_noise(
        &s.system,
        &EngineConfig::synthetic(),
        &s.attacks_only,
        &[0.0, 1.0, 5.0],
        &[ThresholdMode::Adaptive, ThresholdMode::Static],
        1,
        60,
    )
    .map_err(|e| e.to_string())?;
    let pick = |mode: ThresholdMode| -> Vec<(f64, f64)> {
        pts.iter()
            .filter(|p| p.threshold_mode == mode)
            .map(|p| (p.summary.metrics.recall, p.summary.metrics.f1))
            .collect()
    };
    let (ad, st) = (pick(ThresholdMode::Adaptive), pick(ThresholdMode::Static));
    let recall: Vec<f64> = ad.iter().map(|x| x.0).collect();
    let drop_ad = ad[0].1 - ad[2].1;
    let drop_st = st[0].1 - st[2].1;
    let detail = format!(
        "adaptive recall {recall:.3?}, F1 drop adaptive {drop_ad:.3} vs static {drop_st:.3}; {:.0} s",
        started.elapsed().as_secs_f64()
    );
    ensure(recall.windows(2).all(|w| w[1] <= w[0]), || format!("recall increased with noise; {detail}"))?;
    ensure(drop_ad < drop_st, || format!("adaptive thresholds degraded more; {detail}"))?;
    Ok(detail)
}
