use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::WdnnConfig;
use crate::error::{Error, Result};
use crate::nn::{
    mse, mse_grad, Conv1dLayerParams, DenseLayerParams, Gradients, Op, ParamView, Parameterized,
    Sequential, Tape, Tensor,
};

/// Wide-and-deep forecaster with one dense head per output section.
///
/// ```text
///            ┌─ DL1 ───────────────────────────────────┐
/// X (m×W_in) ┤                                          ├─ concat ─ DL4 ─┬─ DL5 ─ DL6 ─ DL7  (section 0)
///            └─ DL2 ─ CL1 ─ MP1 ─ CL2 ─ MP2 ─ DL3 ─────┘                 └─ ...            (section G-1)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Wdnn {
    config: WdnnConfig,
    seed: u64,
    wide: Sequential,
    deep: Sequential,
    trunk: Sequential,
    sections: Vec<Sequential>,
}

/// Cached activations of one forward pass, needed for backward.
#[derive(Debug, Clone)]
pub struct WdnnTape {
    wide: Tape,
    deep: Tape,
    trunk: Tape,
    sections: Vec<Tape>,
}

impl Wdnn {
    pub fn build(config: WdnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = config.features() * config.w_in;
        let [_, _, _, p2] = config.deep_lengths()?;

        let mut wide = Sequential::new();
        wide.dense("dl1", DenseLayerParams::init(input, config.w_out, &mut rng)?, true);

        let mut deep = Sequential::new();
        deep.dense("dl2", DenseLayerParams::init(input, config.dl2_width(), &mut rng)?, true)
            .push("dl2.reshape", Op::Reshape { channels: config.dl2_factor })
            .conv(
                "cl1",
                Conv1dLayerParams::init(config.dl2_factor, config.cl1_kernels, config.cl1_size, 1, &mut rng)?,
            )
            .push("mp1", Op::MaxPool1d { factor: config.pool_factor })
            .conv(
                "cl2",
                Conv1dLayerParams::init(config.cl1_kernels, config.cl2_kernels, config.cl2_size, 1, &mut rng)?,
            )
            .push("mp2", Op::MaxPool1d { factor: config.pool_factor })
            .dense(
                "dl3",
                DenseLayerParams::init(config.cl2_kernels * p2, config.w_out, &mut rng)?,
                true,
            );

        let mut trunk = Sequential::new();
        trunk.dense("dl4", DenseLayerParams::init(2 * config.w_out, config.dl4_width, &mut rng)?, true);

        let mut sections = Vec::with_capacity(config.sections());
        for g in 0..config.sections() {
            let (w5, w6, w7) = (config.dl5_width(g), config.dl6_width(g), config.dl7_width(g));
            let mut head = Sequential::new();
            head.dense("dl5", DenseLayerParams::init(config.dl4_width, w5, &mut rng)?, true)
                .dense("dl6", DenseLayerParams::init(w5, w6, &mut rng)?, true)
                .dense("dl7", DenseLayerParams::init(w6, w7, &mut rng)?, config.output_activation);
            sections.push(head);
        }

        Ok(Self {
            config,
            seed,
            wide,
            deep,
            trunk,
            sections,
        })
    }

    pub fn config(&self) -> &WdnnConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sections(&self) -> usize {
        self.sections.len()
    }

    pub fn section(&self, g: usize) -> &Sequential {
        &self.sections[g]
    }

    /// Replaces one output section; the registry shape must match.
    pub fn replace_section(&mut self, g: usize, head: Sequential) -> Result<()> {
        let same = self.sections[g]
            .param_views()
            .iter()
            .zip(head.param_views().iter())
            .all(|(a, b)| a.name == b.name && a.shape == b.shape);
        if !same || self.sections[g].nodes().len() != head.nodes().len() {
            return Err(Error::Comparison(format!("replacement for section {g} has a different shape")));
        }
        self.sections[g] = head;
        Ok(())
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.channels() != self.config.features() || x.len() != self.config.w_in {
            return Err(Error::dim(format!(
                "WDNN expects a {}x{} input, got {}x{}",
                self.config.features(),
                self.config.w_in,
                x.channels(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Output of the aggregation layer DL4.
    pub fn features(&self, x: &Tensor) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let flat = Tensor::vector(x.data().to_vec());
        let mut joined = self.wide.forward(flat.clone())?.into_data();
        joined.extend(self.deep.forward(flat)?.into_data());
        Ok(self.trunk.forward(Tensor::vector(joined))?.into_data())
    }

    pub fn section_forward(&self, g: usize, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.sections[g]
            .forward(Tensor::vector(features.to_vec()))?
            .into_data())
    }

    /// Per-section predictions. Section `g` yields `m_se^g · predict_steps`
    /// values, step-major, so the first `m_se^g` are the next-step forecast.
    pub fn forward(&self, x: &Tensor) -> Result<Vec<Vec<f64>>> {
        let f = self.features(x)?;
        (0..self.sections.len())
            .map(|g| self.section_forward(g, &f))
            .collect()
    }

    pub fn forward_taped(&self, x: &Tensor) -> Result<(Vec<Vec<f64>>, WdnnTape)> {
        self.check_input(x)?;
        let flat = Tensor::vector(x.data().to_vec());
        let (w, wide) = self.wide.forward_taped(flat.clone())?;
        let (d, deep) = self.deep.forward_taped(flat)?;
        let mut joined = w.into_data();
        joined.extend(d.into_data());
        let (f, trunk) = self.trunk.forward_taped(Tensor::vector(joined))?;
        let mut outs = Vec::with_capacity(self.sections.len());
        let mut tapes = Vec::with_capacity(self.sections.len());
        for s in &self.sections {
            let (y, t) = s.forward_taped(f.clone())?;
            outs.push(y.into_data());
            tapes.push(t);
        }
        Ok((
            outs,
            WdnnTape {
                wide,
                deep,
                trunk,
                sections: tapes,
            },
        ))
    }

    fn block_sizes(&self) -> Vec<usize> {
        let mut v = vec![
            self.wide.params().len(),
            self.deep.params().len(),
            self.trunk.params().len(),
        ];
        v.extend(self.sections.iter().map(|s| s.params().len()));
        v
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients::zeros_like(&self.params())
    }

    /// Backpropagates per-section output gradients into `grads`.
    pub fn backward(&self, tape: &WdnnTape, section_grads: &[Vec<f64>], grads: &mut Gradients) -> Result<()> {
        if section_grads.len() != self.sections.len() || tape.sections.len() != self.sections.len() {
            return Err(Error::State("backward needs one gradient and tape per section".into()));
        }
        let sizes = self.block_sizes();
        let mut blocks: Vec<&mut [Vec<f64>]> = Vec::with_capacity(sizes.len());
        let mut rest = grads.tensors_mut();
        for &n in &sizes {
            let (head, tail) = rest.split_at_mut(n);
            blocks.push(head);
            rest = tail;
        }
        let mut feature_grad = vec![0.0; self.config.dl4_width];
        for (g, s) in self.sections.iter().enumerate() {
            let dx = s
                .backward(&tape.sections[g], Tensor::vector(section_grads[g].clone()), blocks[3 + g], true)?
                .expect("input gradient requested");
            feature_grad.iter_mut().zip(dx.data()).for_each(|(a, b)| *a += b);
        }
        let joined = self
            .trunk
            .backward(&tape.trunk, Tensor::vector(feature_grad), blocks[2], true)?
            .expect("input gradient requested")
            .into_data();
        let (gw, gd) = joined.split_at(self.config.w_out);
        self.wide.backward(&tape.wide, Tensor::vector(gw.to_vec()), blocks[0], false)?;
        self.deep.backward(&tape.deep, Tensor::vector(gd.to_vec()), blocks[1], false)?;
        Ok(())
    }

    /// Total cost `Σ_g mse_g` of one instance and its gradient, scaled by
    /// `scale` (use `1/s` for a batch mean), accumulated into `grads`.
    pub fn accumulate(&self, x: &Tensor, section_targets: &[Vec<f64>], scale: f64, grads: &mut Gradients) -> Result<f64> {
        let (preds, tape) = self.forward_taped(x)?;
        let mut cost = 0.0;
        let mut dys = Vec::with_capacity(preds.len());
        for (p, t) in preds.iter().zip(section_targets) {
            cost += mse(p, t)?;
            dys.push(mse_grad(p, t, scale));
        }
        self.backward(&tape, &dys, grads)?;
        Ok(cost)
    }

    /// Names of the parameters that belong to section `g`'s head.
    pub fn section_prefix(g: usize) -> String {
        format!("section{g}.")
    }
}

impl Parameterized for Wdnn {
    fn param_views(&self) -> Vec<ParamView<'_>> {
        let mut v = self.wide.named_params("");
        v.extend(self.deep.named_params(""));
        v.extend(self.trunk.named_params(""));
        for (g, s) in self.sections.iter().enumerate() {
            v.extend(s.named_params(&format!("section{g}")));
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.wide.params_mut();
        v.extend(self.deep.params_mut());
        v.extend(self.trunk.params_mut());
        for s in &mut self.sections {
            v.extend(s.params_mut());
        }
        v
    }
}
