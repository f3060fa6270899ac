use super::activation::{leaky_relu_backward, leaky_relu_scalar};
use super::conv::Conv1dLayerParams;
use super::dense::DenseLayerParams;
use super::pool::{maxpool1d, maxpool1d_backward};
use super::{ParamView, Parameterized, Tensor};
use crate::error::{Error, Result};

/// One node of a [`Sequential`] graph.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Dense(DenseLayerParams),
    Conv1d(Conv1dLayerParams),
    MaxPool1d { factor: usize },
    LeakyRelu,
    /// Reinterpret the flat activation as `channels × len`.
    Reshape { channels: usize },
}

impl Op {
    fn param_tensors(&self) -> usize {
        match self {
            Op::Dense(_) | Op::Conv1d(_) => 2,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub op: Op,
}

/// Cached inputs of every node from one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    inputs: Vec<Tensor>,
}

impl Tape {
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// A straight chain of nodes. Branching models compose several of these.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sequential {
    nodes: Vec<Node>,
}

impl Sequential {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, op: Op) -> &mut Self {
        self.nodes.push(Node {
            name: name.into(),
            op,
        });
        self
    }

    /// Dense layer followed by LeakyReLU when `activate` is set.
    pub fn dense(&mut self, name: &str, layer: DenseLayerParams, activate: bool) -> &mut Self {
        self.push(name, Op::Dense(layer));
        if activate {
            self.push(format!("{name}.act"), Op::LeakyRelu);
        }
        self
    }

    pub fn conv(&mut self, name: &str, layer: Conv1dLayerParams) -> &mut Self {
        self.push(name, Op::Conv1d(layer));
        self.push(format!("{name}.act"), Op::LeakyRelu)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, name: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.name == name)
    }

    fn apply(op: &Op, x: &Tensor) -> Result<Tensor> {
        Ok(match op {
            Op::Dense(d) => Tensor::vector(d.forward(x.data())?),
            Op::Conv1d(c) => c.forward(x)?,
            Op::MaxPool1d { factor } => maxpool1d(x, *factor)?,
            Op::LeakyRelu => {
                let data = x.data().iter().map(|&v| leaky_relu_scalar(v)).collect();
                Tensor::new(x.channels(), data)?
            }
            Op::Reshape { channels } => x.clone().reshape(*channels)?,
        })
    }

    pub fn forward(&self, x: Tensor) -> Result<Tensor> {
        self.nodes.iter().try_fold(x, |x, n| Self::apply(&n.op, &x))
    }

    /// Forward pass that records what [`Sequential::backward`] needs.
    pub fn forward_taped(&self, x: Tensor) -> Result<(Tensor, Tape)> {
        let mut inputs = Vec::with_capacity(self.nodes.len());
        let mut cur = x;
        for n in &self.nodes {
            let next = Self::apply(&n.op, &cur)?;
            inputs.push(cur);
            cur = next;
        }
        Ok((cur, Tape { inputs }))
    }

    /// Reverse pass. `grads` holds this graph's parameter gradients in
    /// registry order and is accumulated into. Returns `dL/dinput` unless
    /// `want_input_grad` is false.
    pub fn backward(
        &self,
        tape: &Tape,
        grad_out: Tensor,
        grads: &mut [Vec<f64>],
        want_input_grad: bool,
    ) -> Result<Option<Tensor>> {
        if tape.inputs.len() != self.nodes.len() || (tape.is_empty() && !self.nodes.is_empty()) {
            return Err(Error::State(
                "backward called without a matching forward pass".into(),
            ));
        }
        let n_params: usize = self.nodes.iter().map(|n| n.op.param_tensors()).sum();
        if grads.len() != n_params {
            return Err(Error::dim(format!(
                "expected {n_params} gradient tensors, got {}",
                grads.len()
            )));
        }
        // Index of the first node that must propagate a gradient to its input.
        let first_param = self.nodes.iter().position(|n| n.op.param_tensors() > 0);
        let mut slot = n_params;
        let mut g = grad_out;
        for (i, n) in self.nodes.iter().enumerate().rev() {
            let x = &tape.inputs[i];
            let need_dx = want_input_grad || first_param.is_some_and(|f| i > f);
            g = match &n.op {
                Op::Dense(d) => {
                    slot -= 2;
                    let (gw, rest) = grads[slot..].split_at_mut(1);
                    match d.backward(x.data(), g.data(), &mut gw[0], &mut rest[0], need_dx) {
                        Some(dx) => Tensor::new(x.channels(), dx)?,
                        None => return Ok(None),
                    }
                }
                Op::Conv1d(c) => {
                    slot -= 2;
                    let (gw, rest) = grads[slot..].split_at_mut(1);
                    match c.backward(x, &g, &mut gw[0], &mut rest[0], need_dx) {
                        Some(dx) => dx,
                        None => return Ok(None),
                    }
                }
                Op::MaxPool1d { factor } => maxpool1d_backward(x, *factor, &g),
                Op::LeakyRelu => Tensor::new(x.channels(), leaky_relu_backward(x.data(), g.data()))?,
                Op::Reshape { .. } => g.reshape(x.channels())?,
            };
        }
        Ok(want_input_grad.then_some(g))
    }

    pub fn named_params(&self, prefix: &str) -> Vec<ParamView<'_>> {
        let mut out = Vec::new();
        for n in &self.nodes {
            let name = if prefix.is_empty() {
                n.name.clone()
            } else {
                format!("{prefix}.{}", n.name)
            };
            match &n.op {
                Op::Dense(d) => {
                    out.push(ParamView {
                        name: format!("{name}.weight"),
                        shape: vec![d.out_dim(), d.in_dim()],
                        values: d.weights(),
                    });
                    out.push(ParamView {
                        name: format!("{name}.bias"),
                        shape: vec![d.out_dim()],
                        values: d.bias(),
                    });
                }
                Op::Conv1d(c) => {
                    out.push(ParamView {
                        name: format!("{name}.weight"),
                        shape: vec![c.kernels(), c.in_channels(), c.kernel_size()],
                        values: c.weights(),
                    });
                    out.push(ParamView {
                        name: format!("{name}.bias"),
                        shape: vec![c.kernels()],
                        values: c.bias(),
                    });
                }
                _ => {}
            }
        }
        out
    }
}

impl Parameterized for Sequential {
    fn param_views(&self) -> Vec<ParamView<'_>> {
        self.named_params("")
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for n in &mut self.nodes {
            match &mut n.op {
                Op::Dense(d) => {
                    let (w, b) = d.parts_mut();
                    out.push(w);
                    out.push(b);
                }
                Op::Conv1d(c) => {
                    let (w, b) = c.parts_mut();
                    out.push(w);
                    out.push(b);
                }
                _ => {}
            }
        }
        out
    }
}
