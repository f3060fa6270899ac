use serde::{Deserialize, Serialize};

use crate::data::WindowGeometry;
use crate::error::{Error, Result};

/// Partition of the sensors into output sections, one per controller.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionLayout {
    groups: Vec<Vec<usize>>,
}

impl SectionLayout {
    pub fn new(groups: Vec<Vec<usize>>) -> Self {
        Self { groups }
    }

    /// Every sensor in one section.
    pub fn single(m_se: usize) -> Self {
        Self::new(vec![(0..m_se).collect()])
    }

    /// Consecutive blocks of the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Self {
        let mut next = 0;
        Self::new(
            sizes
                .iter()
                .map(|&n| {
                    let g = (next..next + n).collect();
                    next += n;
                    g
                })
                .collect(),
        )
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    pub fn validate(&self, m_se: usize) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::Config("at least one output section is required".into()));
        }
        let mut seen = vec![false; m_se];
        for (g, group) in self.groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::Config(format!("section {g} has no sensors")));
            }
            for &i in group {
                if i >= m_se {
                    return Err(Error::Config(format!(
                        "section {g} references sensor {i} but there are only {m_se}"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Config(format!(
                        "sensor {i} appears in more than one section"
                    )));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Config(format!("sensor {i} is not assigned to a section")));
        }
        Ok(())
    }

    /// Picks this section's values out of a full step-major sensor vector.
    pub fn gather(&self, g: usize, full: &[f64], m_se: usize) -> Vec<f64> {
        full.chunks_exact(m_se)
            .flat_map(|step| self.groups[g].iter().map(move |&i| step[i]))
            .collect()
    }
}

/// What DL2 triples: the window length or the feature count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dl2Base {
    InputWindow,
    FeatureCount,
}

/// Network shape. Layer widths default to the published hyperparameter table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WdnnConfig {
    pub m_se: usize,
    pub m_ac: usize,
    pub w_in: usize,
    pub w_out: usize,
    pub horizon: usize,
    pub layout: SectionLayout,
    #[serde(default = "one")]
    pub predict_steps: usize,
    pub dl2_base: Dl2Base,
    #[serde(default = "three")]
    pub dl2_factor: usize,
    pub cl1_kernels: usize,
    pub cl1_size: usize,
    pub cl2_kernels: usize,
    pub cl2_size: usize,
    #[serde(default = "two")]
    pub pool_factor: usize,
    #[serde(default = "eighty")]
    pub dl4_width: usize,
    #[serde(default = "dl5_default")]
    pub dl5_factor: f64,
    #[serde(default = "dl6_default")]
    pub dl6_factor: f64,
    /// Apply LeakyReLU on DL7 like every other dense layer.
    #[serde(default = "yes")]
    pub output_activation: bool,
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn three() -> usize {
    3
}
fn eighty() -> usize {
    80
}
fn dl5_default() -> f64 {
    2.25
}
fn dl6_default() -> f64 {
    1.5
}
fn yes() -> bool {
    true
}

impl WdnnConfig {
    /// SWaT hyperparameters: `W_in=60, W_out=4, H=50`, DL2 = 3·W_in,
    /// CL1 64×2, CL2 128×2.
    pub fn swat(m_se: usize, m_ac: usize, layout: SectionLayout) -> Self {
        Self {
            m_se,
            m_ac,
            w_in: 60,
            w_out: 4,
            horizon: 50,
            layout,
            predict_steps: 1,
            dl2_base: Dl2Base::InputWindow,
            dl2_factor: 3,
            cl1_kernels: 64,
            cl1_size: 2,
            cl2_kernels: 128,
            cl2_size: 2,
            pool_factor: 2,
            dl4_width: 80,
            dl5_factor: 2.25,
            dl6_factor: 1.5,
            output_activation: true,
        }
    }

    /// WADI hyperparameters: `W_in=50, W_out=4, H=20`, DL2 = 3·(m_se+m_ac),
    /// CL1 64×5, CL2 128×5.
    pub fn wadi(m_se: usize, m_ac: usize, layout: SectionLayout) -> Self {
        Self {
            w_in: 50,
            horizon: 20,
            dl2_base: Dl2Base::FeatureCount,
            cl1_size: 5,
            cl2_size: 5,
            ..Self::swat(m_se, m_ac, layout)
        }
    }

    pub fn features(&self) -> usize {
        self.m_se + self.m_ac
    }

    pub fn sections(&self) -> usize {
        self.layout.len()
    }

    pub fn geometry(&self) -> WindowGeometry {
        WindowGeometry {
            w_in: self.w_in,
            horizon: self.horizon,
            predict_steps: self.predict_steps,
        }
    }

    pub fn dl2_base_len(&self) -> usize {
        match self.dl2_base {
            Dl2Base::InputWindow => self.w_in,
            Dl2Base::FeatureCount => self.features(),
        }
    }

    pub fn dl2_width(&self) -> usize {
        self.dl2_factor * self.dl2_base_len()
    }

    pub fn dl5_width(&self, g: usize) -> usize {
        ((self.dl5_factor * self.layout.group(g).len() as f64).round() as usize).max(1)
    }

    pub fn dl6_width(&self, g: usize) -> usize {
        ((self.dl6_factor * self.layout.group(g).len() as f64).round() as usize).max(1)
    }

    pub fn dl7_width(&self, g: usize) -> usize {
        self.layout.group(g).len() * self.predict_steps
    }

    /// Time-axis lengths after CL1, MP1, CL2, MP2.
    pub fn deep_lengths(&self) -> Result<[usize; 4]> {
        let conv = |len: usize, k: usize, what: &str| {
            if len < k {
                Err(Error::Config(format!(
                    "{what} kernel {k} longer than its input of length {len}"
                )))
            } else {
                Ok(len - k + 1)
            }
        };
        let c1 = conv(self.dl2_base_len(), self.cl1_size, "CL1")?;
        let p1 = c1.div_ceil(self.pool_factor);
        let c2 = conv(p1, self.cl2_size, "CL2")?;
        let p2 = c2.div_ceil(self.pool_factor);
        Ok([c1, p1, c2, p2])
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_se == 0 {
            return Err(Error::Config("at least one sensor is required".into()));
        }
        if self.w_in == 0 || self.w_out == 0 {
            return Err(Error::Config("W_in and W_out must be >= 1".into()));
        }
        if self.predict_steps == 0 || self.predict_steps > self.w_out {
            return Err(Error::Config(format!(
                "predict_steps must be in [1, W_out={}], got {}",
                self.w_out, self.predict_steps
            )));
        }
        if self.dl2_factor == 0
            || self.cl1_kernels == 0
            || self.cl2_kernels == 0
            || self.cl1_size == 0
            || self.cl2_size == 0
            || self.pool_factor == 0
            || self.dl4_width == 0
        {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        self.layout.validate(self.m_se)?;
        self.deep_lengths()?;
        Ok(())
    }
}
