//! The skew regressor.
//!
//! Topology, for an `S × S` single-channel input:
//!
//! ```text
//! [conv 3x3 pad 1 -> LeakyReLU(0.01) -> maxpool 2x2]  x3, widths 10/20/40
//! flatten (40·(S/8)²) ++ 4 scalars -> dense 512 -> LeakyReLU(0.01) -> dense 1
//! ```
//!
//! All parameters live in one flat `Vec<f64>`; [`ParamLayout`] names the
//! slices. Gradients use the same layout.

mod adam;
mod format;
mod kernels;
mod model;

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{AdamConfig, AdamState};
pub use format::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use kernels::{backward, forward, forward_batch, mse_loss, NetInput, Pixels, Workspace};
pub use model::{ModelMeta, ModelParams, Normalization};

/// Negative slope of every LeakyReLU in the network.
pub const LEAKY_SLOPE: f64 = 0.01;

pub const ARCH_TAG: &str = "bhdeskew-cnn-v1";

/// Row-major dense array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::invalid(format!("tensor of shape {shape:?} needs {n} values, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Sizes that determine the parameter count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub side: usize,
    pub channels: [usize; 3],
    pub hidden: usize,
    pub scalars: usize,
}

impl Architecture {
    pub const CHANNELS: [usize; 3] = [10, 20, 40];
    pub const HIDDEN: usize = 512;
    pub const SCALARS: usize = 4;

    pub fn new(side: usize) -> Result<Self> {
        let a = Self { side, channels: Self::CHANNELS, hidden: Self::HIDDEN, scalars: Self::SCALARS };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.side == 0 || self.side % 8 != 0 {
            return Err(Error::invalid(format!("input side must be a positive multiple of 8, got {}", self.side)));
        }
        if self.channels.contains(&0) || self.hidden == 0 {
            return Err(Error::invalid("layer widths must be positive"));
        }
        Ok(())
    }

    /// Input side of conv stage `k` (0-based).
    pub fn stage_side(&self, k: usize) -> usize {
        self.side >> k
    }

    pub fn stage_inputs(&self, k: usize) -> usize {
        if k == 0 {
            1
        } else {
            self.channels[k - 1]
        }
    }

    pub fn flatten_len(&self) -> usize {
        let s = self.side / 8;
        self.channels[2] * s * s
    }

    pub fn fc1_inputs(&self) -> usize {
        self.flatten_len() + self.scalars
    }

    pub fn layout(&self) -> ParamLayout {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let mut conv_w: [Range<usize>; 3] = Default::default();
        let mut conv_b: [Range<usize>; 3] = Default::default();
        for k in 0..3 {
            conv_w[k] = take(self.channels[k] * self.stage_inputs(k) * 9);
            conv_b[k] = take(self.channels[k]);
        }
        let fc1_w = take(self.fc1_inputs() * self.hidden);
        let fc1_b = take(self.hidden);
        let fc2_w = take(self.hidden);
        let fc2_b = take(1);
        ParamLayout { conv_w, conv_b, fc1_w, fc1_b, fc2_w, fc2_b, total: at }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.channels;
        write!(f, "{ARCH_TAG} side {} (conv {a}/{b}/{c}, hidden {})", self.side, self.hidden)
    }
}

/// Where each weight tensor sits in the flat parameter vector.
///
/// Conv weights are `[out][in][ky][kx]`. `fc1_w` is input-major: the weight
/// from input `i` to hidden unit `j` is at `i * hidden + j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub conv_w: [Range<usize>; 3],
    pub conv_b: [Range<usize>; 3],
    pub fc1_w: Range<usize>,
    pub fc1_b: Range<usize>,
    pub fc2_w: Range<usize>,
    pub fc2_b: Range<usize>,
    pub total: usize,
}

impl ParamLayout {
    /// Weight ranges paired with their fan-in, in storage order.
    pub fn weight_groups(&self, arch: &Architecture) -> Vec<(Range<usize>, usize)> {
        let mut v: Vec<_> = (0..3).map(|k| (self.conv_w[k].clone(), arch.stage_inputs(k) * 9)).collect();
        v.push((self.fc1_w.clone(), arch.fc1_inputs()));
        v.push((self.fc2_w.clone(), arch.hidden));
        v
    }
}
