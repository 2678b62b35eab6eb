use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Architecture, ParamLayout};
use crate::dataset::SkewGrid;
use crate::error::{Error, Result};
use crate::raster::{RasterConfig, Scalars};
use crate::waveform::WaveformRecord;

/// Scalar z-scoring and target scaling, fitted on the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scalar_mean: [f64; 4],
    pub scalar_scale: [f64; 4],
    /// Target in index units divided by this gives the network target.
    pub target_scale: f64,
}

impl Normalization {
    pub fn identity() -> Self {
        Self { scalar_mean: [0.0; 4], scalar_scale: [1.0; 4], target_scale: 1.0 }
    }

    /// Mean and population standard deviation of each scalar. A constant
    /// scalar gets scale 1.
    pub fn fit(scalars: &[Scalars], target_scale: f64) -> Result<Self> {
        if scalars.is_empty() {
            return Err(Error::Dataset("cannot fit normalization on an empty set".into()));
        }
        let n = scalars.len() as f64;
        let mut mean = [0.0; 4];
        for s in scalars {
            for (m, x) in mean.iter_mut().zip(s.to_array()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; 4];
        for s in scalars {
            for ((v, x), m) in var.iter_mut().zip(s.to_array()).zip(mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var.map(|v| {
            let sd = (v / n).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        });
        let norm = Self { scalar_mean: mean, scalar_scale: scale, target_scale };
        norm.validate()?;
        Ok(norm)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.scalar_mean.iter().chain(&self.scalar_scale).all(|x| x.is_finite());
        let positive = self.scalar_scale.iter().all(|&s| s > 0.0);
        if !finite || !positive || !(self.target_scale.is_finite() && self.target_scale > 0.0) {
            return Err(Error::NonFinite { context: format!("in normalization statistics {self:?}") });
        }
        Ok(())
    }

    pub fn normalize_scalars(&self, s: Scalars) -> [f64; 4] {
        let mut out = s.to_array();
        for k in 0..4 {
            out[k] = (out[k] - self.scalar_mean[k]) / self.scalar_scale[k];
        }
        out
    }

    pub fn denormalize_scalars(&self, z: [f64; 4]) -> Scalars {
        let x: [f64; 4] = std::array::from_fn(|k| z[k] * self.scalar_scale[k] + self.scalar_mean[k]);
        Scalars { h_min: x[0], h_max: x[1], b_min: x[2], b_max: x[3] }
    }

    pub fn normalize_target(&self, delta: f64) -> f64 {
        delta / self.target_scale
    }

    pub fn denormalize_target(&self, y: f64) -> f64 {
        y * self.target_scale
    }
}

/// Everything a model needs to interpret a fresh record the way it was
/// trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub interp_factor: u32,
    pub base_length: usize,
    pub grid: SkewGrid,
    pub raster: RasterConfig,
    /// Origin ids of every operating point seen in training.
    pub training_origins: Vec<String>,
}

impl ModelMeta {
    pub fn for_side(side: usize) -> Self {
        Self {
            interp_factor: 1,
            base_length: WaveformRecord::DATASET_LENGTH,
            grid: SkewGrid::DEFAULT,
            raster: RasterConfig::new(side),
            training_origins: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    arch: Architecture,
    layout: ParamLayout,
    values: Vec<f64>,
    pub norm: Normalization,
    pub meta: ModelMeta,
}

impl ModelParams {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let layout = arch.layout();
        Ok(Self {
            arch,
            values: vec![0.0; layout.total],
            layout,
            norm: Normalization::identity(),
            meta: ModelMeta::for_side(arch.side),
        })
    }

    /// Kaiming-uniform weights, `U(±√(6/fan_in))`, and zero biases.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (range, fan_in) in p.layout.weight_groups(&arch) {
            let bound = (6.0 / fan_in as f64).sqrt();
            for w in &mut p.values[range] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(p)
    }

    pub fn from_values(arch: Architecture, values: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(arch)?;
        if values.len() != p.values.len() {
            return Err(Error::Format(format!(
                "{} parameter values do not match {arch} ({} expected)",
                values.len(),
                p.values.len()
            )));
        }
        p.values = values;
        Ok(p)
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn conv_weights(&self, k: usize) -> &[f64] {
        &self.values[self.layout.conv_w[k].clone()]
    }

    pub fn conv_bias(&self, k: usize) -> &[f64] {
        &self.values[self.layout.conv_b[k].clone()]
    }

    pub fn fc1_weights(&self) -> &[f64] {
        &self.values[self.layout.fc1_w.clone()]
    }

    pub fn fc1_bias(&self) -> &[f64] {
        &self.values[self.layout.fc1_b.clone()]
    }

    pub fn fc2_weights(&self) -> &[f64] {
        &self.values[self.layout.fc2_w.clone()]
    }

    pub fn fc2_bias(&self) -> f64 {
        self.values[self.layout.fc2_b.start]
    }

    /// Error unless this model was built for `side`.
    pub fn expect_side(&self, side: usize) -> Result<()> {
        if self.arch.side != side {
            let expected = Architecture { side, ..self.arch };
            return Err(Error::ArchitectureMismatch { expected: expected.to_string(), found: self.arch.to_string() });
        }
        Ok(())
    }
}
