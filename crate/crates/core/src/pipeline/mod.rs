//! Training, fine-tuning, prediction, correction and evaluation.
//!
//! Every sample is rendered with the raster settings stored in the model, so
//! a model file carries everything needed to read a new record the way it was
//! trained.

mod predict;
mod report;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{augment_all, LabeledSample, SkewGrid};
use crate::error::{Error, Result};
use crate::net::{backward, AdamState, Architecture, ModelParams, NetInput, Normalization};
use crate::parallel;
use crate::raster::{loop_scalars, render_source, LoopImage, RasterConfig, Scalars};
use crate::waveform::WaveformRecord;

pub use predict::{correct, predict_skew, predict_with, Correction, SkewPrediction};
pub use report::{evaluate, net_offset, read_report, write_report, Aggregates, EvalReport, EvalRow};

/// Where fine-tuning takes its scalar and target statistics from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormSource {
    /// Refit on the fine-tuning samples alone.
    #[default]
    New,
    /// Keep the base model's statistics.
    Base,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub grid: SkewGrid,
    pub interp_factor: u32,
    pub raster: RasterConfig,
    /// Stop after this many epochs without a new best mean loss.
    pub patience: Option<usize>,
    /// Render every sample once up front instead of once per epoch.
    pub cache_images: bool,
    pub norm_source: NormSource,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch: 500,
            lr: 2.5e-3,
            seed: 0,
            grid: SkewGrid::DEFAULT,
            interp_factor: 1000,
            raster: RasterConfig::new(RasterConfig::DEFAULT_SIDE),
            patience: None,
            cache_images: true,
            norm_source: NormSource::New,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.interp_factor == 0 {
            return Err(Error::invalid("interpolation factor must be positive"));
        }
        if self.patience == Some(0) {
            return Err(Error::invalid("patience must be at least 1 epoch"));
        }
        self.raster.validate()?;
        Architecture::new(self.raster.side)?;
        Ok(())
    }

    /// Network target scale: the grid half-range in interpolated samples.
    pub fn target_scale(&self) -> f64 {
        self.grid.max_offset() as f64
    }

    /// Interpolate and augment `records` on this configuration's grid.
    pub fn augment(&self, records: &[WaveformRecord]) -> Result<Vec<LabeledSample>> {
        augment_all(records, self.interp_factor, self.grid)
    }
}

/// Mean training loss of one epoch, 1-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
}

impl EpochLog {
    /// One `epoch,mean_loss` log line, without the newline.
    pub fn line(&self) -> String {
        format!("{},{}", self.epoch, self.mean_loss)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelParams,
    pub history: Vec<EpochLog>,
    pub stopped_early: bool,
}

/// Render one augmented sample.
pub fn render_sample(sample: &LabeledSample, raster: &RasterConfig) -> Result<LoopImage> {
    render_source(&sample.source().skewed_loop(sample.target())?, raster)
}

/// Train a fresh network on `samples`.
pub fn train(samples: &[LabeledSample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_observed(samples, cfg, |_| Ok(()))
}

/// [`train`], calling `on_epoch` after every epoch.
pub fn train_observed(
    samples: &[LabeledSample],
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochLog) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let base_length = check_samples(samples, cfg)?;
    let arch = Architecture::new(cfg.raster.side)?;
    let images = Images::prepare(samples, cfg)?;
    let mut model = ModelParams::init(arch, cfg.seed)?;
    model.norm = Normalization::fit(&images.scalars, cfg.target_scale())?;
    model.meta.interp_factor = cfg.interp_factor;
    model.meta.base_length = base_length;
    model.meta.grid = cfg.grid;
    model.meta.raster = cfg.raster.clone();
    model.meta.training_origins = origins(samples, &[]);
    fit(model, samples, images, cfg, on_epoch)
}

/// Continue training `base` on new samples with fresh optimizer moments.
///
/// Zero epochs returns `base` unchanged.
pub fn finetune(base: &ModelParams, samples: &[LabeledSample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    finetune_observed(base, samples, cfg, |_| Ok(()))
}

pub fn finetune_observed(
    base: &ModelParams,
    samples: &[LabeledSample],
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochLog) -> Result<()>,
) -> Result<TrainOutcome> {
    base.expect_side(cfg.raster.side)?;
    if cfg.epochs == 0 {
        return Ok(TrainOutcome { model: base.clone(), history: Vec::new(), stopped_early: false });
    }
    cfg.validate()?;
    if cfg.raster != base.meta.raster {
        return Err(Error::invalid(format!(
            "raster settings {:?} differ from the base model's {:?}",
            cfg.raster, base.meta.raster
        )));
    }
    if cfg.interp_factor != base.meta.interp_factor {
        return Err(Error::invalid(format!(
            "interpolation factor {} differs from the base model's {}",
            cfg.interp_factor, base.meta.interp_factor
        )));
    }
    let base_length = check_samples(samples, cfg)?;
    if base_length != base.meta.base_length {
        return Err(Error::invalid(format!(
            "records have {base_length} samples, the base model expects {}",
            base.meta.base_length
        )));
    }
    let images = Images::prepare(samples, cfg)?;
    let mut model = base.clone();
    if cfg.norm_source == NormSource::New {
        model.norm = Normalization::fit(&images.scalars, cfg.target_scale())?;
        model.meta.grid = cfg.grid;
    }
    model.meta.training_origins = origins(samples, &base.meta.training_origins);
    fit(model, samples, images, cfg, on_epoch)
}

/// Shared length of the samples' source records.
fn check_samples(samples: &[LabeledSample], cfg: &TrainConfig) -> Result<usize> {
    let first = samples.first().ok_or_else(|| Error::Dataset("training set is empty".into()))?;
    let base_length = first.source().base_length();
    cfg.grid.validate(base_length * cfg.interp_factor as usize)?;
    for s in samples {
        let src = s.source();
        if src.interp_factor() != cfg.interp_factor || src.base_length() != base_length {
            return Err(Error::Dataset(format!(
                "sample from {} is {} x {}, expected {base_length} x {}",
                s.origin_id(),
                src.base_length(),
                src.interp_factor(),
                cfg.interp_factor
            )));
        }
    }
    Ok(base_length)
}

fn origins(samples: &[LabeledSample], keep: &[String]) -> Vec<String> {
    let mut v: Vec<String> = keep.to_vec();
    v.extend(samples.iter().map(|s| s.origin_id().to_string()));
    v.sort();
    v.dedup();
    v
}

/// Training images: cached network inputs, or rendered per batch.
struct Images {
    scalars: Vec<Scalars>,
    cached: Option<Vec<LoopImage>>,
}

impl Images {
    fn prepare(samples: &[LabeledSample], cfg: &TrainConfig) -> Result<Self> {
        if cfg.cache_images {
            let imgs =
                parallel::map(samples, |s| render_sample(s, &cfg.raster)).into_iter().collect::<Result<Vec<_>>>()?;
            Ok(Self { scalars: imgs.iter().map(LoopImage::scalars).collect(), cached: Some(imgs) })
        } else {
            let scalars = parallel::map(samples, |s| loop_scalars(&s.source().skewed_loop(s.target())?))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            Ok(Self { scalars, cached: None })
        }
    }
}

fn fit(
    mut model: ModelParams,
    samples: &[LabeledSample],
    images: Images,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog) -> Result<()>,
) -> Result<TrainOutcome> {
    let norm = model.norm.clone();
    let targets: Vec<f64> = samples.iter().map(|s| norm.normalize_target(s.target().delta() as f64)).collect();
    let cached: Option<Vec<NetInput>> =
        images.cached.map(|imgs| imgs.iter().map(|img| NetInput::from_image(img, &norm)).collect());

    let mut adam = AdamState::for_model(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, 0);
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, idx) in order.chunks(cfg.batch).enumerate() {
            let at = |e: Error| match e {
                Error::NonFinite { context } => {
                    Error::NonFinite { context: format!("{context} at epoch {epoch}, batch {}", b + 1) }
                }
                other => other,
            };
            let t: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
            let (loss, _, grad) = match &cached {
                Some(all) => {
                    let batch: Vec<&NetInput> = idx.iter().map(|&i| &all[i]).collect();
                    backward(&model, &batch, &t)
                }
                None => {
                    let batch = parallel::map(idx, |&i| {
                        render_sample(&samples[i], &cfg.raster).map(|img| NetInput::from_image(&img, &norm))
                    })
                    .into_iter()
                    .collect::<Result<Vec<_>>>()?;
                    backward(&model, &batch, &t)
                }
            }
            .map_err(at)?;
            adam.step(model.values_mut(), &grad, cfg.lr).map_err(at)?;
            total += loss * idx.len() as f64;
        }
        let log = EpochLog { epoch, mean_loss: total / samples.len() as f64 };
        if !log.mean_loss.is_finite() {
            return Err(Error::NonFinite { context: format!("in the mean loss of epoch {epoch}") });
        }
        on_epoch(&log)?;
        history.push(log);
        if log.mean_loss < best.0 {
            best = (log.mean_loss, epoch);
        }
        if let Some(p) = cfg.patience {
            if epoch - best.1 >= p && epoch < cfg.epochs {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(TrainOutcome { model, history, stopped_early })
}
