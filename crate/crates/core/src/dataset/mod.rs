//! Corpus handling: ingest, filtering, operating-point splits and skew
//! augmentation.
//!
//! Augmented samples are lazy. A [`LabeledSample`] holds a shared handle to
//! its source record plus the imposed skew, and materializes the interpolated,
//! shifted waveforms only when asked. At the default interpolation factor a
//! single materialized record is 16 MB, so a paper-scale augmented corpus
//! could never be held in memory eagerly.

mod corpus;
mod ingest;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::LoopSource;
use crate::waveform::{apply_skew, interpolate_periodic, ShapeTag, SkewOffset, WaveformRecord};

pub use corpus::{decode_corpus, encode_corpus, read_corpus, write_corpus, CORPUS_MAGIC, CORPUS_VERSION};
pub use ingest::{format_series_csv, ingest, read_series_csv, write_layout, LayoutFile};

/// Operating-condition predicates. `None` fields accept everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetFilter {
    pub shapes: Option<Vec<ShapeTag>>,
    pub temperature: Option<f64>,
    pub dc_bias: Option<f64>,
    /// Inclusive frequency band in hertz.
    pub frequency: Option<(f64, f64)>,
}

impl DatasetFilter {
    pub fn pass_all() -> Self {
        Self::default()
    }

    /// Triangular flux, 25 °C, fixed DC bias: the reference training subset.
    pub fn triangular_at(temperature: f64, dc_bias: f64) -> Self {
        Self {
            shapes: Some(vec![ShapeTag::Triangular]),
            temperature: Some(temperature),
            dc_bias: Some(dc_bias),
            frequency: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.frequency {
            if !(lo <= hi) {
                return Err(Error::invalid(format!("frequency band [{lo}, {hi}] is empty")));
            }
        }
        Ok(())
    }

    pub fn matches(&self, r: &WaveformRecord) -> bool {
        if let Some(shapes) = &self.shapes {
            if !shapes.contains(&r.shape()) {
                return false;
            }
        }
        if self.temperature.is_some_and(|t| t != r.temperature()) {
            return false;
        }
        if self.dc_bias.is_some_and(|b| b != r.dc_bias()) {
            return false;
        }
        if let Some((lo, hi)) = self.frequency {
            if !(lo..=hi).contains(&r.frequency()) {
                return false;
            }
        }
        true
    }
}

/// Order-preserving subset of `records` matching every predicate.
pub fn filter(records: &[WaveformRecord], f: &DatasetFilter) -> Vec<WaveformRecord> {
    records.iter().filter(|r| f.matches(r)).cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitPolicy {
    /// Training fraction in (0, 1).
    Ratio(f64),
    Counts {
        train: usize,
        test: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub policy: SplitPolicy,
    pub seed: u64,
}

impl SplitSpec {
    pub fn ratio(train_fraction: f64, seed: u64) -> Self {
        Self { policy: SplitPolicy::Ratio(train_fraction), seed }
    }

    pub fn counts(train: usize, test: usize, seed: u64) -> Self {
        Self { policy: SplitPolicy::Counts { train, test }, seed }
    }

    fn train_count(&self, n: usize) -> Result<usize> {
        match self.policy {
            SplitPolicy::Ratio(f) => {
                if !(f > 0.0 && f < 1.0) {
                    return Err(Error::invalid(format!("train fraction must lie in (0, 1), got {f}")));
                }
                Ok((f * n as f64).round() as usize)
            }
            SplitPolicy::Counts { train, test } => {
                if train + test != n {
                    return Err(Error::invalid(format!(
                        "split counts {train}:{test} do not sum to the corpus size {n}"
                    )));
                }
                Ok(train)
            }
        }
    }
}

/// Partition whole operating points into train and test sets.
///
/// Both halves keep the corpus order; only membership is shuffled.
pub fn split(records: &[WaveformRecord], s: &SplitSpec) -> Result<(Vec<WaveformRecord>, Vec<WaveformRecord>)> {
    if records.is_empty() {
        return Err(Error::invalid("cannot split an empty corpus"));
    }
    let n_train = s.train_count(records.len())?;
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(s.seed));
    let mut in_train = vec![false; records.len()];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n_train), Vec::new());
    for (r, t) in records.iter().zip(in_train) {
        if t {
            train.push(r.clone());
        } else {
            test.push(r.clone());
        }
    }
    Ok((train, test))
}

/// A raw record viewed at `interp_factor` times its sampling rate.
///
/// Cheap to clone; the interpolated series are computed on demand.
#[derive(Debug, Clone)]
pub struct InterpolatedRecord {
    raw: Arc<WaveformRecord>,
    interp_factor: u32,
}

impl InterpolatedRecord {
    pub fn new(raw: WaveformRecord, interp_factor: u32) -> Result<Self> {
        Self::from_shared(Arc::new(raw), interp_factor)
    }

    pub fn from_shared(raw: Arc<WaveformRecord>, interp_factor: u32) -> Result<Self> {
        if interp_factor == 0 {
            return Err(Error::invalid("interpolation factor must be positive"));
        }
        Ok(Self { raw, interp_factor })
    }

    pub fn raw(&self) -> &WaveformRecord {
        &self.raw
    }

    pub fn interp_factor(&self) -> u32 {
        self.interp_factor
    }

    pub fn base_length(&self) -> usize {
        self.raw.len()
    }

    /// Interpolated samples per period.
    pub fn len(&self) -> usize {
        self.raw.len() * self.interp_factor as usize
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn skew(&self, delta: i64) -> Result<SkewOffset> {
        SkewOffset::new(delta, self.interp_factor, self.base_length())
    }

    pub fn materialize(&self) -> Result<WaveformRecord> {
        let b = interpolate_periodic(self.raw.b(), self.interp_factor)?;
        let h = interpolate_periodic(self.raw.h(), self.interp_factor)?;
        self.raw.with_series(b, h)
    }

    /// The skewed, interpolated loop as a vertex stream, without allocating
    /// the interpolated series. Vertex values equal those of
    /// [`skewed`](Self::skewed) bit for bit.
    pub fn skewed_loop(&self, skew: SkewOffset) -> Result<SkewedLoop<'_>> {
        if skew.interp_factor() != self.interp_factor || skew.base_length() != self.base_length() {
            return Err(Error::invalid(format!(
                "skew expects {} x {} samples, record is {} x {}",
                skew.base_length(),
                skew.interp_factor(),
                self.base_length(),
                self.interp_factor
            )));
        }
        let k = self.interp_factor as usize;
        Ok(SkewedLoop {
            b: self.raw.b().values(),
            h: self.raw.h().values(),
            k,
            shift: skew.delta().rem_euclid(self.len() as i64) as usize,
            frac: (0..k).map(|m| m as f64 / k as f64).collect(),
        })
    }

    /// The interpolated record with H shifted by `skew`.
    pub fn skewed(&self, skew: SkewOffset) -> Result<WaveformRecord> {
        let r = self.materialize()?;
        let h = apply_skew(r.h(), skew)?;
        r.into_with_h(h)
    }
}

/// Symmetric skew grid `{-n, ..., n} × step`.
/// See [`InterpolatedRecord::skewed_loop`].
#[derive(Debug, Clone)]
pub struct SkewedLoop<'a> {
    b: &'a [f64],
    h: &'a [f64],
    k: usize,
    shift: usize,
    frac: Vec<f64>,
}

impl SkewedLoop<'_> {
    /// Interpolated sample `j·k + m`, computed as the periodic interpolator does.
    #[inline]
    fn sample(&self, vals: &[f64], j: usize, m: usize) -> f64 {
        let a = vals[j];
        if m == 0 {
            a
        } else {
            let next = if j + 1 == vals.len() { vals[0] } else { vals[j + 1] };
            a + (next - a) * self.frac[m]
        }
    }
}

impl LoopSource for SkewedLoop<'_> {
    fn vertex_count(&self) -> usize {
        self.b.len() * self.k
    }

    fn visit<F: FnMut(f64, f64)>(&self, mut f: F) {
        let (n, k) = (self.b.len(), self.k);
        let step = |j: &mut usize, m: &mut usize| {
            *m += 1;
            if *m == k {
                *m = 0;
                *j += 1;
                if *j == n {
                    *j = 0;
                }
            }
        };
        let (mut jb, mut mb) = (0, 0);
        let (mut jh, mut mh) = (self.shift / k, self.shift % k);
        for _ in 0..n * k {
            f(self.sample(self.h, jh, mh), self.sample(self.b, jb, mb));
            step(&mut jb, &mut mb);
            step(&mut jh, &mut mh);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkewGrid {
    pub half_width: u32,
    /// Grid spacing in interpolated samples.
    pub step: u64,
}

impl SkewGrid {
    /// ±20 steps of one raw sample each at the default interpolation factor.
    pub const DEFAULT: SkewGrid = SkewGrid { half_width: 20, step: 1000 };

    pub fn len(&self) -> usize {
        2 * self.half_width as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest offset on the grid, in interpolated samples.
    pub fn max_offset(&self) -> u64 {
        self.step * u64::from(self.half_width)
    }

    pub fn offsets(&self) -> impl Iterator<Item = i64> + '_ {
        let n = i64::from(self.half_width);
        (-n..=n).map(move |i| i * self.step as i64)
    }

    pub fn validate(&self, period: usize) -> Result<()> {
        if self.step == 0 {
            return Err(Error::invalid("skew step must be positive"));
        }
        if self.max_offset() >= period as u64 {
            return Err(Error::invalid(format!(
                "skew grid reaches {} samples, beyond the {period}-sample period",
                self.max_offset()
            )));
        }
        Ok(())
    }
}

/// One augmented training or test example.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    source: InterpolatedRecord,
    target: SkewOffset,
}

impl LabeledSample {
    pub fn new(source: InterpolatedRecord, target: SkewOffset) -> Result<Self> {
        if target.period_len() != source.len() {
            return Err(Error::invalid("skew target resolution does not match the source record"));
        }
        Ok(Self { source, target })
    }

    pub fn source(&self) -> &InterpolatedRecord {
        &self.source
    }

    pub fn target(&self) -> SkewOffset {
        self.target
    }

    /// The pre-augmentation operating point this sample derives from.
    pub fn origin_id(&self) -> &str {
        self.source.raw().id()
    }

    /// Interpolated record with the skewed H series.
    pub fn record(&self) -> Result<WaveformRecord> {
        self.source.skewed(self.target)
    }
}

/// Expand one interpolated record into `2n + 1` labeled samples, from the
/// most negative skew to the most positive.
pub fn augment(record: &InterpolatedRecord, grid: SkewGrid) -> Result<Vec<LabeledSample>> {
    grid.validate(record.len())?;
    grid.offsets().map(|d| LabeledSample::new(record.clone(), record.skew(d)?)).collect()
}

/// Interpolate and augment a whole record set, in record order.
pub fn augment_all(records: &[WaveformRecord], interp_factor: u32, grid: SkewGrid) -> Result<Vec<LabeledSample>> {
    let mut out = Vec::with_capacity(records.len() * grid.len());
    for r in records {
        out.extend(augment(&InterpolatedRecord::new(r.clone(), interp_factor)?, grid)?);
    }
    Ok(out)
}
