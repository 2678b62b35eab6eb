use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::predict::{check_resolution, round_offset};
use super::render_sample;
use crate::dataset::LabeledSample;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::net::{forward_batch, ModelParams, NetInput};
use crate::parallel;
use crate::waveform::{core_loss_of, SkewOffset};

/// Samples rendered and predicted together during evaluation.
const EVAL_CHUNK: usize = 64;

/// One evaluated sample. Skews are in interpolated samples, losses in W/m³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub origin_id: String,
    pub frequency: f64,
    pub true_skew: i64,
    pub predicted_skew: i64,
    pub predicted_raw: f64,
    /// `|predicted - true| / max(|true|, grid step)`.
    pub skew_rel_error: f64,
    /// Loss of the unskewed sibling loop.
    pub loss_true: f64,
    pub loss_skewed: f64,
    pub loss_corrected: f64,
    /// `(loss_skewed - loss_true) / loss_true`.
    pub deviation_before: f64,
    /// `(loss_corrected - loss_true) / loss_true`.
    pub deviation_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub count: usize,
    pub mean_skew_rel_error: f64,
    pub median_skew_rel_error: f64,
    /// Nearest-rank 95th percentile.
    pub p95_skew_rel_error: f64,
    pub mean_abs_deviation_before: f64,
    pub mean_abs_deviation_after: f64,
}

impl Aggregates {
    pub fn from_rows(rows: &[EvalRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Dataset("no rows to aggregate".into()));
        }
        let n = rows.len();
        let mean = |f: &dyn Fn(&EvalRow) -> f64| rows.iter().map(f).sum::<f64>() / n as f64;
        let mut errs: Vec<f64> = rows.iter().map(|r| r.skew_rel_error).collect();
        errs.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 { errs[n / 2] } else { 0.5 * (errs[n / 2 - 1] + errs[n / 2]) };
        let rank = (0.95 * n as f64).ceil() as usize;
        Ok(Self {
            count: n,
            mean_skew_rel_error: mean(&|r| r.skew_rel_error),
            median_skew_rel_error: median,
            p95_skew_rel_error: errs[rank.max(1) - 1],
            mean_abs_deviation_before: mean(&|r| r.deviation_before.abs()),
            mean_abs_deviation_after: mean(&|r| r.deviation_after.abs()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub aggregates: Aggregates,
}

impl EvalReport {
    pub fn from_rows(rows: Vec<EvalRow>) -> Result<Self> {
        let aggregates = Aggregates::from_rows(&rows)?;
        Ok(Self { rows, aggregates })
    }

    /// Error unless the aggregates match the rows.
    pub fn check(&self) -> Result<()> {
        if Aggregates::from_rows(&self.rows)? != self.aggregates {
            return Err(Error::Format("report aggregates do not match its rows".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(format!("cannot encode report: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s).map_err(|e| Error::Format(format!("malformed report: {e}")))?;
        r.check()?;
        Ok(r)
    }
}

pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    let mut s = report.to_json()?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EvalReport::from_json(&s).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Predict, correct and score every sample.
///
/// Refuses samples whose operating point the model was trained on.
pub fn evaluate(model: &ModelParams, samples: &[LabeledSample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::Dataset("evaluation set is empty".into()));
    }
    let seen: HashSet<&str> = model.meta.training_origins.iter().map(String::as_str).collect();
    for s in samples {
        if seen.contains(s.origin_id()) {
            return Err(Error::Leakage(s.origin_id().to_string()));
        }
        check_resolution(model, s.source())?;
    }

    let bounds: Vec<(usize, usize)> =
        (0..samples.len()).step_by(EVAL_CHUNK).map(|lo| (lo, (lo + EVAL_CHUNK).min(samples.len()))).collect();
    let mut raw = Vec::with_capacity(samples.len());
    for chunk in &bounds {
        let inputs = parallel::map_range(chunk.1 - chunk.0, |i| {
            render_sample(&samples[chunk.0 + i], &model.meta.raster).map(|img| NetInput::from_image(&img, &model.norm))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        raw.extend(forward_batch(model, &inputs)?.into_iter().map(|y| model.norm.denormalize_target(y)));
    }

    // Reference losses, one per operating point.
    let mut first_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        first_of.entry(s.origin_id()).or_insert(i);
    }
    let refs: Vec<(&str, usize)> = first_of.into_iter().collect();
    let ref_losses = parallel::map(&refs, |&(id, i)| {
        let src = samples[i].source();
        let loss = core_loss_of(&src.skewed_loop(src.skew(0)?)?, src.raw().frequency())?;
        if loss == 0.0 {
            return Err(Error::Dataset(format!("reference loop of {id} has zero core loss")));
        }
        Ok((id, loss))
    })
    .into_iter()
    .collect::<Result<BTreeMap<_, _>>>()?;

    let step = model.meta.grid.step as f64;
    let rows = parallel::map_range(samples.len(), |i| {
        let s = &samples[i];
        let src = s.source();
        let f = src.raw().frequency();
        let truth = s.target();
        let pred = round_offset(raw[i], src.interp_factor(), src.base_length())?;
        let residual = net_offset(truth, pred)?;
        let loss_true = ref_losses[s.origin_id()];
        let loss_skewed = core_loss_of(&src.skewed_loop(truth)?, f)?;
        let loss_corrected = core_loss_of(&src.skewed_loop(residual)?, f)?;
        let d = truth.delta() as f64;
        Ok(EvalRow {
            origin_id: s.origin_id().to_string(),
            frequency: f,
            true_skew: truth.delta(),
            predicted_skew: pred.delta(),
            predicted_raw: raw[i],
            skew_rel_error: (pred.delta() - truth.delta()).abs() as f64 / d.abs().max(step),
            loss_true,
            loss_skewed,
            loss_corrected,
            deviation_before: (loss_skewed - loss_true) / loss_true,
            deviation_after: (loss_corrected - loss_true) / loss_true,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    EvalReport::from_rows(rows)
}

/// The single shift equal to applying `skew` and then undoing `estimate`.
pub fn net_offset(skew: SkewOffset, estimate: SkewOffset) -> Result<SkewOffset> {
    let p = skew.period_len() as i64;
    let mut d = (skew.delta() - estimate.delta()).rem_euclid(p);
    if d > p / 2 {
        d -= p;
    }
    SkewOffset::new(d, skew.interp_factor(), skew.base_length())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(err: f64, before: f64, after: f64) -> EvalRow {
        EvalRow {
            origin_id: "x".into(),
            frequency: 1e5,
            true_skew: 0,
            predicted_skew: 0,
            predicted_raw: 0.0,
            skew_rel_error: err,
            loss_true: 1.0,
            loss_skewed: 1.0 + before,
            loss_corrected: 1.0 + after,
            deviation_before: before,
            deviation_after: after,
        }
    }

    #[test]
    fn aggregates_by_hand() {
        let rows: Vec<_> =
            [0.4, 0.1, 0.3, 0.2].iter().map(|&e| row(e, -0.5, 0.25)).chain([row(1.0, 0.5, -0.25)]).collect();
        let a = Aggregates::from_rows(&rows).unwrap();
        assert_eq!(a.count, 5);
        assert!((a.mean_skew_rel_error - 0.4).abs() < 1e-15);
        assert_eq!(a.median_skew_rel_error, 0.3);
        assert_eq!(a.p95_skew_rel_error, 1.0);
        assert_eq!(a.mean_abs_deviation_before, 0.5);
        assert_eq!(a.mean_abs_deviation_after, 0.25);
        let even = Aggregates::from_rows(&rows[..4]).unwrap();
        assert!((even.median_skew_rel_error - 0.25).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_and_tamper_check() {
        let r = EvalReport::from_rows(vec![row(0.1, 0.2, 0.3), row(1.0 / 3.0, -0.1, 0.0)]).unwrap();
        let back = EvalReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let mut bad = r.clone();
        bad.aggregates.mean_abs_deviation_after = 9.0;
        assert!(EvalReport::from_json(&bad.to_json().unwrap()).is_err());
        assert!(EvalReport::from_rows(vec![]).is_err());
    }

    #[test]
    fn net_offset_wraps() {
        let s = |d| SkewOffset::new(d, 2, 8).unwrap();
        assert_eq!(net_offset(s(3), s(1)).unwrap().delta(), 2);
        assert_eq!(net_offset(s(-15), s(15)).unwrap().delta(), 2);
        assert_eq!(net_offset(s(5), s(-5)).unwrap().delta(), -6);
    }
}
