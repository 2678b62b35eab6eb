use serde::{Deserialize, Serialize};

use crate::dataset::InterpolatedRecord;
use crate::error::{Error, Result};
use crate::net::{forward, ModelParams, NetInput, Workspace};
use crate::raster::render_source;
use crate::waveform::{apply_skew, core_loss_density, SkewOffset, WaveformRecord};

/// A skew estimate in the units the tool reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewPrediction {
    /// Network output in interpolated samples, before rounding.
    pub raw_index: f64,
    /// Rounded to the nearest interpolated sample.
    pub skew: SkewOffset,
    pub degrees: f64,
    pub nanoseconds: f64,
    /// Excitation frequency used for the time conversion, Hz.
    pub frequency: f64,
}

impl SkewPrediction {
    pub(crate) fn from_raw(raw_index: f64, interp_factor: u32, base_length: usize, frequency: f64) -> Result<Self> {
        let skew = round_offset(raw_index, interp_factor, base_length)?;
        Ok(Self { raw_index, skew, degrees: skew.degrees(), nanoseconds: skew.nanoseconds(frequency), frequency })
    }
}

/// Nearest interpolated index, clamped inside one period.
pub(crate) fn round_offset(raw: f64, interp_factor: u32, base_length: usize) -> Result<SkewOffset> {
    if !raw.is_finite() {
        return Err(Error::NonFinite { context: format!("in the predicted skew ({raw})") });
    }
    let limit = (base_length as i64 * i64::from(interp_factor) - 1) as f64;
    SkewOffset::new(raw.round().clamp(-limit, limit) as i64, interp_factor, base_length)
}

pub(crate) fn check_resolution(model: &ModelParams, record: &InterpolatedRecord) -> Result<()> {
    let meta = &model.meta;
    if record.interp_factor() != meta.interp_factor || record.base_length() != meta.base_length {
        return Err(Error::invalid(format!(
            "resolution mismatch: record {} is {} x {}, model expects {} x {}",
            record.raw().id(),
            record.base_length(),
            record.interp_factor(),
            meta.base_length,
            meta.interp_factor
        )));
    }
    Ok(())
}

/// Estimate the skew already present in `record`.
pub fn predict_skew(model: &ModelParams, record: &InterpolatedRecord) -> Result<SkewPrediction> {
    predict_with(model, record, &mut Workspace::new(model.arch()))
}

/// [`predict_skew`] reusing a workspace.
pub fn predict_with(model: &ModelParams, record: &InterpolatedRecord, ws: &mut Workspace) -> Result<SkewPrediction> {
    check_resolution(model, record)?;
    let view = record.skewed_loop(record.skew(0)?)?;
    let img = render_source(&view, &model.meta.raster)?;
    let y = forward(model, &NetInput::from_image(&img, &model.norm), ws)?;
    let meta = &model.meta;
    SkewPrediction::from_raw(
        model.norm.denormalize_target(y),
        meta.interp_factor,
        meta.base_length,
        record.raw().frequency(),
    )
}

/// A record with the estimated skew removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub record: WaveformRecord,
    /// Core loss density of the corrected loop, W/m³.
    pub core_loss: f64,
}

/// Shift H of an interpolated record by `-skew` and recompute its core loss.
pub fn correct(record: &WaveformRecord, skew: SkewOffset) -> Result<Correction> {
    if record.len() != skew.period_len() {
        return Err(Error::invalid(format!(
            "resolution mismatch: record {} has {} samples, the skew expects {}",
            record.id(),
            record.len(),
            skew.period_len()
        )));
    }
    let h = apply_skew(record.h(), skew.negated())?;
    let record = record.with_h(h)?;
    let core_loss = core_loss_density(&record.to_loop(), record.frequency())?;
    Ok(Correction { record, core_loss })
}
