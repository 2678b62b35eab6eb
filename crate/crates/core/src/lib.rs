//! Probe-skew detection and correction for high-frequency BH loop
//! measurements.
//!
//! A measured loop is rendered into a small grayscale image (a global view
//! plus a zoomed view around the minimum-H vertex) and a compact
//! convolutional regressor estimates the time skew between the voltage and
//! current probes. The estimate is then undone by circularly shifting the H
//! waveform and the core loss is recomputed.
//!
//! Module map:
//!
//! * [`waveform`]: B/H conversion, periodic interpolation, skew shifts, loop
//!   area and core loss.
//! * [`synth`]: analytic loop generators with closed-form losses.
//! * [`dataset`]: corpus ingest, filtering, splitting and skew augmentation.
//! * [`raster`]: deterministic loop rendering.
//! * [`net`]: the regression network, its gradients and the Adam optimizer.
//! * [`pipeline`]: training, fine-tuning, prediction, correction and
//!   evaluation.

pub mod dataset;
pub mod error;
pub mod fsutil;
pub mod net;
pub mod parallel;
pub mod pipeline;
pub mod raster;
pub mod synth;
pub mod waveform;

pub use error::{Error, ErrorKind, Result};
pub use waveform::{
    apply_skew, b_from_voltage, core_loss_density, core_loss_of, h_from_current, interpolate_periodic, loop_energy,
    loop_energy_density, make_loop, BhLoop, LoopPoint, LoopSource, Orientation, ShapeTag, SkewOffset, TimeSeries,
    WaveformRecord,
};
