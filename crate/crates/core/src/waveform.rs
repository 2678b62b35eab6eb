//! Waveform primitives: electrical-to-magnetic conversion, periodic
//! interpolation, skew shifting, loop construction and loss integration.
//!
//! Every series holds exactly one fundamental period, so all index arithmetic
//! wraps modulo the series length.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform samples over one period of a periodic signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    frequency: f64,
}

impl TimeSeries {
    pub const MIN_LEN: usize = 3;

    pub fn new(values: Vec<f64>, frequency: f64) -> Result<Self> {
        if values.len() < Self::MIN_LEN {
            return Err(Error::invalid(format!(
                "time series needs at least {} samples, got {}",
                Self::MIN_LEN,
                values.len()
            )));
        }
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(Error::invalid(format!("frequency must be positive, got {frequency}")));
        }
        Ok(Self { values, frequency })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fundamental frequency in hertz.
    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    /// Sample spacing in seconds.
    pub fn sample_interval(&self) -> f64 {
        1.0 / (self.frequency * self.values.len() as f64)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Excitation waveform family of a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeTag {
    Triangular,
    Sinusoidal,
    Trapezoidal,
    Other,
}

impl ShapeTag {
    pub const ALL: [ShapeTag; 4] = [ShapeTag::Triangular, ShapeTag::Sinusoidal, ShapeTag::Trapezoidal, ShapeTag::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            ShapeTag::Triangular => "triangular",
            ShapeTag::Sinusoidal => "sinusoidal",
            ShapeTag::Trapezoidal => "trapezoidal",
            ShapeTag::Other => "other",
        }
    }
}

impl fmt::Display for ShapeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShapeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        ShapeTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown shape tag {s:?}")))
    }
}

/// One operating point: B and H over one period plus measurement conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformRecord {
    id: String,
    b: TimeSeries,
    h: TimeSeries,
    material: String,
    temperature: f64,
    dc_bias: f64,
    shape: ShapeTag,
}

impl WaveformRecord {
    /// Sample count of records in the reference measurement database.
    pub const DATASET_LENGTH: usize = 1024;

    pub fn new(
        id: impl Into<String>,
        b: TimeSeries,
        h: TimeSeries,
        material: impl Into<String>,
        temperature: f64,
        dc_bias: f64,
        shape: ShapeTag,
    ) -> Result<Self> {
        check_pair(&b, &h)?;
        Ok(Self { id: id.into(), b, h, material: material.into(), temperature, dc_bias, shape })
    }

    /// Identifier of the operating point this record was measured at.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Flux density in tesla.
    pub fn b(&self) -> &TimeSeries {
        &self.b
    }

    /// Field strength in A/m.
    pub fn h(&self) -> &TimeSeries {
        &self.h
    }

    pub fn material(&self) -> &str {
        &self.material
    }

    /// Celsius.
    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// A/m.
    pub fn dc_bias(&self) -> f64 {
        self.dc_bias
    }

    pub fn shape(&self) -> ShapeTag {
        self.shape
    }

    pub fn frequency(&self) -> f64 {
        self.b.frequency
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// Peak-to-peak flux density swing.
    pub fn delta_b(&self) -> f64 {
        self.b.max() - self.b.min()
    }

    /// Replace the H series, keeping every other field.
    pub fn with_h(&self, h: TimeSeries) -> Result<Self> {
        self.with_series(self.b.clone(), h)
    }

    /// Consuming form of [`with_h`](Self::with_h).
    pub fn into_with_h(mut self, h: TimeSeries) -> Result<Self> {
        check_pair(&self.b, &h)?;
        self.h = h;
        Ok(self)
    }

    /// Replace both series (e.g. after interpolation).
    pub fn with_series(&self, b: TimeSeries, h: TimeSeries) -> Result<Self> {
        check_pair(&b, &h)?;
        Ok(Self {
            id: self.id.clone(),
            b,
            h,
            material: self.material.clone(),
            temperature: self.temperature,
            dc_bias: self.dc_bias,
            shape: self.shape,
        })
    }

    pub fn to_loop(&self) -> BhLoop {
        BhLoop::from_series_unchecked(&self.b.values, &self.h.values)
    }
}

fn check_pair(b: &TimeSeries, h: &TimeSeries) -> Result<()> {
    if b.len() != h.len() {
        return Err(Error::invalid(format!("B and H lengths differ ({} vs {})", b.len(), h.len())));
    }
    if b.frequency != h.frequency {
        return Err(Error::invalid(format!("B and H frequencies differ ({} vs {})", b.frequency, h.frequency)));
    }
    Ok(())
}

/// A signed skew in interpolated-sample units.
///
/// Positive offsets make the current (H) trajectory run ahead of the voltage
/// reference in sample order, which widens a dissipative loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SkewOffset {
    delta: i64,
    interp_factor: u32,
    base_length: usize,
}

impl SkewOffset {
    pub fn new(delta: i64, interp_factor: u32, base_length: usize) -> Result<Self> {
        if interp_factor == 0 {
            return Err(Error::invalid("interpolation factor must be positive"));
        }
        if base_length == 0 {
            return Err(Error::invalid("base length must be positive"));
        }
        let period = base_length as i64 * i64::from(interp_factor);
        if delta.abs() >= period {
            return Err(Error::invalid(format!("skew {delta} spans a full period of {period} samples")));
        }
        Ok(Self { delta, interp_factor, base_length })
    }

    pub fn zero(interp_factor: u32, base_length: usize) -> Result<Self> {
        Self::new(0, interp_factor, base_length)
    }

    pub fn delta(&self) -> i64 {
        self.delta
    }

    pub fn interp_factor(&self) -> u32 {
        self.interp_factor
    }

    pub fn base_length(&self) -> usize {
        self.base_length
    }

    /// Samples per period after interpolation.
    pub fn period_len(&self) -> usize {
        self.base_length * self.interp_factor as usize
    }

    pub fn degrees(&self) -> f64 {
        360.0 * self.delta as f64 / self.period_len() as f64
    }

    pub fn seconds(&self, frequency: f64) -> f64 {
        self.delta as f64 / (self.period_len() as f64 * frequency)
    }

    pub fn nanoseconds(&self, frequency: f64) -> f64 {
        self.seconds(frequency) * 1e9
    }

    pub fn negated(&self) -> Self {
        Self { delta: -self.delta, ..*self }
    }
}

/// Closed polyline of (H, B) vertices in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct BhLoop {
    points: Vec<LoopPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopPoint {
    /// A/m.
    pub h: f64,
    /// Tesla.
    pub b: f64,
}

/// Traversal sense of a loop's signed area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Positive energy per cycle.
    Dissipative,
    /// Negative energy; the skewed trajectory crosses itself the wrong way.
    Generative,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub h_min: f64,
    pub h_max: f64,
    pub b_min: f64,
    pub b_max: f64,
}

impl BhLoop {
    pub fn from_points(points: Vec<LoopPoint>) -> Result<Self> {
        if points.len() < TimeSeries::MIN_LEN {
            return Err(Error::invalid(format!(
                "a loop needs at least {} vertices, got {}",
                TimeSeries::MIN_LEN,
                points.len()
            )));
        }
        Ok(Self { points })
    }

    fn from_series_unchecked(b: &[f64], h: &[f64]) -> Self {
        let points = h.iter().zip(b).map(|(&h, &b)| LoopPoint { h, b }).collect();
        Self { points }
    }

    pub fn points(&self) -> &[LoopPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn extent(&self) -> Extent {
        let mut e =
            Extent { h_min: f64::INFINITY, h_max: f64::NEG_INFINITY, b_min: f64::INFINITY, b_max: f64::NEG_INFINITY };
        for p in &self.points {
            e.h_min = e.h_min.min(p.h);
            e.h_max = e.h_max.max(p.h);
            e.b_min = e.b_min.min(p.b);
            e.b_max = e.b_max.max(p.b);
        }
        e
    }

    /// True when every vertex coincides.
    pub fn is_degenerate(&self) -> bool {
        let e = self.extent();
        e.h_max == e.h_min && e.b_max == e.b_min
    }

    pub fn orientation(&self) -> Orientation {
        let e = loop_energy_density(self);
        if e > 0.0 {
            Orientation::Dissipative
        } else if e < 0.0 {
            Orientation::Generative
        } else {
            Orientation::Degenerate
        }
    }
}

/// Flux density from a sense-winding voltage by cumulative trapezoidal
/// integration, starting from B(0) = 0.
pub fn b_from_voltage(v: &TimeSeries, n2: u32, ae: f64) -> Result<TimeSeries> {
    if n2 == 0 {
        return Err(Error::invalid("sense winding turn count must be at least 1"));
    }
    if !(ae.is_finite() && ae > 0.0) {
        return Err(Error::invalid(format!("effective area must be positive, got {ae}")));
    }
    let dt = v.sample_interval();
    let scale = dt / (f64::from(n2) * ae);
    let vals = v.values();
    let mut out = Vec::with_capacity(vals.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in vals.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * scale;
        out.push(acc);
    }
    TimeSeries::new(out, v.frequency())
}

/// Field strength from the main-winding current: H = n1·i / le.
pub fn h_from_current(i: &TimeSeries, n1: u32, le: f64) -> Result<TimeSeries> {
    if n1 == 0 {
        return Err(Error::invalid("main winding turn count must be at least 1"));
    }
    if !(le.is_finite() && le > 0.0) {
        return Err(Error::invalid(format!("magnetic path length must be positive, got {le}")));
    }
    let n1 = f64::from(n1);
    let out = i.values().iter().map(|&x| n1 * x / le).collect();
    TimeSeries::new(out, i.frequency())
}

/// Periodic linear interpolation by an integer factor.
///
/// `out[j*k] == s[j]` exactly; the last segment closes back onto `s[0]`.
pub fn interpolate_periodic(s: &TimeSeries, k: u32) -> Result<TimeSeries> {
    if k == 0 {
        return Err(Error::invalid("interpolation factor must be positive"));
    }
    if k == 1 {
        return Ok(s.clone());
    }
    let vals = s.values();
    let n = vals.len();
    let k = k as usize;
    let mut out = Vec::with_capacity(n * k);
    for j in 0..n {
        let a = vals[j];
        let step = vals[(j + 1) % n] - a;
        out.push(a);
        for m in 1..k {
            out.push(a + step * (m as f64 / k as f64));
        }
    }
    TimeSeries::new(out, s.frequency())
}

/// Circular shift of an interpolated H series: `out[t] = h[(t + delta) mod len]`.
pub fn apply_skew(h: &TimeSeries, skew: SkewOffset) -> Result<TimeSeries> {
    if h.len() != skew.period_len() {
        return Err(Error::invalid(format!(
            "series has {} samples but the skew expects {} ({} x {})",
            h.len(),
            skew.period_len(),
            skew.base_length,
            skew.interp_factor
        )));
    }
    let mut out = h.values().to_vec();
    let shift = skew.delta.rem_euclid(out.len() as i64) as usize;
    out.rotate_left(shift);
    TimeSeries::new(out, h.frequency())
}

/// A closed polygon in the (H, B) plane, visited vertex by vertex.
///
/// Lets the renderer and the energy integral stream very long loops without materializing them.
pub trait LoopSource {
    fn vertex_count(&self) -> usize;

    /// Call `f(h, b)` for every vertex in traversal order.
    fn visit<F: FnMut(f64, f64)>(&self, f: F);
}

impl LoopSource for BhLoop {
    fn vertex_count(&self) -> usize {
        self.points().len()
    }

    fn visit<F: FnMut(f64, f64)>(&self, mut f: F) {
        for p in self.points() {
            f(p.h, p.b);
        }
    }
}

/// Connect (H, B) pairs in index order.
pub fn make_loop(b: &TimeSeries, h: &TimeSeries) -> Result<BhLoop> {
    if b.len() != h.len() {
        return Err(Error::invalid(format!("B and H lengths differ ({} vs {})", b.len(), h.len())));
    }
    Ok(BhLoop::from_series_unchecked(b.values(), h.values()))
}

/// Per-cycle energy density ∮H dB in J/m³ (shoelace over the closed polygon).
///
/// A loop traversed counter-clockwise in the (H, B) plane is dissipative and
/// yields a positive value. Results below the rounding noise of the sum are
/// reported as exactly zero.
pub fn loop_energy_density(bh: &BhLoop) -> f64 {
    loop_energy(bh)
}

/// [`loop_energy_density`] over any vertex source. Identical vertex
/// sequences give bit-identical results however they are stored.
pub fn loop_energy<S: LoopSource>(src: &S) -> f64 {
    let n = src.vertex_count();
    if n < 3 {
        return 0.0;
    }
    let inv = 1.0 / n as f64;
    let (mut hs, mut bs) = (0.0, 0.0);
    src.visit(|h, b| {
        hs += h;
        bs += b;
    });
    let (hm, bm) = (hs * inv, bs * inv);

    let mut twice_area = 0.0;
    let mut magnitude = 0.0;
    let mut first = None;
    let (mut ph, mut pb) = (0.0, 0.0);
    let mut edge = |ph: f64, pb: f64, h: f64, b: f64| {
        let (x, y) = (ph * b, h * pb);
        twice_area += x - y;
        magnitude += x.abs() + y.abs();
    };
    src.visit(|h, b| {
        let (h, b) = (h - hm, b - bm);
        if first.is_none() {
            first = Some((h, b));
        } else {
            edge(ph, pb, h, b);
        }
        (ph, pb) = (h, b);
    });
    let (h0, b0) = first.expect("loop has vertices");
    edge(ph, pb, h0, b0);

    if twice_area.abs() <= 4.0 * f64::EPSILON * magnitude {
        return 0.0;
    }
    0.5 * twice_area
}

/// Core loss density in W/m³.
pub fn core_loss_density(bh: &BhLoop, frequency: f64) -> Result<f64> {
    core_loss_of(bh, frequency)
}

/// [`core_loss_density`] over any vertex source.
pub fn core_loss_of<S: LoopSource>(src: &S, frequency: f64) -> Result<f64> {
    if !(frequency.is_finite() && frequency > 0.0) {
        return Err(Error::invalid(format!("frequency must be positive, got {frequency}")));
    }
    let p = frequency * loop_energy(src);
    if !p.is_finite() {
        return Err(Error::NonFinite { context: format!("core loss {p} at {frequency} Hz") });
    }
    Ok(p)
}
