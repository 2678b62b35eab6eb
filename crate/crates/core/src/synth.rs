//! Analytic waveform generators.
//!
//! Each family has a closed-form loop energy, which makes the generated
//! records usable both as test oracles and as a desk-scale training corpus.
//!
//! * ellipse: `B = B0·sin θ`, `H = H0·sin(θ + φ)`, energy `π·B0·H0·sin φ`.
//! * parallelogram: triangular B with pk-pk swing ΔB and duty D,
//!   `H = Hc·sign(dB/dt) + s·B`, energy `2·Hc·ΔB`.
//! * triangular-duty: the same triangular B, but the branch offset scales
//!   with the slew rate of each edge (`Hc/(2D)` rising, `Hc/(2(1-D))`
//!   falling), so asymmetric duty produces asymmetric loops.
//!
//! Triangular flux waveforms sample each turning point on both branches (one
//! dwell sample at the top and one at the bottom), so the sampled polygon
//! has exact vertical edges and its shoelace area equals the closed form.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::{ShapeTag, TimeSeries, WaveformRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    Ellipse,
    Parallelogram,
    TriangularDuty,
}

impl SynthKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SynthKind::Ellipse => "ellipse",
            SynthKind::Parallelogram => "parallelogram",
            SynthKind::TriangularDuty => "triangular-duty",
        }
    }

    fn shape(self) -> ShapeTag {
        match self {
            SynthKind::Ellipse => ShapeTag::Sinusoidal,
            SynthKind::Parallelogram | SynthKind::TriangularDuty => ShapeTag::Triangular,
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ellipse" => Ok(SynthKind::Ellipse),
            "parallelogram" => Ok(SynthKind::Parallelogram),
            "triangular-duty" => Ok(SynthKind::TriangularDuty),
            other => Err(Error::invalid(format!("unknown generator kind {other:?}"))),
        }
    }
}

/// Exponentially damped ringing added to H after every switching event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ringing {
    /// Peak amplitude in A/m.
    pub amplitude: f64,
    /// Ring frequency as a multiple of the fundamental.
    pub frequency_multiple: f64,
    /// Decay time constant as a fraction of the period.
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    /// B0 (ellipse peak) or ΔB (pk-pk swing), tesla.
    pub b_amplitude: f64,
    /// H0 (ellipse peak) or Hc (branch offset), A/m.
    pub h_amplitude: f64,
    /// Reversible slope s in (A/m)/T; unused by the ellipse.
    pub slope: f64,
    /// Phase lead of H over B in radians; ellipse only.
    pub phase: f64,
    /// Rising fraction of the period; triangular families only.
    pub duty: f64,
    pub frequency: f64,
    pub samples: usize,
    pub ringing: Option<Ringing>,
    pub seed: u64,
}

impl SynthSpec {
    pub const MIN_SAMPLES: usize = 16;

    pub fn ellipse(b0: f64, h0: f64, phase: f64) -> Self {
        Self {
            kind: SynthKind::Ellipse,
            b_amplitude: b0,
            h_amplitude: h0,
            slope: 0.0,
            phase,
            duty: 0.5,
            frequency: 100e3,
            samples: WaveformRecord::DATASET_LENGTH,
            ringing: None,
            seed: 0,
        }
    }

    pub fn parallelogram(delta_b: f64, hc: f64, slope: f64, duty: f64) -> Self {
        Self {
            kind: SynthKind::Parallelogram,
            b_amplitude: delta_b,
            h_amplitude: hc,
            slope,
            phase: 0.0,
            duty,
            ..Self::ellipse(0.0, 0.0, 0.0)
        }
    }

    pub fn triangular_duty(delta_b: f64, hc: f64, slope: f64, duty: f64) -> Self {
        Self { kind: SynthKind::TriangularDuty, ..Self::parallelogram(delta_b, hc, slope, duty) }
    }

    pub fn with_frequency(mut self, f: f64) -> Self {
        self.frequency = f;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.samples = n;
        self
    }

    pub fn with_ringing(mut self, r: Ringing) -> Self {
        self.ringing = Some(r);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("B amplitude", self.b_amplitude)?;
        positive("H amplitude", self.h_amplitude)?;
        positive("frequency", self.frequency)?;
        if !(self.slope.is_finite() && self.slope >= 0.0) {
            return Err(Error::invalid(format!("slope must be non-negative, got {}", self.slope)));
        }
        if !self.phase.is_finite() {
            return Err(Error::invalid("phase must be finite"));
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return Err(Error::invalid(format!("duty must lie in (0, 1), got {}", self.duty)));
        }
        if self.samples < Self::MIN_SAMPLES {
            return Err(Error::invalid(format!("need at least {} samples, got {}", Self::MIN_SAMPLES, self.samples)));
        }
        if let Some(r) = &self.ringing {
            if !(r.amplitude.is_finite() && r.amplitude >= 0.0) {
                return Err(Error::invalid("ringing amplitude must be non-negative"));
            }
            positive("ring frequency multiple", r.frequency_multiple)?;
            positive("ring damping", r.damping)?;
        }
        Ok(())
    }

    /// Closed-form loop energy density in J/m³.
    pub fn analytic_energy(&self) -> f64 {
        match self.kind {
            SynthKind::Ellipse => PI * self.b_amplitude * self.h_amplitude * self.phase.sin(),
            SynthKind::Parallelogram => 2.0 * self.h_amplitude * self.b_amplitude,
            SynthKind::TriangularDuty => self.h_amplitude * self.b_amplitude / (2.0 * self.duty * (1.0 - self.duty)),
        }
    }
}

/// Synthesize one record. Deterministic in `spec` (including its seed).
pub fn generate(spec: &SynthSpec) -> Result<WaveformRecord> {
    generate_with_id(spec, format!("synth-{}-{}", spec.kind, spec.seed))
}

pub fn generate_with_id(spec: &SynthSpec, id: impl Into<String>) -> Result<WaveformRecord> {
    spec.validate()?;
    let n = spec.samples;
    let (b, mut h, events) = match spec.kind {
        SynthKind::Ellipse => {
            let th = |i: usize| 2.0 * PI * i as f64 / n as f64;
            let b = (0..n).map(|i| spec.b_amplitude * th(i).sin()).collect::<Vec<_>>();
            let h: Vec<f64> = (0..n).map(|i| spec.h_amplitude * (th(i) + spec.phase).sin()).collect();
            (b, h, [0, n / 2])
        }
        SynthKind::Parallelogram | SynthKind::TriangularDuty => {
            let tri = Triangle::new(n, spec.duty, spec.b_amplitude);
            let (up, down) = if spec.kind == SynthKind::Parallelogram {
                (spec.h_amplitude, spec.h_amplitude)
            } else {
                (spec.h_amplitude / (2.0 * spec.duty), spec.h_amplitude / (2.0 * (1.0 - spec.duty)))
            };
            let b = tri.samples();
            let h = b
                .iter()
                .enumerate()
                .map(|(i, &bi)| {
                    let offset = if tri.is_rising(i) { up } else { -down };
                    offset + spec.slope * bi
                })
                .collect();
            (b, h, [0, tri.rise + 1])
        }
    };

    if let Some(r) = spec.ringing.filter(|r| r.amplitude > 0.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for &e in &events {
            let psi: f64 = rng.gen_range(0.0..2.0 * PI);
            for (i, hi) in h.iter_mut().enumerate() {
                let t = ((i + n - e) % n) as f64 / n as f64;
                *hi += r.amplitude * (-t / r.damping).exp() * (2.0 * PI * r.frequency_multiple * t + psi).sin();
            }
        }
    }

    WaveformRecord::new(
        id,
        TimeSeries::new(b, spec.frequency)?,
        TimeSeries::new(h, spec.frequency)?,
        "synthetic",
        25.0,
        0.0,
        spec.kind.shape(),
    )
}

/// Triangular flux waveform centered on zero with dwell samples at the peaks.
#[derive(Debug, Clone, Copy)]
struct Triangle {
    n: usize,
    rise: usize,
    fall: usize,
    swing: f64,
}

impl Triangle {
    fn new(n: usize, duty: f64, swing: f64) -> Self {
        let rise = ((duty * (n - 2) as f64).round() as usize).clamp(1, n - 3);
        Self { n, rise, fall: n - 2 - rise, swing }
    }

    /// Samples `0..=rise` lie on the rising branch.
    fn is_rising(&self, i: usize) -> bool {
        i <= self.rise
    }

    fn samples(&self) -> Vec<f64> {
        let lo = -0.5 * self.swing;
        let hi = 0.5 * self.swing;
        (0..self.n)
            .map(|i| {
                if self.is_rising(i) {
                    if i == self.rise {
                        hi
                    } else {
                        lo + self.swing * (i as f64 / self.rise as f64)
                    }
                } else {
                    let j = i - self.rise - 1;
                    if j == self.fall {
                        lo
                    } else {
                        hi - self.swing * (j as f64 / self.fall as f64)
                    }
                }
            })
            .collect()
    }
}

/// Inclusive parameter range; equal bounds pin the value.
pub type Range = (f64, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub b_amplitude: Range,
    pub h_amplitude: Range,
    pub slope: Range,
    pub phase: Range,
    pub duty: Range,
}

impl ParamRanges {
    /// Desk-scale defaults per family.
    ///
    /// The ellipse family models a single material with a fixed loss angle:
    /// an ellipse with a free phase would be closed under skew and carry no
    /// information about it.
    pub fn default_for(kind: SynthKind) -> Self {
        match kind {
            SynthKind::Ellipse => Self {
                b_amplitude: (0.05, 0.25),
                h_amplitude: (20.0, 100.0),
                slope: (0.0, 0.0),
                phase: (PI / 6.0, PI / 6.0),
                duty: (0.5, 0.5),
            },
            SynthKind::Parallelogram | SynthKind::TriangularDuty => Self {
                b_amplitude: (0.05, 0.4),
                h_amplitude: (5.0, 20.0),
                slope: (50.0, 300.0),
                phase: (0.0, 0.0),
                duty: (0.3, 0.7),
            },
        }
    }
}

/// Seeded recipe for a corpus of synthetic operating points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub families: Vec<(SynthKind, ParamRanges)>,
    pub frequency: Range,
    pub samples: usize,
    pub count: usize,
    pub seed: u64,
    pub ringing: Option<Ringing>,
}

impl CorpusSpec {
    /// Mixed ellipse/parallelogram corpus with default parameter ranges.
    pub fn mixed(count: usize, seed: u64) -> Self {
        Self {
            families: [SynthKind::Ellipse, SynthKind::Parallelogram]
                .into_iter()
                .map(|k| (k, ParamRanges::default_for(k)))
                .collect(),
            frequency: (50e3, 500e3),
            samples: WaveformRecord::DATASET_LENGTH,
            count,
            seed,
            ringing: None,
        }
    }

    pub fn single(kind: SynthKind, ranges: ParamRanges, count: usize, seed: u64) -> Self {
        Self { families: vec![(kind, ranges)], ..Self::mixed(count, seed) }
    }

    /// The per-record specs, in corpus order.
    pub fn specs(&self) -> Result<Vec<SynthSpec>> {
        if self.families.is_empty() {
            return Err(Error::invalid("corpus needs at least one generator family"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut draw = |r: Range| -> Result<f64> {
            if !(r.0.is_finite() && r.1.is_finite() && r.0 <= r.1) {
                return Err(Error::invalid(format!("bad parameter range {r:?}")));
            }
            Ok(if r.0 == r.1 { r.0 } else { rng.gen_range(r.0..=r.1) })
        };
        let mut out = Vec::with_capacity(self.count);
        for i in 0..self.count {
            let (kind, ranges) = &self.families[i % self.families.len()];
            let spec = SynthSpec {
                kind: *kind,
                b_amplitude: draw(ranges.b_amplitude)?,
                h_amplitude: draw(ranges.h_amplitude)?,
                slope: draw(ranges.slope)?,
                phase: draw(ranges.phase)?,
                duty: draw(ranges.duty)?,
                frequency: draw(self.frequency)?,
                samples: self.samples,
                ringing: self.ringing,
                seed: self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64),
            };
            spec.validate()?;
            out.push(spec);
        }
        Ok(out)
    }

    pub fn generate(&self) -> Result<Vec<WaveformRecord>> {
        self.specs()?.iter().enumerate().map(|(i, s)| generate_with_id(s, format!("synth:{}:{i}", self.seed))).collect()
    }
}
