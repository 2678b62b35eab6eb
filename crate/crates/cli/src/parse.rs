//! Flag value syntaxes.

use std::fmt;
use std::str::FromStr;

use bhdeskew_core::dataset::{DatasetFilter, SplitPolicy};
use bhdeskew_core::synth::ParamRanges;
use bhdeskew_core::ShapeTag;
use serde::Serialize;

fn num(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !v.is_finite() {
        return Err(format!("{s:?} is not finite"));
    }
    Ok(v)
}

/// `lo:hi`, or a single value for a pinned range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Span(pub f64, pub f64);

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lo, hi) = match s.split_once(':') {
            Some((a, b)) => (num(a)?, num(b)?),
            None => {
                let v = num(s)?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(format!("range {s:?} has its bounds reversed"));
        }
        Ok(Span(lo, hi))
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.0, self.1)
    }
}

/// `TRAIN:TEST` operating-point counts or a training fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Split(pub SplitPolicy);

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let count = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("{x:?} is not a count"));
        if let Some((a, b)) = s.split_once(':') {
            return Ok(Split(SplitPolicy::Counts { train: count(a)?, test: count(b)? }));
        }
        let f = num(s)?;
        if !(f > 0.0 && f < 1.0) {
            return Err(format!("training fraction {f} must lie strictly between 0 and 1"));
        }
        Ok(Split(SplitPolicy::Ratio(f)))
    }
}

/// Comma-separated `key=value` predicates:
/// `shape=triangular|sinusoidal`, `temp=25`, `bias=0`, `freq=LO:HI`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Filter(pub DatasetFilter);

impl FromStr for Filter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut f = DatasetFilter::pass_all();
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| format!("filter term {item:?} lacks '='"))?;
            match k.trim() {
                "shape" => {
                    let shapes = v
                        .split('|')
                        .map(|t| t.parse::<ShapeTag>().map_err(|e| e.to_string()))
                        .collect::<Result<Vec<_>, _>>()?;
                    f.shapes = Some(shapes);
                }
                "temp" => f.temperature = Some(num(v)?),
                "bias" => f.dc_bias = Some(num(v)?),
                "freq" => {
                    let Span(lo, hi) = v.parse()?;
                    f.frequency = Some((lo, hi));
                }
                other => return Err(format!("unknown filter key {other:?} (expected shape, temp, bias or freq)")),
            }
        }
        Ok(Filter(f))
    }
}

/// Overrides of generator parameter ranges: comma-separated `key=LO:HI`
/// with keys `b`, `h`, `slope`, `phase`, `duty`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Params(pub Vec<(String, Span)>);

impl Params {
    pub fn apply(&self, mut r: ParamRanges) -> ParamRanges {
        for (k, Span(lo, hi)) in &self.0 {
            let slot = match k.as_str() {
                "b" => &mut r.b_amplitude,
                "h" => &mut r.h_amplitude,
                "slope" => &mut r.slope,
                "phase" => &mut r.phase,
                _ => &mut r.duty,
            };
            *slot = (*lo, *hi);
        }
        r
    }
}

impl FromStr for Params {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| format!("parameter {item:?} lacks '='"))?;
            let k = k.trim();
            if !["b", "h", "slope", "phase", "duty"].contains(&k) {
                return Err(format!("unknown parameter {k:?} (expected b, h, slope, phase or duty)"));
            }
            out.push((k.to_string(), v.parse()?));
        }
        Ok(Params(out))
    }
}
