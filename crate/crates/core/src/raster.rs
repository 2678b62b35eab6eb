//! Loop rendering for the network input.
//!
//! The composite image is `S × S` pixels, 8-bit, row-major. Columns
//! `[0, S/2)` hold the whole loop; columns `[S/2, S)` hold a magnified window
//! around the vertex of minimum H. Both panels are drawn with 1-pixel integer
//! Bresenham lines, no anti-aliasing, so output is byte-for-byte
//! reproducible.
//!
//! Before drawing, the loop is mapped to the unit square with each axis
//! scaled independently and a fixed margin. The extrema removed by that
//! normalization travel with the image as four scalars.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::BhLoop;
pub use crate::waveform::LoopSource;

pub const CURVE: u8 = 255;
pub const BACKGROUND: u8 = 0;

/// Raw extrema of the loop, in A/m and tesla.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scalars {
    pub h_min: f64,
    pub h_max: f64,
    pub b_min: f64,
    pub b_max: f64,
}

impl Scalars {
    pub fn to_array(self) -> [f64; 4] {
        [self.h_min, self.h_max, self.b_min, self.b_max]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterConfig {
    /// Image side in pixels; a multiple of 8.
    pub side: usize,
    /// Zoom window side as a fraction of the normalized extent.
    pub zoom: f64,
    /// Margin on each side of the normalized square.
    pub margin: f64,
}

impl RasterConfig {
    pub const DEFAULT_SIDE: usize = 256;
    pub const DEFAULT_ZOOM: f64 = 0.2;
    pub const DEFAULT_MARGIN: f64 = 0.04;

    pub fn new(side: usize) -> Self {
        Self { side, zoom: Self::DEFAULT_ZOOM, margin: Self::DEFAULT_MARGIN }
    }

    pub fn validate(&self) -> Result<()> {
        if self.side == 0 || self.side % 8 != 0 {
            return Err(Error::invalid(format!("image side must be a positive multiple of 8, got {}", self.side)));
        }
        if !(self.zoom > 0.0 && self.zoom <= 1.0) {
            return Err(Error::invalid(format!("zoom window must lie in (0, 1], got {}", self.zoom)));
        }
        if !(0.0..0.5).contains(&self.margin) {
            return Err(Error::invalid(format!("margin must lie in [0, 0.5), got {}", self.margin)));
        }
        Ok(())
    }
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self::new(Self::DEFAULT_SIDE)
    }
}

/// The network input: composite pixels plus raw-scale scalars.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LoopImage {
    side: usize,
    pixels: Vec<u8>,
    scalars: [u64; 4],
    zoom_empty: bool,
}

impl LoopImage {
    pub fn from_parts(side: usize, pixels: Vec<u8>, scalars: Scalars) -> Result<Self> {
        if pixels.len() != side * side {
            return Err(Error::invalid(format!("{} pixels do not form a {side}x{side} image", pixels.len())));
        }
        Ok(Self { side, pixels, scalars: scalars.to_array().map(f64::to_bits), zoom_empty: false })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn scalars(&self) -> Scalars {
        let [h_min, h_max, b_min, b_max] = self.scalars.map(f64::from_bits);
        Scalars { h_min, h_max, b_min, b_max }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.side + col]
    }

    /// True when no part of the loop fell inside the zoom window.
    pub fn zoom_empty(&self) -> bool {
        self.zoom_empty
    }

    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.side, self.side).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Parse a square binary PGM written by [`LoopImage::to_pgm`]. Returns the
/// side and the pixel bytes.
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, Vec<u8>)> {
    let bad = |m: &str| Error::Format(format!("PGM: {m}"));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    if fields[0] != "P5" {
        return Err(bad("not a binary graymap"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad dimension"));
    let (w, h, max) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if w != h || max != 255 {
        return Err(bad("expected a square image with maxval 255"));
    }
    let data = &bytes[pos + 1..];
    if data.len() != w * h {
        return Err(bad("pixel data length does not match the header"));
    }
    Ok((w, data.to_vec()))
}

/// Vertex coordinates mapped into the unit square, H along `u`, B along `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitPoint {
    pub u: f64,
    pub v: f64,
}

/// Affine map from loop coordinates to the unit square.
struct Normalizer {
    h_min: f64,
    b_min: f64,
    /// `span / extent` per axis, or 0 for a flat axis.
    kh: f64,
    kb: f64,
    margin: f64,
}

impl Normalizer {
    fn fit<S: LoopSource>(src: &S, margin: f64) -> Result<(Self, Scalars)> {
        let (mut h_min, mut h_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut b_min, mut b_max) = (f64::INFINITY, f64::NEG_INFINITY);
        src.visit(|h, b| {
            h_min = h_min.min(h);
            h_max = h_max.max(h);
            b_min = b_min.min(b);
            b_max = b_max.max(b);
        });
        let scalars = Scalars { h_min, h_max, b_min, b_max };
        let (dh, db) = (h_max - h_min, b_max - b_min);
        if !(dh.is_finite() && db.is_finite()) {
            return Err(Error::NonFinite { context: "in loop coordinates".into() });
        }
        if dh == 0.0 && db == 0.0 {
            return Err(Error::DegenerateLoop("zero extent on both axes".into()));
        }
        let span = 1.0 - 2.0 * margin;
        let k = |d: f64| if d == 0.0 { 0.0 } else { span / d };
        Ok((Self { h_min, b_min, kh: k(dh), kb: k(db), margin }, scalars))
    }

    #[inline]
    fn axis(&self, x: f64, lo: f64, k: f64) -> f64 {
        if k == 0.0 {
            0.5
        } else {
            self.margin + (x - lo) * k
        }
    }

    #[inline]
    fn map(&self, h: f64, b: f64) -> UnitPoint {
        UnitPoint { u: self.axis(h, self.h_min, self.kh), v: self.axis(b, self.b_min, self.kb) }
    }
}

/// The four scalars [`render_source`] would attach, without drawing.
pub fn loop_scalars<S: LoopSource>(src: &S) -> Result<Scalars> {
    Normalizer::fit(src, 0.0).map(|(_, s)| s)
}

/// Map the loop onto `[margin, 1 - margin]²`, scaling each axis on its own.
///
/// An axis with zero extent collapses onto the center line; zero extent on
/// both axes is an error.
pub fn normalize_loop(bh: &BhLoop, margin: f64) -> Result<(Vec<UnitPoint>, Scalars)> {
    let (norm, scalars) = Normalizer::fit(bh, margin)?;
    let pts = bh.points().iter().map(|p| norm.map(p.h, p.b)).collect();
    Ok((pts, scalars))
}

/// Square region of the normalized plane shown in the zoom panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoomWindow {
    pub u0: f64,
    pub v0: f64,
    pub side: f64,
    /// Index of the vertex the window is centered on.
    pub anchor: usize,
}

impl ZoomWindow {
    fn around(c: UnitPoint, anchor: usize, side: f64) -> Self {
        let place = |x: f64| (x - 0.5 * side).clamp(0.0, 1.0 - side);
        Self { u0: place(c.u), v0: place(c.v), side, anchor }
    }

    #[inline]
    fn contains(&self, p: UnitPoint) -> bool {
        (self.u0..=self.u0 + self.side).contains(&p.u) && (self.v0..=self.v0 + self.side).contains(&p.v)
    }

    #[inline]
    fn to_panel(&self, p: UnitPoint) -> UnitPoint {
        UnitPoint { u: (p.u - self.u0) / self.side, v: (p.v - self.v0) / self.side }
    }
}

/// Tracks the minimum-H vertex; ties go to lower B, then to the earlier vertex.
struct AnchorSearch {
    best: Option<(usize, UnitPoint)>,
}

impl AnchorSearch {
    #[inline]
    fn offer(&mut self, i: usize, p: UnitPoint) {
        match self.best {
            Some((_, a)) if !(p.u < a.u || (p.u == a.u && p.v < a.v)) => {}
            _ => self.best = Some((i, p)),
        }
    }
}

fn check_zoom(side: f64) -> Result<()> {
    if !(side > 0.0 && side <= 1.0) {
        return Err(Error::invalid(format!("zoom window must lie in (0, 1], got {side}")));
    }
    Ok(())
}

/// Window of side `side` centered on the minimum-H vertex (ties: lower B,
/// then lower index), shifted as needed to stay inside the unit square.
pub fn zoom_window(points: &[UnitPoint], side: f64) -> Result<ZoomWindow> {
    check_zoom(side)?;
    let mut search = AnchorSearch { best: None };
    for (i, &p) in points.iter().enumerate() {
        search.offer(i, p);
    }
    let (anchor, c) = search.best.ok_or_else(|| Error::invalid("cannot place a zoom window on an empty loop"))?;
    Ok(ZoomWindow::around(c, anchor, side))
}

/// Render with the default zoom and margin.
pub fn render_composite(bh: &BhLoop, side: usize) -> Result<LoopImage> {
    render_with(bh, &RasterConfig::new(side))
}

pub fn render_with(bh: &BhLoop, cfg: &RasterConfig) -> Result<LoopImage> {
    render_source(bh, cfg)
}

/// Render any [`LoopSource`]; the result depends only on the vertex
/// sequence, not on how it is stored.
pub fn render_source<S: LoopSource>(src: &S, cfg: &RasterConfig) -> Result<LoopImage> {
    cfg.validate()?;
    check_zoom(cfg.zoom)?;
    let n = src.vertex_count();
    if n == 0 {
        return Err(Error::invalid("cannot render an empty loop"));
    }
    let (norm, scalars) = Normalizer::fit(src, cfg.margin)?;
    let s = cfg.side;
    let mut canvas = Canvas { side: s, pixels: vec![BACKGROUND; s * s] };

    // Global panel, locating the zoom anchor on the way.
    let panel = Panel::new(0, s / 2, s);
    let mut search = AnchorSearch { best: None };
    let mut first = None;
    let mut prev = (0, 0);
    let mut i = 0;
    src.visit(|h, b| {
        let p = norm.map(h, b);
        search.offer(i, p);
        let cur = panel.pixel(p);
        match first {
            None => {
                panel.line(&mut canvas, cur, cur);
                first = Some(cur);
                prev = cur;
            }
            Some(_) if cur != prev => {
                panel.line(&mut canvas, prev, cur);
                prev = cur;
            }
            Some(_) => {}
        }
        i += 1;
    });
    let first = first.expect("loop is non-empty");
    if prev != first {
        panel.line(&mut canvas, prev, first);
    }
    let (anchor, c) = search.best.expect("loop is non-empty");
    let window = ZoomWindow::around(c, anchor, cfg.zoom);

    // Zoom panel: every edge, closing edge last.
    let zoom = Panel::new(s / 2, s / 2, s);
    let mut edges = ZoomEdges { panel: zoom, window, last: None, drawn: false };
    let mut start: Option<UnitPoint> = None;
    let mut prev = UnitPoint { u: 0.0, v: 0.0 };
    src.visit(|h, b| {
        let p = norm.map(h, b);
        if start.is_some() {
            edges.edge(&mut canvas, prev, p);
        } else {
            start = Some(p);
        }
        prev = p;
    });
    edges.edge(&mut canvas, prev, start.expect("loop is non-empty"));

    let mut img = LoopImage::from_parts(s, canvas.pixels, scalars)?;
    img.zoom_empty = !edges.drawn;
    Ok(img)
}

/// `x.round() as i64` for `0 <= x < 2^52`, without the libm call.
#[inline]
fn round_nonneg(x: f64) -> i64 {
    let i = x as i64;
    if x - i as f64 >= 0.5 {
        i + 1
    } else {
        i
    }
}

struct Canvas {
    side: usize,
    pixels: Vec<u8>,
}

impl Canvas {
    fn plot(&mut self, col: i64, row: i64) {
        self.pixels[row as usize * self.side + col as usize] = CURVE;
    }
}

#[derive(Clone, Copy)]
struct Panel {
    col0: usize,
    /// `width - 1` and `height - 1` as floats.
    sx: f64,
    sy: f64,
}

impl Panel {
    fn new(col0: usize, width: usize, height: usize) -> Self {
        Self { col0, sx: (width - 1) as f64, sy: (height - 1) as f64 }
    }
}

/// Clamp to `[0, 1]`; NaN maps to 0.
#[inline(always)]
fn unit_clamp(x: f64) -> f64 {
    if x > 0.0 {
        x.min(1.0)
    } else {
        0.0
    }
}

impl Panel {
    /// Local pixel for a point in `[0, 1]²`; B grows upwards.
    #[inline(always)]
    fn pixel(&self, p: UnitPoint) -> (i64, i64) {
        let x = round_nonneg(unit_clamp(p.u) * self.sx);
        let y = round_nonneg((1.0 - unit_clamp(p.v)) * self.sy);
        (x, y)
    }

    fn line(&self, canvas: &mut Canvas, a: (i64, i64), b: (i64, i64)) {
        let col0 = self.col0 as i64;
        bresenham(a, b, |x, y| canvas.plot(col0 + x, y));
    }
}

struct ZoomEdges {
    panel: Panel,
    window: ZoomWindow,
    last: Option<((i64, i64), (i64, i64))>,
    drawn: bool,
}

impl ZoomEdges {
    #[inline]
    fn edge(&mut self, canvas: &mut Canvas, a: UnitPoint, b: UnitPoint) {
        let w = &self.window;
        let clipped = if w.contains(a) && w.contains(b) { Some((a, b)) } else { clip_segment(a, b, w) };
        if let Some((a, b)) = clipped {
            let seg = (self.panel.pixel(w.to_panel(a)), self.panel.pixel(w.to_panel(b)));
            if self.last != Some(seg) {
                self.panel.line(canvas, seg.0, seg.1);
                self.last = Some(seg);
            }
            self.drawn = true;
        }
    }
}

/// Liang–Barsky clip of segment `a`→`b` against the window.
fn clip_segment(a: UnitPoint, b: UnitPoint, w: &ZoomWindow) -> Option<(UnitPoint, UnitPoint)> {
    let (du, dv) = (b.u - a.u, b.v - a.v);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let edges = [(-du, a.u - w.u0), (du, w.u0 + w.side - a.u), (-dv, a.v - w.v0), (dv, w.v0 + w.side - a.v)];
    for (p, q) in edges {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
            if t0 > t1 {
                return None;
            }
        }
    }
    let at = |t: f64| UnitPoint { u: a.u + t * du, v: a.v + t * dv };
    Some((if t0 == 0.0 { a } else { at(t0) }, if t1 == 1.0 { b } else { at(t1) }))
}

/// Integer Bresenham line, endpoints inclusive.
///
/// Endpoints are put in a canonical order first, so a segment lights the same
/// pixels whichever way it is traversed.
pub fn bresenham(a: (i64, i64), b: (i64, i64), mut plot: impl FnMut(i64, i64)) {
    let ((mut x, mut y), (x1, y1)) = if a <= b { (a, b) } else { (b, a) };
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        plot(x, y);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}
