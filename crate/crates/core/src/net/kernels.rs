//! Forward and backward passes.
//!
//! Each conv stage reads a zero-padded input plane of stride `p = s + 2` and
//! writes pre-activations with the same stride, so a 3×3 tap becomes one
//! contiguous axpy over the whole plane. The two trailing columns of each
//! output row are scratch and never read.

use std::borrow::Borrow;

use super::{Architecture, ModelParams, Normalization, Tensor, LEAKY_SLOPE};
use crate::error::{Error, Result};
use crate::parallel;
use crate::raster::{LoopImage, BACKGROUND, CURVE};

/// Batches are cut into at most this many contiguous chunks, each summed in
/// sample order and then combined in chunk order. The split depends only on
/// the batch size, never on the thread count.
const GRAD_CHUNKS: usize = 8;

/// Network input pixels.
#[derive(Debug, Clone, PartialEq)]
pub enum Pixels {
    /// Values in `[0, 1]`, shape `[S, S]`.
    Dense(Tensor),
    /// Row-major indices of pixels equal to 1; everything else is 0.
    Lit(Vec<u32>),
}

/// One sample as the network sees it: pixels plus normalized scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput {
    pub pixels: Pixels,
    pub scalars: [f64; 4],
}

impl NetInput {
    /// Pixel values are divided by 255; scalars are normalized with `norm`.
    pub fn from_image(img: &LoopImage, norm: &Normalization) -> Self {
        let scalars = norm.normalize_scalars(img.scalars());
        let px = img.pixels();
        let pixels = if px.iter().all(|&v| v == CURVE || v == BACKGROUND) {
            Pixels::Lit(px.iter().enumerate().filter(|(_, &v)| v == CURVE).map(|(i, _)| i as u32).collect())
        } else {
            let s = img.side();
            Pixels::Dense(
                Tensor::new(vec![s, s], px.iter().map(|&v| f64::from(v) / 255.0).collect()).expect("image is square"),
            )
        };
        Self { pixels, scalars }
    }

    fn check(&self, side: usize) -> Result<()> {
        match &self.pixels {
            Pixels::Dense(t) => {
                let shape = t.shape();
                let ok = (shape == [side, side]) || (shape == [1, side, side]);
                if !ok {
                    return Err(Error::invalid(format!("input of shape {shape:?} does not fit a side-{side} network")));
                }
            }
            Pixels::Lit(idx) => {
                if let Some(&bad) = idx.iter().find(|&&i| i as usize >= side * side) {
                    return Err(Error::invalid(format!("lit pixel {bad} lies outside a {side}x{side} input")));
                }
            }
        }
        Ok(())
    }
}

/// Per-sample scratch buffers, reusable across calls.
#[derive(Debug, Clone)]
pub struct Workspace {
    arch: Architecture,
    /// Padded input of each conv stage.
    inputs: [Vec<f64>; 3],
    /// Conv pre-activations, row stride `s + 2`.
    z: [Vec<f64>; 3],
    /// For every pooled output, the index into `z` it was taken from.
    argmax: [Vec<u32>; 3],
    x: Vec<f64>,
    h: Vec<f64>,
    a: Vec<f64>,
    dx: Vec<f64>,
    dh: Vec<f64>,
    d_inputs: [Vec<f64>; 3],
}

impl Workspace {
    pub fn new(arch: &Architecture) -> Self {
        let stage = |k: usize| {
            let s = arch.stage_side(k);
            let p = s + 2;
            let cout = arch.channels[k];
            (vec![0.0; arch.stage_inputs(k) * p * p], vec![0.0; cout * s * p], vec![0u32; cout * (s / 2) * (s / 2)])
        };
        let (i0, z0, m0) = stage(0);
        let (i1, z1, m1) = stage(1);
        let (i2, z2, m2) = stage(2);
        let d1 = vec![0.0; i1.len()];
        let d2 = vec![0.0; i2.len()];
        Self {
            arch: *arch,
            inputs: [i0, i1, i2],
            z: [z0, z1, z2],
            argmax: [m0, m1, m2],
            x: vec![0.0; arch.fc1_inputs()],
            h: vec![0.0; arch.hidden],
            a: vec![0.0; arch.hidden],
            dx: vec![0.0; arch.fc1_inputs()],
            dh: vec![0.0; arch.hidden],
            d_inputs: [Vec::new(), d1, d2],
        }
    }

    fn load(&mut self, input: &NetInput) {
        let s = self.arch.side;
        let p = s + 2;
        let buf = &mut self.inputs[0];
        buf.fill(0.0);
        match &input.pixels {
            Pixels::Dense(t) => {
                for (r, row) in t.data().chunks_exact(s).enumerate() {
                    buf[(r + 1) * p + 1..(r + 1) * p + 1 + s].copy_from_slice(row);
                }
            }
            Pixels::Lit(idx) => {
                for &i in idx {
                    let (r, c) = (i as usize / s, i as usize % s);
                    buf[(r + 1) * p + c + 1] = 1.0;
                }
            }
        }
    }

    /// Activations feeding the first dense layer (flattened features, then
    /// scalars) from the most recent forward pass.
    pub fn features(&self) -> &[f64] {
        &self.x
    }
}

/// Defines `$name` to run `$body` compiled for AVX2 when the CPU has it.
///
/// Every kernel fixes its per-element operation order and Rust never fuses
/// multiply-add on its own, so both builds return identical bits.
macro_rules! dispatch {
    ($name:ident => $body:ident ($($arg:ident : $ty:ty),*) $(-> $ret:ty)?) => {
        fn $name($($arg: $ty),*) $(-> $ret)? {
            #[cfg(target_arch = "x86_64")]
            {
                #[target_feature(enable = "avx2")]
                unsafe fn wide($($arg: $ty),*) $(-> $ret)? {
                    $body($($arg),*)
                }
                if std::arch::is_x86_feature_detected!("avx2") {
                    // SAFETY: the required CPU feature was just detected.
                    return unsafe { wide($($arg),*) };
                }
            }
            $body($($arg),*)
        }
    };
}

dispatch!(conv_stage => conv_stage_body(p: &ModelParams, ws: &mut Workspace, k: usize) -> Result<()>);
dispatch!(dense_forward => dense_forward_body(p: &ModelParams, group: &mut [Workspace], ys: &mut [f64]) -> Result<()>);
dispatch!(dense_backward => dense_backward_body(p: &ModelParams, group: &mut [Workspace], gys: &[f64], grad: &mut [f64]));
dispatch!(conv_backward => conv_backward_body(p: &ModelParams, ws: &mut Workspace, grad: &mut [f64]));

#[inline(always)]
fn leaky(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

#[inline(always)]
fn leaky_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

#[inline(always)]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `out[k] += Σ_t w[t]·src[k + off(t)]` over the nine taps of a 3×3 kernel,
/// the taps summed left to right before the add.
#[inline(always)]
fn conv3x3_accumulate(w: &[f64; 9], src: &[f64], pitch: usize, out: &mut [f64]) {
    let n = out.len();
    let r0 = &src[..n + 2];
    let r1 = &src[pitch..pitch + n + 2];
    let r2 = &src[2 * pitch..2 * pitch + n + 2];
    for k in 0..n {
        let v = w[0] * r0[k]
            + w[1] * r0[k + 1]
            + w[2] * r0[k + 2]
            + w[3] * r1[k]
            + w[4] * r1[k + 1]
            + w[5] * r1[k + 2]
            + w[6] * r2[k]
            + w[7] * r2[k + 1]
            + w[8] * r2[k + 2];
        out[k] += v;
    }
}

/// Dot product with a fixed eight-lane accumulation order.
#[inline(always)]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    let (x, y) = (&x[..n], &y[..n]);
    let mut acc = [0.0f64; 8];
    let mut xc = x.chunks_exact(8);
    let mut yc = y.chunks_exact(8);
    for (a, b) in (&mut xc).zip(&mut yc) {
        for l in 0..8 {
            acc[l] += a[l] * b[l];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (a, b) in xc.remainder().iter().zip(yc.remainder()) {
        s += a * b;
    }
    s
}

/// Forward pass of one sample. Returns the normalized prediction.
pub fn forward(p: &ModelParams, input: &NetInput, ws: &mut Workspace) -> Result<f64> {
    features(p, input, ws)?;
    let mut y = [0.0];
    dense_forward(p, std::slice::from_mut(ws), &mut y)?;
    Ok(y[0])
}

/// Conv stages: fills `ws.x` with the flattened features and the scalars.
fn features(p: &ModelParams, input: &NetInput, ws: &mut Workspace) -> Result<()> {
    let arch = *p.arch();
    if ws.arch != arch {
        return Err(Error::invalid(format!("workspace built for {}, model is {arch}", ws.arch)));
    }
    input.check(arch.side)?;
    ws.load(input);
    for k in 0..3 {
        conv_stage(p, ws, k)?;
    }
    let f = arch.flatten_len();
    ws.x[f..].copy_from_slice(&input.scalars);
    if ws.x[f..].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "in the scalar inputs".into() });
    }
    Ok(())
}

/// Dense layers for a group of samples whose features are ready.
///
/// Looping over weight rows outermost keeps each row in cache across the
/// group; every output still accumulates its terms in input order, so the
/// result matches a one-sample call exactly.
#[inline(always)]
fn dense_forward_body(p: &ModelParams, group: &mut [Workspace], ys: &mut [f64]) -> Result<()> {
    for ws in group.iter_mut() {
        ws.h.copy_from_slice(p.fc1_bias());
    }
    let hidden = p.arch().hidden;
    for (i, row) in p.fc1_weights().chunks_exact(hidden).enumerate() {
        for ws in group.iter_mut() {
            axpy(ws.x[i], row, &mut ws.h);
        }
    }
    for (ws, y) in group.iter_mut().zip(ys) {
        for (a, h) in ws.a.iter_mut().zip(&ws.h) {
            *a = leaky(*h);
        }
        if ws.a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "at layer 4 (dense 512)".into() });
        }
        *y = p.fc2_bias() + dot(p.fc2_weights(), &ws.a);
        if !y.is_finite() {
            return Err(Error::NonFinite { context: "at layer 5 (output)".into() });
        }
    }
    Ok(())
}

#[inline(always)]
fn conv_stage_body(p: &ModelParams, ws: &mut Workspace, k: usize) -> Result<()> {
    let arch = ws.arch;
    let s = arch.stage_side(k);
    let pitch = s + 2;
    let plane_in = pitch * pitch;
    let plane_out = s * pitch;
    let len = plane_out - 2;
    let cin = arch.stage_inputs(k);
    let cout = arch.channels[k];
    let w = p.conv_weights(k);
    let b = p.conv_bias(k);

    let (before, after) = ws.inputs.split_at_mut(k + 1);
    let input = &before[k];
    let z = &mut ws.z[k];
    for o in 0..cout {
        let zo = &mut z[o * plane_out..(o + 1) * plane_out];
        zo.fill(b[o]);
        for i in 0..cin {
            let src = &input[i * plane_in..(i + 1) * plane_in];
            let taps: &[f64; 9] = w[(o * cin + i) * 9..(o * cin + i + 1) * 9].try_into().unwrap();
            conv3x3_accumulate(taps, src, pitch, &mut zo[..len]);
        }
    }

    let half = s / 2;
    let argmax = &mut ws.argmax[k];
    let mut finite = true;
    for o in 0..cout {
        let zo = &z[o * plane_out..(o + 1) * plane_out];
        for py in 0..half {
            for px in 0..half {
                let base = 2 * py * pitch + 2 * px;
                let mut best = base;
                for c in [base + 1, base + pitch, base + pitch + 1] {
                    if zo[c] > zo[best] {
                        best = c;
                    }
                }
                let v = leaky(zo[best]);
                finite &= v.is_finite();
                let e = (o * half + py) * half + px;
                argmax[e] = (o * plane_out + best) as u32;
                if k < 2 {
                    let q = half + 2;
                    after[0][o * q * q + (py + 1) * q + px + 1] = v;
                } else {
                    ws.x[e] = v;
                }
            }
        }
    }
    if !finite {
        return Err(Error::NonFinite { context: format!("at layer {} (conv stage)", k + 1) });
    }
    Ok(())
}

/// Dense-layer gradients for a group, given `gys[s] = d(loss)/d(output)`.
/// Leaves `d(loss)/d(features)` in each `ws.dx`.
#[inline(always)]
fn dense_backward_body(p: &ModelParams, group: &mut [Workspace], gys: &[f64], grad: &mut [f64]) {
    let l = p.layout();
    let hidden = p.arch().hidden;
    let w2 = p.fc2_weights();
    for (ws, &gy) in group.iter_mut().zip(gys) {
        grad[l.fc2_b.start] += gy;
        let gw2 = &mut grad[l.fc2_w.clone()];
        for j in 0..hidden {
            gw2[j] += gy * ws.a[j];
            ws.dh[j] = gy * w2[j] * leaky_grad(ws.h[j]);
        }
        for (g, d) in grad[l.fc1_b.clone()].iter_mut().zip(&ws.dh) {
            *g += d;
        }
    }
    let gw1 = &mut grad[l.fc1_w.clone()];
    for (i, (grow, wrow)) in gw1.chunks_exact_mut(hidden).zip(p.fc1_weights().chunks_exact(hidden)).enumerate() {
        for ws in group.iter_mut() {
            axpy(ws.x[i], &ws.dh, grow);
            ws.dx[i] = dot(wrow, &ws.dh);
        }
    }
}

/// Conv-stage gradients of one sample, after [`dense_backward`].
#[inline(always)]
fn conv_backward_body(p: &ModelParams, ws: &mut Workspace, grad: &mut [f64]) {
    let arch = ws.arch;
    let l = p.layout();
    for k in (0..3).rev() {
        let s = arch.stage_side(k);
        let pitch = s + 2;
        let plane_in = pitch * pitch;
        let plane_out = s * pitch;
        let half = s / 2;
        let cin = arch.stage_inputs(k);
        let cout = arch.channels[k];
        let w = p.conv_weights(k);

        let (lower, upper) = ws.d_inputs.split_at_mut(k + 1);
        let d_in = &mut lower[k];
        d_in.fill(0.0);
        let input = &ws.inputs[k];
        let z = &ws.z[k];
        let argmax = &ws.argmax[k];
        let gb_start = l.conv_b[k].start;
        let gw_start = l.conv_w[k].start;
        let q = half + 2;

        let mut routed: Vec<(usize, f64)> = Vec::with_capacity(half * half);
        for o in 0..cout {
            // Gradient reaches z only at each pool's argmax.
            routed.clear();
            let mut gb = 0.0;
            for py in 0..half {
                for px in 0..half {
                    let e = (o * half + py) * half + px;
                    let upstream = if k == 2 { ws.dx[e] } else { upper[0][o * q * q + (py + 1) * q + px + 1] };
                    let idx = argmax[e] as usize;
                    let dz = upstream * leaky_grad(z[idx]);
                    if dz != 0.0 {
                        gb += dz;
                        routed.push((idx - o * plane_out, dz));
                    }
                }
            }
            grad[gb_start + o] += gb;

            for i in 0..cin {
                let src = &input[i * plane_in..(i + 1) * plane_in];
                let wo = (o * cin + i) * 9;
                let mut acc = [0.0f64; 9];
                for &(at, dz) in &routed {
                    let (r0, r1, r2) = window(src, at, pitch);
                    for c in 0..3 {
                        acc[c] += dz * r0[c];
                        acc[3 + c] += dz * r1[c];
                        acc[6 + c] += dz * r2[c];
                    }
                }
                for (g, a) in grad[gw_start + wo..gw_start + wo + 9].iter_mut().zip(acc) {
                    *g += a;
                }
                if k > 0 {
                    let wt = &w[wo..wo + 9];
                    let dst = &mut d_in[i * plane_in..(i + 1) * plane_in];
                    for &(at, dz) in &routed {
                        let (r0, rest) = dst[at..at + 2 * pitch + 3].split_at_mut(pitch);
                        let (r1, r2) = rest.split_at_mut(pitch);
                        for c in 0..3 {
                            r0[c] += wt[c] * dz;
                            r1[c] += wt[3 + c] * dz;
                            r2[c] += wt[6 + c] * dz;
                        }
                    }
                }
            }
        }
    }
}

/// The three 3-wide rows of the 3×3 window whose top-left corner is `at`.
#[inline(always)]
fn window(src: &[f64], at: usize, pitch: usize) -> (&[f64], &[f64], &[f64]) {
    (&src[at..at + 3], &src[at + pitch..at + pitch + 3], &src[at + 2 * pitch..at + 2 * pitch + 3])
}

/// Mean squared error, `(1/N) Σ (t − y)²`.
pub fn mse_loss(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::invalid("loss of an empty batch"));
    }
    if preds.len() != targets.len() {
        return Err(Error::invalid(format!("{} predictions for {} targets", preds.len(), targets.len())));
    }
    let sum: f64 = preds.iter().zip(targets).map(|(y, t)| (t - y) * (t - y)).sum();
    Ok(sum / preds.len() as f64)
}

fn chunk_bounds(n: usize) -> Vec<(usize, usize)> {
    let chunks = n.min(GRAD_CHUNKS);
    (0..chunks).map(|c| (c * n / chunks, (c + 1) * n / chunks)).collect()
}

/// Samples pushed through the dense layers together.
const GROUP: usize = 16;

/// Forward (and optionally backward) over `inputs[lo..hi]`, group by group.
fn run_chunk<I: Borrow<NetInput>>(
    p: &ModelParams,
    inputs: &[I],
    targets: Option<(&[f64], f64)>,
    grad: &mut [f64],
) -> Result<Vec<f64>> {
    let mut group: Vec<Workspace> = Vec::new();
    let mut preds = Vec::with_capacity(inputs.len());
    for (g, batch) in inputs.chunks(GROUP).enumerate() {
        while group.len() < batch.len() {
            group.push(Workspace::new(p.arch()));
        }
        let ws = &mut group[..batch.len()];
        for (w, x) in ws.iter_mut().zip(batch) {
            features(p, x.borrow(), w)?;
        }
        let mut ys = vec![0.0; batch.len()];
        dense_forward(p, ws, &mut ys)?;
        if let Some((ts, n)) = targets {
            let ts = &ts[g * GROUP..g * GROUP + batch.len()];
            let gys: Vec<f64> = ys.iter().zip(ts).map(|(y, t)| 2.0 * (y - t) / n).collect();
            dense_backward(p, ws, &gys, grad);
            for w in ws.iter_mut() {
                conv_backward(p, w, grad);
            }
        }
        preds.extend(ys);
    }
    Ok(preds)
}

/// Predictions for a batch; identical to calling [`forward`] per sample.
pub fn forward_batch<I: Borrow<NetInput> + Sync>(p: &ModelParams, inputs: &[I]) -> Result<Vec<f64>> {
    let bounds = chunk_bounds(inputs.len());
    let parts = parallel::map(&bounds, |&(lo, hi)| run_chunk(p, &inputs[lo..hi], None, &mut []));
    let mut out = Vec::with_capacity(inputs.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Loss and gradient of the batch mean squared error.
///
/// Returns `(loss, predictions, gradient)`; the gradient uses the layout of
/// `p`.
pub fn backward<I: Borrow<NetInput> + Sync>(
    p: &ModelParams,
    inputs: &[I],
    targets: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if inputs.is_empty() {
        return Err(Error::invalid("gradient of an empty batch"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::invalid(format!("{} inputs for {} targets", inputs.len(), targets.len())));
    }
    let n = inputs.len() as f64;
    let total = p.layout().total;
    let run = |&(lo, hi): &(usize, usize)| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut grad = vec![0.0; total];
        let preds = run_chunk(p, &inputs[lo..hi], Some((&targets[lo..hi], n)), &mut grad)?;
        Ok((grad, preds))
    };

    let bounds = chunk_bounds(inputs.len());
    let mut grad: Option<Vec<f64>> = None;
    let mut preds = Vec::with_capacity(inputs.len());
    let mut absorb = |part: (Vec<f64>, Vec<f64>)| {
        preds.extend(part.1);
        match grad.as_mut() {
            None => grad = Some(part.0),
            Some(g) => g.iter_mut().zip(&part.0).for_each(|(a, b)| *a += b),
        }
    };
    if parallel::threads() <= 1 {
        for b in &bounds {
            absorb(run(b)?);
        }
    } else {
        for part in parallel::map(&bounds, run) {
            absorb(part?);
        }
    }
    let loss = mse_loss(&preds, targets)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite { context: "in the batch loss".into() });
    }
    Ok((loss, preds, grad.expect("batch is non-empty")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_input(side: usize, seed: u64) -> NetInput {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = (0..side * side).map(|_| rng.gen::<f64>()).collect();
        NetInput {
            pixels: Pixels::Dense(Tensor::new(vec![side, side], data).unwrap()),
            scalars: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
        }
    }

    #[test]
    fn zero_network_outputs_bias() {
        let arch = Architecture::new(16).unwrap();
        let mut p = ModelParams::zeros(arch).unwrap();
        let c = 0.375;
        let at = p.layout().fc2_b.start;
        p.values_mut()[at] = c;
        let x = NetInput { pixels: Pixels::Lit(vec![]), scalars: [0.0; 4] };
        let mut ws = Workspace::new(&arch);
        assert_eq!(forward(&p, &x, &mut ws).unwrap(), c);
    }

    #[test]
    fn dot_matches_naive() {
        let x: Vec<f64> = (0..37).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..37).map(|i| (i as f64 * 0.11).cos()).collect();
        let naive: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!((dot(&x, &y) - naive).abs() < 1e-13);
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, 1.0], &[0.0, 2.0]).unwrap(), 1.0);
        assert_eq!(mse_loss(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 0.0);
        assert!(mse_loss(&[], &[]).is_err());
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let arch = Architecture::new(16).unwrap();
        let p = ModelParams::init(arch, 1).unwrap();
        let xs = [dense_input(16, 1), dense_input(16, 2)];
        let ys = forward_batch(&p, &xs).unwrap();
        let (loss, _, g) = backward(&p, &xs, &ys).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lit_and_dense_inputs_agree() {
        let arch = Architecture::new(16).unwrap();
        let p = ModelParams::init(arch, 9).unwrap();
        let lit: Vec<u32> = vec![0, 17, 40, 41, 200, 255];
        let mut dense = vec![0.0; 256];
        for &i in &lit {
            dense[i as usize] = 1.0;
        }
        let s = [0.1, -0.2, 0.3, 0.4];
        let a = NetInput { pixels: Pixels::Lit(lit), scalars: s };
        let b = NetInput { pixels: Pixels::Dense(Tensor::new(vec![16, 16], dense).unwrap()), scalars: s };
        let mut ws = Workspace::new(&arch);
        assert_eq!(forward(&p, &a, &mut ws).unwrap(), forward(&p, &b, &mut ws).unwrap());
    }

    #[test]
    fn forward_independent_of_batch_composition() {
        let arch = Architecture::new(16).unwrap();
        let p = ModelParams::init(arch, 2).unwrap();
        let xs: Vec<_> = (0..11).map(|i| dense_input(16, i)).collect();
        let all = forward_batch(&p, &xs).unwrap();
        let mut ws = Workspace::new(&arch);
        for (x, y) in xs.iter().zip(&all) {
            assert_eq!(forward(&p, x, &mut ws).unwrap(), *y);
        }
        assert_eq!(forward_batch(&p, &xs[3..5]).unwrap(), all[3..5]);
    }

    #[test]
    fn scalar_channels_reach_output() {
        let arch = Architecture::new(16).unwrap();
        let p = ModelParams::init(arch, 5).unwrap();
        let x = dense_input(16, 3);
        let mut ws = Workspace::new(&arch);
        let y0 = forward(&p, &x, &mut ws).unwrap();
        for k in 0..4 {
            let mut x2 = x.clone();
            x2.scalars[k] += 0.5;
            assert_ne!(forward(&p, &x2, &mut ws).unwrap(), y0, "scalar {k}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let arch = Architecture::new(16).unwrap();
        let p = ModelParams::init(arch, 0).unwrap();
        let mut ws = Workspace::new(&arch);
        let x = NetInput { pixels: Pixels::Lit(vec![256]), scalars: [0.0; 4] };
        assert!(forward(&p, &x, &mut ws).is_err());
        let x = NetInput { pixels: Pixels::Lit(vec![]), scalars: [f64::NAN, 0.0, 0.0, 0.0] };
        assert!(matches!(forward(&p, &x, &mut ws), Err(Error::NonFinite { .. })));
        let x = dense_input(8, 0);
        assert!(forward(&p, &x, &mut ws).is_err());
    }
}
