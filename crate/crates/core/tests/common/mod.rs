//! Test-side reference network and central finite-difference gradients.
//!
//! The reference is written with plain nested loops over unpadded planes and
//! shares no code with the library kernels. A perturbed loss is evaluated by
//! recomputing only the activations the perturbed parameter can reach, and
//! the output change is carried as a difference so the quotient does not
//! cancel against the full output.
//!
//! Along one parameter the network is piecewise linear, so while a stencil
//! stays on one piece each activation change is its slope times the incoming
//! change. Leaving a piece is detected by evaluating the perturbed
//! pre-activations literally.

#![allow(dead_code)]

use bhdeskew_core::net::{backward, Architecture, ModelParams, NetInput, Pixels, LEAKY_SLOPE};

fn leaky(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

fn slope(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// How perturbed activations are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// The true network function.
    Literal,
    /// Pool winners and activation slopes held at their unperturbed values.
    Frozen,
}

/// Intermediate values of one forward pass.
pub struct Trace {
    /// Unpadded input planes of each conv stage, `[c][s][s]`.
    inputs: [Vec<f64>; 3],
    /// Conv pre-activations, `[c][s][s]`.
    z: [Vec<f64>; 3],
    /// Winning position inside its channel plane for every pooled output.
    arg: [Vec<usize>; 3],
    x: Vec<f64>,
    hz: Vec<f64>,
    pub y: f64,
}

pub struct Reference<'a> {
    p: &'a ModelParams,
    arch: Architecture,
}

impl<'a> Reference<'a> {
    pub fn new(p: &'a ModelParams) -> Self {
        Self { p, arch: *p.arch() }
    }

    fn w(&self, k: usize, o: usize, i: usize, t: usize) -> f64 {
        self.p.conv_weights(k)[(o * self.arch.stage_inputs(k) + i) * 9 + t]
    }

    fn w1(&self, i: usize, j: usize) -> f64 {
        self.p.fc1_weights()[i * self.arch.hidden + j]
    }

    pub fn forward(&self, input: &NetInput) -> Trace {
        let a = self.arch;
        let s0 = a.side;
        let mut img = vec![0.0; s0 * s0];
        match &input.pixels {
            Pixels::Dense(t) => img.copy_from_slice(&t.data()[..s0 * s0]),
            Pixels::Lit(idx) => idx.iter().for_each(|&i| img[i as usize] = 1.0),
        }
        let mut inputs: [Vec<f64>; 3] = Default::default();
        let mut z: [Vec<f64>; 3] = Default::default();
        let mut arg: [Vec<usize>; 3] = Default::default();
        let mut cur = img;
        for k in 0..3 {
            let s = a.stage_side(k);
            let (cin, cout) = (a.stage_inputs(k), a.channels[k]);
            let mut zk = vec![0.0; cout * s * s];
            for o in 0..cout {
                for y in 0..s {
                    for x in 0..s {
                        let mut acc = self.p.conv_bias(k)[o];
                        for i in 0..cin {
                            for t in 0..9 {
                                let (yy, xx) = (y as i64 + t as i64 / 3 - 1, x as i64 + t as i64 % 3 - 1);
                                if (0..s as i64).contains(&yy) && (0..s as i64).contains(&xx) {
                                    acc += self.w(k, o, i, t) * cur[(i * s + yy as usize) * s + xx as usize];
                                }
                            }
                        }
                        zk[(o * s + y) * s + x] = acc;
                    }
                }
            }
            let mut ak = Vec::with_capacity(cout * s * s / 4);
            let mut next = Vec::with_capacity(cout * s * s / 4);
            for o in 0..cout {
                let (win, v) = pool_plane(&zk[o * s * s..(o + 1) * s * s], s);
                ak.extend(win);
                next.extend(v.into_iter().map(leaky));
            }
            inputs[k] = cur;
            z[k] = zk;
            arg[k] = ak;
            cur = next;
        }
        let mut x = cur;
        x.extend_from_slice(&input.scalars);
        let hidden = a.hidden;
        let mut hz = self.p.fc1_bias().to_vec();
        for (i, &xi) in x.iter().enumerate() {
            for (j, h) in hz.iter_mut().enumerate() {
                *h += xi * self.w1(i, j);
            }
        }
        let y = self.p.fc2_bias() + (0..hidden).map(|j| self.p.fc2_weights()[j] * leaky(hz[j])).sum::<f64>();
        Trace { inputs, z, arg, x, hz, y }
    }

    /// `y(θ + Δ·e_q) − y(θ)` for parameter index `q`. Sets `crossed` when
    /// the literal evaluation changed a pool winner or an activation side.
    pub fn output_change(&self, t: &Trace, q: usize, delta: f64, mode: Mode, crossed: &mut bool) -> f64 {
        let l = self.p.layout();
        if l.fc2_b.contains(&q) {
            return delta;
        }
        if l.fc2_w.contains(&q) {
            return delta * leaky(t.hz[q - l.fc2_w.start]);
        }
        if l.fc1_b.contains(&q) {
            return self.unit_change(t, q - l.fc1_b.start, delta, mode, crossed);
        }
        if l.fc1_w.contains(&q) {
            let e = q - l.fc1_w.start;
            let (i, j) = (e / self.arch.hidden, e % self.arch.hidden);
            return self.unit_change(t, j, delta * t.x[i], mode, crossed);
        }
        for k in 0..3 {
            let s = self.arch.stage_side(k);
            let mut dz = vec![0.0; s * s];
            let o;
            if l.conv_b[k].contains(&q) {
                o = q - l.conv_b[k].start;
                dz.fill(delta);
            } else if l.conv_w[k].contains(&q) {
                let e = q - l.conv_w[k].start;
                let cin = self.arch.stage_inputs(k);
                o = e / (cin * 9);
                let (i, tap) = ((e / 9) % cin, e % 9);
                shift_add(&mut dz, &t.inputs[k][i * s * s..(i + 1) * s * s], s, tap, delta);
            } else {
                continue;
            }
            let dp = self.pooled_change(t, k, o, &dz, mode, crossed);
            return self.propagate(t, k, vec![(o, dp)], mode, crossed);
        }
        panic!("parameter index {q} out of range");
    }

    // On one linear piece `leaky(z + d) − leaky(z)` is exactly `slope(z)·d`.
    // Carrying that product keeps the roundoff relative to `d` rather than to
    // `z`. Off the piece the literal value is discarded by the caller anyway.
    fn unit_change(&self, t: &Trace, j: usize, dh: f64, mode: Mode, crossed: &mut bool) -> f64 {
        let h0 = t.hz[j];
        if mode == Mode::Literal {
            *crossed |= (h0 + dh > 0.0) != (h0 > 0.0);
        }
        self.p.fc2_weights()[j] * slope(h0) * dh
    }

    /// Change of the pooled activations of channel `o` at stage `k` when its
    /// pre-activations change by `dz`.
    fn pooled_change(&self, t: &Trace, k: usize, o: usize, dz: &[f64], mode: Mode, crossed: &mut bool) -> Vec<f64> {
        let s = self.arch.stage_side(k);
        let z0 = &t.z[k][o * s * s..(o + 1) * s * s];
        let arg0 = &t.arg[k][o * (s / 2) * (s / 2)..(o + 1) * (s / 2) * (s / 2)];
        if mode == Mode::Literal {
            let z1: Vec<f64> = z0.iter().zip(dz).map(|(a, b)| a + b).collect();
            let (arg1, v1) = pool_plane(&z1, s);
            for ((&a0, a1), v) in arg0.iter().zip(arg1).zip(v1) {
                *crossed |= a0 != a1 || (v > 0.0) != (z0[a0] > 0.0);
            }
        }
        arg0.iter().map(|&a| slope(z0[a]) * dz[a]).collect()
    }

    /// Output change given changes `dp` of the pooled outputs of stage `k`,
    /// listed per changed channel.
    fn propagate(&self, t: &Trace, k: usize, dp: Vec<(usize, Vec<f64>)>, mode: Mode, crossed: &mut bool) -> f64 {
        let half = self.arch.stage_side(k) / 2;
        if k == 2 {
            let mut dx = Vec::new();
            for (c, d) in &dp {
                for (e, &v) in d.iter().enumerate() {
                    if v != 0.0 {
                        dx.push((c * half * half + e, v));
                    }
                }
            }
            return self.dense_change(t, &dx, mode, crossed);
        }
        let next = k + 1;
        let s = half;
        let mut out = Vec::new();
        for o in 0..self.arch.channels[next] {
            let mut dz = vec![0.0; s * s];
            for (c, d) in &dp {
                for tap in 0..9 {
                    shift_add(&mut dz, d, s, tap, self.w(next, o, *c, tap));
                }
            }
            if dz.iter().any(|&v| v != 0.0) {
                out.push((o, self.pooled_change(t, next, o, &dz, mode, crossed)));
            }
        }
        self.propagate(t, next, out, mode, crossed)
    }

    fn dense_change(&self, t: &Trace, dx: &[(usize, f64)], mode: Mode, crossed: &mut bool) -> f64 {
        let hidden = self.arch.hidden;
        let mut dh = vec![0.0; hidden];
        for &(i, v) in dx {
            let row = &self.p.fc1_weights()[i * hidden..(i + 1) * hidden];
            for (d, w) in dh.iter_mut().zip(row) {
                *d += v * w;
            }
        }
        (0..hidden).map(|j| self.unit_change(t, j, dh[j], mode, crossed)).sum()
    }
}

/// `dst[y][x] += a · src[y + ky − 1][x + kx − 1]` with zeros outside.
fn shift_add(dst: &mut [f64], src: &[f64], s: usize, tap: usize, a: f64) {
    let (dy, dx) = (tap as i64 / 3 - 1, tap as i64 % 3 - 1);
    for y in 0..s as i64 {
        let yy = y + dy;
        if !(0..s as i64).contains(&yy) {
            continue;
        }
        for x in 0..s as i64 {
            let xx = x + dx;
            if (0..s as i64).contains(&xx) {
                dst[(y * s as i64 + x) as usize] += a * src[(yy * s as i64 + xx) as usize];
            }
        }
    }
}

/// 2×2 max pool of one plane; ties go to the first position in row-major
/// order. Returns the winners' positions and values.
fn pool_plane(z: &[f64], s: usize) -> (Vec<usize>, Vec<f64>) {
    let h = s / 2;
    let mut win = Vec::with_capacity(h * h);
    let mut val = Vec::with_capacity(h * h);
    for py in 0..h {
        for px in 0..h {
            let cands = [(2 * py, 2 * px), (2 * py, 2 * px + 1), (2 * py + 1, 2 * px), (2 * py + 1, 2 * px + 1)];
            let mut best = cands[0].0 * s + cands[0].1;
            for (y, x) in &cands[1..] {
                let i = y * s + x;
                if z[i] > z[best] {
                    best = i;
                }
            }
            win.push(best);
            val.push(z[best]);
        }
    }
    (win, val)
}

/// Outcome of checking every parameter of one network.
#[derive(Debug, Default, Clone)]
pub struct GradCheck {
    pub params: usize,
    /// Parameters held to the relative tolerance.
    pub relative_checked: usize,
    /// Parameters whose stencil straddled a kink and were differenced with
    /// the pattern frozen.
    pub kink_fallbacks: usize,
    pub worst_relative: f64,
    pub worst_absolute: f64,
    pub failed: usize,
    /// The first few failures, for the report.
    pub failures: Vec<String>,
    /// Largest gap between the reference and library outputs.
    pub output_gap: f64,
}

pub const FD_STEP: f64 = 1e-4;
pub const REL_TOL: f64 = 1e-5;
pub const ABS_TOL: f64 = 1e-8;
pub const SMALL_GRAD: f64 = 1e-8;

/// Compare the library gradient of the batch MSE against central
/// differences of the reference, for every parameter. `residuals[n]` is
/// `y_n − t_n` at the evaluation point.
pub fn check_gradient(p: &ModelParams, inputs: &[NetInput], residuals: &[f64]) -> GradCheck {
    check_gradient_with(p, inputs, residuals, FD_STEP)
}

/// [`check_gradient`] with a chosen difference step.
pub fn check_gradient_with(p: &ModelParams, inputs: &[NetInput], residuals: &[f64], step: f64) -> GradCheck {
    let lib_y = bhdeskew_core::net::forward_batch(p, inputs).unwrap();
    let targets: Vec<f64> = lib_y.iter().zip(residuals).map(|(y, r)| y - r).collect();
    let (_, _, grad) = backward(p, inputs, &targets).unwrap();
    let r = Reference::new(p);
    let traces: Vec<Trace> = inputs.iter().map(|x| r.forward(x)).collect();
    let mut out = GradCheck { params: grad.len(), ..Default::default() };
    for (t, y) in traces.iter().zip(&lib_y) {
        out.output_gap = out.output_gap.max((t.y - y).abs());
    }
    let n = inputs.len() as f64;
    let fd = |mode: Mode, q: usize, crossed: &mut bool| -> f64 {
        let mut acc = 0.0;
        for (t, &res) in traces.iter().zip(residuals) {
            let up = r.output_change(t, q, step, mode, crossed);
            let down = r.output_change(t, q, -step, mode, crossed);
            // (res + up)² − (res + down)², factored.
            acc += (up - down) * (2.0 * res + up + down);
        }
        acc / n / (2.0 * step)
    };
    for (q, &g) in grad.iter().enumerate() {
        let mut crossed = false;
        let mut f = fd(Mode::Literal, q, &mut crossed);
        if crossed {
            out.kink_fallbacks += 1;
            f = fd(Mode::Frozen, q, &mut false);
        }
        let err = (g - f).abs();
        let ok = if g.abs() > SMALL_GRAD {
            out.relative_checked += 1;
            out.worst_relative = out.worst_relative.max(err / g.abs());
            err / g.abs() < REL_TOL
        } else {
            out.worst_absolute = out.worst_absolute.max(err);
            err < ABS_TOL
        };
        if !ok {
            out.failed += 1;
            if out.failures.len() < 10 {
                out.failures.push(format!("param {q}: analytic {g:e}, difference {f:e}"));
            }
        }
    }
    out
}
