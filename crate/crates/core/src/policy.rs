//! Recurrent policy network.
//!
//! Architecture: input(2) -> dense(32, ReLU) -> GRU(10) -> dense(32, ReLU)
//! -> dense(32, ReLU) -> dense(2). The first output is squashed to the
//! consumption fraction with a sigmoid; the second is the risky proportion.
//!
//! The GRU follows the "reset after" convention: with gates ordered
//! `z, r, n`,
//!
//! ```text
//! z  = sigmoid(Wz x + bz + Uz h + cz)
//! r  = sigmoid(Wr x + br + Ur h + cr)
//! n  = tanh(Wn x + bn + r * (Un h + cn))
//! h' = z * h + (1 - z) * n
//! ```
//!
//! All weights live in one flat vector. Matrices are stored row-major with
//! one row per output unit.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::rng::{Domain, Stream};
use crate::{Error, Result};

pub const INPUT: usize = 2;
pub const DENSE1: usize = 32;
pub const GRU: usize = 10;
pub const DENSE2: usize = 32;
pub const DENSE3: usize = 32;
pub const OUTPUT: usize = 2;

const G3: usize = 3 * GRU;

/// Named parameter blocks in flat order: (name, rows, cols).
pub const BLOCKS: [(&str, usize, usize); 12] = [
    ("dense1.kernel", DENSE1, INPUT),
    ("dense1.bias", DENSE1, 1),
    ("gru.kernel", G3, DENSE1),
    ("gru.recurrent_kernel", G3, GRU),
    ("gru.input_bias", G3, 1),
    ("gru.recurrent_bias", G3, 1),
    ("dense2.kernel", DENSE2, GRU),
    ("dense2.bias", DENSE2, 1),
    ("dense3.kernel", DENSE3, DENSE2),
    ("dense3.bias", DENSE3, 1),
    ("output.kernel", OUTPUT, DENSE3),
    ("output.bias", OUTPUT, 1),
];

const fn block_offset(k: usize) -> usize {
    let mut off = 0;
    let mut i = 0;
    while i < k {
        off += BLOCKS[i].1 * BLOCKS[i].2;
        i += 1;
    }
    off
}

const W1: usize = block_offset(0);
const B1: usize = block_offset(1);
const WG: usize = block_offset(2);
const UG: usize = block_offset(3);
const BG: usize = block_offset(4);
const CG: usize = block_offset(5);
const W2: usize = block_offset(6);
const B2: usize = block_offset(7);
const W3: usize = block_offset(8);
const B3: usize = block_offset(9);
const WO: usize = block_offset(10);
const BO: usize = block_offset(11);

/// Total number of trainable parameters.
pub const N_PARAMS: usize = block_offset(12);

/// Short description stored with checkpoints.
pub const ARCHITECTURE: &str = "dense32-relu/gru10-reset-after/dense32-relu/dense32-relu/dense2; out0=sigmoid, out1=identity";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyOutput {
    /// Proportion of available wealth consumed, in `[0, 1]`.
    pub consume_frac: f64,
    /// Proportion of wealth held in the risky asset.
    pub risky_prop: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    theta: Vec<f64>,
}

#[inline]
fn matvec_add<const R: usize, const C: usize>(w: &[f64], x: &[f64; C], out: &mut [f64; R]) {
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * C..(i + 1) * C];
        let mut s = 0.0;
        for (a, b) in row.iter().zip(x) {
            s += a * b;
        }
        *o += s;
    }
}

/// `grad_w += d (outer) x`, `dx += W^T d`.
#[inline]
fn outer_backward<const R: usize, const C: usize>(
    w: &[f64],
    gw: &mut [f64],
    d: &[f64; R],
    x: &[f64; C],
    dx: &mut [f64; C],
) {
    for i in 0..R {
        let di = d[i];
        if di == 0.0 {
            continue;
        }
        let row = &w[i * C..(i + 1) * C];
        let grow = &mut gw[i * C..(i + 1) * C];
        for j in 0..C {
            grow[j] += di * x[j];
            dx[j] += di * row[j];
        }
    }
}

fn bias<const N: usize>(b: &[f64]) -> [f64; N] {
    let mut out = [0.0; N];
    out.copy_from_slice(&b[..N]);
    out
}

fn relu<const N: usize>(x: &mut [f64; N]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone)]
struct StepRecord {
    input: [f64; INPUT],
    a1: [f64; DENSE1],
    h_prev: [f64; GRU],
    z: [f64; GRU],
    r: [f64; GRU],
    n: [f64; GRU],
    hn: [f64; GRU],
    h: [f64; GRU],
    a2: [f64; DENSE2],
    a3: [f64; DENSE3],
    consume: f64,
}

/// Recorded forward pass of one sequence.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    steps: Vec<StepRecord>,
}

impl Tape {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Hidden state carried between calls to [`PolicyParams::step`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Recurrent {
    h: [f64; GRU],
}

impl PolicyParams {
    pub fn zeros() -> Self {
        Self {
            theta: vec![0.0; N_PARAMS],
        }
    }

    pub fn from_flat(theta: Vec<f64>) -> Result<Self> {
        if theta.len() != N_PARAMS {
            return Err(Error::Dimension {
                expected: N_PARAMS,
                actual: theta.len(),
            });
        }
        Ok(Self { theta })
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.theta
    }

    /// Parameter blocks in flat order, each paired with its name and shape.
    pub fn blocks(&self) -> Vec<(&'static str, usize, usize, &[f64])> {
        let mut off = 0;
        BLOCKS
            .iter()
            .map(|&(name, r, c)| {
                let s = &self.theta[off..off + r * c];
                off += r * c;
                (name, r, c, s)
            })
            .collect()
    }

    /// Rebuilds parameters from blocks in [`BLOCKS`] order.
    pub fn from_blocks(blocks: &[Vec<f64>]) -> Result<Self> {
        if blocks.len() != BLOCKS.len() {
            return Err(Error::Dimension {
                expected: BLOCKS.len(),
                actual: blocks.len(),
            });
        }
        let mut theta = Vec::with_capacity(N_PARAMS);
        for (b, &(_, r, c)) in blocks.iter().zip(BLOCKS.iter()) {
            if b.len() != r * c {
                return Err(Error::Dimension {
                    expected: r * c,
                    actual: b.len(),
                });
            }
            theta.extend_from_slice(b);
        }
        Ok(Self { theta })
    }

    /// Glorot-uniform dense and input kernels, orthogonal recurrent gate
    /// blocks, zero biases. Deterministic per seed.
    pub fn init(seed: u64) -> Self {
        let mut rng = Stream::new(seed, Domain::Init, 0);
        let mut theta = vec![0.0; N_PARAMS];
        let glorot = |theta: &mut [f64], off: usize, rows: usize, cols: usize, rng: &mut Stream| {
            let limit = glorot_limit(cols, rows);
            for v in &mut theta[off..off + rows * cols] {
                *v = limit * (2.0 * rng.uniform() - 1.0);
            }
        };
        glorot(&mut theta, W1, DENSE1, INPUT, &mut rng);
        glorot(&mut theta, WG, G3, DENSE1, &mut rng);
        for gate in 0..3 {
            let q = orthogonal::<GRU>(&mut rng);
            theta[UG + gate * GRU * GRU..UG + (gate + 1) * GRU * GRU].copy_from_slice(&q);
        }
        glorot(&mut theta, W2, DENSE2, GRU, &mut rng);
        glorot(&mut theta, W3, DENSE3, DENSE2, &mut rng);
        glorot(&mut theta, WO, OUTPUT, DENSE3, &mut rng);
        Self { theta }
    }

    /// Sets the output bias, e.g. to start from a chosen consumption level.
    pub fn set_output_bias(&mut self, consume_logit: f64, risky: f64) {
        self.theta[BO] = consume_logit;
        self.theta[BO + 1] = risky;
    }

    /// One recurrent step.
    pub fn step(&self, state: &mut Recurrent, input: [f64; INPUT]) -> PolicyOutput {
        let rec = self.step_record(&state.h, input);
        state.h = rec.h;
        self.output(&rec)
    }

    fn output(&self, rec: &StepRecord) -> PolicyOutput {
        let t = &self.theta;
        let mut risky = t[BO + 1];
        for (w, a) in t[WO + DENSE3..WO + 2 * DENSE3].iter().zip(&rec.a3) {
            risky += w * a;
        }
        PolicyOutput {
            consume_frac: rec.consume,
            risky_prop: risky,
        }
    }

    fn step_record(&self, h_prev: &[f64; GRU], input: [f64; INPUT]) -> StepRecord {
        let t = &self.theta;
        let mut a1: [f64; DENSE1] = bias(&t[B1..]);
        matvec_add(&t[W1..], &input, &mut a1);
        relu(&mut a1);

        let mut gx: [f64; G3] = bias(&t[BG..]);
        matvec_add(&t[WG..], &a1, &mut gx);
        let mut gh: [f64; G3] = bias(&t[CG..]);
        matvec_add(&t[UG..], h_prev, &mut gh);
        let mut z = [0.0; GRU];
        let mut r = [0.0; GRU];
        let mut n = [0.0; GRU];
        let mut hn = [0.0; GRU];
        let mut h = [0.0; GRU];
        for i in 0..GRU {
            z[i] = math::sigmoid(gx[i] + gh[i]);
            r[i] = math::sigmoid(gx[GRU + i] + gh[GRU + i]);
            hn[i] = gh[2 * GRU + i];
            n[i] = math::tanh(gx[2 * GRU + i] + r[i] * hn[i]);
            h[i] = z[i] * h_prev[i] + (1.0 - z[i]) * n[i];
        }

        let mut a2: [f64; DENSE2] = bias(&t[B2..]);
        matvec_add(&t[W2..], &h, &mut a2);
        relu(&mut a2);
        let mut a3: [f64; DENSE3] = bias(&t[B3..]);
        matvec_add(&t[W3..], &a2, &mut a3);
        relu(&mut a3);
        let mut raw0 = t[BO];
        for (w, a) in t[WO..WO + DENSE3].iter().zip(&a3) {
            raw0 += w * a;
        }
        StepRecord {
            input,
            a1,
            h_prev: *h_prev,
            z,
            r,
            n,
            hn,
            h,
            a2,
            a3,
            consume: math::sigmoid(raw0),
        }
    }

    /// Runs the network over a whole sequence from a zero hidden state.
    pub fn forward(&self, inputs: &[[f64; INPUT]]) -> Vec<PolicyOutput> {
        self.forward_tape(inputs).1
    }

    /// Forward pass that also records the activations for [`Self::backward`].
    pub fn forward_tape(&self, inputs: &[[f64; INPUT]]) -> (Tape, Vec<PolicyOutput>) {
        let mut tape = Tape {
            steps: Vec::with_capacity(inputs.len()),
        };
        let mut outs = Vec::with_capacity(inputs.len());
        let mut h = [0.0; GRU];
        for &x in inputs {
            let rec = self.step_record(&h, x);
            h = rec.h;
            outs.push(self.output(&rec));
            tape.steps.push(rec);
        }
        (tape, outs)
    }

    /// Backpropagation through time. `d_outputs[t]` holds the derivative of
    /// the scalar objective with respect to (consume_frac, risky_prop) at
    /// step `t`; the parameter gradient is added into `grad`.
    pub fn backward(&self, tape: &Tape, d_outputs: &[[f64; OUTPUT]], grad: &mut [f64]) -> Result<()> {
        if d_outputs.len() != tape.steps.len() {
            return Err(Error::Dimension {
                expected: tape.steps.len(),
                actual: d_outputs.len(),
            });
        }
        if grad.len() != N_PARAMS {
            return Err(Error::Dimension {
                expected: N_PARAMS,
                actual: grad.len(),
            });
        }
        let t = &self.theta;
        let mut dh_next = [0.0; GRU];
        for (rec, dout) in tape.steps.iter().zip(d_outputs).rev() {
            let draw = [dout[0] * rec.consume * (1.0 - rec.consume), dout[1]];
            let mut da3 = [0.0; DENSE3];
            let (gw_lo, gw_hi) = grad.split_at_mut(BO);
            outer_backward::<OUTPUT, DENSE3>(&t[WO..], &mut gw_lo[WO..], &draw, &rec.a3, &mut da3);
            gw_hi[0] += draw[0];
            gw_hi[1] += draw[1];

            for (d, a) in da3.iter_mut().zip(&rec.a3) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
            let mut da2 = [0.0; DENSE2];
            outer_backward::<DENSE3, DENSE2>(&t[W3..], &mut grad[W3..], &da3, &rec.a2, &mut da2);
            for (g, d) in grad[B3..B3 + DENSE3].iter_mut().zip(&da3) {
                *g += d;
            }

            for (d, a) in da2.iter_mut().zip(&rec.a2) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
            let mut dh = dh_next;
            outer_backward::<DENSE2, GRU>(&t[W2..], &mut grad[W2..], &da2, &rec.h, &mut dh);
            for (g, d) in grad[B2..B2 + DENSE2].iter_mut().zip(&da2) {
                *g += d;
            }

            let mut dx_pre = [0.0; G3];
            let mut dh_pre = [0.0; G3];
            let mut dh_prev = [0.0; GRU];
            for i in 0..GRU {
                let (z, r, n, hn) = (rec.z[i], rec.r[i], rec.n[i], rec.hn[i]);
                let dz = dh[i] * (rec.h_prev[i] - n);
                let dn = dh[i] * (1.0 - z);
                dh_prev[i] = dh[i] * z;
                let dn_pre = dn * (1.0 - n * n);
                let dr = dn_pre * hn;
                let dz_pre = dz * z * (1.0 - z);
                let dr_pre = dr * r * (1.0 - r);
                dx_pre[i] = dz_pre;
                dx_pre[GRU + i] = dr_pre;
                dx_pre[2 * GRU + i] = dn_pre;
                dh_pre[i] = dz_pre;
                dh_pre[GRU + i] = dr_pre;
                dh_pre[2 * GRU + i] = dn_pre * r;
            }
            let mut da1 = [0.0; DENSE1];
            outer_backward::<G3, DENSE1>(&t[WG..], &mut grad[WG..], &dx_pre, &rec.a1, &mut da1);
            outer_backward::<G3, GRU>(&t[UG..], &mut grad[UG..], &dh_pre, &rec.h_prev, &mut dh_prev);
            for i in 0..G3 {
                grad[BG + i] += dx_pre[i];
                grad[CG + i] += dh_pre[i];
            }
            dh_next = dh_prev;

            for (d, a) in da1.iter_mut().zip(&rec.a1) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
            let mut dinput = [0.0; INPUT];
            outer_backward::<DENSE1, INPUT>(&t[W1..], &mut grad[W1..], &da1, &rec.input, &mut dinput);
            for (g, d) in grad[B1..B1 + DENSE1].iter_mut().zip(&da1) {
                *g += d;
            }
        }
        Ok(())
    }
}

/// Glorot-uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    math::sqrt(6.0 / (fan_in + fan_out) as f64)
}

/// Orthogonal `N x N` matrix from Gram–Schmidt on a Gaussian matrix.
fn orthogonal<const N: usize>(rng: &mut Stream) -> Vec<f64> {
    let mut q = vec![0.0; N * N];
    for v in q.iter_mut() {
        *v = rng.normal();
    }
    for i in 0..N {
        for _ in 0..2 {
            for k in 0..i {
                let dot: f64 = (0..N).map(|j| q[i * N + j] * q[k * N + j]).sum();
                for j in 0..N {
                    q[i * N + j] -= dot * q[k * N + j];
                }
            }
        }
        let norm = math::sqrt((0..N).map(|j| q[i * N + j] * q[i * N + j]).sum());
        for j in 0..N {
            q[i * N + j] /= norm;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_random(seed: u64, scale: f64) -> PolicyParams {
        let mut rng = Stream::new(seed, Domain::Evaluation, 99);
        PolicyParams::from_flat((0..N_PARAMS).map(|_| scale * rng.normal()).collect()).unwrap()
    }

    #[test]
    fn parameter_count() {
        assert_eq!(N_PARAMS, 2890);
        assert_eq!(PolicyParams::init(1).as_flat().len(), 2890);
    }

    #[test]
    fn flat_round_trip() {
        let p = PolicyParams::init(3);
        let blocks: Vec<Vec<f64>> = p.blocks().iter().map(|b| b.3.to_vec()).collect();
        assert_eq!(PolicyParams::from_blocks(&blocks).unwrap(), p);
        assert_eq!(PolicyParams::from_flat(p.clone().into_flat()).unwrap(), p);
        assert!(PolicyParams::from_flat(vec![0.0; 5]).is_err());
    }

    #[test]
    fn zero_network_is_constant() {
        let p = PolicyParams::zeros();
        let out = p.forward(&[[0.3, 0.0], [-1.0, 0.5], [2.0, 1.0]]);
        for o in &out {
            assert_eq!(o.consume_frac, 0.5);
            assert_eq!(o.risky_prop, 0.0);
        }
    }

    #[test]
    fn causality() {
        let p = small_random(5, 0.3);
        let a = p.forward(&[[0.7, 0.0]]);
        let b = p.forward(&[[0.7, 0.0], [0.1, 0.5], [-0.4, 1.0]]);
        assert_eq!(a[0], b[0]);
        let c = p.forward(&[[0.7, 0.0], [0.1, 0.5], [3.0, 1.0]]);
        assert_eq!(b[..2], c[..2]);
        assert_ne!(b[2], c[2]);
    }

    #[test]
    fn step_api_matches_forward() {
        let p = small_random(6, 0.3);
        let xs = [[0.2, 0.0], [-0.5, 0.25], [1.1, 0.5], [0.0, 0.75]];
        let seq = p.forward(&xs);
        let mut st = Recurrent::default();
        for (x, o) in xs.iter().zip(&seq) {
            assert_eq!(p.step(&mut st, *x), *o);
        }
    }

    /// Straight-line reimplementation working from named blocks.
    fn reference_forward(p: &PolicyParams, xs: &[[f64; 2]]) -> Vec<(f64, f64)> {
        let b = p.blocks();
        let get = |name: &str| b.iter().find(|x| x.0 == name).unwrap().3;
        let dense = |w: &[f64], bias: &[f64], x: &[f64], relu: bool| -> Vec<f64> {
            let cols = x.len();
            (0..bias.len())
                .map(|i| {
                    let s = bias[i] + (0..cols).map(|j| w[i * cols + j] * x[j]).sum::<f64>();
                    if relu { s.max(0.0) } else { s }
                })
                .collect()
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h = vec![0.0; 10];
        let mut out = Vec::new();
        for x in xs {
            let a1 = dense(get("dense1.kernel"), get("dense1.bias"), x, true);
            let gx = dense(get("gru.kernel"), get("gru.input_bias"), &a1, false);
            let gh = dense(get("gru.recurrent_kernel"), get("gru.recurrent_bias"), &h, false);
            let mut hn = vec![0.0; 10];
            for i in 0..10 {
                let z = sig(gx[i] + gh[i]);
                let r = sig(gx[10 + i] + gh[10 + i]);
                let n = (gx[20 + i] + r * gh[20 + i]).tanh();
                hn[i] = z * h[i] + (1.0 - z) * n;
            }
            h = hn;
            let a2 = dense(get("dense2.kernel"), get("dense2.bias"), &h, true);
            let a3 = dense(get("dense3.kernel"), get("dense3.bias"), &a2, true);
            let o = dense(get("output.kernel"), get("output.bias"), &a3, false);
            out.push((sig(o[0]), o[1]));
        }
        out
    }

    #[test]
    fn matches_reference_recurrence() {
        let p = small_random(8, 0.2);
        let xs = [[0.4, 0.0], [-1.3, 1.0]];
        let fast = p.forward(&xs);
        let slow = reference_forward(&p, &xs);
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f.consume_frac - s.0).abs() < 1e-12);
            assert!((f.risky_prop - s.1).abs() < 1e-12);
        }
    }

    fn scalar_objective(p: &PolicyParams, xs: &[[f64; 2]], w: &[[f64; 2]]) -> f64 {
        p.forward(xs)
            .iter()
            .zip(w)
            .map(|(o, w)| w[0] * o.consume_frac + w[1] * o.risky_prop + 0.5 * o.risky_prop * o.risky_prop)
            .sum()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = small_random(11, 0.35);
        let xs = [[0.5, 0.0], [-0.8, 0.5], [1.2, 1.0]];
        let w = [[1.0, -0.5], [0.3, 0.8], [-1.1, 0.4]];
        let (tape, outs) = p.forward_tape(&xs);
        let d: Vec<[f64; 2]> = outs
            .iter()
            .zip(&w)
            .map(|(o, w)| [w[0], w[1] + o.risky_prop])
            .collect();
        let mut g = vec![0.0; N_PARAMS];
        p.backward(&tape, &d, &mut g).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..N_PARAMS {
            let x0 = p.as_flat()[i];
            let h = 1e-5 * x0.abs().max(1e-3);
            let mut up = p.clone();
            up.as_flat_mut()[i] = x0 + h;
            let mut dn = p.clone();
            dn.as_flat_mut()[i] = x0 - h;
            let fd = (scalar_objective(&up, &xs, &w) - scalar_objective(&dn, &xs, &w)) / (2.0 * h);
            let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6);
            assert!(err < 1e-4, "param {i}: analytic {} fd {fd}", g[i]);
            worst = worst.max(err);
        }
        assert!(worst < 1e-4);
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let p = small_random(12, 0.3);
        let xs = [[0.1, 0.0], [0.2, 0.5], [0.3, 1.0]];
        let (tape, _) = p.forward_tape(&xs);
        let mut total = vec![0.0; N_PARAMS];
        p.backward(&tape, &[[1.0, 2.0]; 3], &mut total).unwrap();
        let mut parts = vec![0.0; N_PARAMS];
        for k in 0..3 {
            let mut d = [[0.0; 2]; 3];
            d[k] = [1.0, 2.0];
            p.backward(&tape, &d, &mut parts).unwrap();
        }
        for (a, b) in total.iter().zip(&parts) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        let mut zero = vec![0.0; N_PARAMS];
        p.backward(&tape, &[[0.0; 2]; 3], &mut zero).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = PolicyParams::init(42);
        assert_eq!(a, PolicyParams::init(42));
        assert_ne!(a, PolicyParams::init(43));
        for (name, r, c, w) in a.blocks() {
            if name.ends_with("bias") {
                assert!(w.iter().all(|v| *v == 0.0));
            } else if name == "gru.recurrent_kernel" {
                for gate in 0..3 {
                    let q = &w[gate * 100..(gate + 1) * 100];
                    for i in 0..10 {
                        for k in 0..10 {
                            let dot: f64 = (0..10).map(|j| q[i * 10 + j] * q[k * 10 + j]).sum();
                            let want = if i == k { 1.0 } else { 0.0 };
                            assert!((dot - want).abs() < 1e-12);
                        }
                    }
                }
            } else {
                let limit = glorot_limit(c, r);
                assert!(w.iter().all(|v| v.abs() <= limit));
            }
        }
    }
}
