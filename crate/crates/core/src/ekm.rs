//! Exponential Kihlstrom–Mirman preferences.
//!
//! Per-period utility is `u(c, a) = c^rho / rho - a^rho / rho`. Over a
//! random lifetime the objective is `E[-exp(-alpha * sum_t u(c_t, a) dt)]`,
//! estimated from simulated consumption paths and trained through the
//! stable log loss `ln(-U)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// Consumption is clamped to this floor before utility is evaluated.
pub const CONSUMPTION_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields, default)
)]
pub struct EkmParams {
    pub alpha: f64,
    pub rho: f64,
    pub adequacy: f64,
    pub dt: f64,
}

impl Default for EkmParams {
    fn default() -> Self {
        Self {
            alpha: 5e-5,
            rho: -2.0,
            adequacy: 0.4,
            dt: 1.0,
        }
    }
}

impl EkmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "ekm.alpha",
                reason: "must be positive",
            });
        }
        if !(self.rho < 1.0) || self.rho == 0.0 {
            return Err(Error::InvalidParameter {
                field: "ekm.rho",
                reason: "must be below 1 and non-zero",
            });
        }
        if !(self.adequacy > 0.0 && self.adequacy.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "ekm.adequacy",
                reason: "must be positive",
            });
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "ekm.dt",
                reason: "must be positive",
            });
        }
        Ok(())
    }

    /// `u(c, a) = c^rho / rho - a^rho / rho` with `c` floored.
    pub fn period_utility(&self, c: f64) -> f64 {
        let c = floored(c);
        (math::pow(c, self.rho) - math::pow(self.adequacy, self.rho)) / self.rho
    }

    /// `du/dc = c^(rho - 1)`, zero below the floor.
    pub fn marginal_utility(&self, c: f64) -> f64 {
        if c < CONSUMPTION_FLOOR {
            0.0
        } else {
            math::pow(c, self.rho - 1.0)
        }
    }
}

/// `max(c, CONSUMPTION_FLOOR)`, letting NaN through.
#[inline]
pub fn floored(c: f64) -> f64 {
    if c < CONSUMPTION_FLOOR {
        CONSUMPTION_FLOOR
    } else {
        c
    }
}

fn check_shape(paths: &[f64], pmf: &[f64]) -> Result<usize> {
    let n = pmf.len();
    if n == 0 || !paths.len().is_multiple_of(n) {
        return Err(Error::Dimension {
            expected: n,
            actual: paths.len(),
        });
    }
    Ok(paths.len() / n)
}

/// `U = -(1/N) sum_j sum_s pmf[s] exp(-alpha dt sum_{t <= s} u(c_{j,t}))`,
/// evaluated naively. `paths` is row-major with `pmf.len()` years per
/// scenario; column `k` of a path and `pmf[k]` refer to the same year.
pub fn utility_estimate(paths: &[f64], pmf: &[f64], params: &EkmParams) -> Result<f64> {
    let n = check_shape(paths, pmf)?;
    let per_path = |j: usize| {
        let row = &paths[j * pmf.len()..(j + 1) * pmf.len()];
        let mut acc = 0.0;
        let mut total = 0.0;
        for (c, p) in row.iter().zip(pmf) {
            acc += params.period_utility(*c) * params.dt;
            total += p * math::exp(-params.alpha * acc);
        }
        total
    };
    Ok(-math::pairwise_sum_by(n, per_path) / n as f64)
}

/// Log-space exponents `ln pmf[s] - alpha dt sum_{t <= s} u(c_t)` for one path.
fn exponents(row: &[f64], pmf: &[f64], params: &EkmParams, out: &mut [f64]) {
    let mut acc = 0.0;
    for ((c, p), x) in row.iter().zip(pmf).zip(out.iter_mut()) {
        acc += params.period_utility(*c) * params.dt;
        *x = if *p > 0.0 {
            math::ln(*p) - params.alpha * acc
        } else {
            f64::NEG_INFINITY
        };
    }
}

/// `L = ln(-U)` by nested log-sum-exp, stable for large exponents.
pub fn loss(paths: &[f64], pmf: &[f64], params: &EkmParams) -> Result<f64> {
    let n = check_shape(paths, pmf)?;
    let m = pmf.len();
    let mut buf = vec![0.0; m];
    let mut inner = Vec::with_capacity(n);
    for j in 0..n {
        exponents(&paths[j * m..(j + 1) * m], pmf, params, &mut buf);
        inner.push(math::logsumexp(&buf));
    }
    Ok(math::logsumexp(&inner) - math::ln(n as f64))
}

/// Loss together with `dL/du_{j,t}`, the derivative with respect to each
/// period utility (row-major like `paths`).
pub fn loss_utility_grad(paths: &[f64], pmf: &[f64], params: &EkmParams) -> Result<(f64, Vec<f64>)> {
    let n = check_shape(paths, pmf)?;
    let m = pmf.len();
    let mut x = vec![0.0; n * m];
    let mut inner = Vec::with_capacity(n);
    for j in 0..n {
        let out = &mut x[j * m..(j + 1) * m];
        exponents(&paths[j * m..(j + 1) * m], pmf, params, out);
        inner.push(math::logsumexp(out));
    }
    let total = math::logsumexp(&inner);
    let loss = total - math::ln(n as f64);
    // softmax weight of (j, s) over all pairs; dL/du_t = -alpha dt sum_{s >= t} w_s
    let scale = -params.alpha * params.dt;
    let mut grad = vec![0.0; n * m];
    for j in 0..n {
        let mut tail = 0.0;
        for k in (0..m).rev() {
            let xv = x[j * m + k];
            if xv > f64::NEG_INFINITY {
                tail += math::exp(xv - total);
            }
            grad[j * m + k] = scale * tail;
        }
    }
    Ok((loss, grad))
}

/// Loss together with `dL/dc_{j,t}` (row-major like `paths`).
pub fn loss_grad(paths: &[f64], pmf: &[f64], params: &EkmParams) -> Result<(f64, Vec<f64>)> {
    let (loss, mut grad) = loss_utility_grad(paths, pmf, params)?;
    for (g, c) in grad.iter_mut().zip(paths) {
        *g *= params.marginal_utility(*c);
    }
    Ok((loss, grad))
}
