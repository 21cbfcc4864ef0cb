//! Summary statistics used by the reports.

use alloc::vec::Vec;

use crate::math;

/// The nine decile levels 10%, ..., 90%.
pub const DECILE_LEVELS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Quantile of already sorted data with linear interpolation between order
/// statistics (`h = (n - 1) q`). Returns NaN for empty input.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = h as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn quantile(xs: &[f64], q: f64) -> f64 {
    quantile_sorted(&sorted_copy(xs), q)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

pub fn deciles(xs: &[f64]) -> [f64; 9] {
    let v = sorted_copy(xs);
    DECILE_LEVELS.map(|q| quantile_sorted(&v, q))
}

pub fn mean(xs: &[f64]) -> f64 {
    math::pairwise_sum(xs) / xs.len() as f64
}

/// Sample standard deviation (denominator `n - 1`).
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss = math::pairwise_sum_by(xs.len(), |i| (xs[i] - m) * (xs[i] - m));
    math::sqrt(ss / (xs.len() as f64 - 1.0))
}

pub fn std_error(xs: &[f64]) -> f64 {
    std_dev(xs) / math::sqrt(xs.len() as f64)
}

/// `sum w x / sum w`.
pub fn weighted_mean(xs: &[f64], weights: &[f64]) -> f64 {
    let num = math::pairwise_sum_by(xs.len(), |i| xs[i] * weights[i]);
    let den = math::pairwise_sum(&weights[..xs.len()]);
    num / den
}

/// Centred moving average over `window` points, shrinking at the ends.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(xs.len());
            mean(&xs[lo..hi])
        })
        .collect()
}

/// Standard error of the sample median from the normal approximation
/// `sqrt(pi / 2) * sd / sqrt(n)`.
pub fn median_std_error(xs: &[f64]) -> f64 {
    math::sqrt(core::f64::consts::PI / 2.0) * std_error(xs)
}

/// Distribution-free 95% confidence interval for the median from the order
/// statistics at ranks `n/2 -+ 1.96 sqrt(n)/2`.
pub fn median_ci95(xs: &[f64]) -> (f64, f64) {
    let v = sorted_copy(xs);
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let half = 1.959_963_984_540_054 * math::sqrt(n as f64) / 2.0;
    let centre = n as f64 / 2.0;
    let lo = (libm::floor(centre - half).max(0.0) as usize).min(n - 1);
    let hi = (libm::ceil(centre + half) as usize).min(n - 1);
    (v[lo], v[hi])
}
