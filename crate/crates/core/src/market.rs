//! Black–Scholes market with constant wage growth and inflation.
//!
//! Wealth held under a fixed-weight strategy `pi` over one step of length
//! `dt` grows by `exp(F(pi, eps))`, where
//! `F = (pi mu + (1 - pi) r - (pi sigma)^2 / 2) dt + pi sigma eps sqrt(dt)`.

use alloc::vec::Vec;

use crate::math;
use crate::par;
use crate::rng::{Domain, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields, default)
)]
pub struct MarketParams {
    /// Annual stock growth rate.
    pub mu: f64,
    /// Annual stock volatility.
    pub sigma: f64,
    /// Annual return of the riskless (index-linked bond) asset.
    pub r_bond: f64,
    pub wage_growth: f64,
    pub cpi: f64,
    /// Step length in years.
    pub dt: f64,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self {
            mu: 0.0773,
            sigma: 0.153,
            r_bond: 0.0446,
            wage_growth: 0.0383,
            cpi: 0.02,
            dt: 1.0,
        }
    }
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.mu, self.sigma, self.r_bond, self.wage_growth, self.cpi, self.dt]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter {
                field: "market",
                reason: "all market parameters must be finite",
            });
        }
        if self.sigma <= 0.0 {
            return Err(Error::InvalidParameter {
                field: "market.sigma",
                reason: "must be positive",
            });
        }
        if self.dt <= 0.0 {
            return Err(Error::InvalidParameter {
                field: "market.dt",
                reason: "must be positive",
            });
        }
        Ok(())
    }

    /// Log-return `F(pi, eps)` of a fixed-weight strategy over one step.
    #[inline]
    pub fn log_return(&self, pi: f64, eps: f64) -> f64 {
        let ps = pi * self.sigma;
        (pi * self.mu + (1.0 - pi) * self.r_bond - 0.5 * ps * ps) * self.dt
            + ps * eps * math::sqrt(self.dt)
    }

    /// `dF/dpi` at `(pi, eps)`.
    #[inline]
    pub fn log_return_dpi(&self, pi: f64, eps: f64) -> f64 {
        (self.mu - self.r_bond - pi * self.sigma * self.sigma) * self.dt
            + self.sigma * eps * math::sqrt(self.dt)
    }

    /// One-period expected growth factor `1 + pi mu + (1 - pi) r` of the
    /// portfolio, used for liability discounting.
    pub fn expected_growth(&self, pi: f64) -> f64 {
        1.0 + pi * self.mu + (1.0 - pi) * self.r_bond
    }

    /// Discount factor `P(t, ell) = 1 / (1 + e(t, ell))` with
    /// `1 + e = (1 + pi mu + (1 - pi) r)^ell`.
    pub fn discount_factor(&self, pi: f64, ell: u32) -> Result<f64> {
        let g = self.expected_growth(pi);
        if g <= 0.0 {
            return Err(Error::DegenerateCompounding { factor: g });
        }
        Ok(1.0 / math::powi(g, ell))
    }

    /// Salary and CPI index for years `0..n_years`, both starting at 1.
    pub fn macro_paths(&self, n_years: usize) -> MacroPaths {
        let mut salaries = Vec::with_capacity(n_years);
        let mut cpi_index = Vec::with_capacity(n_years);
        for t in 0..n_years as u32 {
            salaries.push(math::powi(1.0 + self.wage_growth, t));
            cpi_index.push(math::powi(1.0 + self.cpi, t));
        }
        MacroPaths {
            salaries,
            cpi_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroPaths {
    pub salaries: Vec<f64>,
    pub cpi_index: Vec<f64>,
}

/// Standard-normal increments, one row per scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBatch {
    epsilons: Vec<f64>,
    n_scenarios: usize,
    n_years: usize,
    seed: u64,
}

impl ScenarioBatch {
    /// Draws `n_scenarios x n_years` increments. Scenario `j` is read from its
    /// own ChaCha stream, so any single row can be regenerated independently.
    pub fn generate(n_scenarios: usize, n_years: usize, seed: u64) -> Result<Self> {
        Self::generate_in(Domain::Scenarios, n_scenarios, n_years, seed)
    }

    pub fn generate_in(
        domain: Domain,
        n_scenarios: usize,
        n_years: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_scenarios == 0 {
            return Err(Error::InvalidParameter {
                field: "n_scenarios",
                reason: "must be at least 1",
            });
        }
        if n_years == 0 {
            return Err(Error::InvalidParameter {
                field: "n_years",
                reason: "must be at least 1",
            });
        }
        let rows = par::map_indexed(n_scenarios, |j| {
            let mut s = Stream::new(seed, domain, j as u64);
            (0..n_years).map(|_| s.normal()).collect::<Vec<f64>>()
        });
        Ok(Self {
            epsilons: rows.concat(),
            n_scenarios,
            n_years,
            seed,
        })
    }

    /// Every increment equal to `eps`: a deterministic scenario set.
    pub fn constant(n_scenarios: usize, n_years: usize, eps: f64) -> Self {
        Self {
            epsilons: alloc::vec![eps; n_scenarios * n_years],
            n_scenarios,
            n_years,
            seed: 0,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_years = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || n_years == 0 {
            return Err(Error::InvalidParameter {
                field: "rows",
                reason: "need at least one non-empty row",
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n_years) {
            return Err(Error::Dimension {
                expected: n_years,
                actual: bad.len(),
            });
        }
        Ok(Self {
            epsilons: rows.concat(),
            n_scenarios: rows.len(),
            n_years,
            seed: 0,
        })
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    pub fn n_years(&self) -> usize {
        self.n_years
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.epsilons[j * self.n_years..(j + 1) * self.n_years]
    }

    pub fn get(&self, j: usize, t: usize) -> f64 {
        self.epsilons[j * self.n_years + t]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.epsilons
    }
}

/// Convenience wrapper matching the scenario-generator operation.
pub fn generate_scenarios(n_scenarios: usize, n_years: usize, seed: u64) -> Result<ScenarioBatch> {
    ScenarioBatch::generate(n_scenarios, n_years, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn log_return_examples() {
        let m = MarketParams::default();
        assert_eq!(m.log_return(0.0, 1.7), m.r_bond * m.dt);
        assert!(close(m.log_return(1.0, 0.0), 0.065_595_50, 1e-12));
        assert!(close(m.log_return(1.0, 1.0), 0.218_595_50, 1e-12));
    }

    #[test]
    fn log_return_is_affine_in_eps() {
        let m = MarketParams { dt: 0.25, ..Default::default() };
        for pi in [-1.0, 0.3, 2.5] {
            let slope = m.log_return(pi, 1.0) - m.log_return(pi, 0.0);
            assert!(close(slope, pi * m.sigma * 0.5, 1e-15));
            let f = |e: f64| m.log_return(pi, e);
            assert!(close(f(3.0) - f(-2.0), 5.0 * slope, 1e-13));
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let m = MarketParams::default();
        for (pi, e) in [(0.4, -0.3), (2.0, 1.1), (-0.5, 0.0)] {
            let h = 1e-6;
            let fd = (m.log_return(pi + h, e) - m.log_return(pi - h, e)) / (2.0 * h);
            assert!(close(fd, m.log_return_dpi(pi, e), 1e-8));
        }
    }

    #[test]
    fn discount_factor_examples() {
        let m = MarketParams::default();
        assert_eq!(m.discount_factor(0.81, 0).unwrap(), 1.0);
        assert!(close(m.discount_factor(0.0, 2).unwrap(), 1.0 / (1.0446f64 * 1.0446), 1e-15));
        assert!(close(m.discount_factor(0.0, 2).unwrap(), 0.916_431, 1e-6));
        assert!(close(m.discount_factor(0.81, 1).unwrap(), 1.0 / 1.071_087, 1e-12));
        assert!(close(m.discount_factor(0.81, 1).unwrap(), 0.933_631, 1e-6));
        let bad = MarketParams { r_bond: -2.0, ..Default::default() };
        assert!(matches!(
            bad.discount_factor(0.0, 1),
            Err(Error::DegenerateCompounding { .. })
        ));
    }

    #[test]
    fn discount_factor_is_multiplicative() {
        let m = MarketParams::default();
        for (a, b) in [(1, 2), (5, 7), (0, 9)] {
            let lhs = m.discount_factor(0.81, a + b).unwrap();
            let rhs = m.discount_factor(0.81, a).unwrap() * m.discount_factor(0.81, b).unwrap();
            assert!((lhs - rhs).abs() / lhs < 1e-14);
        }
    }

    #[test]
    fn macro_path_examples() {
        let m = MarketParams::default();
        let p = m.macro_paths(41);
        assert_eq!(p.salaries[0], 1.0);
        assert_eq!(p.cpi_index[0], 1.0);
        assert!(close(p.salaries[1], 1.0383, 1e-15));
        assert!(close(p.cpi_index[1], 1.02, 1e-15));
        assert!(close(p.salaries[40], 4.496_91, 1e-5));
    }

    #[test]
    fn validation_rejects_bad_sigma_and_dt() {
        assert!(MarketParams { sigma: 0.0, ..Default::default() }.validate().is_err());
        assert!(MarketParams { dt: -1.0, ..Default::default() }.validate().is_err());
        assert!(MarketParams::default().validate().is_ok());
    }

    #[test]
    fn scenarios_are_deterministic_per_seed() {
        let a = ScenarioBatch::generate(1, 1, 42).unwrap();
        let b = ScenarioBatch::generate(1, 1, 42).unwrap();
        assert_eq!(a, b);
        let c = ScenarioBatch::generate(2, 3, 1).unwrap();
        let d = ScenarioBatch::generate(2, 3, 2).unwrap();
        assert_ne!(c.as_slice(), d.as_slice());
        assert!(ScenarioBatch::generate(0, 3, 1).is_err());
        assert!(ScenarioBatch::generate(3, 0, 1).is_err());
    }

    #[test]
    fn scenario_rows_do_not_depend_on_batch_size() {
        let small = ScenarioBatch::generate(3, 5, 9).unwrap();
        let large = ScenarioBatch::generate(50, 5, 9).unwrap();
        for j in 0..3 {
            assert_eq!(small.row(j), large.row(j));
        }
    }

    #[test]
    fn column_means_within_five_standard_errors() {
        let n = 10_000;
        let b = ScenarioBatch::generate(n, 96, 7).unwrap();
        let bound = 5.0 / (n as f64).sqrt() * 5.0;
        for t in 0..96 {
            let mean: f64 = (0..n).map(|j| b.get(j, t)).sum::<f64>() / n as f64;
            assert!(mean.abs() < bound, "column {t} mean {mean}");
        }
    }

    #[test]
    fn lognormal_mean_matches_expected_growth() {
        // E[exp F] = exp((pi mu + (1 - pi) r) dt) for dt = 1.
        let m = MarketParams::default();
        let pi = 0.81;
        let n = 1_000_000;
        let mut s = Stream::new(11, Domain::Scenarios, 0);
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let g = math::exp(m.log_return(pi, s.normal()));
            sum += g;
            sum2 += g * g;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        let expected = (pi * m.mu + (1.0 - pi) * m.r_bond).exp();
        assert!((mean - expected).abs() < 3.0 * se, "{mean} vs {expected} (se {se})");
    }
}
