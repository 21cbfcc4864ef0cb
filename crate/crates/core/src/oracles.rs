//! Independent correctness oracles.
//!
//! * [`annuity_check`]: lifestyling into an inflation-linked annuity must
//!   give a flat real income and exhaust wealth exactly.
//! * [`merton_oracle`], [`vnm_mortality_oracle`]: closed-form optimum of
//!   time-additive power utility with yearly consumption and continuously
//!   rebalanced investment (see [`power_oracle`] for the derivation).
//! * [`ekm_dp_oracle`]: backward induction on a wealth grid for the EKM
//!   objective over a few years.

use alloc::vec;
use alloc::vec::Vec;

use crate::ekm::EkmParams;
use crate::market::MarketParams;
use crate::math;
use crate::trainer::Lifecycle;
use crate::{Error, Result};

/// Gauss–Hermite rule for expectations over a standard normal:
/// `E[f(Z)] ~ sum_i weights[i] f(nodes[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// `n`-node rule found by Newton iteration on the orthonormal Hermite
    /// recurrence.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > 200 {
            return Err(Error::InvalidParameter {
                field: "quadrature_nodes",
                reason: "must lie in 1..=200",
            });
        }
        let pim4 = 0.751_125_544_464_942_5; // pi^(-1/4)
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        let mut z = 0.0;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => math::sqrt(2.0 * nf + 1.0) - 1.855_75 * math::pow(2.0 * nf + 1.0, -1.0 / 6.0),
                1 => z - 1.14 * math::pow(nf, 0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * math::sqrt(2.0 / jf) * p2 - math::sqrt((jf - 1.0) / jf) * p3;
                }
                pp = math::sqrt(2.0 * nf) * p2;
                let step = p1 / pp;
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let s2 = core::f64::consts::SQRT_2;
        let spi = math::sqrt(core::f64::consts::PI);
        Ok(Self {
            nodes: x.into_iter().rev().map(|v| v * s2).collect(),
            weights: w.into_iter().rev().map(|v| v / spi).collect(),
        })
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(z, w)| w * f(*z)).sum()
    }
}

/// Result of the lifestyling and annuity-purchase check.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnuityCheck {
    /// Wealth at retirement, before the annuity is bought.
    pub retirement_wealth: f64,
    /// Price of one unit of CPI-indexed income starting at retirement.
    pub unit_price: f64,
    /// Yearly consumption.
    pub consumption: Vec<f64>,
    /// Replacement ratios over retirement; constant when income is flat in
    /// real terms.
    pub ratios: Vec<f64>,
    /// Wealth left after the final year's payment, per original member.
    pub terminal_wealth: f64,
    /// The same per survivor of the final year.
    pub terminal_wealth_per_survivor: f64,
    /// Terminal wealth per original member, discounted to retirement.
    pub terminal_value_at_retirement: f64,
}

/// Lifestyling from all-risky to all-bond over the working years in the
/// noise-free market, then an inflation-linked annuity bought at retirement
/// at `unit price * (1 + price_loading)` and paid out of the member's own
/// account with the infinite-pool credits of `lc`.
pub fn annuity_check(lc: &Lifecycle, price_loading: f64) -> Result<AnnuityCheck> {
    let n = lc.n_years();
    let t_ra = lc.retirement_year;
    let m = &lc.market;
    if t_ra == 0 {
        return Err(Error::InvalidParameter {
            field: "retirement_year",
            reason: "needs at least one working year",
        });
    }
    let lifestyle = |t: usize| {
        if t >= t_ra {
            0.0
        } else {
            1.0 - t as f64 / t_ra as f64
        }
    };
    let mut w_minus = lc.initial_wealth;
    for t in 0..t_ra {
        let (w, _) = lc.wealth_step(t, w_minus, 0.0);
        w_minus = w * math::exp(m.log_return(lifestyle(t), 0.0));
    }
    let retirement_wealth = lc.contributions[t_ra] + w_minus;
    let growth = math::exp(m.log_return(0.0, 0.0));
    let mut unit_price = 0.0;
    let mut surv = 1.0;
    let mut discount = 1.0;
    for t in t_ra..n {
        if t > t_ra {
            surv /= 1.0 + lc.hazard[t];
            discount /= growth;
        }
        unit_price += surv * discount * math::powi(1.0 + m.cpi, (t - t_ra) as u32);
    }
    let income = retirement_wealth / (unit_price * (1.0 + price_loading));
    let mut consumption = vec![0.0; n];
    let mut w = 0.0;
    let mut surv = 1.0;
    for t in t_ra..n {
        if t > t_ra {
            surv /= 1.0 + lc.hazard[t];
        }
        let target = income * math::powi(1.0 + m.cpi, (t - t_ra) as u32);
        let avail = lc.contributions[t] + if t > t_ra { 1.0 + lc.hazard[t] } else { 1.0 } * w_minus;
        let (w_t, cons) = lc.wealth_step(t, w_minus, target / avail);
        consumption[t] = cons;
        w = w_t;
        w_minus = w_t * growth;
    }
    let ratios = lc.replacement_path(&consumption);
    let years = (n - 1 - t_ra) as u32;
    Ok(AnnuityCheck {
        retirement_wealth,
        unit_price,
        consumption,
        ratios,
        terminal_wealth: w * surv,
        terminal_wealth_per_survivor: w,
        terminal_value_at_retirement: w * surv / math::powi(growth, years),
    })
}

/// Optimal constant risky share for power utility with exponent `rho`,
/// `(mu - r) / ((1 - rho) sigma^2)`.
pub fn merton_pi(market: &MarketParams, rho: f64) -> f64 {
    (market.mu - market.r_bond) / ((1.0 - rho) * market.sigma * market.sigma)
}

/// `E[exp(rho F(pi, Z))]` for standard normal `Z`.
pub fn power_moment(market: &MarketParams, rho: f64, pi: f64) -> f64 {
    let s2 = pi * pi * market.sigma * market.sigma * market.dt;
    math::exp(rho * market.log_return(pi, 0.0) + 0.5 * rho * rho * s2)
}

/// Optimal strategy and value for `E sum_t n_t c_t^rho` (minimised, as
/// `rho < 0`) where `c_t` is the amount consumed in year `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolution {
    pub pi_star: f64,
    /// Fraction of available wealth consumed in each year.
    pub consume_frac: Vec<f64>,
    /// Value coefficients: the optimum from year `t` on, with wealth `W`
    /// available, is `k[t] W^rho`.
    pub k: Vec<f64>,
}

impl PowerSolution {
    /// `E sum_t n_t c_t^rho` under the optimal strategy from unit wealth.
    pub fn value(&self) -> f64 {
        self.k[0]
    }
}

/// Closed form for power utility with yearly consumption and continuous
/// rebalancing between a lognormal risky asset and a bond.
///
/// Available wealth evolves as `W_{t+1} = g_{t+1} (1 - c_t) W_t G_t` with
/// `G_t = exp(F(pi_t, eps_t))` and deterministic credit factors `g`. Write
/// the optimum from year `t` as `k_t W^rho`. Because `rho < 0` the
/// objective is minimised, so `pi` minimises `E[G^rho]`, which gives the
/// Merton share, and `m = E[G^rho]` at that share. Then
///
/// ```text
/// k_t = min_c  n_t c^rho + k_{t+1} g_{t+1}^rho m (1 - c)^rho
/// ```
///
/// and the first-order condition gives `(1 - c)/c = B_t` with
/// `B_t = (k_{t+1} g_{t+1}^rho m / n_t)^(1 / (1 - rho))`, so
/// `c_t = 1 / (1 + B_t)` and `k_t = n_t (1 + B_t)^(1 - rho)`. The final
/// year consumes everything: `k_{T-1} = n_{T-1}`.
pub fn power_oracle(market: &MarketParams, rho: f64, weights: &[f64], credit_factors: &[f64]) -> Result<PowerSolution> {
    if !(rho < 0.0) {
        return Err(Error::InvalidParameter {
            field: "rho",
            reason: "power oracle requires rho < 0",
        });
    }
    let n = weights.len();
    if n == 0 {
        return Err(Error::InvalidParameter {
            field: "weights",
            reason: "horizon must be at least one year",
        });
    }
    if credit_factors.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: credit_factors.len(),
        });
    }
    if weights.iter().any(|w| !(*w > 0.0)) || credit_factors.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::InvalidParameter {
            field: "weights",
            reason: "weights and credit factors must be positive",
        });
    }
    let pi_star = merton_pi(market, rho);
    let m = power_moment(market, rho, pi_star);
    let mut k = vec![0.0; n];
    let mut consume_frac = vec![1.0; n];
    k[n - 1] = weights[n - 1];
    for t in (0..n - 1).rev() {
        let a = k[t + 1] * math::pow(credit_factors[t + 1], rho) * m / weights[t];
        let b = math::pow(a, 1.0 / (1.0 - rho));
        consume_frac[t] = 1.0 / (1.0 + b);
        k[t] = weights[t] * math::pow(1.0 + b, 1.0 - rho);
    }
    Ok(PowerSolution { pi_star, consume_frac, k })
}

/// Merton problem over `horizon` years without mortality.
pub fn merton_oracle(market: &MarketParams, rho: f64, horizon: usize) -> Result<PowerSolution> {
    power_oracle(market, rho, &vec![1.0; horizon], &vec![1.0; horizon])
}

/// Survival-weighted power utility for a member of an infinite pool:
/// weights `N_t` are survival probabilities and wealth earns the credits
/// `P_t` (so `g_t = 1 + P_t`).
pub fn vnm_mortality_oracle(market: &MarketParams, rho: f64, survival: &[f64], credits: &[f64]) -> Result<PowerSolution> {
    let g: Vec<f64> = credits.iter().map(|p| 1.0 + p).collect();
    power_oracle(market, rho, survival, &g)
}

/// A short-horizon EKM problem for a retired member starting with wealth
/// `initial_wealth` and replacement level 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DpProblem {
    pub market: MarketParams,
    pub ekm: EkmParams,
    /// Probability that each year is the last one lived.
    pub pmf: Vec<f64>,
    /// Credit rate `P_t` paid on entering year `t` (entry 0 unused).
    pub credits: Vec<f64>,
    pub initial_wealth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpGrids {
    pub wealth_min: f64,
    pub wealth_max: f64,
    /// Number of log-spaced wealth nodes.
    pub wealth_nodes: usize,
    pub consume: Vec<f64>,
    pub risky: Vec<f64>,
    pub quadrature_nodes: usize,
}

impl DpGrids {
    /// Evenly spaced control grids with `nc` consumption points in
    /// `(0, 1]` and `np` risky points in `[pi_lo, pi_hi]`.
    pub fn uniform(wealth_min: f64, wealth_max: f64, wealth_nodes: usize, nc: usize, pi_lo: f64, pi_hi: f64, np: usize) -> Self {
        let consume = (1..=nc).map(|i| i as f64 / nc as f64).collect();
        let risky = if np == 1 {
            vec![pi_lo]
        } else {
            (0..np)
                .map(|i| pi_lo + (pi_hi - pi_lo) * i as f64 / (np - 1) as f64)
                .collect()
        };
        Self {
            wealth_min,
            wealth_max,
            wealth_nodes,
            consume,
            risky,
            quadrature_nodes: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution {
    /// Minimal `-U` from the initial wealth.
    pub value: f64,
    /// `ln(value)`, comparable with the training loss.
    pub loss: f64,
    /// Optimal first-year control `(c, pi)` at the initial wealth.
    pub first_control: (f64, f64),
    pub wealth_grid: Vec<f64>,
    /// `policy[t][i]`: optimal `(c, pi)` in year `t` at wealth node `i`.
    pub policy: Vec<Vec<(f64, f64)>>,
    /// Number of next-year wealths that fell outside the grid and were
    /// clipped to its ends.
    pub clipped: usize,
}

struct Interp<'a> {
    lo: f64,
    step: f64,
    ln_v: &'a [f64],
}

impl Interp<'_> {
    fn eval(&self, w: f64, clipped: &mut usize) -> f64 {
        let n = self.ln_v.len();
        let x = if w > 0.0 { (math::ln(w) - self.lo) / self.step } else { -1.0 };
        let x = if x < 0.0 || x > (n - 1) as f64 {
            *clipped += 1;
            x.clamp(0.0, (n - 1) as f64)
        } else {
            x
        };
        let i = (x as usize).min(n.saturating_sub(2));
        let f = x - i as f64;
        if n == 1 {
            return math::exp(self.ln_v[0]);
        }
        math::exp(self.ln_v[i] * (1.0 - f) + self.ln_v[i + 1] * f)
    }
}

/// Backward induction for the EKM objective.
///
/// With `e_t = exp(-alpha dt u(c_t))` the objective factorises as
/// `-U = E[e_0 (pmf_0 + e_1 (pmf_1 + e_2 (pmf_2 + ...)))]`, so
/// `V_t(W) = min_{c, pi} e(cW) (pmf_t + E[V_{t+1}(W')])` with
/// `W' = (1 + P_{t+1}) (1 - c) W exp(F(pi, Z))` and `V_T = 0`. `V_{t+1}` is
/// interpolated linearly in `(ln W, ln V)`; the expectation uses
/// Gauss–Hermite quadrature. The first year is optimised directly at the
/// initial wealth.
pub fn ekm_dp_oracle(problem: &DpProblem, grids: &DpGrids) -> Result<DpSolution> {
    problem.ekm.validate()?;
    problem.market.validate()?;
    let horizon = problem.pmf.len();
    if horizon == 0 || horizon > 4 {
        return Err(Error::InvalidParameter {
            field: "pmf",
            reason: "horizon must be 1 to 4 years",
        });
    }
    if problem.credits.len() != horizon {
        return Err(Error::Dimension {
            expected: horizon,
            actual: problem.credits.len(),
        });
    }
    if grids.consume.is_empty()
        || grids.risky.is_empty()
        || grids.wealth_nodes == 0
        || !(grids.wealth_min > 0.0 && grids.wealth_max >= grids.wealth_min)
    {
        return Err(Error::InvalidParameter {
            field: "grids",
            reason: "need non-empty control grids and 0 < wealth_min <= wealth_max",
        });
    }
    if grids.consume.iter().any(|c| !(*c > 0.0 && *c <= 1.0)) {
        return Err(Error::InvalidParameter {
            field: "grids.consume",
            reason: "consumption fractions must lie in (0, 1]",
        });
    }
    let gh = GaussHermite::new(grids.quadrature_nodes)?;
    let lo = math::ln(grids.wealth_min);
    let hi = math::ln(grids.wealth_max);
    let nw = grids.wealth_nodes;
    let step = if nw > 1 { (hi - lo) / (nw - 1) as f64 } else { 1.0 };
    let wealth_grid: Vec<f64> = (0..nw).map(|i| math::exp(lo + step * i as f64)).collect();
    let m = &problem.market;
    let e = &problem.ekm;
    // growth factors per (pi, node)
    let growth: Vec<Vec<f64>> = grids
        .risky
        .iter()
        .map(|pi| gh.nodes.iter().map(|z| math::exp(m.log_return(*pi, *z))).collect())
        .collect();
    let mut clipped = 0;
    let mut next_ln_v: Vec<f64> = Vec::new();
    let mut policy = vec![Vec::new(); horizon];

    let best = |t: usize, w: f64, next: &[f64], clipped: &mut usize| -> (f64, (f64, f64)) {
        let interp = Interp { lo, step, ln_v: next };
        let mut best = (f64::INFINITY, (grids.consume[0], grids.risky[0]));
        for &c in &grids.consume {
            let now = math::exp(-e.alpha * e.dt * e.period_utility(c * w));
            let rest = w * (1.0 - c);
            let last = t + 1 == horizon;
            for (pi, g) in grids.risky.iter().zip(&growth) {
                let cont = if last {
                    0.0
                } else {
                    let factor = (1.0 + problem.credits[t + 1]) * rest;
                    g.iter()
                        .zip(&gh.weights)
                        .map(|(gz, wz)| wz * interp.eval(factor * gz, clipped))
                        .sum()
                };
                let v = now * (problem.pmf[t] + cont);
                if v < best.0 {
                    best = (v, (c, *pi));
                }
                if last {
                    break;
                }
            }
        }
        best
    };

    for t in (1..horizon).rev() {
        let mut ln_v = Vec::with_capacity(nw);
        let mut pol = Vec::with_capacity(nw);
        for &w in &wealth_grid {
            let (v, ctrl) = best(t, w, &next_ln_v, &mut clipped);
            ln_v.push(math::ln(v));
            pol.push(ctrl);
        }
        next_ln_v = ln_v;
        policy[t] = pol;
    }
    policy[0] = wealth_grid
        .iter()
        .map(|w| best(0, *w, &next_ln_v, &mut clipped).1)
        .collect();
    let (value, first_control) = best(0, problem.initial_wealth, &next_ln_v, &mut clipped);
    Ok(DpSolution {
        value,
        loss: math::ln(value),
        first_control,
        wealth_grid,
        policy,
        clipped,
    })
}
