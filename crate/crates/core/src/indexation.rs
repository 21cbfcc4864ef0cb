//! Dynamic-accrual shared-indexation scheme in the infinite-membership limit.
//!
//! Every year the scheme picks one indexation rate `h` (and, when `h` hits
//! its bounds, a cut/bonus factor `theta`) so that assets equal the value of
//! all accrued nominal benefits. Contributions then buy new nominal benefit
//! priced with the same indexation and discounting, pensions are paid, and
//! the fund is invested for a year at a fixed risky proportion.
//!
//! Within year `t` the order is: solve `(h, theta)` from `A_{t-}`, apply
//! indexation, accrue, pay pensions and collect contributions (`A_{t+}`),
//! invest, then age the generations by expected mortality.

use alloc::vec::Vec;

use crate::market::{MarketParams, ScenarioBatch};
use crate::math;
use crate::mortality::CohortMortality;
use crate::par;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields, default)
)]
pub struct SiParams {
    pub h0: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Risky proportion held by the fund every year.
    pub pi: f64,
    /// Number of simulated years, one new generation entering per year.
    pub sim_years: usize,
    pub contribution_rate: f64,
    /// Entry year of the generation whose outcomes are reported.
    pub tracked_entry_year: usize,
}

impl Default for SiParams {
    fn default() -> Self {
        Self {
            h0: 0.02,
            h_min: 0.0,
            h_max: 0.07,
            pi: 0.81,
            sim_years: 150,
            contribution_rate: 0.0483,
            tracked_entry_year: 50,
        }
    }
}

impl SiParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_min <= self.h_max) {
            return Err(Error::InvalidParameter {
                field: "si.h_min",
                reason: "must not exceed si.h_max",
            });
        }
        if !(self.h_min <= self.h0 && self.h0 <= self.h_max) {
            return Err(Error::InvalidParameter {
                field: "si.h0",
                reason: "must lie in [h_min, h_max]",
            });
        }
        if self.h_min <= -1.0 {
            return Err(Error::InvalidParameter {
                field: "si.h_min",
                reason: "must exceed -1",
            });
        }
        if self.sim_years == 0 {
            return Err(Error::InvalidParameter {
                field: "si.sim_years",
                reason: "must be positive",
            });
        }
        if !(self.contribution_rate >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "si.contribution_rate",
                reason: "must be non-negative",
            });
        }
        if !self.pi.is_finite() {
            return Err(Error::InvalidParameter {
                field: "si.pi",
                reason: "must be finite",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generation {
    pub entry_year: usize,
    /// Expected number alive (fractional in the infinite-fund limit).
    pub alive: f64,
    /// Cumulative nominal benefit per member, `B^{g,cum}`.
    pub nominal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub year: usize,
    /// Assets before payments in and out, `A_{t-}`.
    pub assets_pre: f64,
    /// Assets after payments, `A_{t+}`.
    pub assets_post: f64,
    pub generations: Vec<Generation>,
    pub h: f64,
    pub theta: f64,
    /// Set when assets went negative after payments.
    pub failed: bool,
}

impl SchemeState {
    pub fn empty(h0: f64) -> Self {
        Self {
            year: 0,
            assets_pre: 0.0,
            assets_post: 0.0,
            generations: Vec::new(),
            h: h0,
            theta: 1.0,
            failed: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `h` inside the bounds, `theta = 1`.
    Interior,
    /// `h = h_min`, `theta < 1`.
    Cut,
    /// `h = h_max`, `theta > 1`.
    Bonus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Indexation {
    pub h: f64,
    pub theta: f64,
    pub regime: Regime,
}

pub const SOLVER_TOLERANCE: f64 = 1e-10;
pub const SOLVER_MAX_ITER: usize = 200;

/// Pricing inputs shared by every year of a run.
pub struct SchemeContext<'a> {
    pub market: &'a MarketParams,
    pub mortality: &'a CohortMortality,
    pub params: &'a SiParams,
    /// One-period discount `1 / (1 + pi mu + (1 - pi) r)`.
    discount: f64,
}

impl<'a> SchemeContext<'a> {
    pub fn new(market: &'a MarketParams, mortality: &'a CohortMortality, params: &'a SiParams) -> Result<Self> {
        market.validate()?;
        params.validate()?;
        let discount = market.discount_factor(params.pi, 1)?;
        Ok(Self {
            market,
            mortality,
            params,
            discount,
        })
    }

    pub fn age(&self, g: &Generation, year: usize) -> u32 {
        self.mortality.entry_age + (year - g.entry_year) as u32
    }

    fn receiving(&self, age: u32) -> bool {
        age >= self.mortality.retirement_age && age < self.mortality.max_age()
    }

    fn horizon(&self) -> usize {
        self.mortality.n_years() + 1
    }

    /// Salary of a member at `age`, normalised to 1 at entry.
    pub fn salary(&self, age: u32) -> f64 {
        math::powi(1.0 + self.market.wage_growth, age - self.mortality.entry_age)
    }

    /// Contribution per member at `age`: a fixed share of salary until retirement.
    pub fn contribution(&self, age: u32) -> f64 {
        if age < self.mortality.retirement_age {
            self.params.contribution_rate * self.salary(age)
        } else {
            0.0
        }
    }

    /// Expected nominal cashflow profile `cf[ell] = sum_g N B p(t, ell) 1^R_{t+ell}`,
    /// so that the liability is `sum_ell (1+h)^ell P(t, ell) cf[ell]`.
    pub fn cashflow_profile(&self, state: &SchemeState) -> Vec<f64> {
        let mut cf = alloc::vec![0.0; self.horizon()];
        for g in &state.generations {
            if g.nominal == 0.0 || g.alive == 0.0 {
                continue;
            }
            let age = self.age(g, state.year);
            let base = self.mortality.alive_at_age(age);
            if base == 0.0 {
                continue;
            }
            let scale = g.alive * g.nominal / base;
            let max_age = self.mortality.max_age();
            let first = self.mortality.retirement_age.max(age);
            for a in first..max_age {
                cf[(a - age) as usize] += scale * self.mortality.alive_at_age(a);
            }
        }
        cf
    }

    /// `sum_ell cf[ell] ((1+h) P(t,1))^ell` by Horner's rule.
    pub fn value_profile(&self, cf: &[f64], h: f64) -> f64 {
        let x = (1.0 + h) * self.discount;
        cf.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Value of all accrued nominal benefits at indexation `h`:
    /// `sum_g sum_ell (1+h)^ell P(t,ell) N^g B^g p^g(t,ell) 1^R_{t+ell}`.
    pub fn liability(&self, state: &SchemeState, h: f64) -> f64 {
        self.value_profile(&self.cashflow_profile(state), h)
    }

    /// Price of one unit of nominal benefit bought at `age`:
    /// `sum_{ell >= 1} (1+h)^ell P(t,ell) p(t,ell) 1^R_{t+ell}`.
    pub fn annuity_factor(&self, age: u32, h: f64) -> f64 {
        let x = (1.0 + h) * self.discount;
        let base = self.mortality.alive_at_age(age);
        if base == 0.0 {
            return 0.0;
        }
        let max_age = self.mortality.max_age();
        let mut total = 0.0;
        let mut xl = x;
        for a in age + 1..max_age {
            if self.receiving(a) {
                total += xl * self.mortality.alive_at_age(a) / base;
            }
            xl *= x;
        }
        total
    }

    /// Value of the entitlements once this year's indexation `h` has been
    /// applied: `(1 + h) * liability(h)`. Payments at `t + ell` carry
    /// `ell + 1` years of indexation on top of `B_{t-1}`.
    pub fn indexed_liability(&self, state: &SchemeState, h: f64) -> f64 {
        (1.0 + h) * self.liability(state, h)
    }

    /// Solves `A_{t-} = theta * indexed_liability(h)` for `h` in
    /// `[h_min, h_max]` with `theta = 1`, clamping `h` and scaling `theta`
    /// when no interior solution exists. After [`Self::apply_indexation`]
    /// the liability of the new state equals `A_{t-}`.
    pub fn solve_indexation(&self, state: &SchemeState) -> Result<Indexation> {
        let assets = state.assets_pre;
        if assets < 0.0 {
            return Err(Error::NegativeAssets { assets });
        }
        let cf = self.cashflow_profile(state);
        let p = self.params;
        let value = |h: f64| (1.0 + h) * self.value_profile(&cf, h);
        let lo_value = value(p.h_min);
        if lo_value <= 0.0 {
            return Err(Error::NoLiability { assets });
        }
        if assets <= lo_value {
            return Ok(Indexation {
                h: p.h_min,
                theta: assets / lo_value,
                regime: if assets < lo_value { Regime::Cut } else { Regime::Interior },
            });
        }
        let hi_value = value(p.h_max);
        if assets >= hi_value {
            return Ok(Indexation {
                h: p.h_max,
                theta: assets / hi_value,
                regime: if assets > hi_value { Regime::Bonus } else { Regime::Interior },
            });
        }
        let (mut lo, mut hi) = (p.h_min, p.h_max);
        let mut h = 0.5 * (lo + hi);
        for _ in 0..SOLVER_MAX_ITER {
            h = 0.5 * (lo + hi);
            let v = value(h);
            if ((v - assets) / assets).abs() <= SOLVER_TOLERANCE {
                break;
            }
            if v < assets {
                lo = h;
            } else {
                hi = h;
            }
            if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
                break;
            }
        }
        Ok(Indexation {
            h,
            theta: 1.0,
            regime: Regime::Interior,
        })
    }

    /// `B_{t-} = (1 + h) theta B_{t-1}` for every generation.
    pub fn apply_indexation(&self, state: &mut SchemeState, h: f64, theta: f64) {
        let f = (1.0 + h) * theta;
        for g in &mut state.generations {
            g.nominal *= f;
        }
        state.h = h;
        state.theta = theta;
    }

    /// Converts this year's contributions into nominal benefit:
    /// `B^g_t = C^g_t / annuity_factor`. `contributions[i]` is the
    /// per-member contribution of `state.generations[i]`.
    pub fn accrue(&self, state: &mut SchemeState, h: f64, contributions: &[f64]) -> Result<()> {
        if contributions.len() != state.generations.len() {
            return Err(Error::Dimension {
                expected: state.generations.len(),
                actual: contributions.len(),
            });
        }
        let year = state.year;
        for (g, &c) in state.generations.iter_mut().zip(contributions) {
            if c < 0.0 {
                return Err(Error::InvalidParameter {
                    field: "contribution",
                    reason: "must be non-negative",
                });
            }
            if c == 0.0 {
                continue;
            }
            let age = self.mortality.entry_age + (year - g.entry_year) as u32;
            let af = self.annuity_factor(age, h);
            if !(af > 0.0) {
                return Err(Error::ZeroAnnuityFactor { age });
            }
            g.nominal += c / af;
        }
        Ok(())
    }

    /// Value handed to the longevity pool when a member of generation `g`
    /// dies: the accrual annuity factor times the member's nominal benefit.
    pub fn pooled_quantity(&self, state: &SchemeState, g: usize, h: f64) -> f64 {
        let gen = &state.generations[g];
        if gen.nominal == 0.0 {
            return 0.0;
        }
        gen.nominal * self.annuity_factor(self.age(gen, state.year), h)
    }

    /// Pays pensions, collects contributions, invests for one year at log
    /// return `F(pi, eps)` and ages the generations. Returns the total
    /// pension paid per surviving retiree of each generation (in order).
    pub fn roll_forward(&self, state: &mut SchemeState, eps: f64, contributions: &[f64]) -> Result<()> {
        if contributions.len() != state.generations.len() {
            return Err(Error::Dimension {
                expected: state.generations.len(),
                actual: contributions.len(),
            });
        }
        let year = state.year;
        let mut flow = 0.0;
        for (g, &c) in state.generations.iter().zip(contributions) {
            let age = self.mortality.entry_age + (year - g.entry_year) as u32;
            let pension = if self.receiving(age) { g.nominal } else { 0.0 };
            flow += g.alive * (c - pension);
        }
        state.assets_post = state.assets_pre + flow;
        if state.assets_post < 0.0 {
            state.failed = true;
        }
        state.assets_pre = state.assets_post * math::exp(self.market.log_return(self.params.pi, eps));
        let max_age = self.mortality.max_age();
        for g in &mut state.generations {
            let age = self.mortality.entry_age + (year - g.entry_year) as u32;
            g.alive *= 1.0 - self.mortality.q_eff(age);
        }
        let entry_age = self.mortality.entry_age;
        state
            .generations
            .retain(|g| entry_age + ((year + 1 - g.entry_year) as u32) < max_age);
        state.year += 1;
        Ok(())
    }

    fn contributions(&self, state: &SchemeState) -> Vec<f64> {
        state
            .generations
            .iter()
            .map(|g| self.contribution(self.age(g, state.year)))
            .collect()
    }

    /// One full year: new generation enters, indexation is solved and
    /// applied, contributions accrue, and the fund rolls forward. Also
    /// returns this year's pension per member of the generation that
    /// entered in `tracked`, if it is alive and retired.
    pub fn step_year(&self, state: &mut SchemeState, eps: f64, tracked: Option<usize>) -> Result<(YearRecord, Option<f64>)> {
        let year = state.year;
        if year < self.params.sim_years {
            state.generations.push(Generation {
                entry_year: year,
                alive: 1.0,
                nominal: 0.0,
            });
        }
        let solved = match self.solve_indexation(state) {
            Ok(s) => s,
            Err(Error::NoLiability { .. }) => Indexation {
                h: self.params.h0,
                theta: 1.0,
                regime: Regime::Interior,
            },
            Err(e) => return Err(e),
        };
        let assets = state.assets_pre;
        let liability = self.indexed_liability(state, solved.h);
        self.apply_indexation(state, solved.h, solved.theta);
        let contributions = self.contributions(state);
        self.accrue(state, solved.h, &contributions)?;
        let record = YearRecord {
            year,
            h: solved.h,
            theta: solved.theta,
            assets,
            liability,
            regime: solved.regime,
        };
        let pension = tracked.and_then(|entry| {
            state
                .generations
                .iter()
                .find(|g| g.entry_year == entry && self.receiving(self.age(g, year)))
                .map(|g| g.nominal)
        });
        self.roll_forward(state, eps, &contributions)?;
        Ok((record, pension))
    }

    /// Simulates one scenario path and returns the yearly ledger and the
    /// tracked generation's pension per surviving member at each age from
    /// retirement to the last possible age.
    pub fn run_path(&self, eps: &[f64]) -> Result<PathResult> {
        let mut state = SchemeState::empty(self.params.h0);
        let tracked = self.params.tracked_entry_year;
        let years = self.params.sim_years.min(eps.len());
        let mut ledger = Vec::with_capacity(years);
        let mut pensions = Vec::new();
        for e in eps.iter().take(years) {
            let (record, pension) = self.step_year(&mut state, *e, Some(tracked))?;
            ledger.push(record);
            pensions.extend(pension);
        }
        Ok(PathResult {
            ledger,
            pensions,
            failed: state.failed,
        })
    }

    /// Replacement level for the tracked generation at `age >= retirement`:
    /// final salary indexed by CPI.
    pub fn replacement_level(&self, age: u32) -> f64 {
        let ra = self.mortality.retirement_age;
        self.salary(ra - 1) * math::powi(1.0 + self.market.cpi, age - ra)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YearRecord {
    pub year: usize,
    pub h: f64,
    pub theta: f64,
    pub assets: f64,
    pub liability: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub ledger: Vec<YearRecord>,
    /// Pension of the tracked generation from retirement onwards.
    pub pensions: Vec<f64>,
    pub failed: bool,
}

/// Output of [`run_scheme`].
#[derive(Debug, Clone, PartialEq)]
pub struct SiRun {
    /// Ages of the columns of `ratios`.
    pub ages: Vec<u32>,
    /// Replacement ratios of the tracked generation, `n_scenarios x ages`.
    pub ratios: Vec<f64>,
    /// Yearly ledgers of the first `ledger_scenarios` scenarios.
    pub ledgers: Vec<Vec<YearRecord>>,
    /// Scenarios in which assets went negative after payments.
    pub failures: usize,
    pub n_scenarios: usize,
}

impl SiRun {
    pub fn row(&self, j: usize) -> &[f64] {
        let w = self.ages.len();
        &self.ratios[j * w..(j + 1) * w]
    }
}

/// Runs every scenario of `scenarios` and collects the tracked generation's
/// replacement ratios (pension over CPI-indexed final salary).
pub fn run_scheme(
    params: &SiParams,
    scenarios: &ScenarioBatch,
    market: &MarketParams,
    mortality: &CohortMortality,
    ledger_scenarios: usize,
) -> Result<SiRun> {
    let ctx = SchemeContext::new(market, mortality, params)?;
    let last_year = params.tracked_entry_year + mortality.n_years();
    if last_year > params.sim_years || last_year > scenarios.n_years() {
        return Err(Error::InvalidParameter {
            field: "si.tracked_entry_year",
            reason: "tracked generation must die out within the simulated years",
        });
    }
    let ages: Vec<u32> = (mortality.retirement_age..mortality.max_age()).collect();
    let results = par::map_indexed(scenarios.n_scenarios(), |j| ctx.run_path(scenarios.row(j)));
    let mut ratios = Vec::with_capacity(scenarios.n_scenarios() * ages.len());
    let mut ledgers = Vec::new();
    let mut failures = 0;
    for (j, r) in results.into_iter().enumerate() {
        let r = r?;
        for (age, pension) in ages.iter().zip(&r.pensions) {
            ratios.push(pension / ctx.replacement_level(*age));
        }
        if r.failed {
            failures += 1;
        }
        if j < ledger_scenarios {
            ledgers.push(r.ledger);
        }
    }
    Ok(SiRun {
        ages,
        ratios,
        ledgers,
        failures,
        n_scenarios: scenarios.n_scenarios(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mortality::MortalityTable;

    fn ctx_parts() -> (MarketParams, CohortMortality, SiParams) {
        (MarketParams::default(), CohortMortality::standard(), SiParams::default())
    }

    fn state_with(year: usize, gens: &[(usize, f64, f64)]) -> SchemeState {
        SchemeState {
            year,
            assets_pre: 0.0,
            assets_post: 0.0,
            generations: gens
                .iter()
                .map(|&(entry_year, alive, nominal)| Generation { entry_year, alive, nominal })
                .collect(),
            h: 0.02,
            theta: 1.0,
            failed: false,
        }
    }

    #[test]
    fn liability_examples() {
        let (m, c, p) = ctx_parts();
        let ctx = SchemeContext::new(&m, &c, &p).unwrap();
        // zero nominal
        let s = state_with(100, &[(50, 1.0, 0.0), (60, 1.0, 0.0)]);
        assert_eq!(ctx.liability(&s, 0.02), 0.0);
        // retiree aged 119: only the immediate payment counts
        let s = state_with(94, &[(0, 1.0, 1.0)]);
        assert_eq!(ctx.age(&s.generations[0], 94), 119);
        assert!((ctx.liability(&s, 0.05) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn liability_two_term_hand_sum() {
        // aged 64, retires next year, then certain death after one payment
        let m = MarketParams::default();
        let table = MortalityTable::new(66, alloc::vec![1.0]).unwrap();
        let c = CohortMortality::new(table, 25, 65).unwrap();
        let p = SiParams::default();
        let ctx = SchemeContext::new(&m, &c, &p).unwrap();
        let s = state_with(39, &[(0, 1.0, 1.0)]);
        let h = 0.03;
        let d = m.discount_factor(p.pi, 1).unwrap();
        // payments at ages 65 and 66 (q[66] = 1: dead by 67)
        let expected = (1.0 + h) * d + (1.0 + h) * (1.0 + h) * d * d;
        assert!((ctx.liability(&s, h) - expected).abs() < 1e-14);
    }

    fn toy_three_generations(assets_scale: f64) -> (MarketParams, CohortMortality, SiParams, SchemeState) {
        let (m, c, p) = ctx_parts();
        let mut s = state_with(100, &[(20, 0.7, 1.3), (40, 0.98, 0.9), (70, 1.0, 0.2)]);
        let ctx = SchemeContext::new(&m, &c, &p).unwrap();
        s.assets_pre = assets_scale * ctx.indexed_liability(&s, 0.035);
        (m, c, p, s)
    }

    #[test]
    fn solve_indexation_examples() {
        let (m, c, p, mut s) = toy_three_generations(1.0);
        let ctx = SchemeContext::new(&m, &c, &p).unwrap();
        s.assets_pre = ctx.indexed_liability(&s, p.h0);
        let sol = ctx.solve_indexation(&s).unwrap();
        assert!((sol.h - p.h0).abs() < 1e-9);
        assert_eq!(sol.theta, 1.0);

        s.assets_pre = 0.5 * ctx.indexed_liability(&s, p.h_min);
        let sol = ctx.solve_indexation(&s).unwrap();
        assert_eq!(sol.h, p.h_min);
        assert!((sol.theta - 0.5).abs() < 1e-15);
        assert_eq!(sol.regime, Regime::Cut);

        s.assets_pre = 2.0 * ctx.indexed_liability(&s, p.h_max);
        let sol = ctx.solve_indexation(&s).unwrap();
        assert_eq!((sol.h, sol.regime), (p.h_max, Regime::Bonus));
        assert!((sol.theta - 2.0).abs() < 1e-14);
    }

    #[test]
    fn solve_indexation_errors() {
        let (m, c, p) = ctx_parts();
        let ctx = SchemeContext::new(&m, &c, &p).unwrap();
        let mut s = state_with(10, &[(0, 1.0, 0.0)]);
        s.assets_pre = 5.0;
        assert!(matches!(ctx.solve_indexation(&s), Err(Error::NoLiability { .. })));
        s.assets_pre = -1.0;
        assert!(matches!(ctx.solve_indexation(&s), Err(Error::NegativeAssets { .. })));
    }

    #[test]
    fn solve_matches_grid_search() {
        for scale in [0.93, 1.0, 1.12, 1.3] {
            let (m, c, p, s) = toy_three_generations(scale);
            let ctx = SchemeContext::new(&m, &c, &p).unwrap();
            let sol = ctx.solve_indexation(&s).unwrap();
            // brute force over a 1e-6 grid, straight from the double sum with
            // this year's indexation applied
            let brute = |h: f64| -> f64 {
                let mut total = 0.0;
                for g in &s.generations {
                    let age = ctx.age(g, s.year);
                    for ell in 0..(120 - age) {
                        if age + ell >= 65 {
                            total += (1.0 + h).powi(ell as i32 + 1)
                                * m.discount_factor(p.pi, ell).unwrap()
                                * g.alive
                                * g.nominal
                                * c.survival(age, ell);
                        }
                    }
                }
                total
            };
            let n = ((p.h_max - p.h_min) / 1e-6).round() as usize;
            let best = (0..=n)
                .map(|i| p.h_min + i as f64 * 1e-6)
                .min_by(|a, b| {
                    (brute(*a) - s.assets_pre)
                        .abs()
                        .partial_cmp(&(brute(*b) - s.assets_pre).abs())
                        .unwrap()
                })
                .unwrap();
            if sol.regime == Regime::Interior {
                assert!((sol.h - best).abs() <= 1e-6, "scale {scale}: {} vs {best}", sol.h);
            } else {
                assert!(best == p.h_min || best == p.h_max);
            }
            let complementarity = (sol.theta - 1.0) * (sol.h - p.h_min) * (sol.h - p.h_max);
            assert!(complementarity.abs() < 1e-12);
        }
    }

    #[test]
    fn solved_indexation_is_self_consistent() {
        let (m, c, p, mut s) = toy_three_generations(1.07);
        let ctx = SchemeContext::new(&m, &c, &p).unwrap();
        let sol = ctx.solve_indexation(&s).unwrap();
        let assets = s.assets_pre;
        ctx.apply_indexation(&mut s, sol.h, sol.theta);
        let after = ctx.liability(&s, sol.h);
        assert!((after - assets).abs() / assets < 1e-8);
    }

    #[test]
    fn apply_indexation_examples() {
        let (m, c, p) = ctx_parts();
        let ctx = SchemeContext::new(&m, &c, &p).unwrap();
        let mut s = state_with(0, &[(0, 1.0, 1.0), (0, 1.0, 2.0)]);
        ctx.apply_indexation(&mut s, 0.0, 1.0);
        assert_eq!(s.generations[0].nominal, 1.0);
        ctx.apply_indexation(&mut s, 0.02, 1.0);
        assert!((s.generations[0].nominal - 1.02).abs() < 1e-15);
        let mut s = state_with(0, &[(0, 1.0, 2.0)]);
        ctx.apply_indexation(&mut s, 0.07, 0.9);
        assert!((s.generations[0].nominal - 1.926).abs() < 1e-14);
    }

    #[test]
    fn accrue_examples() {
        let (m, c, p) = ctx_parts();
        let ctx = SchemeContext::new(&m, &c, &p).unwrap();
        let mut s = state_with(5, &[(0, 1.0, 0.7)]);
        ctx.accrue(&mut s, 0.02, &[0.0]).unwrap();
        assert_eq!(s.generations[0].nominal, 0.7);

        // aged 118: one remaining payment at 119
        let mut s = state_with(93, &[(0, 1.0, 0.0)]);
        let h = 0.02;
        ctx.accrue(&mut s, h, &[1.0]).unwrap();
        let expected = 1.0 / ((1.0 + h) * m.discount_factor(p.pi, 1).unwrap() * c.survival(118, 1));
        assert!((s.generations[0].nominal - expected).abs() / expected < 1e-13);

        // past the last age nothing can be bought
        let mut s = state_with(94, &[(0, 1.0, 0.0)]);
        assert!(matches!(ctx.accrue(&mut s, h, &[1.0]), Err(Error::ZeroAnnuityFactor { .. })));

        // younger members pay more per unit when h is below expected return
        assert!(ctx.annuity_factor(30, 0.02) < ctx.annuity_factor(60, 0.02));
    }

    #[test]
    fn roll_forward_examples() {
        let m = MarketParams { mu: 0.0, r_bond: 0.0, sigma: 0.1, ..Default::default() };
        let (_, c, _) = ctx_parts();
        let p = SiParams { pi: 0.0, ..Default::default() };
        let ctx = SchemeContext::new(&m, &c, &p).unwrap();

        let mut s = state_with(3, &[(0, 1.0, 0.0)]);
        s.assets_pre = 4.0;
        ctx.roll_forward(&mut s, 0.3, &[0.0]).unwrap();
        assert_eq!(s.assets_pre, 4.0);

        let mut s = state_with(41, &[(0, 1.0, 1.0)]);
        s.assets_pre = 10.0;
        ctx.roll_forward(&mut s, 0.0, &[0.0]).unwrap();
        assert_eq!(s.assets_pre, 9.0);
        assert_eq!(s.year, 42);
    }

    #[test]
    fn two_year_ledger_matches_hand_computation() {
        // no risk, 2% bond, three generations aged 63, 64 and 70
        let m = MarketParams { mu: 0.02, r_bond: 0.02, sigma: 0.1, ..Default::default() };
        let c = CohortMortality::standard();
        let p = SiParams { pi: 0.0, ..Default::default() };
        let ctx = SchemeContext::new(&m, &c, &p).unwrap();
        let mut s = state_with(45, &[(7, 1.0, 0.4), (6, 1.0, 0.5), (0, 0.95, 1.0)]);
        s.assets_pre = 30.0;
        let growth = 0.02f64.exp();
        let mut assets = 30.0;
        let mut alive = [1.0, 1.0, 0.95];
        let mut nominal = [0.4, 0.5, 1.0];
        for year in 45..47usize {
            let contributions: Vec<f64> = s.generations.iter().map(|g| ctx.contribution(ctx.age(g, year))).collect();
            let h = 0.01;
            ctx.apply_indexation(&mut s, h, 1.0);
            ctx.accrue(&mut s, h, &contributions).unwrap();
            let ages = [25 + year - 7, 25 + year - 6, 25 + year];
            let mut flow = 0.0;
            for k in 0..3 {
                nominal[k] *= 1.0 + h;
                if contributions[k] > 0.0 {
                    nominal[k] += contributions[k] / ctx.annuity_factor(ages[k] as u32, h);
                }
                let pension = if ages[k] >= 65 { nominal[k] } else { 0.0 };
                flow += alive[k] * (contributions[k] - pension);
            }
            assets = (assets + flow) * growth;
            for k in 0..3 {
                alive[k] *= 1.0 - c.q_eff(ages[k] as u32);
            }
            ctx.roll_forward(&mut s, 0.0, &contributions).unwrap();
            assert!((s.assets_pre - assets).abs() < 1e-12);
            for k in 0..3 {
                assert!((s.generations[k].nominal - nominal[k]).abs() < 1e-14);
                assert!((s.generations[k].alive - alive[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pooled_quantity_is_nominal_times_annuity_factor() {
        let (m, c, p) = ctx_parts();
        let ctx = SchemeContext::new(&m, &c, &p).unwrap();
        let s = state_with(30, &[(0, 1.0, 0.0), (5, 1.0, 2.5), (29, 1.0, 0.1)]);
        assert_eq!(ctx.pooled_quantity(&s, 0, 0.02), 0.0);
        let v = ctx.pooled_quantity(&s, 1, 0.02);
        assert!((v - 2.5 * ctx.annuity_factor(50, 0.02)).abs() < 1e-14);
        // aged 118: single remaining term
        let s = state_with(93, &[(0, 1.0, 3.0)]);
        let d = m.discount_factor(p.pi, 1).unwrap();
        let hand = 3.0 * 1.02 * d * c.survival(118, 1);
        assert!((ctx.pooled_quantity(&s, 0, 0.02) - hand).abs() < 1e-14);
    }

    #[test]
    fn deterministic_scenarios_are_reproducible() {
        let (m, c, p) = ctx_parts();
        let sc = ScenarioBatch::constant(2, 150, 0.0);
        let a = run_scheme(&p, &sc, &m, &c, 1).unwrap();
        let b = run_scheme(&p, &sc, &m, &c, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.row(0), a.row(1));
        assert_eq!(a.ages.len(), 55);
    }

    #[test]
    fn doubling_contributions_doubles_ratios() {
        let (m, c, p) = ctx_parts();
        let sc = ScenarioBatch::generate(3, 150, 17).unwrap();
        let a = run_scheme(&p, &sc, &m, &c, 0).unwrap();
        let p2 = SiParams { contribution_rate: 2.0 * p.contribution_rate, ..p };
        let b = run_scheme(&p2, &sc, &m, &c, 0).unwrap();
        for (x, y) in a.ratios.iter().zip(&b.ratios) {
            assert!((2.0 * x - y).abs() <= 1e-9 * y.abs().max(1e-12));
        }
    }

    #[test]
    fn steady_state_under_expected_returns() {
        let (m, c, _) = ctx_parts();
        let p = SiParams { sim_years: 300, ..Default::default() };
        // eps making realised growth equal expected growth
        let target = m.expected_growth(p.pi).ln();
        let drift = m.log_return(p.pi, 0.0);
        let eps = (target - drift) / (p.pi * m.sigma);
        let ctx = SchemeContext::new(&m, &c, &p).unwrap();
        let path = alloc::vec![eps; 300];
        let mut prev: Option<f64> = None;
        for entry in 60..=120 {
            let pp = SiParams { tracked_entry_year: entry, ..p };
            let cx = SchemeContext::new(&m, &c, &pp).unwrap();
            let r = cx.run_path(&path).unwrap();
            let ratio = r.pensions[0] / cx.replacement_level(65);
            if let Some(q) = prev {
                assert!(((ratio - q) / q).abs() < 1e-3, "entry {entry}: {ratio} vs {q}");
            }
            prev = Some(ratio);
        }
        let ledger = ctx.run_path(&path).unwrap().ledger;
        let h_late: Vec<f64> = ledger[200..].iter().map(|r| r.h).collect();
        let spread = h_late.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - h_late.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-6, "indexation still moving: {spread}");
    }
}
