//! Lifecycle simulation and training of the collective-drawdown policy.
//!
//! Each simulated member starts with `initial_wealth`, pays contributions
//! while working, and from retirement consumes a fraction of the wealth
//! available each year. Survivors receive the infinite-pool longevity credit
//! `P_t w_{t-}` from the year after retirement. With `eps_t` the market
//! increment of year `t`:
//!
//! ```text
//! avail_t = C_t + (1 + P_t) w_{t-}
//! cons_t  = c_t avail_t                       (t >= t_RA)
//! w_t     = avail_t - cons_t
//! w_{t+1-} = w_t exp(F(pi_t, eps_t))
//! R_t     = cons_t / L_t
//! ```
//!
//! The network sees `(eps_{t-1}, t / (n - 1))` at step `t`, so its
//! recurrent state can reconstruct the wealth history. Training minimises
//! an [`Objective`] of the replacement ratios with Adam, differentiating
//! exactly through the recursion and the network.

use alloc::vec;
use alloc::vec::Vec;

use crate::ekm::{self, EkmParams};
use crate::market::{MarketParams, ScenarioBatch};
use crate::math;
use crate::mortality::CohortMortality;
use crate::par;
use crate::policy::{PolicyParams, Recurrent, Tape, N_PARAMS, OUTPUT};
use crate::rng::{self, Domain};
use crate::stats;
use crate::{Error, Result};

/// Deterministic inputs of one member's lifecycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Lifecycle {
    pub market: MarketParams,
    /// First year in which the member consumes, `t_RA`.
    pub retirement_year: usize,
    pub initial_wealth: f64,
    /// Contribution paid in each year.
    pub contributions: Vec<f64>,
    /// Longevity credit rate `P_t` received in each year.
    pub hazard: Vec<f64>,
    /// Replacement level `L_t` for retirement years `t_RA..n`.
    pub levels: Vec<f64>,
}

impl Lifecycle {
    /// Entry at the cohort entry age with no wealth, contributions of
    /// `contribution_rate` times a salary growing with wages, replacement
    /// level equal to final salary indexed by CPI.
    pub fn standard(market: &MarketParams, mortality: &CohortMortality, contribution_rate: f64) -> Result<Self> {
        let n = mortality.n_years();
        let t_ra = mortality.retirement_year();
        let paths = market.macro_paths(n);
        let contributions = (0..n)
            .map(|t| if t < t_ra { contribution_rate * paths.salaries[t] } else { 0.0 })
            .collect();
        let hazard = (0..n).map(|t| mortality.hazard_payment(t)).collect::<Result<Vec<_>>>()?;
        let final_salary = paths.salaries[t_ra - 1];
        let levels = (t_ra..n)
            .map(|t| final_salary * math::powi(1.0 + market.cpi, (t - t_ra) as u32))
            .collect();
        Self::new(*market, t_ra, 0.0, contributions, hazard, levels)
    }

    /// A retired member from year 0 with unit wealth and no contributions.
    pub fn retired(market: &MarketParams, hazard: Vec<f64>) -> Result<Self> {
        let n = hazard.len();
        Self::new(*market, 0, 1.0, vec![0.0; n], hazard, vec![1.0; n])
    }

    pub fn new(
        market: MarketParams,
        retirement_year: usize,
        initial_wealth: f64,
        contributions: Vec<f64>,
        hazard: Vec<f64>,
        levels: Vec<f64>,
    ) -> Result<Self> {
        market.validate()?;
        let n = contributions.len();
        if n == 0 || retirement_year >= n {
            return Err(Error::InvalidParameter {
                field: "retirement_year",
                reason: "must fall inside the horizon",
            });
        }
        if hazard.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: hazard.len(),
            });
        }
        if levels.len() != n - retirement_year {
            return Err(Error::Dimension {
                expected: n - retirement_year,
                actual: levels.len(),
            });
        }
        if contributions.iter().any(|c| !(*c >= 0.0)) || hazard.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidParameter {
                field: "lifecycle",
                reason: "contributions and credits must be non-negative",
            });
        }
        if levels.iter().any(|l| !(*l > 0.0)) || !(initial_wealth >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "lifecycle",
                reason: "levels must be positive and initial wealth non-negative",
            });
        }
        Ok(Self {
            market,
            retirement_year,
            initial_wealth,
            contributions,
            hazard,
            levels,
        })
    }

    pub fn n_years(&self) -> usize {
        self.contributions.len()
    }

    /// Number of consumption years, `n - t_RA`.
    pub fn retirement_len(&self) -> usize {
        self.n_years() - self.retirement_year
    }

    /// Credit factor `1 + P_t` applied to `w_{t-}` (1 before any credits).
    fn credit_factor(&self, t: usize) -> f64 {
        if t > self.retirement_year {
            1.0 + self.hazard[t]
        } else {
            1.0
        }
    }

    /// Wealth after payments and consumption in year `t`, given wealth
    /// `w_minus` carried in from the market. Returns `(w_t, consumption)`.
    pub fn wealth_step(&self, t: usize, w_minus: f64, consume_frac: f64) -> (f64, f64) {
        self.wealth_step_with(t, w_minus, self.credit_factor(t) - 1.0, consume_frac)
    }

    /// [`wealth_step`](Self::wealth_step) with the credit rate `P_t` supplied
    /// by the caller. The rate is ignored up to and including `t_RA`.
    pub fn wealth_step_with(&self, t: usize, w_minus: f64, credit_rate: f64, consume_frac: f64) -> (f64, f64) {
        let factor = if t > self.retirement_year { 1.0 + credit_rate } else { 1.0 };
        let avail = self.contributions[t] + factor * w_minus;
        if t >= self.retirement_year {
            let cons = consume_frac * avail;
            (avail - cons, cons)
        } else {
            (avail, 0.0)
        }
    }

    /// Replacement ratios `cons_t / L_t` over the retirement years.
    pub fn replacement_path(&self, consumption: &[f64]) -> Vec<f64> {
        consumption[self.retirement_year..]
            .iter()
            .zip(&self.levels)
            .map(|(c, l)| c / l)
            .collect()
    }

    /// Network input at step `t`.
    pub fn input(&self, eps: &[f64], t: usize) -> [f64; 2] {
        let prev = if t == 0 { 0.0 } else { eps[t - 1] };
        let n = self.n_years();
        let time = if n > 1 { t as f64 / (n - 1) as f64 } else { 0.0 };
        [prev, time]
    }
}

/// Survival probability to each retirement year, `N_t`.
pub fn survival_weights(mortality: &CohortMortality) -> Vec<f64> {
    (mortality.retirement_year()..mortality.n_years())
        .map(|t| mortality.alive(t))
        .collect()
}

/// Probability that each retirement year is the last one lived.
pub fn last_alive_weights(mortality: &CohortMortality) -> Result<Vec<f64>> {
    (mortality.retirement_year()..mortality.n_years())
        .map(|s| mortality.last_alive_pmf(s))
        .collect()
}

/// One simulated lifecycle.
#[derive(Debug, Clone, PartialEq)]
pub struct LifecyclePath {
    /// Wealth after payments and consumption, `w_t`.
    pub wealth: Vec<f64>,
    /// Wealth carried into each year before payments, `w_{t-}`.
    pub wealth_in: Vec<f64>,
    pub consumption: Vec<f64>,
    pub consume_frac: Vec<f64>,
    pub risky: Vec<f64>,
    /// Replacement ratios over the retirement years.
    pub ratios: Vec<f64>,
}

fn run_path(policy: &PolicyParams, lc: &Lifecycle, eps: &[f64], tape: Option<&mut Tape>) -> LifecyclePath {
    let n = lc.n_years();
    let inputs: Vec<[f64; 2]> = (0..n).map(|t| lc.input(eps, t)).collect();
    let outs = match tape {
        Some(tape) => {
            let (tp, outs) = policy.forward_tape(&inputs);
            *tape = tp;
            outs
        }
        None => policy.forward(&inputs),
    };
    let mut path = LifecyclePath {
        wealth: Vec::with_capacity(n),
        wealth_in: Vec::with_capacity(n),
        consumption: Vec::with_capacity(n),
        consume_frac: Vec::with_capacity(n),
        risky: Vec::with_capacity(n),
        ratios: Vec::new(),
    };
    let mut w_minus = lc.initial_wealth;
    for t in 0..n {
        let o = outs[t];
        let (w, cons) = lc.wealth_step(t, w_minus, o.consume_frac);
        path.wealth_in.push(w_minus);
        path.wealth.push(w);
        path.consumption.push(cons);
        path.consume_frac.push(o.consume_frac);
        path.risky.push(o.risky_prop);
        w_minus = w * math::exp(lc.market.log_return(o.risky_prop, eps[t]));
    }
    path.ratios = lc.replacement_path(&path.consumption);
    path
}

/// Simulates one lifecycle under `policy` along the increments `eps`.
pub fn simulate(policy: &PolicyParams, lc: &Lifecycle, eps: &[f64]) -> LifecyclePath {
    run_path(policy, lc, eps, None)
}

/// Adjoint of the wealth recursion: maps `dObjective/dR_t` to derivatives
/// with respect to the network outputs `(c_t, pi_t)`.
fn output_adjoints(lc: &Lifecycle, path: &LifecyclePath, eps: &[f64], d_ratios: &[f64]) -> Vec<[f64; OUTPUT]> {
    let n = lc.n_years();
    let t_ra = lc.retirement_year;
    let mut d_out = vec![[0.0; OUTPUT]; n];
    // adjoint of w_{t+1-}
    let mut d_wnext = 0.0;
    for t in (0..n).rev() {
        let pi = path.risky[t];
        let w = path.wealth[t];
        let mut d_w = 0.0;
        if d_wnext != 0.0 {
            let growth = math::exp(lc.market.log_return(pi, eps[t]));
            d_w = d_wnext * growth;
            d_out[t][1] = d_wnext * w * growth * lc.market.log_return_dpi(pi, eps[t]);
        }
        let d_avail = if t >= t_ra {
            let c = path.consume_frac[t];
            let d_cons = d_ratios[t - t_ra] / lc.levels[t - t_ra];
            let avail = w + path.consumption[t];
            d_out[t][0] = (d_cons - d_w) * avail;
            d_cons * c + d_w * (1.0 - c)
        } else {
            d_w
        };
        d_wnext = d_avail * lc.credit_factor(t);
    }
    d_out
}

/// Scalar training objective of a batch of replacement-ratio paths.
pub trait Objective: Sync {
    /// Number of retirement years each path covers.
    fn width(&self) -> usize;

    fn loss(&self, ratios: &[f64]) -> Result<f64>;

    /// Loss with its derivative with respect to every ratio (row-major).
    fn loss_grad(&self, ratios: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// EKM loss weighted by the probability that each year is the last alive.
#[derive(Debug, Clone, PartialEq)]
pub struct EkmObjective {
    pub params: EkmParams,
    pub weights: Vec<f64>,
}

impl EkmObjective {
    pub fn new(params: EkmParams, weights: Vec<f64>) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, weights })
    }

    pub fn standard(params: EkmParams, mortality: &CohortMortality) -> Result<Self> {
        Self::new(params, last_alive_weights(mortality)?)
    }
}

impl Objective for EkmObjective {
    fn width(&self) -> usize {
        self.weights.len()
    }

    fn loss(&self, ratios: &[f64]) -> Result<f64> {
        ekm::loss(ratios, &self.weights, &self.params)
    }

    fn loss_grad(&self, ratios: &[f64]) -> Result<(f64, Vec<f64>)> {
        ekm::loss_grad(ratios, &self.weights, &self.params)
    }
}

/// Time-additive power utility `E sum_t w_t R_t^rho / rho` for `rho < 0`,
/// trained through `ln(E sum_t w_t R_t^rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrraObjective {
    pub rho: f64,
    /// Survival weight of each year.
    pub weights: Vec<f64>,
}

impl CrraObjective {
    pub fn new(rho: f64, weights: Vec<f64>) -> Result<Self> {
        if !(rho < 0.0) {
            return Err(Error::InvalidParameter {
                field: "rho",
                reason: "power objective requires rho < 0",
            });
        }
        Ok(Self { rho, weights })
    }

    fn per_path(&self, row: &[f64]) -> f64 {
        row.iter()
            .zip(&self.weights)
            .map(|(r, w)| w * math::pow(ekm::floored(*r), self.rho))
            .sum()
    }
}

impl Objective for CrraObjective {
    fn width(&self) -> usize {
        self.weights.len()
    }

    fn loss(&self, ratios: &[f64]) -> Result<f64> {
        let m = self.weights.len();
        let n = ratios.len() / m;
        let total = math::pairwise_sum_by(n, |j| self.per_path(&ratios[j * m..(j + 1) * m]));
        Ok(math::ln(total / n as f64))
    }

    fn loss_grad(&self, ratios: &[f64]) -> Result<(f64, Vec<f64>)> {
        let m = self.weights.len();
        let n = ratios.len() / m;
        let total = math::pairwise_sum_by(n, |j| self.per_path(&ratios[j * m..(j + 1) * m]));
        let grad = ratios
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if *r < ekm::CONSUMPTION_FLOOR {
                    0.0
                } else {
                    self.weights[i % m] * self.rho * math::pow(*r, self.rho - 1.0) / total
                }
            })
            .collect();
        Ok((math::ln(total / n as f64), grad))
    }
}

fn check_width(lc: &Lifecycle, objective: &dyn Objective, eps: &ScenarioBatch) -> Result<()> {
    if objective.width() != lc.retirement_len() {
        return Err(Error::Dimension {
            expected: lc.retirement_len(),
            actual: objective.width(),
        });
    }
    if eps.n_years() < lc.n_years() {
        return Err(Error::Dimension {
            expected: lc.n_years(),
            actual: eps.n_years(),
        });
    }
    Ok(())
}

/// Loss of `policy` on scenarios `rows` of `eps`.
pub fn batch_loss(
    policy: &PolicyParams,
    lc: &Lifecycle,
    objective: &dyn Objective,
    eps: &ScenarioBatch,
    rows: core::ops::Range<usize>,
) -> Result<f64> {
    check_width(lc, objective, eps)?;
    let paths = par::map_indexed(rows.len(), |k| simulate(policy, lc, eps.row(rows.start + k)).ratios);
    objective.loss(&paths.concat())
}

/// Loss of `policy` on scenarios `rows` and its gradient with respect to
/// every network parameter.
pub fn batch_loss_grad(
    policy: &PolicyParams,
    lc: &Lifecycle,
    objective: &dyn Objective,
    eps: &ScenarioBatch,
    rows: core::ops::Range<usize>,
) -> Result<(f64, Vec<f64>)> {
    check_width(lc, objective, eps)?;
    let m = lc.retirement_len();
    let forward = par::map_indexed(rows.len(), |k| {
        let mut tape = Tape::default();
        let path = run_path(policy, lc, eps.row(rows.start + k), Some(&mut tape));
        (tape, path)
    });
    let ratios: Vec<f64> = forward.iter().flat_map(|(_, p)| p.ratios.iter().copied()).collect();
    let (loss, d_ratios) = objective.loss_grad(&ratios)?;
    if !loss.is_finite() {
        let bad = forward
            .iter()
            .position(|(_, p)| p.ratios.iter().any(|r| !r.is_finite()))
            .unwrap_or(0);
        return Err(Error::NonFiniteLoss {
            epoch: 0,
            batch: 0,
            scenario: rows.start + bad,
        });
    }
    let grads = par::map_indexed(rows.len(), |k| {
        let (tape, path) = &forward[k];
        let eps_row = eps.row(rows.start + k);
        let d_out = output_adjoints(lc, path, eps_row, &d_ratios[k * m..(k + 1) * m]);
        let mut g = vec![0.0; N_PARAMS];
        policy.backward(tape, &d_out, &mut g).map(|_| g)
    });
    let grads = grads.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((loss, math::pairwise_sum_vecs(&grads)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields, default)
)]
pub struct TrainConfig {
    pub epochs: usize,
    pub scenarios_per_epoch: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_scenarios: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Starting consumption fraction, set through the output bias.
    pub init_consume_frac: f64,
    /// Starting risky proportion, set through the output bias.
    pub init_risky: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            scenarios_per_epoch: 10_000,
            batch_size: 100,
            learning_rate: 0.001,
            validation_scenarios: 10_000,
            seed: 1,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            init_consume_frac: 0.05,
            init_risky: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason| Err(Error::InvalidParameter { field, reason });
        if self.batch_size == 0 || self.scenarios_per_epoch < self.batch_size {
            return bad("train.batch_size", "must be positive and at most scenarios_per_epoch");
        }
        if self.validation_scenarios == 0 {
            return bad("train.validation_scenarios", "must be positive");
        }
        if !(self.learning_rate >= 0.0) {
            return bad("train.learning_rate", "must be non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return bad("train.beta1", "Adam moments need betas in [0, 1) and positive epsilon");
        }
        if !(self.init_consume_frac > 0.0 && self.init_consume_frac < 1.0) {
            return bad("train.init_consume_frac", "must lie strictly between 0 and 1");
        }
        Ok(())
    }

    /// Scenario seed of training epoch `epoch`.
    pub fn epoch_seed(&self, epoch: usize) -> u64 {
        rng::mix(&[self.seed, epoch as u64])
    }

    /// Network initialisation used by [`train`].
    pub fn initial_policy(&self) -> PolicyParams {
        let mut p = PolicyParams::init(self.seed);
        let c = self.init_consume_frac;
        p.set_output_bias(math::ln(c / (1.0 - c)), self.init_risky);
        p
    }
}

/// Adam optimiser state.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - math::powi(self.beta1, self.t as u32);
        let c2 = 1.0 - math::powi(self.beta2, self.t as u32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (math::sqrt(vh) + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean of the minibatch losses.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation loss.
    pub best: PolicyParams,
    pub best_epoch: usize,
    /// Parameters after the last epoch.
    pub last: PolicyParams,
    pub history: Vec<EpochLog>,
}

/// Minibatch Adam training. Each epoch draws fresh training scenarios; the
/// validation set is fixed and drawn from a separate stream domain.
/// `on_epoch` is called after every epoch.
pub fn train(
    config: &TrainConfig,
    initial: PolicyParams,
    lc: &Lifecycle,
    objective: &dyn Objective,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    let n = lc.n_years();
    let validation = ScenarioBatch::generate_in(Domain::Validation, config.validation_scenarios, n, config.seed)?;
    let mut params = initial;
    let mut adam = Adam::new(N_PARAMS, config.learning_rate, config.beta1, config.beta2, config.adam_eps);
    let mut history = Vec::with_capacity(config.epochs);
    let mut best = (f64::INFINITY, params.clone(), 0);
    let batches = config.scenarios_per_epoch / config.batch_size;
    for epoch in 0..config.epochs {
        let scenarios = ScenarioBatch::generate_in(Domain::Training, config.scenarios_per_epoch, n, config.epoch_seed(epoch))?;
        let mut losses = Vec::with_capacity(batches);
        for b in 0..batches {
            let rows = b * config.batch_size..(b + 1) * config.batch_size;
            let (loss, grad) = batch_loss_grad(&params, lc, objective, &scenarios, rows).map_err(|e| match e {
                Error::NonFiniteLoss { scenario, .. } => Error::NonFiniteLoss { epoch, batch: b, scenario },
                other => other,
            })?;
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    scenario: b * config.batch_size,
                });
            }
            losses.push(loss);
            adam.step(params.as_flat_mut(), &grad);
        }
        let val_loss = batch_loss(&params, lc, objective, &validation, 0..validation.n_scenarios())?;
        let log = EpochLog {
            epoch,
            train_loss: stats::mean(&losses),
            val_loss,
        };
        on_epoch(&log);
        history.push(log);
        if val_loss < best.0 {
            best = (val_loss, params.clone(), epoch);
        }
    }
    Ok(TrainOutcome {
        best: best.1,
        best_epoch: best.2,
        last: params,
        history,
    })
}

/// Outputs of a policy on an evaluation scenario set, row-major by scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub n_scenarios: usize,
    pub n_years: usize,
    pub retirement_year: usize,
    /// `n_scenarios x (n_years - retirement_year)`.
    pub ratios: Vec<f64>,
    /// `n_scenarios x n_years`, wealth after consumption.
    pub wealth: Vec<f64>,
    pub risky: Vec<f64>,
    pub consume_frac: Vec<f64>,
}

impl Evaluation {
    pub fn width(&self) -> usize {
        self.n_years - self.retirement_year
    }

    pub fn ratio_row(&self, j: usize) -> &[f64] {
        let w = self.width();
        &self.ratios[j * w..(j + 1) * w]
    }

    fn column(data: &[f64], width: usize, k: usize) -> Vec<f64> {
        data.iter().skip(k).step_by(width).copied().collect()
    }

    /// Deciles of the replacement ratio for each retirement year.
    pub fn ratio_deciles(&self) -> Vec<[f64; 9]> {
        (0..self.width())
            .map(|k| stats::deciles(&Self::column(&self.ratios, self.width(), k)))
            .collect()
    }

    /// Deciles of wealth for each year.
    pub fn wealth_deciles(&self) -> Vec<[f64; 9]> {
        (0..self.n_years)
            .map(|k| stats::deciles(&Self::column(&self.wealth, self.n_years, k)))
            .collect()
    }

    /// Deciles of the risky proportion for each year.
    pub fn risky_deciles(&self) -> Vec<[f64; 9]> {
        (0..self.n_years)
            .map(|k| stats::deciles(&Self::column(&self.risky, self.n_years, k)))
            .collect()
    }

    /// Deciles of the consumption fraction for each retirement year.
    pub fn consume_deciles(&self) -> Vec<[f64; 9]> {
        (self.retirement_year..self.n_years)
            .map(|k| stats::deciles(&Self::column(&self.consume_frac, self.n_years, k)))
            .collect()
    }

    /// Lifetime-mean replacement ratio of every scenario.
    pub fn lifetime_means(&self, weights: &[f64]) -> Vec<f64> {
        (0..self.n_scenarios).map(|j| lifetime_mean(self.ratio_row(j), weights)).collect()
    }
}

/// Runs `policy` over every scenario of `eps`.
pub fn evaluate(policy: &PolicyParams, lc: &Lifecycle, eps: &ScenarioBatch) -> Result<Evaluation> {
    if eps.n_years() < lc.n_years() {
        return Err(Error::Dimension {
            expected: lc.n_years(),
            actual: eps.n_years(),
        });
    }
    let n = lc.n_years();
    let paths = par::map_indexed(eps.n_scenarios(), |j| {
        let row = eps.row(j);
        let mut state = Recurrent::default();
        let mut w_minus = lc.initial_wealth;
        let mut wealth = Vec::with_capacity(n);
        let mut risky = Vec::with_capacity(n);
        let mut frac = Vec::with_capacity(n);
        let mut cons = Vec::with_capacity(n);
        for t in 0..n {
            let o = policy.step(&mut state, lc.input(row, t));
            let (w, c) = lc.wealth_step(t, w_minus, o.consume_frac);
            wealth.push(w);
            risky.push(o.risky_prop);
            frac.push(o.consume_frac);
            cons.push(c);
            w_minus = w * math::exp(lc.market.log_return(o.risky_prop, row[t]));
        }
        (lc.replacement_path(&cons), wealth, risky, frac)
    });
    let mut out = Evaluation {
        n_scenarios: eps.n_scenarios(),
        n_years: n,
        retirement_year: lc.retirement_year,
        ratios: Vec::with_capacity(eps.n_scenarios() * lc.retirement_len()),
        wealth: Vec::with_capacity(eps.n_scenarios() * n),
        risky: Vec::with_capacity(eps.n_scenarios() * n),
        consume_frac: Vec::with_capacity(eps.n_scenarios() * n),
    };
    for (r, w, p, c) in paths {
        out.ratios.extend(r);
        out.wealth.extend(w);
        out.risky.extend(p);
        out.consume_frac.extend(c);
    }
    Ok(out)
}

/// Survival-weighted mean `sum N_t z_t / sum N_t`.
pub fn lifetime_mean(ratios: &[f64], weights: &[f64]) -> f64 {
    stats::weighted_mean(ratios, weights)
}

/// Fund-level risky share when every age is represented by one synthetic
/// generation sitting at decile `q` of both wealth and risky proportion:
/// `sum_t N_t pi_t W_t / sum_t N_t W_t` for each decile.
pub fn aggregate_leverage(wealth_deciles: &[[f64; 9]], risky_deciles: &[[f64; 9]], cohort_sizes: &[f64]) -> [f64; 9] {
    core::array::from_fn(|q| {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((w, p), n) in wealth_deciles.iter().zip(risky_deciles).zip(cohort_sizes) {
            num += n * p[q] * w[q];
            den += n * w[q];
        }
        num / den
    })
}

/// Expected number alive in every year of the cohort, `N_t`.
pub fn cohort_sizes(mortality: &CohortMortality) -> Vec<f64> {
    (0..mortality.n_years()).map(|t| mortality.alive(t)).collect()
}
