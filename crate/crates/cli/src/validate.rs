use anyhow::Result;
use cdc_core::ekm::EkmParams;
use cdc_core::oracles::{self, DpGrids, DpProblem, GaussHermite};
use cdc_core::rng::Domain;
use cdc_core::trainer::{
    batch_loss, evaluate, train, CrraObjective, EkmObjective, Lifecycle, Objective, TrainConfig,
};
use cdc_core::{MarketParams, PolicyParams, ScenarioBatch};

use crate::config::Config;

pub const CHECKS: [&str; 4] = ["annuity", "merton", "mortality", "dp"];

pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

pub struct Options {
    /// Expected risky share in the Merton check; the closed form when absent.
    pub merton_target: Option<f64>,
    pub only: Vec<String>,
}

pub fn run(config: &Config, opts: &Options) -> Result<Vec<CheckResult>> {
    let selected = |name: &str| opts.only.is_empty() || opts.only.iter().any(|o| o == name);
    let mut out = Vec::new();
    if selected("annuity") {
        out.push(annuity(config)?);
    }
    if selected("merton") {
        out.push(merton(&config.market, opts.merton_target)?);
    }
    if selected("mortality") {
        out.push(mortality(&config.market)?);
    }
    if selected("dp") {
        out.push(dp(&config.market)?);
    }
    Ok(out)
}

fn toy_training(objective: &dyn Objective, lc: &Lifecycle, init_consume: f64) -> Result<PolicyParams> {
    let cfg = TrainConfig {
        init_consume_frac: init_consume,
        ..Default::default()
    };
    Ok(train(&cfg, cfg.initial_policy(), lc, objective, &mut |_| {})?.best)
}

fn annuity(config: &Config) -> Result<CheckResult> {
    let mortality = config.cohort_mortality()?;
    let lc = Lifecycle::standard(&config.market, &mortality, config.si.contribution_rate)?;
    let a = oracles::annuity_check(&lc, 0.0)?;
    let r0 = a.ratios[0];
    let spread = a.ratios.iter().map(|r| (r / r0 - 1.0).abs()).fold(0.0, f64::max);
    Ok(CheckResult {
        name: "annuity",
        pass: a.terminal_wealth.abs() < 1e-10 && spread < 1e-12,
        detail: format!(
            "lifestyling then indexed annuity: ratio {r0:.5}, flat to {spread:.1e}, terminal wealth {:.2e}",
            a.terminal_wealth
        ),
    })
}

fn merton(market: &MarketParams, target: Option<f64>) -> Result<CheckResult> {
    let h = 5;
    let rho = -2.0;
    let target = target.unwrap_or_else(|| oracles::merton_pi(market, rho));
    let lc = Lifecycle::retired(market, vec![0.0; h])?;
    let obj = CrraObjective::new(rho, vec![1.0; h])?;
    let policy = toy_training(&obj, &lc, 1.0 / h as f64)?;
    let eps = ScenarioBatch::generate_in(Domain::Evaluation, 2000, h, 1)?;
    let pd = evaluate(&policy, &lc, &eps)?.risky_deciles();
    // the final year's risky share multiplies no wealth
    let err = pd[..h - 1]
        .iter()
        .flat_map(|d| d.iter())
        .map(|p| (p - target).abs())
        .fold(0.0, f64::max);
    Ok(CheckResult {
        name: "merton",
        pass: err <= 0.05,
        detail: format!("power utility, no mortality: max |learned risky share - {target:.5}| = {err:.4}"),
    })
}

fn brute_three_year(m: &MarketParams, rho: f64, n: &[f64], g: &[f64]) -> Result<f64> {
    let gh = GaussHermite::new(30)?;
    let best_m = (0..=2000)
        .map(|i| gh.expect(|z| (rho * m.log_return(i as f64 * 1e-3, z)).exp()))
        .fold(f64::INFINITY, f64::min);
    let grid = || (1..1000).map(|i| i as f64 * 1e-3);
    let tail = grid()
        .map(|c1| n[1] * c1.powf(rho) + (1.0 - c1).powf(rho) * g[2].powf(rho) * best_m * n[2])
        .fold(f64::INFINITY, f64::min);
    Ok(grid()
        .map(|c0| n[0] * c0.powf(rho) + (1.0 - c0).powf(rho) * g[1].powf(rho) * best_m * tail)
        .fold(f64::INFINITY, f64::min))
}

fn mortality(market: &MarketParams) -> Result<CheckResult> {
    let rho = -2.0;
    let survival = [1.0, 0.8, 0.4];
    let credits = vec![0.0, 0.25, 1.0];
    let s = oracles::vnm_mortality_oracle(market, rho, &survival, &credits)?;
    let g: Vec<f64> = credits.iter().map(|p| 1.0 + p).collect();
    let grid = brute_three_year(market, rho, &survival, &g)?;
    let grid_err = grid / s.value() - 1.0;
    let lc = Lifecycle::retired(market, credits)?;
    let obj = CrraObjective::new(rho, survival.to_vec())?;
    let policy = toy_training(&obj, &lc, 1.0 / 3.0)?;
    let eps = ScenarioBatch::generate_in(Domain::Evaluation, 100_000, 3, 1)?;
    let net_err = batch_loss(&policy, &lc, &obj, &eps, 0..100_000)?.exp() / s.value() - 1.0;
    Ok(CheckResult {
        name: "mortality",
        pass: grid_err.abs() < 0.01 && net_err.abs() < 0.01,
        detail: format!(
            "power utility with mortality, 3 years: grid search {grid_err:+.2e}, trained network {net_err:+.2e} relative to closed form"
        ),
    })
}

fn dp(market: &MarketParams) -> Result<CheckResult> {
    let ekm = EkmParams {
        alpha: 0.5,
        ..Default::default()
    };
    let pmf = vec![0.2, 0.4, 0.4];
    let credits = vec![0.0, 0.25, 1.0];
    let problem = DpProblem {
        market: *market,
        ekm,
        pmf: pmf.clone(),
        credits: credits.clone(),
        initial_wealth: 1.0,
    };
    let sol = oracles::ekm_dp_oracle(&problem, &DpGrids::uniform(0.02, 20.0, 400, 100, 0.0, 1.5, 31))?;
    let lc = Lifecycle::retired(market, credits)?;
    let obj = EkmObjective::new(ekm, pmf)?;
    let policy = toy_training(&obj, &lc, 0.33)?;
    let eps = ScenarioBatch::generate_in(Domain::Evaluation, 100_000, 3, 1)?;
    let net = batch_loss(&policy, &lc, &obj, &eps, 0..100_000)?.exp();
    let err = net / sol.value - 1.0;
    Ok(CheckResult {
        name: "dp",
        pass: err.abs() < 0.01,
        detail: format!("EKM 3-year problem: trained -U {net:.5}, dynamic programme {:.5} ({err:+.2e})", sol.value),
    })
}
