use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cdc_core::finite::simulate_finite;
use cdc_core::indexation::run_scheme;
use cdc_core::rng::Domain;
use cdc_core::trainer::{
    aggregate_leverage, cohort_sizes, evaluate, survival_weights, train, EkmObjective, Evaluation, Lifecycle,
};
use cdc_core::{stats, ScenarioBatch};
use serde_json::json;

use crate::checkpoint::{Checkpoint, CheckpointMeta};
use crate::config::Config;
use crate::output::{self, crossing_ages, decile_names, decile_table, num, read_deciles, write_csv, write_json};

pub struct Run {
    pub config: Config,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
}

impl Run {
    fn prepare(&self, command: &str) -> Result<()> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating output directory {}", self.out.display()))?;
        std::fs::write(self.out.join(format!("{command}.config.json")), self.config.to_json() + "\n")
            .context("writing effective config")?;
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.path("checkpoint.json"))
    }

    fn lifecycle(&self) -> Result<(cdc_core::CohortMortality, Lifecycle)> {
        let c = &self.config;
        let mortality = c.cohort_mortality()?;
        let lc = Lifecycle::standard(&c.market, &mortality, c.si.contribution_rate)?;
        Ok((mortality, lc))
    }

    fn evaluation_scenarios(&self, n_years: usize) -> Result<ScenarioBatch> {
        Ok(ScenarioBatch::generate_in(Domain::Evaluation, self.config.scenarios, n_years, self.config.seed)?)
    }
}

pub fn simulate_si(run: &Run) -> Result<()> {
    const CMD: &str = "simulate-si";
    run.prepare(CMD)?;
    let c = &run.config;
    let mortality = c.cohort_mortality()?;
    let eps = ScenarioBatch::generate(c.scenarios, c.si.sim_years, c.seed)?;
    let r = run_scheme(&c.si, &eps, &c.market, &mortality, 0)?;
    let weights: Vec<f64> = r.ages.iter().map(|a| mortality.alive_at_age(*a)).collect();
    let lm: Vec<f64> = (0..r.n_scenarios).map(|j| stats::weighted_mean(r.row(j), &weights)).collect();
    let deciles: Vec<[f64; 9]> = (0..r.ages.len())
        .map(|k| stats::deciles(&(0..r.n_scenarios).map(|j| r.row(j)[k]).collect::<Vec<_>>()))
        .collect();
    let median = stats::median(&lm);
    let mut meta = output::metadata(c, CMD);
    meta.push(("median_lifetime_mean".into(), num(median)));
    let (header, rows) = decile_table(&r.ages, &deciles);
    write_csv(&run.path("si_deciles.csv"), &meta, &header, &rows)?;
    let summary = json!({
        "scenarios": r.n_scenarios,
        "median_lifetime_mean": median,
        "lifetime_mean_deciles": stats::deciles(&lm),
        "failed_scenarios": r.failures,
    });
    write_json(&run.path("si_summary.json"), &summary)?;
    println!("shared indexation: median lifetime-mean replacement ratio {median:.4} over {} scenarios", r.n_scenarios);
    println!("scenarios with negative assets: {}", r.failures);
    Ok(())
}

pub fn train_cd(run: &Run) -> Result<()> {
    const CMD: &str = "train-cd";
    run.prepare(CMD)?;
    let ckpt = run.checkpoint_path();
    // fail before training if the checkpoint cannot be written
    let existed = ckpt.exists();
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(&ckpt)
        .with_context(|| format!("checkpoint path {} is not writable", ckpt.display()))?;
    if !existed {
        std::fs::remove_file(&ckpt)?;
    }
    let c = &run.config;
    let (mortality, lc) = run.lifecycle()?;
    let obj = EkmObjective::standard(c.ekm, &mortality)?;
    let mut log = Vec::new();
    let out = train(&c.train, c.train.initial_policy(), &lc, &obj, &mut |l| {
        eprintln!("epoch {:>3}  train {:.6e}  validation {:.6e}", l.epoch, l.train_loss, l.val_loss);
        log.push(vec![l.epoch.to_string(), num(l.train_loss), num(l.val_loss)]);
    })?;
    let header = ["epoch", "train_loss", "val_loss"].map(String::from);
    write_csv(&run.path("training_log.csv"), &output::metadata(c, CMD), &header, &log)?;
    let meta = CheckpointMeta {
        generator: format!("cdc-cli {}", output::VERSION),
        params_sha256: c.hash(),
        best_epoch: out.best_epoch,
        epochs: out.history.len(),
        best_val_loss: out.history.get(out.best_epoch).map_or(f64::NAN, |l| l.val_loss),
    };
    Checkpoint::new(&out.best, c.train.seed, meta).save(&ckpt)?;
    println!("best epoch {}; checkpoint written to {}", out.best_epoch, ckpt.display());
    Ok(())
}

fn load_policy(run: &Run) -> Result<cdc_core::PolicyParams> {
    let path = run.checkpoint_path();
    if !path.exists() {
        bail!("checkpoint {} not found; run train-cd first or pass --checkpoint", path.display());
    }
    Checkpoint::load(&path)?.policy()
}

fn strategy_table(ev: &Evaluation, mortality: &cdc_core::CohortMortality) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["age".to_string()];
    header.extend(decile_names("risky_"));
    header.extend(decile_names("wealth_"));
    header.extend(decile_names("consume_"));
    let risky = ev.risky_deciles();
    let wealth = ev.wealth_deciles();
    let consume = ev.consume_deciles();
    let rows = (0..ev.n_years)
        .map(|t| {
            let mut r = vec![mortality.age_at(t).to_string()];
            r.extend(risky[t].iter().map(|x| num(*x)));
            r.extend(wealth[t].iter().map(|x| num(*x)));
            match t.checked_sub(ev.retirement_year) {
                Some(k) => r.extend(consume[k].iter().map(|x| num(*x))),
                None => r.extend(std::iter::repeat_n(String::new(), 9)),
            }
            r
        })
        .collect();
    (header, rows)
}

pub fn simulate_cd(run: &Run) -> Result<()> {
    const CMD: &str = "simulate-cd";
    let policy = load_policy(run)?;
    run.prepare(CMD)?;
    let c = &run.config;
    let (mortality, lc) = run.lifecycle()?;
    let eps = run.evaluation_scenarios(lc.n_years())?;
    let ev = evaluate(&policy, &lc, &eps)?;
    let lm = ev.lifetime_means(&survival_weights(&mortality));
    let median = stats::median(&lm);
    let leverage = aggregate_leverage(&ev.wealth_deciles(), &ev.risky_deciles(), &cohort_sizes(&mortality));
    let ages: Vec<u32> = (lc.retirement_year..lc.n_years()).map(|t| mortality.age_at(t)).collect();
    let mut meta = output::metadata(c, CMD);
    meta.push(("median_lifetime_mean".into(), num(median)));
    let (header, rows) = decile_table(&ages, &ev.ratio_deciles());
    write_csv(&run.path("cd_deciles.csv"), &meta, &header, &rows)?;
    let (header, rows) = strategy_table(&ev, &mortality);
    write_csv(&run.path("cd_strategy.csv"), &output::metadata(c, CMD), &header, &rows)?;
    let summary = json!({
        "scenarios": ev.n_scenarios,
        "median_lifetime_mean": median,
        "lifetime_mean_deciles": stats::deciles(&lm),
        "aggregate_leverage_deciles": leverage,
    });
    write_json(&run.path("cd_summary.json"), &summary)?;
    println!("collective drawdown: median lifetime-mean replacement ratio {median:.4} over {} scenarios", ev.n_scenarios);
    println!(
        "aggregate risky share deciles 10/50/90: {:.3} {:.3} {:.3}",
        leverage[0], leverage[4], leverage[8]
    );
    Ok(())
}

pub fn simulate_finite_cmd(run: &Run, detail: usize) -> Result<()> {
    const CMD: &str = "simulate-finite";
    let policy = load_policy(run)?;
    run.prepare(CMD)?;
    let c = &run.config;
    let (mortality, lc) = run.lifecycle()?;
    let eps = run.evaluation_scenarios(lc.n_years())?;
    let fr = simulate_finite(&policy, &lc, &mortality, &c.finite, &eps, detail)?;
    let mut header = vec!["age".to_string(), "surviving_scenarios".to_string()];
    header.extend(decile_names("finite_"));
    header.extend(decile_names("infinite_"));
    header.extend(["infinite_median_ci_lo", "infinite_median_ci_hi"].map(String::from));
    let rows: Vec<Vec<String>> = fr
        .rows
        .iter()
        .map(|row| {
            let mut r = vec![row.age.to_string(), row.surviving_scenarios.to_string()];
            match row.finite {
                Some(d) => r.extend(d.iter().map(|x| num(*x))),
                None => r.extend(std::iter::repeat_n(String::new(), 9)),
            }
            r.extend(row.infinite.iter().map(|x| num(*x)));
            r.push(num(row.infinite_median_ci.0));
            r.push(num(row.infinite_median_ci.1));
            r
        })
        .collect();
    write_csv(&run.path("finite_overlay.csv"), &output::metadata(c, CMD), &header, &rows)?;
    if detail > 0 {
        write_finite_detail(run, &fr, &lc, &mortality)?;
    }
    let last_reported = fr.rows.iter().filter(|r| r.finite.is_some()).map(|r| r.age).max();
    let summary = json!({
        "scenarios": eps.n_scenarios(),
        "members_per_cohort": c.finite.members_per_cohort,
        "n_cohorts": c.finite.n_cohorts,
        "last_reported_age": last_reported,
        "undistributed": fr.undistributed,
        "max_conservation_error": fr.conservation_error,
    });
    write_json(&run.path("finite_summary.json"), &summary)?;
    match last_reported {
        Some(a) => println!("finite fund: deciles reported up to age {a}"),
        None => println!("finite fund: no age has enough surviving scenarios"),
    }
    println!(
        "undistributed total {:.3e}, max conservation error {:.2e}",
        fr.undistributed, fr.conservation_error
    );
    Ok(())
}

fn write_finite_detail(
    run: &Run,
    fr: &cdc_core::finite::FiniteRun,
    lc: &Lifecycle,
    mortality: &cdc_core::CohortMortality,
) -> Result<()> {
    let header = [
        "scenario",
        "cohort",
        "age",
        "survivors",
        "credit_rate",
        "wealth",
        "consumption",
        "risky",
        "eps",
        "eps_tilde",
        "ratio",
    ]
    .map(String::from);
    let mut rows = Vec::new();
    for (j, o) in fr.detail.iter().enumerate() {
        for (k, cp) in o.cohorts.iter().enumerate() {
            for t in 0..cp.n_years() {
                let ratio = o.ratio(lc, k, t).unwrap_or(f64::NAN);
                rows.push(vec![
                    j.to_string(),
                    k.to_string(),
                    mortality.age_at(t).to_string(),
                    cp.survivors[t].to_string(),
                    num(cp.credit_rate[t]),
                    num(cp.wealth[t]),
                    num(cp.consumption[t]),
                    num(cp.risky[t]),
                    num(cp.eps[t]),
                    num(cp.eps_tilde[t]),
                    num(ratio),
                ]);
            }
        }
    }
    write_csv(&run.path("finite_detail.csv"), &output::metadata(&run.config, "simulate-finite"), &header, &rows)
}

pub fn compare(run: &Run, si: &Path, cd: &Path) -> Result<()> {
    const CMD: &str = "compare";
    let a = read_deciles(si)?;
    let b = read_deciles(cd)?;
    if a.ages != b.ages {
        bail!(
            "age grids differ: {} covers {}..={} ({} rows), {} covers {}..={} ({} rows)",
            si.display(),
            a.ages[0],
            a.ages[a.ages.len() - 1],
            a.ages.len(),
            cd.display(),
            b.ages[0],
            b.ages[b.ages.len() - 1],
            b.ages.len()
        );
    }
    run.prepare(CMD)?;
    let crossing = crossing_ages(&a.ages, &a.deciles, &b.deciles);
    let mut header = vec!["age".to_string()];
    header.extend(decile_names("si_"));
    header.extend(decile_names("cd_"));
    let rows: Vec<Vec<String>> = a
        .ages
        .iter()
        .enumerate()
        .map(|(k, age)| {
            let mut r = vec![age.to_string()];
            r.extend(a.deciles[k].iter().map(|x| num(*x)));
            r.extend(b.deciles[k].iter().map(|x| num(*x)));
            r
        })
        .collect();
    let mut meta = output::metadata(&run.config, CMD);
    meta.push(("si_source".into(), si.display().to_string()));
    meta.push(("cd_source".into(), cd.display().to_string()));
    write_csv(&run.path("compare.csv"), &meta, &header, &rows)?;
    let crossing_rows: Vec<Vec<String>> = decile_names("")
        .into_iter()
        .zip(&crossing)
        .map(|(d, c)| vec![d, c.map(|a| a.to_string()).unwrap_or_default()])
        .collect();
    let header = ["decile", "crossing_age"].map(String::from);
    write_csv(&run.path("crossing.csv"), &meta, &header, &crossing_rows)?;
    let first = a.ages[0];
    println!("first age from which collective drawdown stays at or above shared indexation:");
    for (row, c) in crossing_rows.iter().zip(&crossing) {
        match c {
            Some(age) => println!("  {:>4}: age {age} ({} years after {first})", row[0], age - first),
            None => println!("  {:>4}: never", row[0]),
        }
    }
    let median = |m: &std::collections::BTreeMap<String, String>| {
        m.get("median_lifetime_mean").cloned().unwrap_or_else(|| "n/a".into())
    };
    println!(
        "median lifetime-mean replacement ratio: shared indexation {}, collective drawdown {}",
        median(&a.meta),
        median(&b.meta)
    );
    Ok(())
}
