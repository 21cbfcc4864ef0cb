use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cdc_core::ekm::EkmParams;
use cdc_core::finite::FiniteConfig;
use cdc_core::indexation::SiParams;
use cdc_core::mortality::{self, MortalityTable};
use cdc_core::policy::ARCHITECTURE;
use cdc_core::trainer::TrainConfig;
use cdc_core::{CohortMortality, MarketParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Complete run configuration. Every key is optional; missing keys take
/// their defaults and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Seed of the market scenarios used for simulation and evaluation.
    pub seed: u64,
    /// Number of simulated market scenarios.
    pub scenarios: usize,
    pub market: MarketParams,
    pub mortality: MortalityConfig,
    pub si: SiParams,
    pub ekm: EkmParams,
    pub policy: PolicyConfig,
    pub train: TrainConfig,
    pub finite: FiniteConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            scenarios: 10_000,
            market: MarketParams::default(),
            mortality: MortalityConfig::default(),
            si: SiParams::default(),
            ekm: EkmParams::default(),
            policy: PolicyConfig::default(),
            train: TrainConfig::default(),
            finite: FiniteConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MortalityConfig {
    pub entry_age: u32,
    pub retirement_age: u32,
    /// `age,q` CSV file; when absent the Gompertz–Makeham law below is used.
    pub table: Option<PathBuf>,
    pub gm_a: f64,
    pub gm_b: f64,
    pub gm_c: f64,
    pub max_age: u32,
}

impl Default for MortalityConfig {
    fn default() -> Self {
        Self {
            entry_age: 25,
            retirement_age: 65,
            table: None,
            gm_a: mortality::GM_A,
            gm_b: mortality::GM_B,
            gm_c: mortality::GM_C,
            max_age: mortality::DEFAULT_MAX_AGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// Network layout; only the built-in architecture is supported.
    pub architecture: String,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            architecture: ARCHITECTURE.to_string(),
        }
    }
}

impl Config {
    /// Reads a JSON config, or the defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// `--seed` replaces the scenario, training and finite-pool seeds.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
        self.finite.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios == 0 {
            bail!("invalid parameter `scenarios`: must be positive");
        }
        self.market.validate()?;
        self.si.validate()?;
        self.ekm.validate()?;
        self.train.validate()?;
        self.finite.validate()?;
        if self.policy.architecture != ARCHITECTURE {
            bail!(
                "invalid parameter `policy.architecture`: only \"{ARCHITECTURE}\" is supported, got \"{}\"",
                self.policy.architecture
            );
        }
        self.cohort_mortality()?;
        Ok(())
    }

    pub fn cohort_mortality(&self) -> Result<CohortMortality> {
        let m = &self.mortality;
        let table = match &m.table {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading mortality table {}", path.display()))?;
                MortalityTable::from_csv_str(&text).with_context(|| format!("mortality table {}", path.display()))?
            }
            None => MortalityTable::gompertz_makeham(m.gm_a, m.gm_b, m.gm_c, 0, m.max_age)?,
        };
        Ok(CohortMortality::new(table, m.entry_age, m.retirement_age)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, identifying the parameter set.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = Config::default();
        c.market.mu = 0.1 + 0.2;
        c.train.learning_rate = 1.0 / 3.0;
        let back: Config = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn partial_sections_take_defaults() {
        let c: Config = serde_json::from_str(r#"{"si": {"h_max": 0.05}}"#).unwrap();
        assert_eq!(c.si.h_max, 0.05);
        assert_eq!(c.si.h0, SiParams::default().h0);
        assert_eq!(c.market, MarketParams::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<Config>("{\n  \"si\": {\"hmax\": 0.05}\n}").unwrap_err();
        assert!(err.to_string().contains("hmax"));
        assert_eq!(err.line(), 2);
        assert!(serde_json::from_str::<Config>(r#"{"extra": 1}"#).is_err());
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let mut c = Config::default();
        c.si.h_min = 0.1;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("si.h_min"), "{msg}");
        let mut c = Config::default();
        c.policy.architecture = "lstm".into();
        assert!(c.validate().unwrap_err().to_string().contains("policy.architecture"));
    }

    #[test]
    fn seed_override_reaches_every_stream() {
        let mut c = Config::default();
        c.override_seed(9);
        assert_eq!((c.seed, c.train.seed, c.finite.seed), (9, 9, 9));
    }
}
