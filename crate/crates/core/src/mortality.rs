//! Mortality tables and the cohort view used by both scheme designs.
//!
//! `q[x]` is the probability of dying during the year of age `x` given alive
//! at age `x`. A table covers ages `first_age..max_age` and death is certain
//! by `max_age`.
//!
//! [`CohortMortality`] indexes the same information by simulation year
//! `t = age - entry_age`. Nobody dies before age `retirement_age + 1`; the
//! death probability applied in year `t` is `q[entry_age + t - 1]`, so a
//! member alive in year `t - 1` is alive in year `t` with probability
//! `1 - q[age_t - 1]`.

use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MortalityTable {
    first_age: u32,
    q: Vec<f64>,
}

/// Gompertz–Makeham constants of the bundled default table,
/// `q(x) = 1 - exp(-(A + B c^x))`, i.e. a force of mortality held constant
/// over each year of age. Curtate life expectancy at 65 is about 88.
pub const GM_A: f64 = 1.0e-4;
pub const GM_B: f64 = 2.5e-6;
pub const GM_C: f64 = 1.125;
pub const DEFAULT_MAX_AGE: u32 = 120;

impl MortalityTable {
    pub fn new(first_age: u32, q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::Table {
                row: 0,
                reason: "table has no rows",
            });
        }
        for (i, &x) in q.iter().enumerate() {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Table {
                    row: i,
                    reason: "q must lie in [0, 1]",
                });
            }
        }
        if q[q.len() - 1] != 1.0 {
            return Err(Error::Table {
                row: q.len() - 1,
                reason: "q at the final age must be 1",
            });
        }
        Ok(Self { first_age, q })
    }

    /// Gompertz–Makeham table on ages `first_age..max_age`, with the final
    /// year forced to certain death.
    pub fn gompertz_makeham(a: f64, b: f64, c: f64, first_age: u32, max_age: u32) -> Result<Self> {
        if max_age <= first_age {
            return Err(Error::InvalidParameter {
                field: "max_age",
                reason: "must exceed first_age",
            });
        }
        let mut q: Vec<f64> = (first_age..max_age)
            .map(|x| 1.0 - math::exp(-(a + b * math::pow(c, x as f64))))
            .collect();
        *q.last_mut().unwrap() = 1.0;
        Self::new(first_age, q)
    }

    /// The bundled default: Gompertz–Makeham on ages 0..120.
    pub fn default_table() -> Self {
        Self::gompertz_makeham(GM_A, GM_B, GM_C, 0, DEFAULT_MAX_AGE)
            .expect("default constants are valid")
    }

    /// Parses the `age,q` CSV format: a header line then ascending,
    /// consecutive integer ages.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, header)) if header.replace(' ', "") == "age,q" => {}
            _ => {
                return Err(Error::Table {
                    row: 0,
                    reason: "expected header `age,q`",
                })
            }
        }
        let mut first_age = None;
        let mut q = Vec::new();
        for (row, line) in lines {
            let (age, value) = line.split_once(',').ok_or(Error::Table {
                row,
                reason: "expected two comma-separated fields",
            })?;
            let age: u32 = age.trim().parse().map_err(|_| Error::Table {
                row,
                reason: "age is not a non-negative integer",
            })?;
            let value: f64 = value.trim().parse().map_err(|_| Error::Table {
                row,
                reason: "q is not a decimal number",
            })?;
            match first_age {
                None => first_age = Some(age),
                Some(fa) => {
                    let expected = fa + q.len() as u32;
                    if age < expected {
                        return Err(Error::Table {
                            row,
                            reason: "ages must be strictly ascending without duplicates",
                        });
                    }
                    if age > expected {
                        return Err(Error::Table {
                            row,
                            reason: "gap in ages",
                        });
                    }
                }
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Table {
                    row,
                    reason: "q must lie in [0, 1]",
                });
            }
            q.push(value);
        }
        let first_age = first_age.ok_or(Error::Table {
            row: 1,
            reason: "table has no rows",
        })?;
        Self::new(first_age, q)
    }

    pub fn first_age(&self) -> u32 {
        self.first_age
    }

    /// Age by which death is certain.
    pub fn max_age(&self) -> u32 {
        self.first_age + self.q.len() as u32
    }

    pub fn rates(&self) -> &[f64] {
        &self.q
    }

    pub fn q(&self, age: u32) -> Result<f64> {
        self.check_age(age)?;
        Ok(self.q[(age - self.first_age) as usize])
    }

    fn check_age(&self, age: u32) -> Result<()> {
        if age < self.first_age || age >= self.max_age() {
            return Err(Error::AgeOutOfRange {
                age,
                first_age: self.first_age,
                max_age: self.max_age(),
            });
        }
        Ok(())
    }

    /// Probability that someone alive at `age` is alive at `age + ell`.
    pub fn survival_prob(&self, age: u32, ell: u32) -> Result<f64> {
        if age < self.first_age || age + ell > self.max_age() {
            return Err(Error::AgeOutOfRange {
                age: age.max(age + ell),
                first_age: self.first_age,
                max_age: self.max_age(),
            });
        }
        let start = (age - self.first_age) as usize;
        Ok(self.q[start..start + ell as usize]
            .iter()
            .map(|q| 1.0 - q)
            .product())
    }
}

/// One-year longevity credit rate of an infinite pool, `p / (1 - p)`.
pub fn hazard_credit(p: f64) -> Result<f64, Error> {
    if p >= 1.0 {
        return Err(Error::TerminalYear { year: 0 });
    }
    Ok(p / (1.0 - p))
}

/// Cohort view of a table: a member joins at `entry_age`, certainly
/// survives to `retirement_age + 1`, then follows the table.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortMortality {
    pub entry_age: u32,
    pub retirement_age: u32,
    table: MortalityTable,
    /// Effective death probabilities indexed by age, `0..max_age`.
    q_eff: Vec<f64>,
    /// `surv[a]`: probability of being alive at age `a`, for `a` in `0..=max_age`.
    surv: Vec<f64>,
}

impl CohortMortality {
    pub fn new(table: MortalityTable, entry_age: u32, retirement_age: u32) -> Result<Self> {
        if retirement_age <= entry_age {
            return Err(Error::InvalidParameter {
                field: "retirement_age",
                reason: "must exceed entry_age",
            });
        }
        if retirement_age + 1 >= table.max_age() {
            return Err(Error::InvalidParameter {
                field: "retirement_age",
                reason: "table ends before retirement",
            });
        }
        let max_age = table.max_age();
        let q_eff: Vec<f64> = (0..max_age)
            .map(|a| {
                if a <= retirement_age || a < table.first_age() {
                    0.0
                } else {
                    table.q[(a - table.first_age()) as usize]
                }
            })
            .collect();
        let mut surv = Vec::with_capacity(max_age as usize + 1);
        surv.push(1.0);
        for a in 0..max_age as usize {
            let s = surv[a] * (1.0 - q_eff[a]);
            surv.push(s);
        }
        Ok(Self {
            entry_age,
            retirement_age,
            table,
            q_eff,
            surv,
        })
    }

    /// Entry at 25, retirement at 65, default table.
    pub fn standard() -> Self {
        Self::new(MortalityTable::default_table(), 25, 65).expect("valid defaults")
    }

    pub fn table(&self) -> &MortalityTable {
        &self.table
    }

    pub fn max_age(&self) -> u32 {
        self.table.max_age()
    }

    /// Year index of retirement, `t_RA`.
    pub fn retirement_year(&self) -> usize {
        (self.retirement_age - self.entry_age) as usize
    }

    /// Number of simulated years: every year in which a member can be alive.
    pub fn n_years(&self) -> usize {
        (self.max_age() - self.entry_age) as usize
    }

    /// First year index in which nobody is alive, `T`.
    pub fn terminal_year(&self) -> usize {
        self.n_years()
    }

    pub fn age_at(&self, t: usize) -> u32 {
        self.entry_age + t as u32
    }

    /// Effective one-year death probability at `age`.
    pub fn q_eff(&self, age: u32) -> f64 {
        self.q_eff.get(age as usize).copied().unwrap_or(1.0)
    }

    /// Probability of being alive at `age + ell` given alive at `age`
    /// (pre-retirement deaths removed).
    pub fn survival(&self, age: u32, ell: u32) -> f64 {
        let a = age as usize;
        let b = (age + ell) as usize;
        if b >= self.surv.len() {
            return 0.0;
        }
        if self.surv[a] == 0.0 {
            return 0.0;
        }
        self.surv[b] / self.surv[a]
    }

    /// Probability of being alive at `age`, from birth under the effective
    /// rates (1 for every age up to retirement + 1).
    pub fn alive_at_age(&self, age: u32) -> f64 {
        self.surv.get(age as usize).copied().unwrap_or(0.0)
    }

    /// Probability of being alive in simulation year `t`.
    pub fn alive(&self, t: usize) -> f64 {
        self.alive_at_age(self.age_at(t))
    }

    /// `p_t`: probability of dying in year `t` given alive in year `t - 1`.
    pub fn death_prob(&self, t: usize) -> f64 {
        if t == 0 {
            return 0.0;
        }
        self.q_eff(self.age_at(t) - 1)
    }

    /// `P(tau = s)`: probability that year `s` is the first year in which
    /// the member is dead. Defined for `s` in `t_RA + 1 ..= T`.
    pub fn death_pmf(&self, s: usize) -> Result<f64> {
        let lo = self.retirement_year() + 1;
        let hi = self.terminal_year();
        if s < lo || s > hi {
            return Err(Error::YearOutOfRange { year: s, lo, hi });
        }
        Ok(self.alive(s - 1) * self.death_prob(s))
    }

    /// Probability that year `s` is the last year the member is alive,
    /// `P(tau = s + 1)`, for `s` in `t_RA ..= T - 1`.
    pub fn last_alive_pmf(&self, s: usize) -> Result<f64> {
        self.death_pmf(s + 1)
    }

    /// Infinite-pool longevity credit rate `P_inf,t = p_t / (1 - p_t)`,
    /// zero up to and including the retirement year.
    pub fn hazard_payment(&self, t: usize) -> Result<f64> {
        if t <= self.retirement_year() {
            return Ok(0.0);
        }
        hazard_credit(self.death_prob(t)).map_err(|_| Error::TerminalYear { year: t })
    }

    /// Curtate life expectancy at the retirement age, as an age.
    pub fn life_expectancy_at_retirement(&self) -> f64 {
        let ra = self.retirement_age;
        let mut e = 0.0;
        for a in ra + 1..=self.max_age() {
            e += self.survival(ra, a - ra);
        }
        ra as f64 + e
    }
}
