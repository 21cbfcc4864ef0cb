use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter {
        field: &'static str,
        reason: &'static str,
    },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("age {age} outside table range {first_age}..{max_age}")]
    AgeOutOfRange { age: u32, first_age: u32, max_age: u32 },
    #[error("year {year} outside valid range {lo}..={hi}")]
    YearOutOfRange { year: usize, lo: usize, hi: usize },
    #[error("mortality table row {row}: {reason}")]
    Table { row: usize, reason: &'static str },
    #[error("terminal year {year}: death probability is one, no survivor receives a credit")]
    TerminalYear { year: usize },
    #[error("degenerate compounding: expected one-period growth factor {factor} is not positive")]
    DegenerateCompounding { factor: f64 },
    #[error("annuity factor is zero for age {age}; generation cannot buy benefits")]
    ZeroAnnuityFactor { age: u32 },
    #[error("negative asset value {assets}")]
    NegativeAssets { assets: f64 },
    #[error("liability is zero while assets are {assets}")]
    NoLiability { assets: f64 },
    #[error("risky proportion {pi} too small to encode a longevity-credit correction")]
    Unencodable { pi: f64 },
    #[error("non-finite loss at epoch {epoch}, batch {batch}, scenario {scenario}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        scenario: usize,
    },
}
