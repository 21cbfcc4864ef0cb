//! Simulation and optimisation engine for collective pension schemes.
//!
//! The crate covers the internal longevity-insurance market, a dynamic-accrual
//! shared-indexation scheme, and a collective-drawdown scheme whose
//! consumption/investment policy is a small recurrent network trained on
//! simulated lifecycles. Everything here is pure computation: file formats,
//! configuration and the command line live in `cdc-cli`.
//!
//! The crate is `no_std` (with `alloc`) unless the `std` feature is enabled.
//! The `parallel` feature runs scenario batches on a rayon pool; results are
//! reduced in scenario order so outputs do not depend on the thread count.

#![cfg_attr(all(not(feature = "std"), not(test)), no_std)]
// NaN must fail validation, so negated comparisons are intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod ekm;
mod error;
pub mod finite;
pub mod indexation;
pub mod market;
pub mod math;
pub mod mortality;
pub mod oracles;
mod par;
pub mod policy;
pub mod pool;
pub mod rng;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result};
pub use market::{MarketParams, ScenarioBatch};
pub use mortality::{CohortMortality, MortalityTable};
pub use policy::PolicyParams;
