//! Relaxation times, quasi-stationary distributions, spectral profiles and
//! stationary hitting times of finite Markov chains.
//!
//! The central comparison is between the relaxation time of a chain and the
//! largest expected exit time of a set of stationary mass at most one half,
//! started from stationarity restricted to the set. Every quantity is
//! computed exactly for small chains (by subset enumeration) and checked
//! against the others through [`record::VerificationRecord`]s.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod birth_death;
pub mod chain;
pub mod config;
pub mod constants;
pub mod error;
pub mod exec;
pub mod generators;
pub mod geometric;
pub mod harness;
pub mod hitting;
pub mod levelset;
pub mod linalg;
pub mod montecarlo;
pub mod record;
pub mod spectral;

pub use chain::{Chain, SubsetMask, SubstochasticKernel};
pub use config::{Config, Tolerances};
pub use error::{Error, Result};
pub use exec::Exec;
pub use generators::{Family, FamilySpec};
pub use record::VerificationRecord;
