use serde::{Deserialize, Serialize};

use crate::exec::Exec;

/// Numerical tolerances shared by construction and verification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Row-sum and entry-range slack when building a chain.
    pub construction: f64,
    /// Stationarity and detailed-balance slack.
    pub verification: f64,
    /// Slack when comparing a set's mass against a threshold such as 1/2.
    pub mass: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            construction: 1e-12,
            verification: 1e-10,
            mass: 1e-12,
        }
    }
}

/// Options for operations that enumerate subsets of the state space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub tol: Tolerances,
    /// Largest state count for exhaustive subset enumeration.
    pub enum_cap: usize,
    /// Fall back to candidate witness sets above `enum_cap` instead of failing.
    pub witness_mode: bool,
    pub exec: Exec,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            enum_cap: 14,
            witness_mode: false,
            exec: Exec::default(),
        }
    }
}

impl Config {
    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_enum_cap(mut self, cap: usize) -> Self {
        self.enum_cap = cap;
        self
    }
}
