//! Single inequality checks and their tolerance registry.

use serde::{Deserialize, Serialize};

use crate::generators::FamilySpec;

/// One instance of an inequality `lhs <= rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub id: String,
    pub chain: Option<FamilySpec>,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub witness: Option<String>,
}

impl VerificationRecord {
    /// Records `lhs <= rhs` with the registered tolerance for `id`.
    pub fn le(id: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let id = id.into();
        let tol = tolerance(&id);
        Self::le_with(id, lhs, rhs, tol)
    }

    pub fn le_with(id: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let margin = rhs - lhs;
        Self {
            id: id.into(),
            chain: None,
            lhs,
            rhs,
            margin,
            tolerance,
            pass: margin >= -tolerance,
            witness: None,
        }
    }

    /// Records `|lhs - rhs| <= tolerance` as the margin `tol - |lhs - rhs|`.
    pub fn eq(id: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let id = id.into();
        let tol = tolerance(&id);
        let mut rec = Self::le_with(id, 0.0, 0.0, tol);
        rec.lhs = lhs;
        rec.rhs = rhs;
        rec.margin = -(lhs - rhs).abs();
        rec.pass = (lhs - rhs).abs() <= tol && lhs.is_finite() && rhs.is_finite();
        rec
    }

    /// A boolean observation with no numeric slack.
    pub fn holds(id: impl Into<String>, ok: bool) -> Self {
        let mut rec = Self::le_with(id, 0.0, if ok { 0.0 } else { -1.0 }, 0.0);
        rec.pass = ok;
        rec
    }

    pub fn with_chain(mut self, chain: &FamilySpec) -> Self {
        self.chain = Some(chain.clone());
        self
    }

    pub fn with_witness(mut self, witness: impl Into<String>) -> Self {
        self.witness = Some(witness.into());
        self
    }

    /// `lhs / rhs`, the natural scale-free summary for ratio checks.
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs
    }
}

/// Allowed violation for an inequality id.
///
/// Linear-algebra identities get 1e-10, bounds built from one solve or
/// eigensolve 1e-9, and bounds that compare two independent eigensolves 1e-8.
/// Statistical and band checks carry their own tolerance via
/// [`VerificationRecord::le_with`].
pub fn tolerance(id: &str) -> f64 {
    let family = id.split('.').next().unwrap_or(id);
    match family {
        "tail" | "identity" | "mixture_sum" | "interval" | "decomposition" | "bd_equal" => 1e-10,
        "half_set" | "geom_norm" | "rel_geom" | "qs_eigen" | "lambda_f" => 1e-8,
        "levelset" => 1e-9,
        _ => 1e-9,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_follows_margin() {
        assert!(VerificationRecord::le("hitting_rel.upper", 1.0, 1.0 - 1e-12).pass);
        assert!(!VerificationRecord::le("hitting_rel.upper", 1.0, 1.0 - 1e-6).pass);
        let eq = VerificationRecord::eq("identity.geom", 1.0, 1.0 + 1e-11);
        assert!(eq.pass);
        assert!(!VerificationRecord::eq("identity.geom", 1.0, f64::NAN).pass);
        assert!(!VerificationRecord::holds("x", false).pass);
    }
}
