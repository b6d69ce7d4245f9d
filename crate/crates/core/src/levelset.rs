//! Super-level sets of the quasi-stationary density `f = alpha / pi_B`.
//!
//! For a level `l`, `B_l = {f >= l}` and `U_l = E_{alpha_l}[f] / l`, where
//! `alpha_l` and `pi_l` are `alpha` and `pi` conditioned on `B_l`. On each
//! interval `(a_{i-1}, a_i]` between consecutive values of `f`, `B_l` is
//! fixed, so `U_l = K_i / l` with `K_i = E_alpha[f | f >= a_i]`.

use serde::{Deserialize, Serialize};

use crate::chain::{Chain, SubsetMask};
use crate::error::{Error, Result};
use crate::spectral;

/// `f = alpha / pi_B` on the members of `B`, with the two laws it relates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QsDensity {
    pub subset: SubsetMask,
    pub f: Vec<f64>,
    /// `pi_B`, indexed like `f`.
    pub pi_b: Vec<f64>,
    pub alpha: Vec<f64>,
    pub lambda: f64,
}

pub fn qs_density(c: &Chain, subset: &SubsetMask) -> Result<QsDensity> {
    if !c.is_reversible() {
        return Err(Error::NotReversible);
    }
    let qs = spectral::quasi_stationary(c, subset)?;
    let pi_b: Vec<f64> = subset
        .members()
        .iter()
        .map(|&x| c.pi()[x] / subset.mass())
        .collect();
    let f = qs.alpha.iter().zip(&pi_b).map(|(a, p)| a / p).collect();
    Ok(QsDensity {
        subset: subset.clone(),
        f,
        pi_b,
        alpha: qs.alpha,
        lambda: qs.lambda,
    })
}

/// `E_{pi_l}[f]` and `E_{pi_l}[f^2]` for the level set `{f >= level}`.
pub fn level_moments(f: &[f64], pi_b: &[f64], level: f64) -> Result<(f64, f64)> {
    let mut mass = 0.0;
    let mut first = 0.0;
    let mut second = 0.0;
    for (&v, &p) in f.iter().zip(pi_b) {
        if v >= level {
            mass += p;
            first += p * v;
            second += p * v * v;
        }
    }
    if mass == 0.0 {
        return Err(Error::EmptyLevelSet(level));
    }
    Ok((first / mass, second / mass))
}

/// `U_l = E_{alpha_l}[f] / l`.
pub fn u_functional(f: &[f64], alpha: &[f64], level: f64) -> Result<f64> {
    let mut mass = 0.0;
    let mut first = 0.0;
    for (&v, &a) in f.iter().zip(alpha) {
        if v >= level {
            mass += a;
            first += a * v;
        }
    }
    if mass == 0.0 || !(level > 0.0) {
        return Err(Error::EmptyLevelSet(level));
    }
    Ok(first / mass / level)
}

/// `U_l` through the stationary moments, `E_{pi_l}[f^2] / (l E_{pi_l}[f])`.
pub fn u_functional_moments(f: &[f64], pi_b: &[f64], level: f64) -> Result<f64> {
    let (m1, m2) = level_moments(f, pi_b, level)?;
    Ok(m2 / (level * m1))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelInterval {
    pub lower: f64,
    pub upper: f64,
    /// `E_alpha[f | f >= upper]`.
    pub k: f64,
    /// `k / 2`, where `U` would equal 2.
    pub root: f64,
    pub accepted: bool,
}

/// Result of the right-to-left scan for the level `L` with `U_L = 2`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelScan {
    /// Distinct values of `f`, ascending.
    pub levels: Vec<f64>,
    /// Scanned intervals, from the top level down to the accepted one.
    pub intervals: Vec<LevelInterval>,
    pub level: f64,
    pub level_set: SubsetMask,
    /// `E_{pi_L}[f]`.
    pub mean_at_level: f64,
    /// `E_{pi_L}[f^2]`.
    pub second_moment_at_level: f64,
    pub u_at_level: f64,
    /// The root sits on a value of `f` to within tolerance.
    pub on_atom: bool,
    /// Absolute tolerance the invariants should be checked with.
    pub tolerance: f64,
}

/// Groups values of `f` closer than a relative `1e-12`.
fn distinct_levels(f: &[f64]) -> Vec<f64> {
    let mut sorted = f.to_vec();
    sorted.sort_by(f64::total_cmp);
    let scale = sorted.last().copied().unwrap_or(1.0).abs().max(f64::MIN_POSITIVE);
    let mut out: Vec<f64> = Vec::new();
    for v in sorted {
        if out.last().is_none_or(|&l| v - l > 1e-12 * scale) {
            out.push(v);
        }
    }
    out
}

pub fn find_level(c: &Chain, subset: &SubsetMask) -> Result<LevelScan> {
    let dens = qs_density(c, subset)?;
    scan_levels(c, &dens)
}

pub fn scan_levels(c: &Chain, dens: &QsDensity) -> Result<LevelScan> {
    let f = &dens.f;
    let levels = distinct_levels(f);
    let scale = levels.last().copied().unwrap_or(1.0);
    let slack = 1e-12 * scale;
    let mut intervals = Vec::new();
    for i in (0..levels.len()).rev() {
        let upper = levels[i];
        let lower = if i == 0 { 0.0 } else { levels[i - 1] };
        // members whose value groups with `upper` or above
        let threshold = upper - slack;
        let (mut mass, mut first) = (0.0, 0.0);
        for (&v, &a) in f.iter().zip(&dens.alpha) {
            if v >= threshold {
                mass += a;
                first += a * v;
            }
        }
        let k = first / mass;
        let root = k / 2.0;
        let accepted = root > lower - slack && root <= upper + slack;
        intervals.push(LevelInterval {
            lower,
            upper,
            k,
            root,
            accepted,
        });
        if !accepted {
            continue;
        }
        let on_atom = (root - lower).abs() <= slack || (root - upper).abs() <= slack;
        let members: Vec<usize> = dens
            .subset
            .members()
            .iter()
            .zip(f)
            .filter(|(_, &v)| v >= threshold)
            .map(|(&x, _)| x)
            .collect();
        let level_set = SubsetMask::from_members(c, members);
        let (m1, m2) = level_moments(f, &dens.pi_b, threshold)?;
        let tolerance = if dens.lambda < 1e-12 { 1e-7 } else { 1e-9 };
        return Ok(LevelScan {
            levels,
            intervals,
            level: root,
            level_set,
            mean_at_level: m1,
            second_moment_at_level: m2,
            u_at_level: m2 / (root * m1),
            on_atom,
            tolerance,
        });
    }
    Err(Error::NoRoot(format!(
        "scanned {} intervals of {}: {:?}",
        intervals.len(),
        dens.subset.hex(),
        intervals
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lazy_path3() -> Chain {
        Chain::from_rows(&[
            vec![0.5, 0.5, 0.0],
            vec![0.25, 0.5, 0.25],
            vec![0.0, 0.5, 0.5],
        ])
        .unwrap()
    }

    #[test]
    fn density_is_normalized() {
        let c = lazy_path3();
        let b = SubsetMask::from_members(&c, vec![0, 1]);
        let d = qs_density(&c, &b).unwrap();
        let mean: f64 = d.f.iter().zip(&d.pi_b).map(|(f, p)| f * p).sum();
        assert_abs_diff_eq!(mean, 1.0, epsilon = 1e-12);
        let norm_sq: f64 = d.f.iter().zip(&d.pi_b).map(|(f, p)| p * f * f).sum();
        let max_f = d.f.iter().copied().fold(0.0, f64::max);
        assert!(max_f >= norm_sq - 1e-12);
    }

    #[test]
    fn two_atom_closed_form() {
        // B = {0, 1} on the lazy path: alpha is proportional to (1, sqrt 2)
        let c = lazy_path3();
        let b = SubsetMask::from_members(&c, vec![0, 1]);
        let d = qs_density(&c, &b).unwrap();
        let s2 = 2f64.sqrt();
        let alpha = [1.0 / (1.0 + s2), s2 / (1.0 + s2)];
        let f = [alpha[0] * 3.0, alpha[1] * 1.5];
        assert_abs_diff_eq!(d.f[0], f[0], epsilon = 1e-12);
        assert_abs_diff_eq!(d.f[1], f[1], epsilon = 1e-12);
        // f[0] > f[1]; top interval (f[1], f[0]] has root f[0]/2 < f[1]
        // so L comes from (0, f[1]] with K = E_alpha[f]
        let k = alpha[0] * f[0] + alpha[1] * f[1];
        let scan = find_level(&c, &b).unwrap();
        assert_abs_diff_eq!(scan.level, k / 2.0, epsilon = 1e-12);
        assert_eq!(scan.level_set, b);
        assert_abs_diff_eq!(scan.u_at_level, 2.0, epsilon = 1e-12);
        assert!(scan.mean_at_level > 20.0 / 17.0 * scan.level);
        assert_abs_diff_eq!(
            scan.second_moment_at_level,
            2.0 * scan.level * scan.mean_at_level,
            epsilon = 1e-12
        );
    }

    #[test]
    fn both_routes_to_u_agree() {
        let c = lazy_path3();
        let b = SubsetMask::from_members(&c, vec![0, 1]);
        let d = qs_density(&c, &b).unwrap();
        for level in [0.3, 0.9, 1.0, 1.2] {
            let a = u_functional(&d.f, &d.alpha, level).unwrap();
            let m = u_functional_moments(&d.f, &d.pi_b, level).unwrap();
            assert_abs_diff_eq!(a, m, epsilon = 1e-12);
        }
        assert!(matches!(
            u_functional(&d.f, &d.alpha, 10.0),
            Err(Error::EmptyLevelSet(_))
        ));
        // at the top atom U = 1
        let top = d.f.iter().copied().fold(0.0, f64::max);
        assert_abs_diff_eq!(u_functional(&d.f, &d.alpha, top).unwrap(), 1.0, epsilon = 1e-12);
    }
}
