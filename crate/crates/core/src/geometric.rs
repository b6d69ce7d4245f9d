//! Geometric time averages of a kernel, operator norms against `Pi` and the
//! relaxation times built from them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::{adjoint, stationarity_residual, symmetrize, Chain, SubsetMask};
use crate::config::Config;
use crate::constants;
use crate::error::{Error, Result};
use crate::hitting::{self, StationaryHitting};
use crate::linalg::{self, lanczos_top};
use crate::record::VerificationRecord;
use crate::spectral::{self, Grid};

/// Relative width at which the `rel_geom` bisection stops.
pub const REL_GEOM_TOL: f64 = 1e-6;
const REL_GEOM_CAP: f64 = 1e9;
const SERIES_TAIL: f64 = 1e-14;
const PSEUDO_GAP_CAP: usize = 100_000;
/// Above this size the pseudo-gap scan uses Lanczos instead of dense solves.
const PSEUDO_DENSE_LIMIT: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMethod {
    Resolvent,
    Series,
}

/// `P^{G(t)}(x, y) = P_x[X_eta = y]` with `P(eta = i) = t^{-1} (1 - 1/t)^i`.
#[derive(Clone, Debug)]
pub struct GeometricKernel {
    pub t: f64,
    pub matrix: DMatrix<f64>,
    pub method: KernelMethod,
}

fn check_time(t: f64) -> Result<()> {
    if t >= 1.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::BadParameter(format!("averaging time must be at least 1, got {t}")))
    }
}

/// `(I + (t - 1)(I - P))^{-1}`.
pub fn geometric_average(c: &Chain, t: f64) -> Result<GeometricKernel> {
    check_time(t)?;
    let n = c.n();
    let m = DMatrix::identity(n, n) * t - c.p() * (t - 1.0);
    let matrix = m.lu().try_inverse().ok_or(Error::SingularSystem)?;
    Ok(GeometricKernel {
        t,
        matrix,
        method: KernelMethod::Resolvent,
    })
}

/// `P P^{G(t)}`: the average over `eta + 1`, so that `t = 1` gives `P`.
pub fn shifted_geometric_average(c: &Chain, t: f64) -> Result<GeometricKernel> {
    let mut k = geometric_average(c, t)?;
    k.matrix = c.p() * k.matrix;
    Ok(k)
}

/// Truncated power series for `P^{G(t)}`, stopped once the remaining weight
/// falls below `1e-14`.
pub fn geometric_series(c: &Chain, t: f64) -> Result<GeometricKernel> {
    check_time(t)?;
    let n = c.n();
    let keep = 1.0 - 1.0 / t;
    let mut power = DMatrix::identity(n, n);
    let mut weight = 1.0 / t;
    let mut tail = keep;
    let mut matrix = &power * weight;
    while tail > SERIES_TAIL {
        power = &power * c.p();
        weight *= keep;
        matrix += &power * weight;
        tail *= keep;
    }
    Ok(GeometricKernel {
        t,
        matrix,
        method: KernelMethod::Series,
    })
}

fn check_stationary(c: &Chain, q: &DMatrix<f64>) -> Result<()> {
    let res = stationarity_residual(q, c.pi());
    if res > 1e-9 {
        return Err(Error::StationarityMismatch(res));
    }
    Ok(())
}

/// `S_Q = Q* Q`, reversible with respect to `pi`.
pub fn multiplicative_reversibilization(c: &Chain, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_stationary(c, q)?;
    Ok(adjoint(c.pi(), q) * q)
}

/// `||Q - Pi||` in `L^2(pi)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorNormResult {
    pub value: f64,
    /// `beta_2(Q* Q)`; equals `value^2`.
    pub via_eigen: f64,
    /// `||Q* - Pi||`.
    pub adjoint_value: f64,
    /// A maximizing `f` with `E_pi f = 0` and `||f||_2 = 1`.
    pub witness: Vec<f64>,
}

/// `D^{1/2} Q D^{-1/2} - sqrt(pi) sqrt(pi)^T`.
fn centered_sym(c: &Chain, q: &DMatrix<f64>) -> DMatrix<f64> {
    let root: Vec<f64> = c.pi().iter().map(|p| p.sqrt()).collect();
    let n = c.n();
    DMatrix::from_fn(n, n, |i, j| q[(i, j)] * root[i] / root[j] - root[i] * root[j])
}

pub fn operator_norm_minus_pi(c: &Chain, q: &DMatrix<f64>) -> Result<OperatorNormResult> {
    let s = multiplicative_reversibilization(c, q)?;
    let root: Vec<f64> = c.pi().iter().map(|p| p.sqrt()).collect();
    let sym_s = symmetrize(&s, &root);
    let eig_s = linalg::sym_eigen_desc(&sym_s);
    let via_eigen = eig_s.values.get(1).copied().unwrap_or(0.0).max(0.0);

    let nmat = centered_sym(c, q);
    let gram = nmat.transpose() * &nmat;
    let eig = linalg::sym_eigen_desc(&gram);
    let value = eig.values[0].max(0.0).sqrt().min(1.0);
    let witness: Vec<f64> = eig.vectors.column(0).iter().zip(&root).map(|(v, r)| v / r).collect();
    let adjoint_value = linalg::sym_max_eigenvalue(&(&nmat * nmat.transpose())).max(0.0).sqrt().min(1.0);
    Ok(OperatorNormResult {
        value,
        via_eigen,
        adjoint_value,
        witness,
    })
}

/// `||P^{G(t)} - Pi||`.
pub fn geometric_norm(c: &Chain, t: f64) -> Result<f64> {
    let k = geometric_average(c, t)?;
    let nmat = centered_sym(c, &k.matrix);
    Ok(linalg::sym_max_eigenvalue(&(nmat.transpose() * &nmat)).max(0.0).sqrt())
}

/// `rel^Geom(delta) = inf { t >= 1 : ||P^{G(t)} - Pi|| <= delta }`.
///
/// Doubles an upper bracket from `t = 1` and bisects to relative width
/// `1e-6`. The returned time is the upper end, so it is feasible and at most
/// `1e-6` relatively above the infimum.
pub fn rel_geom(c: &Chain, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::BadParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let mut lo = (1.0, geometric_norm(c, 1.0)?);
    if lo.1 <= delta {
        return Ok(1.0);
    }
    let mut hi = lo;
    loop {
        let t = hi.0 * 2.0;
        if t > REL_GEOM_CAP {
            return Err(Error::NoUpperBracket(REL_GEOM_CAP));
        }
        let next = (t, geometric_norm(c, t)?);
        monotone_guard(hi, next)?;
        if next.1 <= delta {
            hi = next;
            break;
        }
        lo = next;
        hi = next;
    }
    while hi.0 - lo.0 > REL_GEOM_TOL * hi.0 {
        let t = 0.5 * (lo.0 + hi.0);
        let mid = (t, geometric_norm(c, t)?);
        monotone_guard(lo, mid)?;
        monotone_guard(mid, hi)?;
        if mid.1 <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.0)
}

fn monotone_guard(a: (f64, f64), b: (f64, f64)) -> Result<()> {
    if b.1 > a.1 + 1e-12 {
        return Err(Error::NotMonotone {
            t_lo: a.0,
            f_lo: a.1,
            t_hi: b.0,
            f_hi: b.1,
        });
    }
    Ok(())
}

/// Pseudo spectral gap `max_k (1 - ||P^k - Pi||^2) / k` and the times at
/// which `||P^k - Pi||` first drops below `1/e` and `1/e^2`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PseudoGap {
    pub gamma: f64,
    pub argmax: usize,
    /// `t_rel^ps(1/e)`, if reached within the scan.
    pub t_rel_ps: Option<usize>,
    /// `t_rel^ps(1/e^2)`, if reached within the scan.
    pub t_rel_ps_sq: Option<usize>,
    /// Last power examined.
    pub scanned: usize,
    /// Scan stopped at the power cap with the maximum on the boundary.
    pub truncated: bool,
}

/// Exact maximum over `k <= kmax` (default `4 t_rel^ps(1/e)`, capped at
/// `1e5`).
///
/// Since `||N^k|| >= rho(N)^k` for `N = P - Pi`, every later `k` scores at
/// most `(1 - rho^{2k}) / k`, which decreases in `k`; the scan stops once this
/// falls below the best score and both thresholds have been crossed.
pub fn pseudo_gap(c: &Chain, kmax: Option<usize>) -> Result<PseudoGap> {
    if kmax == Some(0) {
        return Err(Error::BadParameter("kmax must be at least 1".into()));
    }
    let n = c.n();
    let nmat = centered_sym(c, c.p());
    let rho = spectral::spectral_radius(&nmat) * (1.0 - 1e-12);
    let th1 = (-1.0_f64).exp();
    let th2 = (-2.0_f64).exp();

    let mut power = nmat.clone();
    let mut vec: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618).sin()).collect();
    let mut best = (f64::NEG_INFINITY, 0usize);
    let mut first1: Option<usize> = None;
    let mut first2: Option<usize> = None;
    let mut cap = kmax.unwrap_or(PSEUDO_GAP_CAP);
    let mut k = 1;
    loop {
        let sq = if n <= PSEUDO_DENSE_LIMIT {
            linalg::sym_max_eigenvalue(&(power.transpose() * &power))
        } else {
            let op = |x: &[f64], y: &mut [f64]| {
                let v = &power * DVector::from_column_slice(x);
                let w = power.tr_mul(&v);
                y.copy_from_slice(w.as_slice());
            };
            let pair = lanczos_top(n, op, &vec, &[], 60, 1e-12)?;
            vec = pair.vector;
            pair.value
        }
        .clamp(0.0, 1.0);
        let score = (1.0 - sq) / k as f64;
        if score > best.0 {
            best = (score, k);
        }
        let norm = sq.sqrt();
        if first1.is_none() && norm <= th1 {
            first1 = Some(k);
            if kmax.is_none() {
                cap = (4 * k).min(PSEUDO_GAP_CAP);
            }
        }
        if first2.is_none() && norm <= th2 {
            first2 = Some(k);
        }
        let bound = (1.0 - rho.powi(2 * k as i32)) / k as f64;
        let done = bound <= best.0 && first1.is_some() && first2.is_some();
        if done || k >= cap {
            break;
        }
        power = &nmat * &power;
        k += 1;
    }
    Ok(PseudoGap {
        gamma: best.0,
        argmax: best.1,
        t_rel_ps: first1,
        t_rel_ps_sq: first2,
        scanned: k,
        truncated: best.1 == k && k >= cap,
    })
}

/// Residuals of the averaging identity `A = Q/k + ((k-1)/k) A Q` with
/// `Q = K(m)` and `A = K(mk)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeomIdentity {
    pub m: f64,
    pub k: f64,
    /// Frobenius residual for the shifted kernel `P P^{G(.)}`, where the
    /// identity is exact.
    pub shifted_residual: f64,
    /// Frobenius residual for `P^{G(.)}` itself; nonzero once `k > 1`.
    pub unshifted_residual: f64,
    /// Frobenius residual for `P^{G(.)}` with `A = P^{G(k(m-1)+1)}`, the time
    /// at which the identity holds for the unshifted kernel.
    pub matched_residual: f64,
    pub records: Vec<VerificationRecord>,
}

fn identity_residual(a: &DMatrix<f64>, q: &DMatrix<f64>, k: f64) -> f64 {
    (a - q / k - a * q * ((k - 1.0) / k)).norm()
}

pub fn geom_identity_check(c: &Chain, m: f64, k: f64) -> Result<GeomIdentity> {
    if m < 1.0 || k < 1.0 {
        return Err(Error::BadParameter(format!("need m, k >= 1, got m = {m}, k = {k}")));
    }
    let q_shift = shifted_geometric_average(c, m)?.matrix;
    let a_shift = shifted_geometric_average(c, m * k)?.matrix;
    let q = geometric_average(c, m)?.matrix;
    let a = geometric_average(c, m * k)?.matrix;
    let a_matched = geometric_average(c, k * (m - 1.0) + 1.0)?.matrix;
    let shifted_residual = identity_residual(&a_shift, &q_shift, k);
    let unshifted_residual = identity_residual(&a, &q, k);
    let matched_residual = identity_residual(&a_matched, &q, k);

    let tag = format!("m={m},k={k}");
    let mut records = vec![
        VerificationRecord::le("identity.geom", shifted_residual, 0.0).with_witness(tag.clone()),
        VerificationRecord::le("identity.geom_matched", matched_residual, 0.0).with_witness(tag.clone()),
    ];
    for (label, q, a) in [("", &q, &a), ("_shifted", &q_shift, &a_shift)] {
        let qn = operator_norm_minus_pi(c, q)?.value;
        let an = operator_norm_minus_pi(c, a)?.value;
        let rhs = qn / (k - (k - 1.0) * qn);
        records.push(VerificationRecord::le(format!("geom_norm.bound{label}"), an, rhs).with_witness(tag.clone()));
    }
    Ok(GeomIdentity {
        m,
        k,
        shifted_residual,
        unshifted_residual,
        matched_residual,
        records,
    })
}

/// `||Q^j - Pi|| <= ||Q - Pi||^j` for `j = 2..=max_power`.
pub fn submultiplicativity_check(c: &Chain, q: &DMatrix<f64>, max_power: u32) -> Result<Vec<VerificationRecord>> {
    let base = operator_norm_minus_pi(c, q)?.value;
    let mut power = q.clone();
    let mut out = Vec::new();
    for j in 2..=max_power {
        power = &power * q;
        let v = operator_norm_minus_pi(c, &power)?.value;
        out.push(VerificationRecord::le(format!("geom_norm.submult.j{j}"), v, base.powi(j as i32)));
    }
    Ok(out)
}

/// `(eps / (1 - eps)) rel(eps) <= rel(1/2) <= ((1 - eps) / eps) rel(1 - eps)`.
///
/// Each bisected time is feasible and at most `1e-6` relatively above its
/// infimum, so the comparison carries that relative slack.
pub fn rel_geom_comparison(c: &Chain, eps: f64) -> Result<Vec<VerificationRecord>> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::BadParameter(format!("eps must lie in (0, 1/2], got {eps}")));
    }
    let at_eps = rel_geom(c, eps)?;
    let half = rel_geom(c, 0.5)?;
    let at_co = rel_geom(c, 1.0 - eps)?;
    let ratio = eps / (1.0 - eps);
    let lower = ratio * at_eps;
    let upper = at_co / ratio;
    let slack = |a: f64, b: f64| 2.0 * REL_GEOM_TOL * a.max(b) + 1e-8;
    let tag = format!("eps={eps}");
    Ok(vec![
        VerificationRecord::le_with("rel_geom.lower", lower, half, slack(lower, half)).with_witness(tag.clone()),
        VerificationRecord::le_with("rel_geom.upper", half, upper, slack(half, upper)).with_witness(tag),
    ])
}

/// Norms of a restricted averaged kernel and the bounds relating them to
/// the spectral profile of `Q* Q`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RestrictedNorms {
    /// `||Q_B||^2`.
    pub restricted_sq: f64,
    /// `||Q_B*||^2`.
    pub restricted_adjoint_sq: f64,
    /// `||(Q* Q)_B||`.
    pub square_restricted: f64,
    /// `Lambda_{Q*Q}(pi(B))`, when enumeration is within the cap.
    pub profile: Option<f64>,
    /// `hat Lambda_{Q*Q}(pi(B))`, when enumeration is within the cap.
    pub profile_hat: Option<f64>,
    /// `||Q* Q - Pi||`.
    pub square_norm: f64,
    pub records: Vec<VerificationRecord>,
}

pub fn restricted_norm_checks(c: &Chain, subset: &SubsetMask, t: f64, cfg: &Config) -> Result<RestrictedNorms> {
    c.check_proper(subset)?;
    let q = geometric_average(c, t)?.matrix;
    let s = multiplicative_reversibilization(c, &q)?;
    let pi = c.pi();
    let m = subset.members();
    let k = m.len();
    let root = |x: usize| pi[x].sqrt();
    let qb = DMatrix::from_fn(k, k, |i, j| q[(m[i], m[j])] * root(m[i]) / root(m[j]));
    let sb = DMatrix::from_fn(k, k, |i, j| s[(m[i], m[j])] * root(m[i]) / root(m[j]));
    let restricted_sq = linalg::sym_max_eigenvalue(&(qb.transpose() * &qb));
    let restricted_adjoint_sq = linalg::sym_max_eigenvalue(&(&qb * qb.transpose()));
    let square_restricted = linalg::sym_max_eigenvalue(&sb);
    let roots: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let square_norm = linalg::sym_eigen_desc(&symmetrize(&s, &roots)).values[1].max(0.0);
    let outside = 1.0 - subset.mass();
    let gap_floor = outside * (1.0 - square_norm);
    let tag = subset.hex();

    let mut records = vec![
        VerificationRecord::eq("identity.restricted_adjoint", restricted_sq, restricted_adjoint_sq),
        VerificationRecord::le("restricted.square", restricted_sq, square_restricted),
    ];
    let (profile, profile_hat) = if c.n() <= cfg.enum_cap {
        let sq_chain = Chain::with_stationary(s.clone(), pi.to_vec(), &cfg.tol)?;
        let grid = Grid::Points(vec![subset.mass()]);
        let lam = spectral::spectral_profile(&sq_chain, &grid, cfg)?.values[0];
        let lam_hat = spectral::spectral_profile_hat(&sq_chain, &grid, cfg)?.values[0];
        records.push(VerificationRecord::le("restricted.profile", lam, 1.0 - square_restricted));
        records.push(VerificationRecord::le("restricted.profile_hat", outside * lam_hat, lam));
        records.push(VerificationRecord::le("restricted.gap", gap_floor, outside * lam_hat));
        (Some(lam), Some(lam_hat))
    } else {
        records.push(VerificationRecord::le("restricted.gap", gap_floor, 1.0 - square_restricted));
        (None, None)
    };
    let records = records.into_iter().map(|r| r.with_witness(tag.clone())).collect();
    Ok(RestrictedNorms {
        restricted_sq,
        restricted_adjoint_sq,
        square_restricted,
        profile,
        profile_hat,
        square_norm,
        records,
    })
}

/// Two-sided comparison of `t_H^pi` with `s = rel^Geom(1/e)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeomHittingCheck {
    pub hitting: StationaryHitting,
    pub rel_geom: f64,
    /// `(s - 1) / (1 - sqrt(b))`.
    pub upper: f64,
    /// `c * s` with the derived lower constant.
    pub lower: f64,
    /// `t_H^pi / s`.
    pub ratio: f64,
    pub records: Vec<VerificationRecord>,
}

pub fn geom_hitting_check(c: &Chain, cfg: &Config) -> Result<GeomHittingCheck> {
    let hitting = hitting::t_h_pi(c, cfg)?;
    let s = rel_geom(c, (-1.0_f64).exp())?;
    let upper = (s - 1.0) * constants::geom_upper_factor();
    let lower = constants::geom_lower() * s;
    let tag = hitting.argmax.hex();
    let records = vec![
        VerificationRecord::le("hitting_geom.upper", hitting.value, upper).with_witness(tag.clone()),
        VerificationRecord::le_with("hitting_geom.lower", lower, hitting.value, 1e-9 + REL_GEOM_TOL * lower)
            .with_witness(tag),
    ];
    Ok(GeomHittingCheck {
        ratio: hitting.value / s,
        hitting,
        rel_geom: s,
        upper,
        lower,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Tolerances;
    use crate::generators;
    use std::f64::consts::E;

    fn lazy_path() -> Chain {
        Chain::from_rows(&[
            vec![0.5, 0.5, 0.0],
            vec![0.25, 0.5, 0.25],
            vec![0.0, 0.5, 0.5],
        ])
        .unwrap()
    }

    #[test]
    fn resolvent_matches_series() {
        let c = generators::biased_cycle(5).unwrap();
        for t in [1.0, 1.5, 2.0, 10.0, 100.0] {
            let a = geometric_average(&c, t).unwrap().matrix;
            let b = geometric_series(&c, t).unwrap().matrix;
            assert!((a - b).amax() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn unit_time_is_identity_and_shift_is_p() {
        let c = lazy_path();
        let id = geometric_average(&c, 1.0).unwrap().matrix;
        assert!((id - DMatrix::identity(3, 3)).amax() < 1e-15);
        let p = shifted_geometric_average(&c, 1.0).unwrap().matrix;
        assert!((p - c.p()).amax() < 1e-15);
        assert!(geometric_average(&c, 0.5).is_err());
    }

    #[test]
    fn eigenvalue_map_on_lazy_path() {
        let c = lazy_path();
        // Eigenfunction (1, 0, -1) has eigenvalue 1/2, mapped to 2 / (t + 1).
        for t in [2.0, 5.0] {
            let k = geometric_average(&c, t).unwrap().matrix;
            let v = &k * DVector::from_vec(vec![1.0, 0.0, -1.0]);
            assert!((v[0] - 2.0 / (t + 1.0)).abs() < 1e-12);
            assert!(v[1].abs() < 1e-12);
        }
    }

    #[test]
    fn operator_norms() {
        let c = lazy_path();
        let r = operator_norm_minus_pi(&c, c.p()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);
        assert!((r.value.powi(2) - r.via_eigen).abs() < 1e-12);

        let cyc = generators::biased_cycle(3).unwrap();
        let r = operator_norm_minus_pi(&cyc, cyc.p()).unwrap();
        assert!((r.value - (1.0_f64 / 12.0).sqrt()).abs() < 1e-12);
        assert!((r.value - r.adjoint_value).abs() < 1e-12);
        let s = multiplicative_reversibilization(&cyc, cyc.p()).unwrap();
        assert!((&s - s.transpose()).amax() < 1e-14);
        let witness_mean: f64 = r.witness.iter().zip(cyc.pi()).map(|(f, p)| f * p).sum();
        assert!(witness_mean.abs() < 1e-12);
    }

    #[test]
    fn reversible_square_is_symmetrization() {
        let c = lazy_path();
        let s = multiplicative_reversibilization(&c, c.p()).unwrap();
        assert!((s - c.p() * c.p()).amax() < 1e-14);
        let bad = DMatrix::identity(3, 3) * 0.5 + DMatrix::from_element(3, 3, 0.5 / 3.0);
        let mut skew = bad.clone();
        skew[(0, 0)] += 0.1;
        skew[(0, 1)] -= 0.1;
        assert!(matches!(
            multiplicative_reversibilization(&c, &skew),
            Err(Error::StationarityMismatch(_))
        ));
    }

    #[test]
    fn rel_geom_on_lazy_path() {
        let s = rel_geom(&lazy_path(), 1.0 / E).unwrap();
        let exact = 2.0 * E - 1.0;
        assert!(s >= exact - 1e-9 && s <= exact * (1.0 + 2e-6), "{s}");
    }

    #[test]
    fn pseudo_gap_lazy_path() {
        let g = pseudo_gap(&lazy_path(), None).unwrap();
        assert!((g.gamma - 0.75).abs() < 1e-12);
        assert_eq!(g.argmax, 1);
        // ||P^k - Pi|| = 2^{-k}.
        assert_eq!(g.t_rel_ps, Some(2));
        assert_eq!(g.t_rel_ps_sq, Some(3));
        assert!(!g.truncated);
        let capped = pseudo_gap(&lazy_path(), Some(1)).unwrap();
        assert!(capped.truncated);
        assert_eq!(capped.t_rel_ps, None);
    }

    #[test]
    fn pseudo_gap_lanczos_agrees_with_dense() {
        let c = generators::biased_cycle(50).unwrap();
        let g = pseudo_gap(&c, None).unwrap();
        let mut power = DMatrix::identity(50, 50);
        let nmat = centered_sym(&c, c.p());
        let mut best = 0.0_f64;
        for k in 1..=g.scanned {
            power = &nmat * power;
            let sq = linalg::sym_max_eigenvalue(&(power.transpose() * &power));
            best = best.max((1.0 - sq) / k as f64);
        }
        assert!((g.gamma - best).abs() < 1e-9 * best.max(1.0), "{} vs {best}", g.gamma);
        assert!(g.t_rel_ps_sq.unwrap() <= 2 * g.t_rel_ps.unwrap());
    }

    #[test]
    fn identity_and_norm_bound() {
        let c = generators::biased_cycle(5).unwrap();
        let r = geom_identity_check(&c, 2.0, 3.0).unwrap();
        assert!(r.shifted_residual < 1e-10);
        assert!(r.matched_residual < 1e-10);
        assert!(r.unshifted_residual > 1e-3);
        assert!(r.records.iter().all(|x| x.pass), "{:?}", r.records);
        let one = geom_identity_check(&c, 1.0, 1.0).unwrap();
        assert!(one.unshifted_residual < 1e-12);
    }

    #[test]
    fn restricted_norms_on_cycle_arc() {
        let c = generators::biased_cycle(6).unwrap();
        let b = SubsetMask::from_members(&c, vec![0, 1, 2]);
        let r = restricted_norm_checks(&c, &b, 2.0, &Config::default()).unwrap();
        assert!(r.records.iter().all(|x| x.pass), "{:?}", r.records);
        assert!(r.profile.is_some());
    }

    #[test]
    fn restricted_norm_reversible_is_beta() {
        let c = lazy_path();
        let b = SubsetMask::from_members(&c, vec![0, 1]);
        let r = restricted_norm_checks(&c, &b, 3.0, &Config::default()).unwrap();
        let q = geometric_average(&c, 3.0).unwrap().matrix;
        let qc = Chain::with_stationary(q, c.pi().to_vec(), &Tolerances::default()).unwrap();
        let beta = spectral::restricted_beta(&qc, &b).unwrap();
        assert!((r.restricted_sq.sqrt() - beta).abs() < 1e-10);
    }

    #[test]
    fn geom_hitting_bounds_on_small_cycle() {
        let c = generators::biased_cycle(8).unwrap();
        let r = geom_hitting_check(&c, &Config::default()).unwrap();
        assert!(r.records.iter().all(|x| x.pass), "{:?}", r.records);
    }
}
