//! Expected hitting times, stationary exit times of sets and the quantities
//! built from them.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{Chain, SubsetMask};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::generators::PendantPathExample;
use crate::levelset;
use crate::linalg::{self, conjugate_gradient};
use crate::record::VerificationRecord;
use crate::spectral::{self, Grid, Profile, DENSE_LIMIT};

/// Solution of `(I - P_{A^c}) h = 1` on `A^c`, extended by zero on `A`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HittingSolve {
    pub target: SubsetMask,
    /// `E_x[T_A]` for every state `x`.
    pub expectations: Vec<f64>,
    /// Max-norm residual of the linear system.
    pub residual: f64,
}

impl HittingSolve {
    /// `E_mu[T_A]` for a distribution `mu` over all states.
    pub fn mean_under(&self, mu: &[f64]) -> f64 {
        mu.iter().zip(&self.expectations).map(|(m, h)| m * h).sum()
    }
}

pub fn expected_hitting(c: &Chain, target: &SubsetMask) -> Result<HittingSolve> {
    c.check_proper(target)?;
    let rest = target.complement(c);
    let m = rest.members();
    let k = m.len();
    let local = if k > DENSE_LIMIT && c.is_reversible() {
        sparse_exit_solve(c, m)?
    } else {
        let a = DMatrix::from_fn(k, k, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - c.p()[(m[i], m[j])]
        });
        let (x, _) = linalg::solve_refined(&a, &DVector::from_element(k, 1.0))?;
        x.iter().copied().collect()
    };
    let mut expectations = vec![0.0; c.n()];
    for (&x, h) in m.iter().zip(&local) {
        expectations[x] = *h;
    }
    let residual = exit_residual(c, m, &local);
    Ok(HittingSolve {
        target: target.clone(),
        expectations,
        residual,
    })
}

fn exit_residual(c: &Chain, members: &[usize], h: &[f64]) -> f64 {
    let mut local = vec![usize::MAX; c.n()];
    for (i, &x) in members.iter().enumerate() {
        local[x] = i;
    }
    members
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (cols, vals) = c.sparse().row(x);
            let ph: f64 = cols
                .iter()
                .zip(vals)
                .filter(|(&y, _)| local[y] != usize::MAX)
                .map(|(&y, &p)| p * h[local[y]])
                .sum();
            (h[i] - ph - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Conjugate gradients on the symmetrized `I - P_B` of a reversible chain.
fn sparse_exit_solve(c: &Chain, members: &[usize]) -> Result<Vec<f64>> {
    let pi = c.pi();
    let mut local = vec![usize::MAX; c.n()];
    for (i, &x) in members.iter().enumerate() {
        local[x] = i;
    }
    let s: Vec<f64> = members.iter().map(|&x| pi[x].sqrt()).collect();
    let op = |x: &[f64], y: &mut [f64]| {
        for (i, &row) in members.iter().enumerate() {
            let (cols, vals) = c.sparse().row(row);
            let mut acc = 0.0;
            for (&col, &p) in cols.iter().zip(vals) {
                let j = local[col];
                if j != usize::MAX {
                    acc += p * (pi[row] / pi[col]).sqrt() * x[j];
                }
            }
            y[i] = x[i] - acc;
        }
    };
    let (g, _, _) = conjugate_gradient(op, &s, 1e-14, 20 * members.len() + 1000)?;
    Ok(g.iter().zip(&s).map(|(v, w)| v / w).collect())
}

/// `E_{pi_B}[T_{B^c}]`.
pub fn stationary_exit(c: &Chain, subset: &SubsetMask) -> Result<f64> {
    c.check_proper(subset)?;
    let solve = expected_hitting(c, &subset.complement(c))?;
    Ok(solve.mean_under(&c.conditioned_distribution(subset)?))
}

/// Exit time from a small set given as a bitmask, without building masks.
fn exit_bits(c: &Chain, bits: u64) -> Result<f64> {
    let m: Vec<usize> = (0..c.n()).filter(|&x| bits >> x & 1 == 1).collect();
    let k = m.len();
    let a = DMatrix::from_fn(k, k, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - c.p()[(m[i], m[j])]
    });
    let (h, _) = linalg::solve_refined(&a, &DVector::from_element(k, 1.0))?;
    let mass: f64 = m.iter().map(|&x| c.pi()[x]).sum();
    Ok(m.iter().zip(h.iter()).map(|(&x, v)| c.pi()[x] * v).sum::<f64>() / mass)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HitMethod {
    /// Every candidate set enumerated; the value is exact.
    Exact,
    /// Arcs of a cycle; exact for nearest-neighbour cycles.
    Arcs,
    /// Heuristic candidates; the value is a lower bound.
    Witness,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StationaryHitting {
    pub value: f64,
    /// The small set `B = A^c` attaining the maximum.
    pub argmax: SubsetMask,
    pub method: HitMethod,
}

fn max_over<'a, I>(c: &Chain, sets: I, cfg: &Config) -> Result<(f64, u64)>
where
    I: IntoIterator<Item = &'a u64>,
{
    let masks: Vec<u64> = sets.into_iter().copied().collect();
    let values = cfg.exec.map(&masks, |&m| exit_bits(c, m));
    let mut best = (f64::NEG_INFINITY, 0);
    for (m, v) in masks.into_iter().zip(values) {
        let v = v?;
        if v > best.0 {
            best = (v, m);
        }
    }
    Ok(best)
}

/// Whether the support graph is the cycle `0 - 1 - ... - (n-1) - 0`.
pub fn is_cycle(c: &Chain) -> bool {
    let n = c.n();
    n >= 3
        && (0..n).all(|x| {
            let mut nb = c.neighbors(x).to_vec();
            nb.sort_unstable();
            let mut want = vec![(x + 1) % n, (x + n - 1) % n];
            want.sort_unstable();
            nb == want
        })
}

/// `t_H^pi = max { E_{pi_B}[T_{B^c}] : pi(B) <= 1/2 }`.
///
/// Reversible chains enumerate connected `B` (a disconnected `B` averages its
/// components); other chains enumerate every `B`. Above the enumeration cap,
/// cycles fall back to arcs and, in witness mode, other chains to candidate
/// sets.
pub fn t_h_pi(c: &Chain, cfg: &Config) -> Result<StationaryHitting> {
    let half = 0.5;
    let masks = if c.is_reversible() {
        c.connected_masks(half, cfg)
    } else {
        c.all_masks(half, cfg)
    };
    match masks {
        Ok(masks) => {
            let (value, bits) = max_over(c, &masks, cfg)?;
            Ok(StationaryHitting {
                value,
                argmax: SubsetMask::from_bits(c, bits),
                method: HitMethod::Exact,
            })
        }
        Err(Error::EnumerationTooLarge { .. }) if is_cycle(c) => t_h_pi_arcs(c, cfg),
        Err(Error::EnumerationTooLarge { .. }) if cfg.witness_mode => {
            let cands = spectral::witness_candidates(c, half + cfg.tol.mass)?;
            let values = cfg.exec.map(&cands, |s| stationary_exit(c, s));
            let mut best: Option<(f64, &SubsetMask)> = None;
            for (s, v) in cands.iter().zip(values) {
                let v = v?;
                if best.is_none_or(|b| v > b.0) {
                    best = Some((v, s));
                }
            }
            let (value, set) = best.ok_or(Error::EmptySubset)?;
            Ok(StationaryHitting {
                value,
                argmax: set.clone(),
                method: HitMethod::Witness,
            })
        }
        Err(e) => Err(e),
    }
}

/// Arcs `{s, s+1, ..., s+len-1}` (mod n) with mass at most `max_mass`.
pub fn cycle_arcs(c: &Chain, max_mass: f64) -> Vec<SubsetMask> {
    let n = c.n();
    let mut out = Vec::new();
    for start in 0..n {
        let mut mass = 0.0;
        for len in 1..n {
            mass += c.pi()[(start + len - 1) % n];
            if mass > max_mass {
                break;
            }
            out.push(SubsetMask::from_members(
                c,
                (0..len).map(|i| (start + i) % n).collect(),
            ));
        }
    }
    out
}

/// `t_H^pi` over arcs of a cycle.
pub fn t_h_pi_arcs(c: &Chain, cfg: &Config) -> Result<StationaryHitting> {
    if !is_cycle(c) {
        return Err(Error::BadParameter("arc enumeration needs a cycle".into()));
    }
    let arcs = cycle_arcs(c, 0.5 + cfg.tol.mass);
    let values = cfg.exec.map(&arcs, |s| stationary_exit(c, s));
    let mut best: Option<(f64, usize)> = None;
    for (i, v) in values.into_iter().enumerate() {
        let v = v?;
        if best.is_none_or(|b| v > b.0) {
            best = Some((v, i));
        }
    }
    let (value, i) = best.ok_or(Error::EmptySubset)?;
    Ok(StationaryHitting {
        value,
        argmax: arcs[i].clone(),
        method: HitMethod::Arcs,
    })
}

/// `kappa(delta)`: smallest `1 / E_{pi_B}[T_{B^c}]` over connected `B` with
/// `pi(B) <= delta`.
pub fn kappa_profile(c: &Chain, grid: &Grid, cfg: &Config) -> Result<Profile> {
    let max_mass = match grid {
        Grid::Auto => 1.0,
        Grid::Points(p) => p.iter().copied().fold(0.0, f64::max).min(1.0),
    };
    let masks = c.connected_masks(max_mass, cfg)?;
    let values = cfg.exec.map(&masks, |&m| exit_bits(c, m));
    let mut items = Vec::with_capacity(masks.len());
    for (m, v) in masks.into_iter().zip(values) {
        let set = SubsetMask::from_bits(c, m);
        items.push((set.mass(), set, 1.0 / v?));
    }
    Ok(profile_from_items(items, grid, cfg))
}

pub(crate) fn profile_from_items(
    mut items: Vec<(f64, SubsetMask, f64)>,
    grid: &Grid,
    cfg: &Config,
) -> Profile {
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let points: Vec<f64> = match grid {
        Grid::Points(p) => p.clone(),
        Grid::Auto => {
            let mut masses: Vec<f64> = Vec::new();
            for it in &items {
                if masses.last().is_none_or(|&l| (it.0 - l).abs() > cfg.tol.mass) {
                    masses.push(it.0);
                }
            }
            masses
        }
    };
    let mut profile = Profile {
        breakpoints: Vec::new(),
        values: Vec::new(),
        witnesses: Vec::new(),
        exact: true,
    };
    let mut best: Option<usize> = None;
    let mut cursor = 0;
    for delta in points {
        while cursor < items.len() && items[cursor].0 <= delta + cfg.tol.mass {
            if best.is_none_or(|b| items[cursor].2 < items[b].2) {
                best = Some(cursor);
            }
            cursor += 1;
        }
        profile.breakpoints.push(delta);
        profile.values.push(best.map_or(f64::INFINITY, |b| items[b].2));
        profile.witnesses.push(best.map(|b| items[b].1.clone()));
    }
    profile
}

/// `max_{D subset of B} E_{pi_D}[T_{D^c}]` with its maximizer, plus the value
/// on the distinguished super-level set of the quasi-stationary density.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NestedExit {
    pub value: f64,
    pub argmax: SubsetMask,
    /// Exit time from the level set `{f >= L}`, when the level scan succeeds.
    pub level_value: Option<f64>,
    pub lambda: f64,
}

/// Sub-enumeration is exhaustive up to this many members.
pub const NESTED_EXACT_LIMIT: usize = 20;

pub fn best_nested_exit(c: &Chain, subset: &SubsetMask, cfg: &Config) -> Result<NestedExit> {
    c.check_proper(subset)?;
    let lambda = spectral::restricted_lambda(c, subset)?;
    let level_value = if c.is_reversible() && subset.is_connected() {
        match levelset::find_level(c, subset) {
            Ok(scan) => Some(stationary_exit(c, &scan.level_set)?),
            Err(Error::NoRoot(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let (value, argmax) = match subset.bits() {
        Some(bits) if subset.len() <= NESTED_EXACT_LIMIT => {
            let mut subs = Vec::new();
            let mut d = bits;
            while d != 0 {
                if !c.is_reversible() || c.mask_connected(d) {
                    subs.push(d);
                }
                d = (d - 1) & bits;
            }
            subs.reverse();
            let (v, m) = max_over(c, &subs, cfg)?;
            (v, SubsetMask::from_bits(c, m))
        }
        _ => {
            let qs = spectral::quasi_stationary(c, subset)?;
            let f = qs.density(c);
            let mut levels = f.clone();
            levels.sort_by(|a, b| b.total_cmp(a));
            levels.dedup();
            let mut best: Option<(f64, SubsetMask)> = None;
            for level in levels {
                let members = subset
                    .members()
                    .iter()
                    .zip(&f)
                    .filter(|(_, &v)| v >= level)
                    .map(|(&x, _)| x)
                    .collect();
                let d = SubsetMask::from_members(c, members);
                let v = stationary_exit(c, &d)?;
                if best.as_ref().is_none_or(|b| v > b.0) {
                    best = Some((v, d));
                }
            }
            best.ok_or(Error::EmptySubset)?
        }
    };
    Ok(NestedExit {
        value,
        argmax,
        level_value,
        lambda,
    })
}

/// Spectral decomposition of `P_{pi_B}[T_{B^c} > m]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixtureTail {
    /// Squared coefficients `c_i^2`, aligned with `rates`.
    pub coefficients: Vec<f64>,
    /// Eigenvalues of `P_B`, descending.
    pub rates: Vec<f64>,
    /// `1 / ||alpha / pi_B||^2`, equal to the first coefficient.
    pub lead_weight: f64,
}

impl MixtureTail {
    pub fn tail(&self, m: u32) -> f64 {
        self.coefficients
            .iter()
            .zip(&self.rates)
            .map(|(w, g)| w * g.powi(m as i32))
            .sum()
    }
}

pub fn tail_mixture(c: &Chain, subset: &SubsetMask) -> Result<MixtureTail> {
    if !c.is_reversible() {
        return Err(Error::NotReversible);
    }
    c.check_proper(subset)?;
    if !subset.is_connected() {
        return Err(Error::ReducibleRestriction);
    }
    let m = subset.members();
    let pi = c.pi();
    let sym = DMatrix::from_fn(m.len(), m.len(), |i, j| {
        c.p()[(m[i], m[j])] * (pi[m[i]] / pi[m[j]]).sqrt()
    });
    let eig = linalg::sym_eigen_desc(&sym);
    let root: Vec<f64> = m.iter().map(|&x| (pi[x] / subset.mass()).sqrt()).collect();
    let coefficients: Vec<f64> = (0..m.len())
        .map(|i| {
            let ci: f64 = eig.vectors.column(i).iter().zip(&root).map(|(v, r)| v * r).sum();
            ci * ci
        })
        .collect();
    let qs = spectral::quasi_stationary(c, subset)?;
    Ok(MixtureTail {
        lead_weight: 1.0 / qs.density_norm_sq(c),
        coefficients,
        rates: eig.values,
    })
}

/// `<pi_B, (P_B)^m 1>` by repeated multiplication.
pub fn matrix_tail(c: &Chain, subset: &SubsetMask, m: u32) -> Result<f64> {
    let kernel = c.restrict(subset)?;
    let mut v = DVector::from_element(subset.len(), 1.0);
    for _ in 0..m {
        v = &kernel.entries * v;
    }
    Ok(kernel.local_pi().iter().zip(v.iter()).map(|(p, x)| p * x).sum())
}

/// Two-sided exit-tail bounds from the stationary start, for each `t`, and
/// the corresponding bounds on the mean.
pub fn aldous_brown_check(c: &Chain, subset: &SubsetMask, ts: &[u32]) -> Result<Vec<VerificationRecord>> {
    if !c.is_reversible() {
        return Err(Error::NotReversible);
    }
    let qs = spectral::quasi_stationary(c, subset)?;
    let t_rel = spectral::relaxation_time(c)?;
    let kernel = c.restrict(subset)?;
    let weights: Vec<f64> = subset.members().iter().map(|&x| c.pi()[x]).collect();
    let lower = 1.0 - t_rel * qs.lambda;
    let tag = subset.hex();
    let mut out = Vec::with_capacity(2 * ts.len() + 2);
    let max_t = ts.iter().copied().max().unwrap_or(0);
    let mut v = DVector::from_element(subset.len(), 1.0);
    let mut tails = Vec::with_capacity(max_t as usize + 1);
    for _ in 0..=max_t {
        tails.push(weights.iter().zip(v.iter()).map(|(w, x)| w * x).sum::<f64>());
        v = &kernel.entries * v;
    }
    for &t in ts {
        let ratio = tails[t as usize] / qs.beta.powi(t as i32);
        out.push(VerificationRecord::le(format!("aldous_brown.lower.t{t}"), lower, ratio).with_witness(tag.clone()));
        out.push(VerificationRecord::le(format!("aldous_brown.upper.t{t}"), ratio, 1.0).with_witness(tag.clone()));
    }
    let target = subset.complement(c);
    let from_alpha = 1.0 / qs.lambda;
    let solve = expected_hitting(c, &target)?;
    let from_pi = solve.mean_under(c.pi());
    out.push(VerificationRecord::le("aldous_brown.mean_lower", from_alpha - t_rel, from_pi).with_witness(tag.clone()));
    out.push(VerificationRecord::le("aldous_brown.mean_upper", from_pi, from_alpha).with_witness(tag));
    Ok(out)
}

/// Measurements on the pendant-path example.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PendantPathAudit {
    pub n: usize,
    pub path_len: usize,
    pub t_rel: f64,
    /// `t_rel / n^{2/3}`.
    pub t_rel_scaled: f64,
    pub lambda_path: f64,
    /// `1 - cos(pi / (2r))`.
    pub lambda_path_closed: f64,
    /// `lambda(F) r^2`.
    pub lambda_path_scaled: f64,
    /// `lambda(B)` for each sampled `B = A^c`.
    pub lambda_sampled: Vec<f64>,
    /// `E_{pi_B}[T_A]` for each sampled `A`.
    pub exits: Vec<f64>,
    pub max_exit: f64,
    /// Largest `|E_{pi_F}[T_A] - E_{pi_F}[T_o] - E_o[T_A]|` over the samples.
    pub decomposition_residual: f64,
}

pub fn pendant_path_audit(ex: &PendantPathExample, delta: f64, samples: usize, seed: u64) -> Result<PendantPathAudit> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::BadParameter(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    let c = &ex.chain;
    let n = ex.base.len();
    let r = ex.path.len();
    let path_qs = spectral::quasi_stationary(c, &ex.path)?;
    let t_rel = spectral::relaxation_time(c)?;

    // Perron vector of F in symmetrized coordinates seeds every lambda(B).
    let f_sym: Vec<f64> = ex
        .path
        .members()
        .iter()
        .zip(&path_qs.alpha)
        .map(|(&x, a)| a / c.pi()[x].sqrt())
        .collect();

    // E_x[T_o] for x on the path: the path is left only through o.
    let from_path = expected_hitting(c, &ex.path.complement(c))?;
    let pi_f = c.conditioned_distribution(&ex.path)?;
    let path_to_origin = from_path.mean_under(&pi_f);

    let lo = (delta * n as f64).ceil() as usize;
    let hi = ((1.0 - delta) * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lambda_sampled = Vec::with_capacity(samples);
    let mut exits = Vec::with_capacity(samples);
    let mut decomposition_residual: f64 = 0.0;
    for _ in 0..samples {
        let size = rng.random_range(lo..=hi);
        let mut pool: Vec<usize> = ex.base.members().to_vec();
        pool.shuffle(&mut rng);
        pool.truncate(size);
        let target = SubsetMask::from_members(c, pool);
        let rest = target.complement(c);
        let solve = expected_hitting(c, &target)?;
        exits.push(solve.mean_under(&c.conditioned_distribution(&rest)?));
        let mut lambda_b = f64::INFINITY;
        for comp in c.components(&rest) {
            let lam = if comp.contains(ex.origin) || comp.contains(ex.path.members()[0]) {
                let start: Vec<f64> = comp
                    .members()
                    .iter()
                    .map(|&x| match ex.path.members().binary_search(&x) {
                        Ok(i) => f_sym[i],
                        Err(_) => 0.0,
                    })
                    .collect();
                spectral::quasi_stationary_from(c, &comp, Some(&start))?.lambda
            } else {
                spectral::restricted_lambda(c, &comp)?
            };
            lambda_b = lambda_b.min(lam);
        }
        lambda_sampled.push(lambda_b);
        if !target.contains(ex.origin) {
            let lhs = solve.mean_under(&pi_f);
            let rhs = path_to_origin + solve.expectations[ex.origin];
            decomposition_residual = decomposition_residual.max((lhs - rhs).abs() / lhs.max(1.0));
        }
    }
    let max_exit = exits.iter().copied().fold(0.0, f64::max);
    let closed = 1.0 - (std::f64::consts::PI / (2.0 * r as f64)).cos();
    Ok(PendantPathAudit {
        n,
        path_len: r,
        t_rel,
        t_rel_scaled: t_rel / (n as f64).powf(2.0 / 3.0),
        lambda_path: path_qs.lambda,
        lambda_path_closed: closed,
        lambda_path_scaled: path_qs.lambda * (r * r) as f64,
        lambda_sampled,
        exits,
        max_exit,
        decomposition_residual,
    })
}
