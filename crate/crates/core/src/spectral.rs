//! Eigenstructure of reversible chains and killed kernels, plus the
//! set-function profiles built on top of it.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{symmetrize, Chain, SubsetMask};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::linalg::{self, lanczos_top};

/// Above this many states, extreme eigenvalues come from Lanczos instead of a
/// dense eigensolve.
pub const DENSE_LIMIT: usize = 600;

const LANCZOS_TOL: f64 = 1e-11;

/// Spectrum of a reversible chain with `pi`-orthonormal eigenfunctions.
#[derive(Clone, Debug)]
pub struct ReversibleSpectrum {
    /// Descending, starting at 1.
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenfunction of `eigenvalues[i]`; column 0 is the
    /// constant function 1.
    pub eigenfunctions: DMatrix<f64>,
}

impl ReversibleSpectrum {
    pub fn beta2(&self) -> f64 {
        self.eigenvalues[1]
    }

    pub fn beta_min(&self) -> f64 {
        *self.eigenvalues.last().expect("n >= 2")
    }
}

fn sqrt_pi(c: &Chain) -> Vec<f64> {
    c.pi().iter().map(|v| v.sqrt()).collect()
}

pub fn reversible_spectrum(c: &Chain) -> Result<ReversibleSpectrum> {
    if !c.is_reversible() {
        return Err(Error::NotReversible);
    }
    let s = sqrt_pi(c);
    let eig = linalg::sym_eigen_desc(&symmetrize(c.p(), &s));
    let n = c.n();
    let mut f = DMatrix::from_fn(n, n, |x, i| eig.vectors[(x, i)] / s[x]);
    // fix signs: f_1 positive, others with a positive leading nonzero entry
    for i in 0..n {
        let lead = (0..n)
            .map(|x| f[(x, i)])
            .find(|v| v.abs() > 1e-12)
            .unwrap_or(1.0);
        if lead < 0.0 {
            f.column_mut(i).neg_mut();
        }
    }
    let mut eigenvalues = eig.values;
    eigenvalues[0] = 1.0;
    Ok(ReversibleSpectrum {
        eigenvalues,
        eigenfunctions: f,
    })
}

/// Symmetrized action `x -> D^{1/2} P D^{-1/2} x` through the sparse form.
fn sym_op<'a>(c: &'a Chain, s: &'a [f64]) -> impl Fn(&[f64], &mut [f64]) + 'a {
    move |x: &[f64], y: &mut [f64]| {
        let scaled: Vec<f64> = x.iter().zip(s).map(|(v, w)| v / w).collect();
        c.sparse().matvec(&scaled, y);
        y.iter_mut().zip(s).for_each(|(v, w)| *v *= w);
    }
}

fn start_vector(n: usize) -> Vec<f64> {
    (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).sin()).collect()
}

/// `(beta_2, beta_n)` of a reversible chain.
pub fn extreme_eigenvalues(c: &Chain) -> Result<(f64, f64)> {
    if !c.is_reversible() {
        return Err(Error::NotReversible);
    }
    let n = c.n();
    if n <= DENSE_LIMIT {
        let spec = reversible_spectrum(c)?;
        return Ok((spec.beta2(), spec.beta_min()));
    }
    let s = sqrt_pi(c);
    let unit = vec![s.clone()];
    let op = sym_op(c, &s);
    let iters = 600.min(n);
    let top = lanczos_top(n, &op, &start_vector(n), &unit, iters, LANCZOS_TOL)?;
    let neg = |x: &[f64], y: &mut [f64]| {
        op(x, y);
        y.iter_mut().for_each(|v| *v = -*v);
    };
    let bottom = lanczos_top(n, neg, &start_vector(n), &unit, iters, LANCZOS_TOL)?;
    Ok((top.value, -bottom.value))
}

/// `1 / (1 - beta_2)`.
pub fn relaxation_time(c: &Chain) -> Result<f64> {
    let (b2, _) = extreme_eigenvalues(c)?;
    Ok(1.0 / (1.0 - b2))
}

/// `max(t_rel, 1 / (1 + beta_n))`.
pub fn absolute_relaxation_time(c: &Chain) -> Result<f64> {
    let (b2, bn) = extreme_eigenvalues(c)?;
    Ok((1.0 / (1.0 - b2)).max(1.0 / (1.0 + bn)))
}

/// Perron data of a killed kernel `P_B`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuasiStationary {
    pub subset: SubsetMask,
    /// Quasi-stationary law, indexed like `subset.members()`.
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub lambda: f64,
}

impl QuasiStationary {
    /// `alpha / pi_B` on the members of the subset.
    pub fn density(&self, c: &Chain) -> Vec<f64> {
        let mass = self.subset.mass();
        self.subset
            .members()
            .iter()
            .zip(&self.alpha)
            .map(|(&x, a)| a * mass / c.pi()[x])
            .collect()
    }

    /// `||alpha / pi_B||^2` in `L^2(pi_B)`.
    pub fn density_norm_sq(&self, c: &Chain) -> f64 {
        let mass = self.subset.mass();
        self.subset
            .members()
            .iter()
            .zip(self.density(c))
            .map(|(&x, f)| c.pi()[x] / mass * f * f)
            .sum()
    }
}

/// Symmetric form of `P_B` for a reversible chain.
fn restricted_sym(c: &Chain, members: &[usize]) -> DMatrix<f64> {
    let pi = c.pi();
    DMatrix::from_fn(members.len(), members.len(), |i, j| {
        let (x, y) = (members[i], members[j]);
        c.p()[(x, y)] * (pi[x] / pi[y]).sqrt()
    })
}

/// `beta(B)`, the Perron root of `P_B`. Works for reducible restrictions.
pub fn restricted_beta(c: &Chain, subset: &SubsetMask) -> Result<f64> {
    c.check_proper(subset)?;
    let m = subset.members();
    if m.len() == 1 {
        return Ok(c.p()[(m[0], m[0])]);
    }
    if c.is_reversible() {
        if m.len() <= DENSE_LIMIT {
            return Ok(linalg::sym_max_eigenvalue(&restricted_sym(c, m)));
        }
        return Ok(quasi_stationary(c, subset)?.beta);
    }
    let k = DMatrix::from_fn(m.len(), m.len(), |i, j| c.p()[(m[i], m[j])]);
    Ok(spectral_radius(&k))
}

/// `lambda(B) = 1 - beta(B)`.
pub fn restricted_lambda(c: &Chain, subset: &SubsetMask) -> Result<f64> {
    Ok(1.0 - restricted_beta(c, subset)?)
}

pub(crate) fn spectral_radius(k: &DMatrix<f64>) -> f64 {
    k.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn strongly_connected_within(c: &Chain, members: &[usize]) -> bool {
    let local = |dir: bool| {
        let k = members.len();
        let mut seen = vec![false; k];
        seen[0] = true;
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            for j in 0..k {
                let w = if dir {
                    c.p()[(members[i], members[j])]
                } else {
                    c.p()[(members[j], members[i])]
                };
                if !seen[j] && w > 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    local(true) && local(false)
}

pub fn quasi_stationary(c: &Chain, subset: &SubsetMask) -> Result<QuasiStationary> {
    quasi_stationary_from(c, subset, None)
}

/// As [`quasi_stationary`]; `start` seeds the iterative solver used for large
/// reversible restrictions and is given in symmetrized coordinates
/// (`sqrt(pi) * h` for a right test function `h`). The returned `beta` is then
/// at least the Rayleigh quotient of `start`.
pub fn quasi_stationary_from(
    c: &Chain,
    subset: &SubsetMask,
    start: Option<&[f64]>,
) -> Result<QuasiStationary> {
    c.check_proper(subset)?;
    if !subset.is_connected() {
        return Err(Error::ReducibleRestriction);
    }
    let m = subset.members();
    let k = m.len();
    if c.is_reversible() {
        let s: Vec<f64> = m.iter().map(|&x| c.pi()[x].sqrt()).collect();
        let (beta, v) = if k <= DENSE_LIMIT && start.is_none() {
            let eig = linalg::sym_eigen_desc(&restricted_sym(c, m));
            (eig.values[0], eig.vectors.column(0).iter().copied().collect::<Vec<_>>())
        } else {
            let mut local = vec![usize::MAX; c.n()];
            for (i, &x) in m.iter().enumerate() {
                local[x] = i;
            }
            let pi = c.pi();
            let op = |x: &[f64], y: &mut [f64]| {
                for (i, &row) in m.iter().enumerate() {
                    let (cols, vals) = c.sparse().row(row);
                    let mut acc = 0.0;
                    for (&col, &p) in cols.iter().zip(vals) {
                        let j = local[col];
                        if j != usize::MAX {
                            acc += p * (pi[row] / pi[col]).sqrt() * x[j];
                        }
                    }
                    y[i] = acc;
                }
            };
            let init = start.map(<[f64]>::to_vec).unwrap_or_else(|| s.clone());
            let ritz = lanczos_top(k, op, &init, &[], 800.min(k), LANCZOS_TOL)?;
            (ritz.value, ritz.vector)
        };
        // alpha = D^{1/2} v, up to sign and scale
        let raw: Vec<f64> = v.iter().zip(&s).map(|(a, b)| (a * b).abs()).collect();
        let total: f64 = raw.iter().sum();
        let alpha = raw.iter().map(|a| a / total).collect();
        return Ok(QuasiStationary {
            subset: subset.clone(),
            alpha,
            beta,
            lambda: 1.0 - beta,
        });
    }
    if !strongly_connected_within(c, m) {
        return Err(Error::ReducibleRestriction);
    }
    let kernel = DMatrix::from_fn(k, k, |i, j| c.p()[(m[i], m[j])]);
    let rho = spectral_radius(&kernel);
    // inverse iteration on the transpose for the left Perron vector
    let shift = rho * (1.0 + 1e-10) + 1e-14;
    let system = kernel.transpose() - DMatrix::identity(k, k) * shift;
    let lu = system.lu();
    let mut x = DVector::from_element(k, 1.0 / k as f64);
    for _ in 0..4 {
        x = lu.solve(&x).ok_or(Error::SingularSystem)?;
        let total: f64 = x.iter().map(|v| v.abs()).sum();
        x.iter_mut().for_each(|v| *v = v.abs() / total);
    }
    let alpha: Vec<f64> = x.iter().copied().collect();
    let image = kernel.transpose() * &x;
    let beta = image.sum();
    Ok(QuasiStationary {
        subset: subset.clone(),
        alpha,
        beta,
        lambda: 1.0 - beta,
    })
}

/// Evaluation points for a profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Grid {
    /// Every achievable mass of a candidate set.
    Auto,
    Points(Vec<f64>),
}

impl Grid {
    fn max(&self) -> f64 {
        match self {
            Grid::Auto => 1.0,
            Grid::Points(p) => p.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// A non-increasing step function of the mass bound `delta`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Profile {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    /// Minimizing set per breakpoint; `None` when no set is small enough.
    pub witnesses: Vec<Option<SubsetMask>>,
    /// False when the minimum ran over a heuristic candidate family, making
    /// each value an upper bound.
    pub exact: bool,
}

impl Profile {
    /// Value at an arbitrary `delta`, read off the step function.
    pub fn at(&self, delta: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b <= delta * (1.0 + 1e-12));
        if idx == 0 {
            f64::INFINITY
        } else {
            self.values[idx - 1]
        }
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }
}

/// Candidate sets as `(mass, subset, value)`; folds them into a profile.
fn assemble_profile(mut items: Vec<(f64, SubsetMask, f64)>, grid: &Grid, exact: bool, slack: f64) -> Profile {
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut prefix: Vec<(f64, usize)> = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        match prefix.last() {
            Some(&(best, _)) if best <= item.2 => prefix.push((best, prefix.last().unwrap().1)),
            _ => prefix.push((item.2, i)),
        }
    }
    let lookup = |delta: f64| -> (f64, Option<SubsetMask>) {
        let idx = items.partition_point(|it| it.0 <= delta + slack);
        if idx == 0 {
            (f64::INFINITY, None)
        } else {
            let (v, w) = prefix[idx - 1];
            (v, Some(items[w].1.clone()))
        }
    };
    let points: Vec<f64> = match grid {
        Grid::Points(p) => p.clone(),
        Grid::Auto => {
            let mut masses: Vec<f64> = Vec::new();
            for it in &items {
                match masses.last() {
                    Some(&last) if (it.0 - last).abs() <= slack.max(1e-14) => {}
                    _ => masses.push(it.0),
                }
            }
            masses
        }
    };
    let mut profile = Profile {
        breakpoints: Vec::with_capacity(points.len()),
        values: Vec::with_capacity(points.len()),
        witnesses: Vec::with_capacity(points.len()),
        exact,
    };
    for delta in points {
        let (v, w) = lookup(delta);
        profile.breakpoints.push(delta);
        profile.values.push(v);
        profile.witnesses.push(w);
    }
    profile
}

/// Candidate sets for chains too large to enumerate: level and quantile sets
/// of the leading nontrivial eigenfunctions and graph balls, split into
/// connected components.
pub fn witness_candidates(c: &Chain, max_mass: f64) -> Result<Vec<SubsetMask>> {
    let n = c.n();
    let spec = reversible_spectrum(c)?;
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut out = Vec::new();
    let mut push = |members: Vec<usize>, out: &mut Vec<SubsetMask>| {
        if members.is_empty() || members.len() == n {
            return;
        }
        let set = SubsetMask::from_members(c, members);
        for comp in c.components(&set) {
            if comp.mass() <= max_mass + 1e-12 && seen.insert(comp.members().to_vec()) {
                out.push(comp);
            }
        }
    };
    for i in 1..n.min(5) {
        for sign in [1.0, -1.0] {
            let f: Vec<f64> = (0..n).map(|x| sign * spec.eigenfunctions[(x, i)]).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| f[b].total_cmp(&f[a]));
            let (lo, hi) = (f[order[n - 1]], f[order[0]]);
            for step in 1..=32 {
                let level = hi - (hi - lo) * step as f64 / 33.0;
                push((0..n).filter(|&x| f[x] >= level).collect(), &mut out);
            }
            let mut acc = 0.0;
            let mut prefix = Vec::new();
            let mut target = 0.02;
            for &x in &order {
                prefix.push(x);
                acc += c.pi()[x];
                if acc >= target {
                    push(prefix.clone(), &mut out);
                    target += 0.02;
                }
            }
        }
    }
    if n <= 256 {
        for centre in 0..n {
            let mut dist = vec![usize::MAX; n];
            dist[centre] = 0;
            let mut frontier = vec![centre];
            let mut ball = vec![centre];
            while !frontier.is_empty() {
                push(ball.clone(), &mut out);
                let mut next = Vec::new();
                for &x in &frontier {
                    for &y in c.neighbors(x) {
                        if dist[y] == usize::MAX {
                            dist[y] = dist[x] + 1;
                            next.push(y);
                        }
                    }
                }
                ball.extend_from_slice(&next);
                frontier = next;
            }
        }
    }
    Ok(out)
}

/// Candidate sets for a profile: exact enumeration or the witness family.
fn profile_sets(
    c: &Chain,
    max_mass: f64,
    connected_only: bool,
    cfg: &Config,
) -> Result<(Vec<SubsetMask>, bool)> {
    match if connected_only {
        c.connected_masks(max_mass, cfg)
    } else {
        c.all_masks(max_mass, cfg)
    } {
        Ok(masks) => Ok((
            masks.into_iter().map(|m| SubsetMask::from_bits(c, m)).collect(),
            true,
        )),
        Err(Error::EnumerationTooLarge { .. }) if cfg.witness_mode => {
            Ok((witness_candidates(c, max_mass)?, false))
        }
        Err(e) => Err(e),
    }
}

fn evaluate<F>(c: &Chain, grid: &Grid, connected_only: bool, cfg: &Config, f: F) -> Result<Profile>
where
    F: Fn(&SubsetMask) -> Result<f64> + Sync + Send,
{
    let (sets, exact) = profile_sets(c, grid.max().min(1.0), connected_only, cfg)?;
    let values = cfg.exec.map(&sets, |s| f(s));
    let mut items = Vec::with_capacity(sets.len());
    for (set, v) in sets.into_iter().zip(values) {
        items.push((set.mass(), set, v?));
    }
    Ok(assemble_profile(items, grid, exact, cfg.tol.mass))
}

/// `Lambda(delta)`: smallest `lambda(B)` over connected `B` with
/// `pi(B) <= delta`.
pub fn spectral_profile(c: &Chain, grid: &Grid, cfg: &Config) -> Result<Profile> {
    if !c.is_reversible() {
        return Err(Error::NotReversible);
    }
    evaluate(c, grid, true, cfg, |s| restricted_lambda(c, s))
}

/// Dirichlet form matrix `D - (DP + P^T D)/2`.
fn dirichlet_matrix(c: &Chain) -> DMatrix<f64> {
    let n = c.n();
    let pi = c.pi();
    DMatrix::from_fn(n, n, |x, y| {
        let flow = 0.5 * (pi[x] * c.p()[(x, y)] + pi[y] * c.p()[(y, x)]);
        if x == y {
            pi[x] - flow
        } else {
            -flow
        }
    })
}

/// `lambda_hat(B)`: the smallest ratio of Dirichlet form to variance over
/// functions supported in `B`.
pub fn variational_lambda(c: &Chain, subset: &SubsetMask) -> Result<f64> {
    c.check_proper(subset)?;
    let m = subset.members();
    let k = m.len();
    let pi = c.pi();
    let a = DMatrix::from_fn(k, k, |i, j| {
        let (x, y) = (m[i], m[j]);
        let flow = 0.5 * (pi[x] * c.p()[(x, y)] + pi[y] * c.p()[(y, x)]);
        if i == j {
            pi[x] - flow
        } else {
            -flow
        }
    });
    let var = DMatrix::from_fn(k, k, |i, j| {
        let d = if i == j { pi[m[i]] } else { 0.0 };
        d - pi[m[i]] * pi[m[j]]
    });
    let chol = var.cholesky().ok_or(Error::SingularSystem)?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(Error::SingularSystem)?;
    let reduced = &linv * a * linv.transpose();
    let eig = linalg::sym_eigen_desc(&reduced);
    Ok(*eig.values.last().expect("nonempty"))
}

/// Spectral gap of `(P + P*)/2`.
pub fn additive_gap(c: &Chain) -> f64 {
    let s = sqrt_pi(c);
    let dir = dirichlet_matrix(c);
    let n = c.n();
    let normalized = DMatrix::from_fn(n, n, |x, y| dir[(x, y)] / (s[x] * s[y]));
    let eig = linalg::sym_eigen_desc(&normalized);
    eig.values[n - 2]
}

/// `Lambda_hat(delta)`, minimized over all subsets, connected or not. The
/// whole space enters at mass 1 with the gap of `(P + P*)/2`.
pub fn spectral_profile_hat(c: &Chain, grid: &Grid, cfg: &Config) -> Result<Profile> {
    let (sets, exact) = profile_sets(c, grid.max().min(1.0), false, cfg)?;
    let values = cfg.exec.map(&sets, |s| variational_lambda(c, s));
    let mut items = Vec::with_capacity(sets.len() + 1);
    for (set, v) in sets.into_iter().zip(values) {
        items.push((set.mass(), set, v?));
    }
    if grid.max() >= 1.0 {
        items.push((1.0, SubsetMask::full(c), additive_gap(c)));
    }
    Ok(assemble_profile(items, grid, exact, cfg.tol.mass))
}

/// One-step escape probability from `pi_B`.
pub fn boundary_flow(c: &Chain, subset: &SubsetMask) -> f64 {
    let inside = subset.indicator();
    let mut flow = 0.0;
    for &x in subset.members() {
        let out: f64 = (0..c.n()).filter(|&y| !inside[y]).map(|y| c.p()[(x, y)]).sum();
        flow += c.pi()[x] * out;
    }
    flow / subset.mass()
}

/// `phi(u)`: smallest one-step escape probability over connected `B` with
/// `pi(B) <= u`.
pub fn isoperimetric_profile(c: &Chain, grid: &Grid, cfg: &Config) -> Result<Profile> {
    evaluate(c, grid, true, cfg, |s| Ok(boundary_flow(c, s)))
}

/// Witness set from the sign pattern of the second eigenfunction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapWitness {
    pub set: SubsetMask,
    pub lambda: f64,
    pub t_rel: f64,
}

pub fn gap_witness_set(c: &Chain) -> Result<GapWitness> {
    let spec = reversible_spectrum(c)?;
    let n = c.n();
    let t_rel = 1.0 / (1.0 - spec.beta2());
    let tied: Vec<usize> = (1..n)
        .filter(|&i| (spec.eigenvalues[i] - spec.beta2()).abs() <= 1e-10)
        .collect();
    let mut best: Option<GapWitness> = None;
    for &i in &tied {
        let f = spec.eigenfunctions.column(i);
        let scale = f.amax();
        for sign in [1.0, -1.0] {
            let members: Vec<usize> = (0..n).filter(|&x| sign * f[x] > 1e-12 * scale).collect();
            if members.is_empty() {
                continue;
            }
            let set = SubsetMask::from_members(c, members);
            if set.mass() > 0.5 + 1e-12 {
                continue;
            }
            let lambda = restricted_lambda(c, &set)?;
            let cand = GapWitness {
                set,
                lambda,
                t_rel,
            };
            if lambda <= 1.0 / t_rel + 1e-9 {
                return Ok(cand);
            }
            if best.as_ref().is_none_or(|b| lambda < b.lambda) {
                best = Some(cand);
            }
        }
    }
    best.ok_or(Error::DegenerateEigenfunction)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    Tv,
    Linf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    Discrete,
    Continuous,
}

fn distance_to_pi(m: &DMatrix<f64>, pi: &[f64], dist: Distance) -> f64 {
    let n = pi.len();
    (0..n)
        .map(|x| match dist {
            Distance::Tv => 0.5 * (0..n).map(|y| (m[(x, y)] - pi[y]).abs()).sum::<f64>(),
            Distance::Linf => (0..n)
                .map(|y| ((m[(x, y)] - pi[y]) / pi[y]).abs())
                .fold(0.0, f64::max),
        })
        .fold(0.0, f64::max)
}

const DISCRETE_CAP: usize = 1_000_000;

/// Mixing time to accuracy `eps` in the chosen distance and time mode.
pub fn mixing_time(c: &Chain, eps: f64, dist: Distance, mode: TimeMode) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::BadParameter(format!("eps must lie in (0,1), got {eps}")));
    }
    let n = c.n();
    let pi = c.pi();
    match mode {
        TimeMode::Discrete => {
            let mut m = DMatrix::identity(n, n);
            for k in 0..DISCRETE_CAP {
                if distance_to_pi(&m, pi, dist) <= eps {
                    return Ok(k as f64);
                }
                m = &m * c.p();
            }
            Err(Error::NoConvergence {
                iterations: DISCRETE_CAP,
                residual: distance_to_pi(&m, pi, dist),
            })
        }
        TimeMode::Continuous => {
            let at = |t: f64| -> Result<f64> { Ok(distance_to_pi(&c.continuize(1.0, t)?, pi, dist)) };
            if at(0.0)? <= eps {
                return Ok(0.0);
            }
            let mut hi = 1.0;
            while at(hi)? > eps {
                hi *= 2.0;
                if hi > 1e9 {
                    return Err(Error::NoUpperBracket(hi));
                }
            }
            let mut lo = 0.0;
            while hi - lo > 1e-6 {
                let mid = 0.5 * (lo + hi);
                if at(mid)? <= eps {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(hi)
        }
    }
}

/// Right-hand side of the spectral-profile bound on the continuous-time
/// `L^inf` mixing time, with the profile integral taken over `[pi_*, 1/2]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GoelBound {
    pub gap_term: f64,
    pub integral: f64,
    pub bound: f64,
    pub mixing_time: f64,
}

/// `int_{pi_*}^{1/2} d delta / (delta Lambda_hat(delta))` for a step profile.
pub fn profile_integral(profile: &Profile, lower: f64, upper: f64) -> f64 {
    let mut total = 0.0;
    for (i, (&b, &v)) in profile.breakpoints.iter().zip(&profile.values).enumerate() {
        let start = b.max(lower);
        let end = profile
            .breakpoints
            .get(i + 1)
            .copied()
            .unwrap_or(f64::INFINITY)
            .min(upper);
        if end > start {
            total += (end / start).ln() / v;
        }
    }
    total
}

pub fn goel_bound(c: &Chain, eps: f64, cfg: &Config) -> Result<GoelBound> {
    let profile = spectral_profile_hat(c, &Grid::Auto, cfg)?;
    let gap_term = 8.0 * (std::f64::consts::E / eps).ln() / additive_gap(c);
    let integral = profile_integral(&profile, c.pi_min(), 0.5);
    let mixing_time = mixing_time(c, eps, Distance::Linf, TimeMode::Continuous)?;
    Ok(GoelBound {
        gap_term,
        integral,
        bound: gap_term + 8.0 * integral,
        mixing_time,
    })
}

/// An upper estimate of the log-Sobolev constant and the two profile proxies.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogSobolevEstimate {
    /// Smallest log-Sobolev quotient found; an upper bound on the constant.
    pub upper: f64,
    /// `min_{delta in [pi_*, 1/2]} Lambda(delta) / log(1/delta)`.
    pub m_lambda: f64,
    /// The same with `kappa` in place of `Lambda`.
    pub m_kappa: f64,
    pub converged: bool,
}

/// `min Lambda(b) / log(1/b)` over breakpoints `b <= 1/2`.
pub fn profile_log_ratio(profile: &Profile) -> f64 {
    profile
        .breakpoints
        .iter()
        .zip(&profile.values)
        .filter(|(&b, _)| b <= 0.5 + 1e-12)
        .map(|(&b, &v)| v / (1.0 / b).ln())
        .fold(f64::INFINITY, f64::min)
}

fn ls_quotient(dir: &DMatrix<f64>, pi: &[f64], f: &DVector<f64>) -> (f64, DVector<f64>) {
    let af = dir * f;
    let energy = f.dot(&af);
    let second: f64 = f.iter().zip(pi).map(|(v, p)| p * v * v).sum();
    let mut ent = 0.0;
    let mut grad_ent = DVector::zeros(f.len());
    for (x, (&v, &p)) in f.iter().zip(pi).enumerate() {
        let sq = v * v;
        if sq > 0.0 {
            let l = (sq / second).ln();
            ent += p * sq * l;
            grad_ent[x] = 2.0 * p * v * l;
        }
    }
    if !(ent > 1e-300) {
        return (f64::INFINITY, DVector::zeros(f.len()));
    }
    let q = energy / ent;
    let grad = (af * 2.0 - grad_ent * q) / ent;
    (q, grad)
}

/// Local minimization of the log-Sobolev quotient from seeded restarts.
pub fn log_sobolev_upper_estimate(
    c: &Chain,
    restarts: usize,
    seed: u64,
    cfg: &Config,
) -> Result<LogSobolevEstimate> {
    if !c.is_reversible() {
        return Err(Error::NotReversible);
    }
    let n = c.n();
    if n > 16 {
        return Err(Error::EnumerationTooLarge { n, cap: 16 });
    }
    let dir = dirichlet_matrix(c);
    let pi = c.pi();
    let lambda = spectral_profile(c, &Grid::Auto, cfg)?;
    let kappa = crate::hitting::kappa_profile(c, &Grid::Auto, cfg)?;

    let mut starts: Vec<DVector<f64>> = Vec::new();
    let spec = reversible_spectrum(c)?;
    for scale in [0.1, 0.5, 0.9] {
        starts.push(DVector::from_fn(n, |x, _| 1.0 + scale * spec.eigenfunctions[(x, 1)] / spec.eigenfunctions.column(1).amax()));
    }
    for x in 0..n {
        starts.push(DVector::from_fn(n, |y, _| if y == x { 1.0 } else { 0.05 }));
    }
    for w in lambda.witnesses.iter().flatten() {
        starts.push(DVector::from_fn(n, |y, _| if w.contains(y) { 1.0 } else { 0.05 }));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        starts.push(DVector::from_fn(n, |_, _| rng.random_range(0.05..1.0)));
    }

    let mut best = f64::INFINITY;
    let mut converged = true;
    for start in starts {
        let mut f = start;
        let (mut q, mut g) = ls_quotient(&dir, pi, &f);
        let mut step = 1.0;
        let mut done = false;
        for _ in 0..2000 {
            let gnorm = g.norm();
            if gnorm < 1e-10 * q.abs().max(1.0) {
                done = true;
                break;
            }
            let mut accepted = false;
            while step > 1e-14 {
                let mut trial = &f - &g * step;
                trial.iter_mut().for_each(|v| *v = v.max(1e-9));
                let (tq, tg) = ls_quotient(&dir, pi, &trial);
                if tq < q - 1e-4 * step * gnorm * gnorm {
                    let norm = trial.iter().zip(pi).map(|(v, p)| p * v * v).sum::<f64>().sqrt();
                    f = trial / norm;
                    q = tq;
                    g = tg * norm;
                    step *= 2.0;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                done = true;
                break;
            }
        }
        converged &= done;
        best = best.min(q);
    }
    Ok(LogSobolevEstimate {
        upper: best,
        m_lambda: profile_log_ratio(&lambda),
        m_kappa: profile_log_ratio(&kappa),
        converged,
    })
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

    fn two_state(p: f64, q: f64) -> Chain {
        Chain::from_rows(&[vec![1.0 - p, p], vec![q, 1.0 - q]]).unwrap()
    }

    #[test]
    fn lazy_path_spectrum() {
        let c = lazy_path3();
        let spec = reversible_spectrum(&c).unwrap();
        for (got, want) in spec.eigenvalues.iter().zip([1.0, 0.5, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        for x in 0..3 {
            assert_abs_diff_eq!(spec.eigenfunctions[(x, 0)], 1.0, epsilon = 1e-12);
        }
        // f_2 proportional to (1, 0, -1)
        let f2 = spec.eigenfunctions.column(1);
        assert_abs_diff_eq!(f2[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f2[0], -f2[2], epsilon = 1e-12);
        assert_abs_diff_eq!(relaxation_time(&c).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn two_state_relaxation() {
        assert_abs_diff_eq!(relaxation_time(&two_state(0.5, 0.5)).unwrap(), 1.0, epsilon = 1e-12);
        let c = two_state(0.25, 0.25);
        assert_abs_diff_eq!(relaxation_time(&c).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(absolute_relaxation_time(&c).unwrap(), 2.0, epsilon = 1e-12);
        let flip = two_state(0.9, 0.9);
        // beta_2 = -0.8, so the absolute variant is 1 / 0.2
        assert_abs_diff_eq!(absolute_relaxation_time(&flip).unwrap(), 5.0, epsilon = 1e-10);
    }

    #[test]
    fn quasi_stationary_on_half_path() {
        let c = lazy_path3();
        let b = SubsetMask::from_members(&c, vec![0, 1]);
        let qs = quasi_stationary(&c, &b).unwrap();
        let beta = 0.5 + 1.0 / 8f64.sqrt();
        assert_abs_diff_eq!(qs.beta, beta, epsilon = 1e-12);
        assert_abs_diff_eq!(qs.lambda, 1.0 - beta, epsilon = 1e-12);
        // alpha P_B = beta alpha
        let a = &qs.alpha;
        assert_abs_diff_eq!(a[0] * 0.5 + a[1] * 0.25, beta * a[0], epsilon = 1e-12);
        assert_abs_diff_eq!(a[0] * 0.5 + a[1] * 0.5, beta * a[1], epsilon = 1e-12);
        let single = quasi_stationary(&c, &SubsetMask::singleton(&c, 1)).unwrap();
        assert_eq!(single.alpha, vec![1.0]);
        assert_abs_diff_eq!(single.beta, 0.5, epsilon = 1e-15);
        let split = SubsetMask::from_members(&c, vec![0, 2]);
        assert!(matches!(
            quasi_stationary(&c, &split),
            Err(Error::ReducibleRestriction)
        ));
    }

    #[test]
    fn non_reversible_quasi_stationary_matches_eigen() {
        let (f, b) = (1.0 / 3.0, 1.0 / 6.0);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| {
                let mut r = vec![0.0; 5];
                r[i] = 0.5;
                r[(i + 1) % 5] = f;
                r[(i + 4) % 5] = b;
                r
            })
            .collect();
        let c = Chain::from_rows(&rows).unwrap();
        let arc = SubsetMask::from_members(&c, vec![0, 1, 2]);
        let qs = quasi_stationary(&c, &arc).unwrap();
        let k = c.restrict(&arc).unwrap().entries;
        let left = k.transpose() * DVector::from_vec(qs.alpha.clone());
        for i in 0..3 {
            assert_abs_diff_eq!(left[i], qs.beta * qs.alpha[i], epsilon = 1e-10);
        }
        assert_abs_diff_eq!(qs.alpha.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn profiles_on_lazy_path() {
        let c = lazy_path3();
        let cfg = Config::default();
        let grid = Grid::Points(vec![0.5, 0.75]);
        let lam = spectral_profile(&c, &grid, &cfg).unwrap();
        assert_abs_diff_eq!(lam.values[0], 0.5, epsilon = 1e-12);
        assert_eq!(lam.witnesses[0].as_ref().unwrap().members(), &[0]);
        assert_abs_diff_eq!(lam.values[1], 0.5 - 1.0 / 8f64.sqrt(), epsilon = 1e-12);
        let phi = isoperimetric_profile(&c, &grid, &cfg).unwrap();
        assert_abs_diff_eq!(phi.values[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(phi.values[1], 1.0 / 6.0, epsilon = 1e-12);
        let hat = spectral_profile_hat(&c, &Grid::Points(vec![1.0]), &cfg).unwrap();
        assert_abs_diff_eq!(hat.values[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn gap_witness_on_lazy_path() {
        let c = lazy_path3();
        let w = gap_witness_set(&c).unwrap();
        assert_eq!(w.set.len(), 1);
        assert!(w.set.members() == [0] || w.set.members() == [2]);
        assert_abs_diff_eq!(w.lambda, 0.5, epsilon = 1e-12);
        let two = gap_witness_set(&two_state(0.2, 0.3)).unwrap();
        // pi = (0.6, 0.4): the lighter state is 1, its exit probability 0.3
        assert_eq!(two.set.members(), &[1]);
        assert_abs_diff_eq!(two.lambda, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn mixing_time_examples() {
        let c = two_state(0.5, 0.5);
        assert_eq!(mixing_time(&c, 0.25, Distance::Tv, TimeMode::Discrete).unwrap(), 1.0);
        let p = lazy_path3();
        let a = mixing_time(&p, 0.1, Distance::Tv, TimeMode::Continuous).unwrap();
        let b = mixing_time(&p, 0.3, Distance::Tv, TimeMode::Continuous).unwrap();
        assert!(a >= b);
        // continuous TV distance on the symmetric two-state chain is e^{-t}/2
        let t = mixing_time(&c, 0.1, Distance::Tv, TimeMode::Continuous).unwrap();
        assert_abs_diff_eq!(t, (5.0f64).ln(), epsilon = 2e-6);
    }

    #[test]
    fn step_integral_is_exact() {
        let profile = Profile {
            breakpoints: vec![0.1, 0.2, 0.4],
            values: vec![2.0, 1.0, 0.5],
            witnesses: vec![None, None, None],
            exact: true,
        };
        let want = (2.0f64).ln() / 2.0 + (2.0f64).ln() / 1.0 + (0.5f64 / 0.4).ln() / 0.5;
        assert_abs_diff_eq!(profile_integral(&profile, 0.1, 0.5), want, epsilon = 1e-14);
        assert_eq!(profile.at(0.05), f64::INFINITY);
        assert_eq!(profile.at(0.3), 1.0);
    }

    #[test]
    fn lanczos_path_agrees_with_dense() {
        // cycle of 700 states with holding 1/2 lies above the dense cutoff
        let n = 700;
        let mut p = DMatrix::zeros(n, n);
        for i in 0..n {
            p[(i, i)] = 0.5;
            p[(i, (i + 1) % n)] = 0.25;
            p[(i, (i + n - 1) % n)] = 0.25;
        }
        let c = Chain::with_stationary(p, vec![1.0; n], &Default::default()).unwrap();
        let (b2, bn) = extreme_eigenvalues(&c).unwrap();
        let theta = 2.0 * std::f64::consts::PI / n as f64;
        assert_abs_diff_eq!(b2, 0.5 + 0.5 * theta.cos(), epsilon = 1e-9);
        assert_abs_diff_eq!(bn, 0.0, epsilon = 1e-9);
    }
}
