//! Finite Markov chains, subsets of their state space, and killed kernels.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{Config, Tolerances};
use crate::error::{Error, Result};
use crate::linalg::{self, Csr};

/// An irreducible, row-stochastic transition matrix with its stationary law.
#[derive(Clone, Debug)]
pub struct Chain {
    p: DMatrix<f64>,
    pi: Vec<f64>,
    reversible: bool,
    labels: Option<Vec<String>>,
    sparse: Csr,
    adjacency: Vec<Vec<usize>>,
    /// Undirected neighbour sets as bitmasks, present when `n <= 64`.
    neighbor_bits: Option<Vec<u64>>,
}

impl PartialEq for Chain {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.pi == other.pi && self.labels == other.labels
    }
}

impl Chain {
    /// Validates `p` and solves for the stationary distribution.
    pub fn new(p: DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        check_stochastic(&p, tol.construction)?;
        check_irreducible(&p)?;
        let pi = stationary(&p)?;
        Self::assemble(p, pi, tol)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?, &Tolerances::default())
    }

    /// Builds a chain whose stationary law is known in closed form.
    ///
    /// `pi` is normalized and then checked against `p`; a mismatch is an error.
    pub fn with_stationary(p: DMatrix<f64>, pi: Vec<f64>, tol: &Tolerances) -> Result<Self> {
        check_stochastic(&p, tol.construction)?;
        check_irreducible(&p)?;
        if pi.len() != p.nrows() || pi.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::StationarityMismatch(f64::INFINITY));
        }
        let total: f64 = pi.iter().sum();
        let pi: Vec<f64> = pi.iter().map(|v| v / total).collect();
        Self::assemble(p, pi, tol)
    }

    fn assemble(p: DMatrix<f64>, pi: Vec<f64>, tol: &Tolerances) -> Result<Self> {
        let residual = stationarity_residual(&p, &pi);
        if residual > tol.verification {
            return Err(Error::StationarityMismatch(residual));
        }
        let n = p.nrows();
        let reversible = detailed_balance_defect(&p, &pi) <= tol.verification;
        let sparse = Csr::from_dense(&p);
        let mut adjacency = vec![Vec::new(); n];
        for x in 0..n {
            for y in 0..n {
                if x != y && (p[(x, y)] > 0.0 || p[(y, x)] > 0.0) {
                    adjacency[x].push(y);
                }
            }
        }
        let neighbor_bits = (n <= 64).then(|| {
            adjacency
                .iter()
                .map(|ys| ys.iter().fold(0u64, |acc, &y| acc | (1u64 << y)))
                .collect()
        });
        Ok(Self {
            p,
            pi,
            reversible,
            labels: None,
            sparse,
            adjacency,
            neighbor_bits,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::BadParameter(format!(
                "{} labels for {} states",
                labels.len(),
                self.n()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn pi_min(&self) -> f64 {
        self.pi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn sparse(&self) -> &Csr {
        &self.sparse
    }

    /// Neighbours of `x` in the undirected support graph, excluding `x`.
    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adjacency[x]
    }

    pub fn neighbor_bits(&self) -> Option<&[u64]> {
        self.neighbor_bits.as_deref()
    }

    pub fn laziness(&self) -> f64 {
        (0..self.n()).map(|x| self.p[(x, x)]).fold(f64::INFINITY, f64::min)
    }

    /// `P*(x,y) = pi(y) P(y,x) / pi(x)`.
    pub fn time_reversal(&self) -> Result<Self> {
        let p = adjoint(&self.pi, &self.p);
        let mut rev = Self::assemble(p, self.pi.clone(), &Tolerances::default())?;
        rev.labels = self.labels.clone();
        Ok(rev)
    }

    /// Copies the rows and columns of `subset` out of `P`.
    pub fn restrict(&self, subset: &SubsetMask) -> Result<SubstochasticKernel<'_>> {
        self.check_proper(subset)?;
        let m = &subset.members;
        let entries = DMatrix::from_fn(m.len(), m.len(), |r, c| self.p[(m[r], m[c])]);
        Ok(SubstochasticKernel {
            base: self,
            mask: subset.clone(),
            entries,
        })
    }

    /// `pi` conditioned on `subset`, as a vector over all states.
    pub fn conditioned_distribution(&self, subset: &SubsetMask) -> Result<Vec<f64>> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut out = vec![0.0; self.n()];
        for &x in &subset.members {
            out[x] = self.pi[x] / subset.mass;
        }
        Ok(out)
    }

    pub(crate) fn check_proper(&self, subset: &SubsetMask) -> Result<()> {
        if subset.n != self.n() {
            return Err(Error::BadParameter(format!(
                "subset over {} states used with a chain on {}",
                subset.n,
                self.n()
            )));
        }
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        if subset.len() == self.n() {
            return Err(Error::FullSubset);
        }
        Ok(())
    }

    pub fn mask_mass(&self, bits: u64) -> f64 {
        let mut m = bits;
        let mut total = 0.0;
        while m != 0 {
            let x = m.trailing_zeros() as usize;
            total += self.pi[x];
            m &= m - 1;
        }
        total
    }

    /// Whether the states in `bits` induce a connected subgraph of the
    /// undirected support graph.
    pub fn mask_connected(&self, bits: u64) -> bool {
        let nb = self
            .neighbor_bits
            .as_ref()
            .expect("bitmask helpers need n <= 64");
        if bits == 0 {
            return false;
        }
        let mut reach = bits & bits.wrapping_neg();
        let mut frontier = reach;
        while frontier != 0 {
            let mut next = 0u64;
            let mut f = frontier;
            while f != 0 {
                next |= nb[f.trailing_zeros() as usize];
                f &= f - 1;
            }
            next &= bits & !reach;
            reach |= next;
            frontier = next;
        }
        reach == bits
    }

    fn check_cap(&self, cfg: &Config) -> Result<()> {
        let n = self.n();
        if n > cfg.enum_cap || n > 63 {
            return Err(Error::EnumerationTooLarge {
                n,
                cap: cfg.enum_cap.min(63),
            });
        }
        Ok(())
    }

    /// Bitmasks of proper connected subsets with `0 < pi(B) <= max_mass`,
    /// ascending.
    pub fn connected_masks(&self, max_mass: f64, cfg: &Config) -> Result<Vec<u64>> {
        self.check_cap(cfg)?;
        let full = (1u64 << self.n()) - 1;
        let limit = max_mass + cfg.tol.mass;
        Ok(cfg.exec.filter_range(1..full, |m| {
            self.mask_mass(m) <= limit && self.mask_connected(m)
        }))
    }

    /// Bitmasks of all proper nonempty subsets with `pi(B) <= max_mass`.
    pub fn all_masks(&self, max_mass: f64, cfg: &Config) -> Result<Vec<u64>> {
        self.check_cap(cfg)?;
        let full = (1u64 << self.n()) - 1;
        let limit = max_mass + cfg.tol.mass;
        Ok(cfg.exec.filter_range(1..full, |m| self.mask_mass(m) <= limit))
    }

    pub fn connected_subsets(&self, max_mass: f64, cfg: &Config) -> Result<Vec<SubsetMask>> {
        Ok(self
            .connected_masks(max_mass, cfg)?
            .into_iter()
            .map(|m| SubsetMask::from_bits(self, m))
            .collect())
    }

    /// Connected components of `subset` in the undirected support graph.
    pub fn components(&self, subset: &SubsetMask) -> Vec<SubsetMask> {
        let inside = subset.indicator();
        let mut seen = vec![false; self.n()];
        let mut out = Vec::new();
        for &s in &subset.members {
            if seen[s] {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for &y in &self.adjacency[x] {
                    if inside[y] && !seen[y] {
                        seen[y] = true;
                        comp.push(y);
                        queue.push_back(y);
                    }
                }
            }
            comp.sort_unstable();
            out.push(SubsetMask::from_members(self, comp));
        }
        out
    }

    /// Heat kernel `exp(t * rate * (P - I))`.
    pub fn continuize(&self, rate: f64, t: f64) -> Result<DMatrix<f64>> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        if !(rate > 0.0) {
            return Err(Error::BadParameter(format!("rate must be positive, got {rate}")));
        }
        let n = self.n();
        let s = rate * t;
        if s == 0.0 {
            return Ok(DMatrix::identity(n, n));
        }
        if self.reversible {
            let sqrt_pi: Vec<f64> = self.pi.iter().map(|v| v.sqrt()).collect();
            let eig = linalg::sym_eigen_desc(&symmetrize(&self.p, &sqrt_pi));
            let decay = DVector::from_iterator(n, eig.values.iter().map(|b| (s * (b - 1.0)).exp()));
            let v = &eig.vectors;
            let core = v * DMatrix::from_diagonal(&decay) * v.transpose();
            Ok(DMatrix::from_fn(n, n, |x, y| core[(x, y)] * sqrt_pi[y] / sqrt_pi[x]))
        } else {
            let generator = (&self.p - DMatrix::identity(n, n)) * s;
            Ok(generator.exp())
        }
    }

    pub fn to_file(&self) -> ChainFile {
        ChainFile {
            n: self.n(),
            p: (0..self.n())
                .map(|r| self.p.row(r).iter().copied().collect())
                .collect(),
            pi: Some(self.pi.clone()),
            labels: self.labels.clone(),
        }
    }

    pub fn from_file(file: ChainFile, tol: &Tolerances) -> Result<Self> {
        if file.p.len() != file.n {
            return Err(Error::NotSquare {
                rows: file.p.len(),
                cols: file.n,
            });
        }
        let chain = Self::new(matrix_from_rows(&file.p)?, tol)?;
        if let Some(claimed) = &file.pi {
            if claimed.len() != chain.n() {
                return Err(Error::StationarityMismatch(f64::INFINITY));
            }
            let gap = claimed
                .iter()
                .zip(&chain.pi)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if gap > tol.verification.max(1e-8) {
                return Err(Error::StationarityMismatch(gap));
            }
        }
        match file.labels {
            Some(labels) => chain.with_labels(labels),
            None => Ok(chain),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ChainFile = serde_json::from_str(text)?;
        Self::from_file(file, &Tolerances::default())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// On-disk chain layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainFile {
    pub n: usize,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::NotSquare {
            rows: n,
            cols: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

fn check_stochastic(p: &DMatrix<f64>, tol: f64) -> Result<()> {
    let (rows, cols) = p.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows < 2 {
        return Err(Error::DimensionTooSmall(rows));
    }
    for r in 0..rows {
        for c in 0..cols {
            let v = p[(r, c)];
            if !(-tol..=1.0 + tol).contains(&v) {
                return Err(Error::NegativeEntry {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
        let sum: f64 = p.row(r).iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::NotStochastic { row: r, sum });
        }
    }
    Ok(())
}

fn reaches_all(n: usize, step: impl Fn(usize, usize) -> bool) -> bool {
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = VecDeque::from([0]);
    while let Some(x) = queue.pop_front() {
        for (y, s) in seen.iter_mut().enumerate() {
            if !*s && step(x, y) {
                *s = true;
                queue.push_back(y);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn check_irreducible(p: &DMatrix<f64>) -> Result<()> {
    let n = p.nrows();
    if reaches_all(n, |x, y| p[(x, y)] > 0.0) && reaches_all(n, |x, y| p[(y, x)] > 0.0) {
        Ok(())
    } else {
        Err(Error::NotIrreducible)
    }
}

/// Solves `pi (P - I) = 0`, `sum pi = 1` by LU with one equation replaced.
fn stationary(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let (x, _) = linalg::solve_refined(&a, &b)?;
    if x.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::NotIrreducible);
    }
    let total = x.sum();
    Ok(x.iter().map(|v| v / total).collect())
}

/// `max_y |(pi P)(y) - pi(y)|`.
pub fn stationarity_residual(p: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let n = p.nrows();
    (0..n)
        .map(|y| {
            let flow: f64 = (0..n).map(|x| pi[x] * p[(x, y)]).sum();
            (flow - pi[y]).abs()
        })
        .fold(0.0, f64::max)
}

/// `max_{x,y} |pi(x) P(x,y) - pi(y) P(y,x)|`.
pub fn detailed_balance_defect(p: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let n = p.nrows();
    let mut worst: f64 = 0.0;
    for x in 0..n {
        for y in (x + 1)..n {
            worst = worst.max((pi[x] * p[(x, y)] - pi[y] * p[(y, x)]).abs());
        }
    }
    worst
}

/// The `pi`-adjoint `K*(x,y) = pi(y) K(y,x) / pi(x)` of a square kernel.
pub fn adjoint(pi: &[f64], k: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(k.nrows(), k.ncols(), |x, y| pi[y] * k[(y, x)] / pi[x])
}

/// `D^{1/2} K D^{-1/2}` for `D = diag(w^2)`.
pub fn symmetrize(k: &DMatrix<f64>, sqrt_w: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(k.nrows(), k.ncols(), |x, y| sqrt_w[x] * k[(x, y)] / sqrt_w[y])
}

/// A subset of the state space together with its stationary mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetMask {
    n: usize,
    members: Vec<usize>,
    mass: f64,
    connected: bool,
}

impl SubsetMask {
    /// `members` need not be sorted; duplicates are dropped.
    pub fn from_members(chain: &Chain, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        let n = chain.n();
        assert!(
            members.last().is_none_or(|&x| x < n),
            "subset member out of range"
        );
        let mass = members.iter().map(|&x| chain.pi[x]).sum();
        let connected = connected_members(chain, &members);
        Self {
            n,
            members,
            mass,
            connected,
        }
    }

    pub fn try_from_members(chain: &Chain, members: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = members.iter().find(|&&x| x >= chain.n()) {
            return Err(Error::StateOutOfRange {
                state: bad,
                n: chain.n(),
            });
        }
        Ok(Self::from_members(chain, members))
    }

    pub fn from_bits(chain: &Chain, bits: u64) -> Self {
        let members = (0..chain.n().min(64)).filter(|&x| bits >> x & 1 == 1).collect();
        Self::from_members(chain, members)
    }

    pub fn singleton(chain: &Chain, x: usize) -> Self {
        Self::from_members(chain, vec![x])
    }

    pub fn full(chain: &Chain) -> Self {
        Self::from_members(chain, (0..chain.n()).collect())
    }

    /// Parses a hexadecimal bitmask, least significant bit = state 0.
    pub fn from_hex(chain: &Chain, text: &str) -> Result<Self> {
        let digits = text.trim().trim_start_matches("0x").trim_start_matches("0X");
        let mut members = Vec::new();
        for (pos, ch) in digits.chars().rev().enumerate() {
            let nibble = ch
                .to_digit(16)
                .ok_or_else(|| Error::BadParameter(format!("not a hex bitmask: {text}")))?;
            for bit in 0..4 {
                if nibble >> bit & 1 == 1 {
                    members.push(4 * pos + bit);
                }
            }
        }
        Self::try_from_members(chain, members)
    }

    pub fn hex(&self) -> String {
        let nibbles = self.n.div_ceil(4).max(1);
        let mut digits = vec![0u32; nibbles];
        for &x in &self.members {
            digits[x / 4] |= 1 << (x % 4);
        }
        let mut out = String::from("0x");
        let top = digits.iter().rposition(|&d| d != 0).unwrap_or(0);
        for d in digits[..=top].iter().rev() {
            write!(out, "{:x}", d).expect("writing to a String");
        }
        out
    }

    pub fn bits(&self) -> Option<u64> {
        (self.n <= 64).then(|| self.members.iter().fold(0u64, |acc, &x| acc | 1u64 << x))
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn state_count(&self) -> usize {
        self.n
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    pub fn indicator(&self) -> Vec<bool> {
        let mut out = vec![false; self.n];
        for &x in &self.members {
            out[x] = true;
        }
        out
    }

    pub fn complement(&self, chain: &Chain) -> Self {
        let inside = self.indicator();
        Self::from_members(chain, (0..self.n).filter(|&x| !inside[x]).collect())
    }

    pub fn is_subset_of(&self, other: &SubsetMask) -> bool {
        self.members.iter().all(|&x| other.contains(x))
    }
}

fn connected_members(chain: &Chain, members: &[usize]) -> bool {
    let Some(&first) = members.first() else {
        return false;
    };
    let mut inside = vec![false; chain.n()];
    for &x in members {
        inside[x] = true;
    }
    let mut seen = vec![false; chain.n()];
    seen[first] = true;
    let mut count = 1;
    let mut queue = VecDeque::from([first]);
    while let Some(x) = queue.pop_front() {
        for &y in chain.neighbors(x) {
            if inside[y] && !seen[y] {
                seen[y] = true;
                count += 1;
                queue.push_back(y);
            }
        }
    }
    count == members.len()
}

/// `P_B`: the chain killed on leaving `B`.
#[derive(Clone, Debug)]
pub struct SubstochasticKernel<'a> {
    pub base: &'a Chain,
    pub mask: SubsetMask,
    pub entries: DMatrix<f64>,
}

impl SubstochasticKernel<'_> {
    /// `pi` restricted to `B` and normalized, indexed like `entries`.
    pub fn local_pi(&self) -> Vec<f64> {
        self.mask
            .members
            .iter()
            .map(|&x| self.base.pi[x] / self.mask.mass)
            .collect()
    }

    /// `(P_B)*` with respect to `pi_B`.
    pub fn adjoint(&self) -> DMatrix<f64> {
        adjoint(&self.local_pi(), &self.entries)
    }

    /// `max_x P_B 1(x)`.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.entries.nrows())
            .map(|r| self.entries.row(r).sum())
            .fold(0.0, f64::max)
    }
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

    fn biased_cycle3() -> Chain {
        let (f, b) = (1.0 / 3.0, 1.0 / 6.0);
        Chain::from_rows(&[vec![0.5, f, b], vec![b, 0.5, f], vec![f, b, 0.5]]).unwrap()
    }

    #[test]
    fn two_state_stationary_law() {
        let c = Chain::from_rows(&[vec![2.0 / 3.0, 1.0 / 3.0], vec![1.0 / 6.0, 5.0 / 6.0]])
            .unwrap();
        // pi = (q, p) / (p + q) with p = 1/3, q = 1/6
        assert_abs_diff_eq!(c.pi()[0], 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.pi()[1], 2.0 / 3.0, epsilon = 1e-14);
        assert!(c.is_reversible());
        let sym = Chain::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(sym.pi(), &[0.5, 0.5]);
    }

    #[test]
    fn construction_errors() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert!(matches!(
            Chain::new(id, &Tolerances::default()),
            Err(Error::NotIrreducible)
        ));
        assert!(matches!(
            Chain::from_rows(&[vec![1.0]]),
            Err(Error::DimensionTooSmall(1))
        ));
        assert!(matches!(
            Chain::from_rows(&[vec![0.5, 0.6], vec![0.5, 0.5]]),
            Err(Error::NotStochastic { row: 0, .. })
        ));
    }

    #[test]
    fn biased_cycle_reversal_flips_bias() {
        let c = biased_cycle3();
        assert!(!c.is_reversible());
        for x in 0..3 {
            assert_abs_diff_eq!(c.pi()[x], 1.0 / 3.0, epsilon = 1e-14);
        }
        let r = c.time_reversal().unwrap();
        assert_abs_diff_eq!(r.p()[(0, 1)], 1.0 / 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.p()[(0, 2)], 1.0 / 3.0, epsilon = 1e-14);
        let rr = r.time_reversal().unwrap();
        assert!((rr.p() - c.p()).amax() <= 1e-14);
    }

    #[test]
    fn restriction_and_conditioning() {
        let c = lazy_path3();
        let b = SubsetMask::from_members(&c, vec![0, 1]);
        let k = c.restrict(&b).unwrap();
        assert_eq!(k.entries, DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.25, 0.5]));
        let cond = c.conditioned_distribution(&b).unwrap();
        assert_abs_diff_eq!(cond[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cond[1], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(cond[2], 0.0);
        assert!(matches!(
            c.restrict(&SubsetMask::full(&c)),
            Err(Error::FullSubset)
        ));
        assert!(matches!(
            c.restrict(&SubsetMask::from_members(&c, vec![])),
            Err(Error::EmptySubset)
        ));
        let whole = c.conditioned_distribution(&SubsetMask::full(&c)).unwrap();
        assert_eq!(whole, c.pi());
    }

    #[test]
    fn connected_enumeration() {
        let c = lazy_path3();
        let cfg = Config::default();
        assert_eq!(c.connected_masks(0.5, &cfg).unwrap(), vec![1, 2, 4]);
        // {0,2} is disconnected on the path
        assert_eq!(c.connected_masks(1.0, &cfg).unwrap(), vec![1, 2, 3, 4, 6]);
        let k4 = Chain::from_rows(&vec![vec![0.25; 4]; 4]).unwrap();
        assert_eq!(k4.connected_masks(1.0, &cfg).unwrap().len(), 14);
        let small = cfg.with_enum_cap(2);
        assert!(matches!(
            c.connected_masks(1.0, &small),
            Err(Error::EnumerationTooLarge { n: 3, cap: 2 })
        ));
    }

    #[test]
    fn components_split_disconnected_sets() {
        let c = lazy_path3();
        let b = SubsetMask::from_members(&c, vec![0, 2]);
        assert!(!b.is_connected());
        let parts = c.components(&b);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].members(), &[0]);
        assert_eq!(parts[1].members(), &[2]);
    }

    #[test]
    fn heat_kernel_two_state() {
        let c = Chain::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        for t in [0.1, 1.0, 10.0] {
            let h = c.continuize(1.0, t).unwrap();
            assert_abs_diff_eq!(h[(0, 0)], 0.5 + 0.5 * (-t).exp(), epsilon = 1e-12);
            assert_abs_diff_eq!(h[(0, 1)], 0.5 - 0.5 * (-t).exp(), epsilon = 1e-12);
        }
        assert_eq!(c.continuize(1.0, 0.0).unwrap(), DMatrix::identity(2, 2));
        assert!(matches!(c.continuize(1.0, -1.0), Err(Error::NegativeTime(_))));
        let cyc = biased_cycle3();
        for t in [0.1, 1.0, 10.0] {
            let h = cyc.continuize(1.0, t).unwrap();
            for r in 0..3 {
                assert_abs_diff_eq!(h.row(r).sum(), 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn hex_round_trip() {
        let c = lazy_path3();
        let b = SubsetMask::from_members(&c, vec![0, 2]);
        assert_eq!(b.hex(), "0x5");
        assert_eq!(SubsetMask::from_hex(&c, "0x5").unwrap(), b);
        assert!(matches!(
            SubsetMask::from_hex(&c, "0x8"),
            Err(Error::StateOutOfRange { state: 3, n: 3 })
        ));
    }

    #[test]
    fn json_round_trip_and_pi_cross_check() {
        let c = lazy_path3();
        let back = Chain::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        let lying = r#"{"n":2,"P":[[0.5,0.5],[0.5,0.5]],"pi":[0.9,0.1]}"#;
        assert!(matches!(
            Chain::from_json(lying),
            Err(Error::StationarityMismatch(_))
        ));
    }
}
