//! Seedable constructors for the chain families used by the harness.

use std::collections::{BTreeMap, HashSet};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{Chain, SubsetMask};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::spectral;

pub fn two_state(p: f64, q: f64) -> Result<Chain> {
    for v in [p, q] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::BadParameter(format!("two-state rates must lie in (0,1], got {v}")));
        }
    }
    let m = DMatrix::from_row_slice(2, 2, &[1.0 - p, p, q, 1.0 - q]);
    Chain::with_stationary(m, vec![q, p], &Tolerances::default())
}

/// Nearest-neighbour chain on `0..n` with the given step probabilities.
///
/// `up[n-1]` and `down[0]` must be zero.
pub fn birth_death(up: &[f64], down: &[f64], hold: &[f64]) -> Result<Chain> {
    let n = up.len();
    if down.len() != n || hold.len() != n {
        return Err(Error::BadParameter("rate vectors differ in length".into()));
    }
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    let tol = Tolerances::default();
    for i in 0..n {
        let sum = up[i] + down[i] + hold[i];
        if (sum - 1.0).abs() > tol.construction || up[i] < 0.0 || down[i] < 0.0 || hold[i] < 0.0 {
            return Err(Error::NotAPartition { state: i, sum });
        }
        if (i + 1 < n && up[i] <= 0.0) || (i > 0 && down[i] <= 0.0) {
            return Err(Error::ZeroRate(i));
        }
    }
    if up[n - 1] != 0.0 || down[0] != 0.0 {
        return Err(Error::BadParameter("steps off the ends of the line".into()));
    }
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        p[(i, i)] = hold[i];
        if i + 1 < n {
            p[(i, i + 1)] = up[i];
        }
        if i > 0 {
            p[(i, i - 1)] = down[i];
        }
    }
    // detailed balance: pi(i+1) down(i+1) = pi(i) up(i)
    let mut pi = vec![1.0; n];
    for i in 0..n - 1 {
        pi[i + 1] = pi[i] * up[i] / down[i + 1];
    }
    Chain::with_stationary(p, pi, &tol)
}

/// Seeded birth-death chain whose holding probabilities are at least `lazy`.
pub fn random_birth_death(n: usize, lazy: f64, seed: u64) -> Result<Chain> {
    if !(0.0..1.0).contains(&lazy) {
        return Err(Error::BadParameter(format!("laziness must lie in [0,1), got {lazy}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut up = vec![0.0; n];
    let mut down = vec![0.0; n];
    let mut hold = vec![0.0; n];
    for i in 0..n {
        let h = lazy + (1.0 - lazy) * rng.random_range(0.0..0.5);
        let a: f64 = if i + 1 < n { rng.random_range(0.1..1.0) } else { 0.0 };
        let b: f64 = if i > 0 { rng.random_range(0.1..1.0) } else { 0.0 };
        up[i] = (1.0 - h) * a / (a + b);
        down[i] = (1.0 - h) * b / (a + b);
        hold[i] = 1.0 - up[i] - down[i];
    }
    birth_death(&up, &down, &hold)
}

/// Random walk on a graph that stays put with probability `laziness` and
/// otherwise moves along a uniform incident edge. Repeated entries in an
/// adjacency list count as parallel edges; `x` in its own list is a loop.
pub fn lazy_rw_graph(adjacency: &[Vec<usize>], laziness: f64) -> Result<Chain> {
    if !(0.0..1.0).contains(&laziness) {
        return Err(Error::BadParameter(format!("laziness must lie in [0,1), got {laziness}")));
    }
    let n = adjacency.len();
    let mut p = DMatrix::zeros(n, n);
    for (x, nbrs) in adjacency.iter().enumerate() {
        if nbrs.is_empty() {
            return Err(Error::Disconnected);
        }
        let w = (1.0 - laziness) / nbrs.len() as f64;
        p[(x, x)] += laziness;
        for &y in nbrs {
            if y >= n {
                return Err(Error::StateOutOfRange { state: y, n });
            }
            p[(x, y)] += w;
        }
    }
    let count = |x: usize, y: usize| adjacency[x].iter().filter(|&&z| z == y).count();
    for (x, list) in adjacency.iter().enumerate() {
        for &y in list {
            if count(x, y) != count(y, x) {
                return Err(Error::BadParameter(format!("edge {x}-{y} is not symmetric")));
            }
        }
    }
    let degrees: Vec<f64> = adjacency.iter().map(|a| a.len() as f64).collect();
    match Chain::with_stationary(p, degrees, &Tolerances::default()) {
        Err(Error::NotIrreducible) => Err(Error::Disconnected),
        other => other,
    }
}

pub fn path_adjacency(n: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|x| {
            let mut v = Vec::new();
            if x > 0 {
                v.push(x - 1);
            }
            if x + 1 < n {
                v.push(x + 1);
            }
            v
        })
        .collect()
}

/// Random connected simple graph: a random recursive tree plus independent
/// extra edges.
pub fn random_graph(n: usize, edge_prob: f64, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: HashSet<(usize, usize)> = HashSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.insert((u, v));
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random_bool(edge_prob) {
                edges.insert((u, v));
            }
        }
    }
    let mut adj = vec![Vec::new(); n];
    let mut sorted: Vec<_> = edges.into_iter().collect();
    sorted.sort_unstable();
    for (u, v) in sorted {
        adj[u].push(v);
        adj[v].push(u);
    }
    adj
}

/// Simple random walk on the complete graph without loops.
pub fn complete(n: usize) -> Result<Chain> {
    if n < 2 {
        return Err(Error::TooSmall { n, min: 2 });
    }
    let adj: Vec<Vec<usize>> = (0..n).map(|x| (0..n).filter(|&y| y != x).collect()).collect();
    lazy_rw_graph(&adj, 0.0)
}

/// Cycle that holds with probability 1/2, steps forward with 1/3 and back
/// with 1/6.
pub fn biased_cycle(n: usize) -> Result<Chain> {
    if n < 3 {
        return Err(Error::TooSmall { n, min: 3 });
    }
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        p[(i, i)] = 0.5;
        p[(i, (i + 1) % n)] = 1.0 / 3.0;
        p[(i, (i + n - 1) % n)] = 1.0 / 6.0;
    }
    Chain::with_stationary(p, vec![1.0; n], &Tolerances::default())
}

/// A well-connected cubic graph with a long pendant path hanging off one
/// vertex.
#[derive(Clone, Debug)]
pub struct PendantPathExample {
    pub chain: Chain,
    /// The attachment vertex `o`.
    pub origin: usize,
    /// Vertices of the base graph, `0..n`.
    pub base: SubsetMask,
    /// The pendant path `F`, `n..n+r`, with `n` adjacent to `o`.
    pub path: SubsetMask,
    /// Relaxation time of the walk on the base graph with its loop at `o`.
    pub base_t_rel: f64,
    /// Rejection rounds used.
    pub attempts: usize,
}

pub const PENDANT_ROUNDS: usize = 100;

/// Default ceiling on the base graph's relaxation time. A non-lazy walk on a
/// large random cubic graph has `t_rel` near `1 / (1 - 2 sqrt 2 / 3) = 17.5`,
/// so a ceiling of 10 can never be met.
pub const PENDANT_TREL_CEILING: f64 = 25.0;

/// Pairing-model cubic multigraph on `n` vertices where vertex 0 carries a
/// loop and three other edges. Returns `None` when the pairing produced a
/// loop elsewhere or a repeated edge.
fn cubic_pairing(n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Vec<usize>>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| [v, v, v]).collect();
    stubs.shuffle(rng);
    let mut adj = vec![Vec::with_capacity(4); n];
    let mut seen = HashSet::with_capacity(3 * n / 2);
    for pair in stubs.chunks_exact(2) {
        let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
        if u == v || !seen.insert((u, v)) {
            return None;
        }
        adj[u].push(v);
        adj[v].push(u);
    }
    Some(adj)
}

fn graph_connected(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    seen[0] = true;
    let mut stack = vec![0];
    while let Some(x) = stack.pop() {
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Sparse random-walk chain with degree-proportional stationary law.
fn walk_from_adjacency(adj: &[Vec<usize>]) -> Result<Chain> {
    let n = adj.len();
    let mut p = DMatrix::zeros(n, n);
    for (x, nbrs) in adj.iter().enumerate() {
        let w = 1.0 / nbrs.len() as f64;
        for &y in nbrs {
            p[(x, y)] += w;
        }
    }
    let degrees = adj.iter().map(|a| a.len() as f64).collect();
    Chain::with_stationary(p, degrees, &Tolerances::default())
}

pub fn pendant_path_example(n: usize, seed: u64) -> Result<PendantPathExample> {
    pendant_path_example_with(n, seed, PENDANT_TREL_CEILING)
}

pub fn pendant_path_example_with(n: usize, seed: u64, t_rel_ceiling: f64) -> Result<PendantPathExample> {
    if n < 8 {
        return Err(Error::TooSmall { n, min: 8 });
    }
    if n % 2 == 1 {
        return Err(Error::BadParameter(format!(
            "a cubic graph needs an even vertex count, got {n}"
        )));
    }
    // smallest r with r^3 >= n
    let mut r = (n as f64).cbrt().round() as usize;
    while r.pow(3) < n {
        r += 1;
    }
    while r > 1 && (r - 1).pow(3) >= n {
        r -= 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=PENDANT_ROUNDS {
        let Some(mut adj) = cubic_pairing(n, &mut rng) else {
            continue;
        };
        if !graph_connected(&adj) {
            continue;
        }
        // the loop at o counts once, matching o's degree after the path is attached
        adj[0].push(0);
        let base_chain = walk_from_adjacency(&adj)?;
        let base_t_rel = spectral::relaxation_time(&base_chain)?;
        if base_t_rel > t_rel_ceiling {
            continue;
        }
        adj[0].pop();
        adj.extend((0..r).map(|_| Vec::with_capacity(2)));
        adj[0].push(n);
        adj[n].push(0);
        for i in n..n + r - 1 {
            adj[i].push(i + 1);
            adj[i + 1].push(i);
        }
        let chain = walk_from_adjacency(&adj)?;
        let base = SubsetMask::from_members(&chain, (0..n).collect());
        let path = SubsetMask::from_members(&chain, (n..n + r).collect());
        return Ok(PendantPathExample {
            chain,
            origin: 0,
            base,
            path,
            base_t_rel,
            attempts: attempt,
        });
    }
    Err(Error::ConstructionFailed(PENDANT_ROUNDS))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    TwoState,
    BirthDeath,
    LazyPath,
    BiasedCycle,
    Complete,
    LazyRwGraph,
    PendantPath,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::TwoState,
        Family::BirthDeath,
        Family::LazyPath,
        Family::BiasedCycle,
        Family::Complete,
        Family::LazyRwGraph,
        Family::PendantPath,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::TwoState => "two_state",
            Family::BirthDeath => "birth_death",
            Family::LazyPath => "lazy_path",
            Family::BiasedCycle => "biased_cycle",
            Family::Complete => "complete",
            Family::LazyRwGraph => "lazy_rw_graph",
            Family::PendantPath => "pendant_path",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::BadParameter(format!("unknown family {s}")))
    }
}

/// A family name, its numeric parameters and a seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: Family,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl FamilySpec {
    pub fn new(family: Family, seed: u64) -> Self {
        Self {
            family,
            params: BTreeMap::new(),
            seed,
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    fn size(&self, default: f64) -> Result<usize> {
        let n = self.get("n", default);
        if n < 0.0 || n.fract() != 0.0 {
            return Err(Error::BadParameter(format!("n must be a non-negative integer, got {n}")));
        }
        Ok(n as usize)
    }

    /// Short human-readable tag, e.g. `birth_death[n=7]#3`.
    pub fn label(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}[{}]#{}", self.family.name(), params.join(","), self.seed)
    }

    pub fn build(&self) -> Result<Chain> {
        match self.family {
            Family::TwoState => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let p = self.params.get("p").copied().unwrap_or_else(|| rng.random_range(0.05..=0.5));
                let q = self.params.get("q").copied().unwrap_or_else(|| rng.random_range(0.05..=0.5));
                two_state(p, q)
            }
            Family::BirthDeath => random_birth_death(self.size(6.0)?, self.get("lazy", 0.5), self.seed),
            Family::LazyPath => lazy_rw_graph(&path_adjacency(self.size(3.0)?), self.get("laziness", 0.5)),
            Family::BiasedCycle => biased_cycle(self.size(8.0)?),
            Family::Complete => complete(self.size(4.0)?),
            Family::LazyRwGraph => {
                let adj = random_graph(self.size(8.0)?, self.get("edge_prob", 0.3), self.seed);
                lazy_rw_graph(&adj, self.get("laziness", 0.5))
            }
            Family::PendantPath => Ok(self.build_pendant_path()?.chain),
        }
    }

    pub fn build_pendant_path(&self) -> Result<PendantPathExample> {
        if self.family != Family::PendantPath {
            return Err(Error::BadParameter(format!("{} is not the pendant-path family", self.label())));
        }
        pendant_path_example_with(self.size(64.0)?, self.seed, self.get("t_rel_ceiling", PENDANT_TREL_CEILING))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn biased_cycle_rows() {
        let c = biased_cycle(3).unwrap();
        assert_abs_diff_eq!(c.p()[(0, 0)], 0.5);
        assert_abs_diff_eq!(c.p()[(0, 1)], 1.0 / 3.0);
        assert_abs_diff_eq!(c.p()[(0, 2)], 1.0 / 6.0);
        assert!(!c.is_reversible());
        assert!(matches!(biased_cycle(2), Err(Error::TooSmall { n: 2, min: 3 })));
    }

    #[test]
    fn lazy_path_fixture() {
        let c = lazy_rw_graph(&path_adjacency(3), 0.5).unwrap();
        let want = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.25, 0.5, 0.25, 0.0, 0.5, 0.5]);
        assert!((c.p() - want).amax() < 1e-15);
        let bd = birth_death(&[0.5, 0.25, 0.0], &[0.0, 0.25, 0.5], &[0.5, 0.5, 0.5]).unwrap();
        for (got, want) in bd.pi().iter().zip([0.25, 0.5, 0.25]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn birth_death_errors() {
        assert!(matches!(
            birth_death(&[0.5, 0.0], &[0.0, 0.5], &[0.4, 0.5]),
            Err(Error::NotAPartition { state: 0, .. })
        ));
        assert!(matches!(
            birth_death(&[0.0, 0.0], &[0.0, 0.5], &[1.0, 0.5]),
            Err(Error::ZeroRate(0))
        ));
    }

    #[test]
    fn disconnected_graph_rejected() {
        let adj = vec![vec![1], vec![0], vec![3], vec![2]];
        assert!(matches!(lazy_rw_graph(&adj, 0.5), Err(Error::Disconnected)));
        assert!(matches!(lazy_rw_graph(&path_adjacency(3), 1.0), Err(Error::BadParameter(_))));
    }

    #[test]
    fn two_state_gaps() {
        assert_abs_diff_eq!(spectral::relaxation_time(&two_state(0.5, 0.5).unwrap()).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spectral::relaxation_time(&two_state(0.25, 0.25).unwrap()).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn specs_are_reproducible() {
        for family in [Family::TwoState, Family::BirthDeath, Family::LazyRwGraph] {
            let spec = FamilySpec::new(family, 42).with("n", 7.0);
            assert_eq!(spec.build().unwrap(), spec.build().unwrap());
        }
        let a = FamilySpec::new(Family::BirthDeath, 1).with("n", 7.0).build().unwrap();
        let b = FamilySpec::new(Family::BirthDeath, 2).with("n", 7.0).build().unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn pendant_path_shape() {
        let ex = pendant_path_example(64, 1).unwrap();
        assert_eq!(ex.chain.n(), 68);
        assert_eq!(ex.path.len(), 4);
        let deg = |x: usize| ex.chain.neighbors(x).len();
        assert_eq!(deg(0), 4);
        for v in 1..64 {
            assert_eq!(deg(v), 3);
        }
        assert_eq!((64..67).map(deg).collect::<Vec<_>>(), vec![2, 2, 2]);
        assert_eq!(deg(67), 1);
        let total: f64 = (0..68).map(|v| deg(v) as f64).sum();
        for v in 0..68 {
            assert_abs_diff_eq!(ex.chain.pi()[v], deg(v) as f64 / total, epsilon = 1e-14);
        }
        assert!(matches!(pendant_path_example(63, 1), Err(Error::BadParameter(_))));
        assert!(matches!(pendant_path_example(6, 1), Err(Error::TooSmall { .. })));
    }
}
