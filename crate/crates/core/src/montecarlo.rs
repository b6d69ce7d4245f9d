//! Seeded trajectory simulation.
//!
//! Trials run in chunks of [`CHUNK`]; chunk `j` draws from the ChaCha8 stream
//! `j` of the given seed, and chunk summaries are merged in order, so results
//! are bit-identical across thread counts and execution modes.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Geometric;
use serde::{Deserialize, Serialize};

use crate::chain::{Chain, SubsetMask};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::spectral;

pub const CHUNK: u64 = 1024;
/// Survivors required at the last step before a decay rate is reported.
pub const MIN_SURVIVORS: u64 = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(trials)`.
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
    /// Trajectories stopped at the step cap and counted at the cap.
    pub capped: u64,
}

fn stream(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn chunks(trials: u64) -> impl Iterator<Item = (u64, u64)> {
    let count = trials.div_ceil(CHUNK);
    (0..count).map(move |j| (j, CHUNK.min(trials - j * CHUNK)))
}

/// Per-row samplers for one step of the chain.
struct Stepper {
    rows: Vec<(Vec<usize>, WeightedIndex<f64>)>,
}

impl Stepper {
    fn new(c: &Chain) -> Result<Self> {
        let rows = (0..c.n())
            .map(|x| {
                let (cols, vals) = c.sparse().row(x);
                let w = WeightedIndex::new(vals.iter().copied())
                    .map_err(|e| Error::BadParameter(format!("row {x}: {e}")))?;
                Ok((cols.to_vec(), w))
            })
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    fn step(&self, x: usize, rng: &mut ChaCha8Rng) -> usize {
        let (cols, w) = &self.rows[x];
        cols[w.sample(rng)]
    }
}

fn start_sampler(weights: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights.iter().copied()).map_err(|e| Error::BadParameter(format!("start distribution: {e}")))
}

/// Count, sum and sum of squares; merged in chunk order.
#[derive(Clone, Copy, Default)]
struct Moments {
    count: u64,
    sum: f64,
    sumsq: f64,
    capped: u64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sumsq += v * v;
    }

    fn merge(&mut self, o: &Moments) {
        self.count += o.count;
        self.sum += o.sum;
        self.sumsq += o.sumsq;
        self.capped += o.capped;
    }

    fn estimate(&self, seed: u64) -> SimEstimate {
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = if self.count > 1 {
            ((self.sumsq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        SimEstimate {
            mean,
            stderr: (var / n).sqrt(),
            trials: self.count,
            seed,
            capped: self.capped,
        }
    }
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::BadParameter("at least one trial is required".into()));
    }
    Ok(())
}

/// Default step cap: 200 times the analytic expectation when known,
/// otherwise `200 n^2`.
pub fn default_cap(c: &Chain, expected: Option<f64>) -> u64 {
    let base = expected.unwrap_or((c.n() * c.n()) as f64).max(1.0);
    (200.0 * base).ceil() as u64
}

/// Empirical mean of `T_A` from `start`.
pub fn simulate_hitting(
    c: &Chain,
    start: &[f64],
    target: &SubsetMask,
    trials: u64,
    seed: u64,
    cap: u64,
    exec: Exec,
) -> Result<SimEstimate> {
    check_trials(trials)?;
    if cap == 0 {
        return Err(Error::BadParameter("step cap must be at least 1".into()));
    }
    if start.len() != c.n() {
        return Err(Error::BadParameter(format!("start has {} entries, chain has {}", start.len(), c.n())));
    }
    let stepper = Stepper::new(c)?;
    let init = start_sampler(start)?;
    let hit = target.indicator();
    let plan: Vec<(u64, u64)> = chunks(trials).collect();
    let parts = exec.map(&plan, |&(j, size)| {
        let mut rng = stream(seed, j);
        let mut m = Moments::default();
        for _ in 0..size {
            let mut x = init.sample(&mut rng);
            let mut steps = 0;
            while !hit[x] && steps < cap {
                x = stepper.step(x, &mut rng);
                steps += 1;
            }
            if !hit[x] {
                m.capped += 1;
            }
            m.push(steps as f64);
        }
        m
    });
    let mut total = Moments::default();
    for p in &parts {
        total.merge(p);
    }
    if total.capped * 100 > trials {
        return Err(Error::CapSaturated {
            capped: total.capped,
            trials,
        });
    }
    Ok(total.estimate(seed))
}

/// Empirical law of `X_eta` with `P(eta = i) = t^{-1} (1 - 1/t)^i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricStepSample {
    pub t: f64,
    pub start: usize,
    /// Empirical probabilities of each end state.
    pub law: Vec<f64>,
    /// Mean of the sampled `eta`; its expectation is `t - 1`.
    pub eta: SimEstimate,
}

pub fn simulate_geometric_step(
    c: &Chain,
    t: f64,
    start: usize,
    trials: u64,
    seed: u64,
    exec: Exec,
) -> Result<GeometricStepSample> {
    check_trials(trials)?;
    if !(t >= 1.0 && t.is_finite()) {
        return Err(Error::BadParameter(format!("averaging time must be at least 1, got {t}")));
    }
    if start >= c.n() {
        return Err(Error::StateOutOfRange { state: start, n: c.n() });
    }
    let stepper = Stepper::new(c)?;
    let eta = Geometric::new(1.0 / t).map_err(|e| Error::BadParameter(e.to_string()))?;
    let plan: Vec<(u64, u64)> = chunks(trials).collect();
    let parts = exec.map(&plan, |&(j, size)| {
        let mut rng = stream(seed, j);
        let mut counts = vec![0u64; c.n()];
        let mut m = Moments::default();
        for _ in 0..size {
            let steps = eta.sample(&mut rng);
            let mut x = start;
            for _ in 0..steps {
                x = stepper.step(x, &mut rng);
            }
            counts[x] += 1;
            m.push(steps as f64);
        }
        (counts, m)
    });
    let mut counts = vec![0u64; c.n()];
    let mut total = Moments::default();
    for (cnt, m) in &parts {
        for (a, b) in counts.iter_mut().zip(cnt) {
            *a += b;
        }
        total.merge(m);
    }
    Ok(GeometricStepSample {
        t,
        start,
        law: counts.iter().map(|&k| k as f64 / trials as f64).collect(),
        eta: total.estimate(seed),
    })
}

/// Total-variation distance between two distributions.
pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Initial law for the exit-decay simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayStart {
    /// The quasi-stationary distribution of `B`.
    QuasiStationary,
    /// `pi` conditioned on `B`.
    Stationary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QsDecay {
    /// `survivors[k]` trajectories still inside `B` after `k` steps.
    pub survivors: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
    /// Least-squares slope of `log P[T > k]` over the fitted range.
    pub slope: f64,
    /// First step of the fitted range.
    pub fit_from: usize,
}

impl QsDecay {
    /// `exp(slope)`, the estimated per-step survival rate.
    pub fn rate(&self) -> f64 {
        self.slope.exp()
    }

    pub fn survival(&self, k: usize) -> f64 {
        self.survivors[k] as f64 / self.trials as f64
    }
}

/// Survival curve of `T_{B^c}` up to `kmax`, with the decay rate fitted over
/// all steps from a quasi-stationary start and over the second half from a
/// stationary one.
pub fn simulate_qs_decay(
    c: &Chain,
    subset: &SubsetMask,
    trials: u64,
    seed: u64,
    kmax: usize,
    from: DecayStart,
    exec: Exec,
) -> Result<QsDecay> {
    check_trials(trials)?;
    if kmax == 0 {
        return Err(Error::BadParameter("kmax must be at least 1".into()));
    }
    c.check_proper(subset)?;
    let local = match from {
        DecayStart::QuasiStationary => spectral::quasi_stationary(c, subset)?.alpha,
        DecayStart::Stationary => subset.members().iter().map(|&x| c.pi()[x]).collect(),
    };
    let init = start_sampler(&local)?;
    let stepper = Stepper::new(c)?;
    let inside = subset.indicator();
    let members = subset.members();
    let plan: Vec<(u64, u64)> = chunks(trials).collect();
    let parts = exec.map(&plan, |&(j, size)| {
        let mut rng = stream(seed, j);
        let mut surv = vec![0u64; kmax + 1];
        for _ in 0..size {
            let mut x = members[init.sample(&mut rng)];
            surv[0] += 1;
            for s in surv.iter_mut().skip(1) {
                x = stepper.step(x, &mut rng);
                if !inside[x] {
                    break;
                }
                *s += 1;
            }
        }
        surv
    });
    let mut survivors = vec![0u64; kmax + 1];
    for p in &parts {
        for (a, b) in survivors.iter_mut().zip(p) {
            *a += b;
        }
    }
    if survivors[kmax] < MIN_SURVIVORS {
        return Err(Error::InsufficientSurvival {
            survivors: survivors[kmax],
            k: kmax,
        });
    }
    let fit_from = match from {
        DecayStart::QuasiStationary => 0,
        DecayStart::Stationary => kmax / 2,
    };
    let xs: Vec<f64> = (fit_from..=kmax).map(|k| k as f64).collect();
    let ys: Vec<f64> = (fit_from..=kmax)
        .map(|k| (survivors[k] as f64 / trials as f64).ln())
        .collect();
    let slope = if xs.len() < 2 {
        ys[0]
    } else {
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    };
    Ok(QsDecay {
        survivors,
        trials,
        seed,
        slope,
        fit_from,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::geometric;

    fn lazy_path() -> Chain {
        Chain::from_rows(&[
            vec![0.5, 0.5, 0.0],
            vec![0.25, 0.5, 0.25],
            vec![0.0, 0.5, 0.5],
        ])
        .unwrap()
    }

    #[test]
    fn hitting_matches_analytic() {
        let c = lazy_path();
        let a = SubsetMask::singleton(&c, 2);
        let est = simulate_hitting(&c, &[1.0, 0.0, 0.0], &a, 10_000, 7, 10_000, Exec::Parallel).unwrap();
        assert!((est.mean - 8.0).abs() <= 4.0 * est.stderr, "{est:?}");
        let zero = simulate_hitting(&c, &[0.0, 0.0, 1.0], &a, 100, 7, 10, Exec::Parallel).unwrap();
        assert_eq!(zero.mean, 0.0);
    }

    #[test]
    fn deterministic_across_modes() {
        let c = lazy_path();
        let a = SubsetMask::singleton(&c, 2);
        let run = |e| simulate_hitting(&c, c.pi(), &a, 5000, 11, 10_000, e).unwrap();
        assert_eq!(run(Exec::Sequential), run(Exec::Parallel));
    }

    #[test]
    fn saturated_cap_is_an_error() {
        let c = lazy_path();
        let a = SubsetMask::singleton(&c, 2);
        let err = simulate_hitting(&c, &[1.0, 0.0, 0.0], &a, 1000, 1, 1, Exec::Sequential).unwrap_err();
        assert!(matches!(err, Error::CapSaturated { .. }));
    }

    #[test]
    fn geometric_step_unit_time_stays() {
        let c = lazy_path();
        let s = simulate_geometric_step(&c, 1.0, 1, 500, 3, Exec::Sequential).unwrap();
        assert_eq!(s.law, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn geometric_step_matches_resolvent() {
        let c = generators::biased_cycle(5).unwrap();
        let s = simulate_geometric_step(&c, 4.0, 0, 100_000, 5, Exec::Parallel).unwrap();
        let k = geometric::geometric_average(&c, 4.0).unwrap().matrix;
        let row: Vec<f64> = k.row(0).iter().copied().collect();
        assert!(tv_distance(&s.law, &row) <= 0.02);
        assert!((s.eta.mean - 3.0).abs() <= 4.0 * s.eta.stderr);
    }

    #[test]
    fn qs_decay_rate() {
        let c = lazy_path();
        let b = SubsetMask::from_members(&c, vec![0, 1]);
        let beta = spectral::restricted_beta(&c, &b).unwrap();
        let d = simulate_qs_decay(&c, &b, 20_000, 9, 6, DecayStart::QuasiStationary, Exec::Parallel).unwrap();
        assert!((d.rate() / beta - 1.0).abs() < 0.05, "{} vs {beta}", d.rate());
        assert!((d.survival(1) - beta).abs() < 0.02);
    }
}
