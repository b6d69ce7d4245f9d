//! Quantile indices and the prefix/suffix exit statistic of birth-death
//! chains.
//!
//! States are numbered `1..=n` inside this module, so `[i]` is the prefix
//! `{1, ..., i}`; state `i` is row `i - 1` of the kernel.

use serde::{Deserialize, Serialize};

use crate::chain::{Chain, SubsetMask};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::hitting::{self, expected_hitting, stationary_exit};
use crate::record::VerificationRecord;
use crate::spectral;

/// Mass threshold used for the quantile indices.
pub const BD_DELTA: f64 = 0.75;
/// Interval-by-interval checks run up to this many states.
pub const INTERVAL_CHECK_LIMIT: usize = 30;

/// The largest prefix and suffix exit times over the quantile range.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BDStatistics {
    pub delta: f64,
    /// `max { i : pi([i]) <= delta }`, if any prefix qualifies.
    pub x_delta: Option<usize>,
    /// `min { i : pi({i, ..., n}) <= delta }`, if any suffix qualifies.
    pub y_delta: Option<usize>,
    /// `E_{pi_[i]}[T_{i+1}]` for `i = 1..=x_delta`.
    pub prefix_exits: Vec<f64>,
    /// `E_{pi_{i..n}}[T_{i-1}]` for `i = y_delta..=n`.
    pub suffix_exits: Vec<f64>,
    /// Largest prefix exit and its index.
    pub prefix_max: Option<(usize, f64)>,
    /// Largest suffix exit and its index.
    pub suffix_max: Option<(usize, f64)>,
    pub t_star: f64,
}

/// Fails unless every transition moves by at most one state.
pub fn check_birth_death(c: &Chain) -> Result<()> {
    let n = c.n();
    for row in 0..n {
        for col in 0..n {
            if row.abs_diff(col) > 1 && c.p()[(row, col)] > 0.0 {
                return Err(Error::NotBirthDeath { row, col });
            }
        }
    }
    Ok(())
}

/// `{lo, ..., hi}` in 1-based labels.
fn interval(c: &Chain, lo: usize, hi: usize) -> SubsetMask {
    SubsetMask::from_members(c, (lo - 1..hi).collect())
}

fn conditioned_mean(c: &Chain, h: &[f64], lo: usize, hi: usize) -> f64 {
    let pi = &c.pi()[lo - 1..hi];
    let mass: f64 = pi.iter().sum();
    pi.iter().zip(&h[lo - 1..hi]).map(|(p, v)| p * v).sum::<f64>() / mass
}

/// `E_x[T_i]` for all `x`, with `i` 1-based.
fn hits(c: &Chain, i: usize) -> Result<Vec<f64>> {
    Ok(expected_hitting(c, &SubsetMask::singleton(c, i - 1))?.expectations)
}

pub fn bd_statistics(c: &Chain) -> Result<BDStatistics> {
    bd_statistics_at(c, BD_DELTA)
}

/// As [`bd_statistics`] with the quantile threshold `delta` in `(0, 1)`.
pub fn bd_statistics_at(c: &Chain, delta: f64) -> Result<BDStatistics> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::BadParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    check_birth_death(c)?;
    let n = c.n();
    let pi = c.pi();
    let slack = 1e-12;

    let mut acc = 0.0;
    let mut x_delta = None;
    for (i, p) in pi.iter().enumerate() {
        acc += p;
        if acc <= delta + slack {
            x_delta = Some(i + 1);
        }
    }
    let mut acc = 0.0;
    let mut y_delta = None;
    for i in (0..n).rev() {
        acc += pi[i];
        if acc <= delta + slack {
            y_delta = Some(i + 1);
        }
    }

    let prefix_exits = match x_delta {
        Some(x) => (1..=x.min(n - 1))
            .map(|i| Ok(conditioned_mean(c, &hits(c, i + 1)?, 1, i)))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let suffix_exits = match y_delta {
        Some(y) => (y.max(2)..=n)
            .map(|i| Ok(conditioned_mean(c, &hits(c, i - 1)?, i, n)))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let argmax = |vals: &[f64], offset: usize| {
        vals.iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (k, &v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((k + offset, v)),
            })
    };
    let prefix_max = argmax(&prefix_exits, 1);
    let suffix_max = argmax(&suffix_exits, y_delta.map_or(0, |y| y.max(2)));
    let t_star = prefix_max
        .map(|p| p.1)
        .into_iter()
        .chain(suffix_max.map(|s| s.1))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(BDStatistics {
        delta,
        x_delta,
        y_delta,
        prefix_exits,
        suffix_exits,
        prefix_max,
        suffix_max,
        t_star,
    })
}

/// `t_H^pi` as the largest exit time over intervals of mass at most 1/2,
/// with the maximizing interval.
pub fn interval_t_h_pi(c: &Chain) -> Result<(f64, SubsetMask)> {
    check_birth_death(c)?;
    let n = c.n();
    let mut best: Option<(f64, SubsetMask)> = None;
    for lo in 1..=n {
        for hi in lo..=n {
            let set = interval(c, lo, hi);
            if set.mass() > 0.5 + 1e-12 {
                break;
            }
            let v = stationary_exit(c, &set)?;
            if best.as_ref().is_none_or(|b| v > b.0) {
                best = Some((v, set));
            }
        }
    }
    best.ok_or(Error::EmptySubset)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BdCheck {
    pub stats: BDStatistics,
    pub t_rel: f64,
    /// `t_rel / t_*`.
    pub ratio: f64,
    pub records: Vec<VerificationRecord>,
}

fn scaled(id: String, lhs: f64, rhs: f64) -> VerificationRecord {
    let tol = crate::record::tolerance(&id) * rhs.abs().max(1.0);
    VerificationRecord::le_with(id, lhs, rhs, tol)
}

/// `t_* / 4 <= t_rel`, the prefix/suffix exit identities and, for at most
/// 30 states, the interval domination chain for every interval. With at most
/// `cfg.enum_cap` states, interval and connected-set enumeration of `t_H^pi`
/// are compared.
pub fn bd_check(c: &Chain, cfg: &Config) -> Result<BdCheck> {
    let stats = bd_statistics(c)?;
    let t_rel = spectral::relaxation_time(c)?;
    let n = c.n();
    let mut records = vec![VerificationRecord::le("bd.lower", stats.t_star / 4.0, t_rel)];

    if let Some(x) = stats.x_delta {
        for (k, v) in stats.prefix_exits.iter().enumerate().take(x) {
            let exit = stationary_exit(c, &interval(c, 1, k + 1))?;
            records.push(scaled("bd_equal.prefix".into(), (exit - v).abs(), 0.0).with_witness(format!("i={}", k + 1)));
        }
    }
    if let Some(y) = stats.y_delta {
        let first = y.max(2);
        for (k, v) in stats.suffix_exits.iter().enumerate() {
            let i = first + k;
            let exit = stationary_exit(c, &interval(c, i, n))?;
            records.push(scaled("bd_equal.suffix".into(), (exit - v).abs(), 0.0).with_witness(format!("i={i}")));
        }
    }

    if n <= INTERVAL_CHECK_LIMIT {
        records.extend(interval_records(c)?);
    }
    if n <= cfg.enum_cap {
        let (by_interval, _) = interval_t_h_pi(c)?;
        let by_sets = hitting::t_h_pi(c, cfg)?.value;
        records.push(VerificationRecord::eq("bd_equal.t_h_pi", by_interval, by_sets));
    }
    Ok(BdCheck {
        ratio: t_rel / stats.t_star,
        stats,
        t_rel,
        records,
    })
}

/// For every proper interval `[[i, j]]`:
/// `E_{pi_[[i,j]]}[T_{[[i,j]]^c}] <= E_{pi_[[i,j]]}[T_{j+1}] <= E_i[T_{j+1}]`,
/// `E_i[T_{j+1}] <= E_l[T_{j+1}]` for `l < i`, and the resulting domination by
/// `E_{pi_[j]}[T_{j+1}]`; mirrored on the left.
fn interval_records(c: &Chain) -> Result<Vec<VerificationRecord>> {
    let n = c.n();
    let right: Vec<Vec<f64>> = (1..=n).map(|j| if j < n { hits(c, j + 1) } else { Ok(Vec::new()) }).collect::<Result<_>>()?;
    let left: Vec<Vec<f64>> = (1..=n).map(|i| if i > 1 { hits(c, i - 1) } else { Ok(Vec::new()) }).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 1..=n {
        for j in i..=n {
            if i == 1 && j == n {
                continue;
            }
            let set = interval(c, i, j);
            let exit = stationary_exit(c, &set)?;
            let tag = format!("[{i},{j}]");
            let mut bound = f64::INFINITY;
            if j < n {
                let h = &right[j - 1];
                let mean = conditioned_mean(c, h, i, j);
                let prefix = conditioned_mean(c, h, 1, j);
                out.push(scaled("interval.exit_le_hit".into(), exit, mean).with_witness(tag.clone()));
                out.push(scaled("interval.mean_le_start".into(), mean, h[i - 1]).with_witness(tag.clone()));
                if i > 1 {
                    out.push(scaled("interval.start_order".into(), h[i - 1], h[i - 2]).with_witness(tag.clone()));
                }
                out.push(scaled("interval.mean_le_prefix".into(), mean, prefix).with_witness(tag.clone()));
                bound = bound.min(prefix);
            }
            if i > 1 {
                let h = &left[i - 1];
                let mean = conditioned_mean(c, h, i, j);
                let suffix = conditioned_mean(c, h, i, n);
                out.push(scaled("interval.exit_le_hit".into(), exit, mean).with_witness(tag.clone()));
                out.push(scaled("interval.mean_le_start".into(), mean, h[j - 1]).with_witness(tag.clone()));
                if j < n {
                    out.push(scaled("interval.start_order".into(), h[j - 1], h[j]).with_witness(tag.clone()));
                }
                out.push(scaled("interval.mean_le_suffix".into(), mean, suffix).with_witness(tag.clone()));
                bound = bound.min(suffix);
            }
            out.push(scaled("interval.domination".into(), exit, bound).with_witness(tag));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;

    fn lazy_path() -> Chain {
        Chain::from_rows(&[
            vec![0.5, 0.5, 0.0],
            vec![0.25, 0.5, 0.25],
            vec![0.0, 0.5, 0.5],
        ])
        .unwrap()
    }

    #[test]
    fn lazy_path_statistics() {
        let s = bd_statistics(&lazy_path()).unwrap();
        assert_eq!(s.x_delta, Some(2));
        assert_eq!(s.y_delta, Some(2));
        // E_{pi_[2]}[T_3] = (1/3) 8 + (2/3) 6
        assert!((s.t_star - 20.0 / 3.0).abs() < 1e-12);
        assert!((s.prefix_exits[0] - 2.0).abs() < 1e-12);
        assert_eq!(s.prefix_max.unwrap().0, 2);
    }

    #[test]
    fn two_state_is_geometric_exit() {
        let c = generators::two_state(0.2, 0.4).unwrap();
        // pi = (2/3, 1/3): only the suffix {2} has mass <= 3/4 besides the prefix [1].
        let s = bd_statistics(&c).unwrap();
        let expect = (1.0_f64 / 0.2).max(1.0 / 0.4);
        assert!((s.t_star - expect).abs() < 1e-12);
    }

    #[test]
    fn check_on_lazy_path() {
        let r = bd_check(&lazy_path(), &Config::default()).unwrap();
        assert!((r.t_rel - 2.0).abs() < 1e-12);
        assert!(r.records.iter().all(|x| x.pass), "{:?}", r.records.iter().filter(|x| !x.pass).collect::<Vec<_>>());
    }

    #[test]
    fn random_chains_pass() {
        for seed in 0..5 {
            let c = generators::random_birth_death(9, 0.5, seed).unwrap();
            let r = bd_check(&c, &Config::default()).unwrap();
            let bad: Vec<_> = r.records.iter().filter(|x| !x.pass).collect();
            assert!(bad.is_empty(), "{bad:?}");
        }
    }

    #[test]
    fn rejects_long_jumps() {
        let c = generators::biased_cycle(4).unwrap();
        assert!(matches!(bd_statistics(&c), Err(Error::NotBirthDeath { .. })));
    }
}
