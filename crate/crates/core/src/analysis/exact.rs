//! Exact distribution of the first rejection time for finitely supported
//! data and a constant stake.
//!
//! With a constant stake, `ln M_k` depends only on how many times each
//! support point has been seen, so a forward pass over count vectors gives
//! `P(N = n)` exactly. Crossing is tested from the integer counts on every
//! step, never from a running float sum.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DistributionSpec;
use crate::config::{Branch, TestConfig};
use crate::error::{Error, Result};
use crate::martingale::{factor, StakePolicy};

/// States whose probability falls below this are dropped (and counted as
/// not stopped).
const PRUNE: f64 = 1e-30;
const MAX_ATOMS: usize = 4;
const MAX_STATES: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopDistribution {
    /// `pmf[n - 1] = P(N = n)` for `n = 1..=n_max`.
    pub pmf: Vec<f64>,
    pub stopped_mass: f64,
    pub mass_not_stopped: f64,
    /// Moments and quantiles of `N` given `N <= n_max`.
    pub mean: f64,
    pub sd: f64,
    pub q50: Option<u64>,
    pub q75: Option<u64>,
    pub q90: Option<u64>,
}

impl StopDistribution {
    fn from_pmf(pmf: Vec<f64>) -> Self {
        let stopped_mass: f64 = pmf.iter().sum();
        let (mut m1, mut m2) = (0.0, 0.0);
        for (i, p) in pmf.iter().enumerate() {
            let n = (i + 1) as f64;
            m1 += p * n;
            m2 += p * n * n;
        }
        let (mean, sd) = if stopped_mass > 0.0 {
            let mean = m1 / stopped_mass;
            (mean, (m2 / stopped_mass - mean * mean).max(0.0).sqrt())
        } else {
            (f64::NAN, f64::NAN)
        };
        let quantile = |q: f64| {
            let mut acc = 0.0;
            for (i, p) in pmf.iter().enumerate() {
                acc += p;
                if acc >= q {
                    return Some(i as u64 + 1);
                }
            }
            None
        };
        Self {
            q50: quantile(0.5),
            q75: quantile(0.75),
            q90: quantile(0.9),
            mass_not_stopped: (1.0 - stopped_mass).max(0.0),
            stopped_mass,
            mean,
            sd,
            pmf,
        }
    }
}

/// `P(N = n)` for `n <= n_max`, where `N` is the first step at which the
/// constant-stake martingale of an upper null reaches `1/alpha`.
///
/// Supports up to four support points; Beta data is rejected.
pub fn exact_stop_dist(dist: &DistributionSpec, cfg: &TestConfig, c: f64, n_max: u64) -> Result<StopDistribution> {
    dist.check_against(cfg)?;
    if cfg.branch() != Some(Branch::Upper) {
        return Err(Error::InvalidConfig {
            field: "side",
            reason: "exact distribution is for the upper null".into(),
        });
    }
    let atoms = dist
        .atoms()
        .ok_or_else(|| Error::StateSpaceTooLarge("continuous distributions have no finite lattice".into()))?;
    if atoms.len() > MAX_ATOMS {
        return Err(Error::StateSpaceTooLarge(format!(
            "{} support points, at most {MAX_ATOMS} supported",
            atoms.len()
        )));
    }
    let log_f: Vec<f64> = atoms
        .iter()
        .map(|(x, _)| factor(Branch::Upper, *x, cfg, c).map(f64::ln))
        .collect::<Result<_>>()?;
    let probs: Vec<f64> = atoms.iter().map(|a| a.1).collect();
    let threshold = cfg.log_threshold();
    let pmf = match atoms.len() {
        1 => point_mass(atoms[0].0, cfg, c, n_max)?,
        2 => two_point(&log_f, &probs, threshold, n_max),
        _ => lattice(&log_f, &probs, threshold, n_max)?,
    };
    Ok(StopDistribution::from_pmf(pmf))
}

fn point_mass(t: f64, cfg: &TestConfig, c: f64, n_max: u64) -> Result<Vec<f64>> {
    let mut pmf = vec![0.0; n_max as usize];
    match super::deterministic_n(t, cfg, &StakePolicy::Constant(c)) {
        Ok(n) if n <= n_max => pmf[n as usize - 1] = 1.0,
        Ok(_) | Err(Error::NeverRejects { .. }) => {}
        Err(e) => return Err(e),
    }
    Ok(pmf)
}

/// Sorted by value, so `log_f[0] >= log_f[1]` and a path that has seen `r`
/// copies of the larger value has `ln M_k = (k - r) l0 + r l1`, decreasing
/// in `r`. Only a window of `r` values is alive at any step.
fn two_point(log_f: &[f64], probs: &[f64], threshold: f64, n_max: u64) -> Vec<f64> {
    let (l0, l1) = (log_f[0], log_f[1]);
    let (p0, p1) = (probs[0], probs[1]);
    let mut pmf = vec![0.0; n_max as usize];
    if !(l0 > 0.0) {
        return pmf;
    }
    let log_m = |k: u64, r: u64| {
        let bad = if r == 0 { 0.0 } else { r as f64 * l1 };
        (k - r) as f64 * l0 + bad
    };
    // largest r that has crossed at step k, if any
    let crossed_upto = |k: u64| -> Option<u64> {
        let mut r = if l1 == f64::NEG_INFINITY || l0 == l1 {
            0
        } else {
            (((k as f64 * l0 - threshold) / (l0 - l1)).floor().max(0.0) as u64).min(k)
        };
        while r > 0 && log_m(k, r) < threshold {
            r -= 1;
        }
        if log_m(k, r) < threshold {
            return None;
        }
        while r < k && log_m(k, r + 1) >= threshold {
            r += 1;
        }
        Some(r)
    };
    // alive[i] is the mass at r = start + i
    let mut start: u64 = 0;
    let mut alive: Vec<f64> = vec![1.0];
    for k in 1..=n_max {
        let mut next = vec![0.0; alive.len() + 1];
        for (i, &m) in alive.iter().enumerate() {
            next[i] += m * p0;
            next[i + 1] += m * p1;
        }
        alive = next;
        if l1 == f64::NEG_INFINITY {
            // a single zero factor absorbs the path for good
            alive.truncate(1);
        }
        if let Some(r) = crossed_upto(k) {
            if r >= start {
                let cut = ((r - start + 1) as usize).min(alive.len());
                pmf[k as usize - 1] = alive[..cut].iter().sum();
                alive.drain(..cut);
                start += cut as u64;
            }
        }
        while alive.last().is_some_and(|&m| m < PRUNE) {
            alive.pop();
        }
        while alive.first().is_some_and(|&m| m == 0.0) {
            alive.remove(0);
            start += 1;
        }
        if alive.is_empty() {
            break;
        }
    }
    pmf
}

/// General lattice over count vectors of the non-first support points.
fn lattice(log_f: &[f64], probs: &[f64], threshold: f64, n_max: u64) -> Result<Vec<f64>> {
    let d = log_f.len();
    let mut pmf = vec![0.0; n_max as usize];
    let mut alive: BTreeMap<[u32; 3], f64> = BTreeMap::new();
    alive.insert([0; 3], 1.0);
    for k in 1..=n_max {
        let mut next: BTreeMap<[u32; 3], f64> = BTreeMap::new();
        for (state, &m) in &alive {
            for j in 0..d {
                let mut s = *state;
                if j > 0 {
                    s[j - 1] += 1;
                }
                *next.entry(s).or_insert(0.0) += m * probs[j];
            }
        }
        let mut stopped = 0.0;
        next.retain(|s, m| {
            if *m < PRUNE {
                return false;
            }
            let rest: u64 = s.iter().map(|&x| x as u64).sum();
            let mut lm = (k - rest) as f64 * log_f[0];
            for j in 1..d {
                if s[j - 1] > 0 {
                    lm += s[j - 1] as f64 * log_f[j];
                }
            }
            if lm == f64::NEG_INFINITY {
                return false;
            }
            if lm >= threshold {
                stopped += *m;
                return false;
            }
            true
        });
        pmf[k as usize - 1] = stopped;
        if next.len() > MAX_STATES {
            return Err(Error::StateSpaceTooLarge(format!("{} live states at step {k}", next.len())));
        }
        alive = next;
        if alive.is_empty() {
            break;
        }
    }
    Ok(pmf)
}
