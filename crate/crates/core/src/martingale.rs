//! Per-observation and per-batch test-martingale updates and the level-α
//! anytime decision rule.
//!
//! A test martingale for `H0: E(T) >= mu` with `T <= tau1` starts at `M_0 = 1`
//! and is multiplied at step `k` by
//!
//! ```text
//! 1 - c_{k-1} (t_k - mu) / (tau1 - mu),      0 <= c_{k-1} <= 1,
//! ```
//!
//! where the stake `c_{k-1}` is fixed before `t_k` is seen. `H0` is rejected
//! as soon as the running maximum `M*_k` reaches `1/alpha`; by the maximal
//! inequality for positive supermartingales this has size at most `alpha`
//! whatever the stopping rule.
//!
//! Everything is kept on the natural-log scale. A zero factor sends the
//! state to a sticky `-inf` ("absorbed"): no later observation can revive it,
//! but a running maximum recorded earlier still counts.

use serde::{Deserialize, Serialize};

use crate::config::{Branch, TestConfig};
use crate::confidence::CPolicy;
use crate::error::{Error, Result};
use crate::mixture::MixtureSpec;
use crate::numeric::log_add;

/// `ln(1/alpha)`, computed so that `alpha = 0.05` gives exactly `ln(20)`.
pub fn log_threshold(alpha: f64) -> f64 {
    (1.0 / alpha).ln()
}

/// How the stake `c_{k-1}` is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StakePolicy {
    /// The same stake at every step.
    Constant(f64),
    /// A pre-committed schedule; step `k` uses `cs[k-1]`, and the last entry
    /// is repeated once the schedule runs out.
    Schedule(Vec<f64>),
    /// A stake that depends on the null mean (used for confidence families);
    /// at the tested `mu` it acts as a constant stake.
    MuFamily(CPolicy),
    /// An integrated martingale over a density on the stake.
    Mixture(MixtureSpec),
}

impl StakePolicy {
    pub fn validate(&self, cfg: &TestConfig) -> Result<()> {
        match self {
            StakePolicy::Constant(c) => check_stake(*c),
            StakePolicy::Schedule(cs) => {
                if cs.is_empty() {
                    return Err(Error::InvalidPolicy("empty stake schedule".into()));
                }
                cs.iter().try_for_each(|c| check_stake(*c))
            }
            StakePolicy::MuFamily(p) => {
                p.validate_shape()?;
                p.at_mu(cfg, cfg.mu)?.validate(cfg)
            }
            StakePolicy::Mixture(spec) => {
                spec.validate()?;
                if spec.support.0 < 0.0 {
                    return Err(Error::InvalidMixture(
                        "a test of a one-sided null needs stake support inside [0, 1]".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Stake for step `k` (1-based) when it does not depend on the data.
    pub fn fixed_stake(&self, cfg: &TestConfig, k: u64) -> Option<f64> {
        match self {
            StakePolicy::Constant(c) => Some(*c),
            StakePolicy::Schedule(cs) => {
                let i = (k.max(1) - 1) as usize;
                cs.get(i).or(cs.last()).copied()
            }
            StakePolicy::MuFamily(p) => match p.at_mu(cfg, cfg.mu) {
                Ok(StakePolicy::Constant(c)) => Some(c),
                _ => None,
            },
            StakePolicy::Mixture(_) => None,
        }
    }

    /// Collapses a mu-dependent family to the policy it induces at `cfg.mu`.
    pub fn resolve(&self, cfg: &TestConfig) -> Result<StakePolicy> {
        match self {
            StakePolicy::MuFamily(p) => p.at_mu(cfg, cfg.mu),
            other => Ok(other.clone()),
        }
    }
}

pub(crate) fn check_stake(c: f64) -> Result<()> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(Error::InvalidStake(c))
    }
}

/// Update factor for one observation; `index` is only used in the error.
pub(crate) fn factor_at(index: u64, branch: Branch, t: f64, cfg: &TestConfig, c: f64) -> Result<f64> {
    check_stake(c)?;
    let raw = match branch {
        Branch::Upper => {
            let tau1 = cfg.require_tau1()?;
            if t.is_nan() || t > tau1 || cfg.tau0.is_some_and(|t0| t < t0) {
                return Err(out_of_bounds(index, t, cfg));
            }
            1.0 - c * (t - cfg.mu) / (tau1 - cfg.mu)
        }
        Branch::Lower => {
            let tau0 = cfg.require_tau0()?;
            if t.is_nan() || t < tau0 || cfg.tau1.is_some_and(|t1| t > t1) {
                return Err(out_of_bounds(index, t, cfg));
            }
            1.0 - c * (cfg.mu - t) / (cfg.mu - tau0)
        }
    };
    Ok(raw.max(0.0))
}

fn out_of_bounds(index: u64, t: f64, cfg: &TestConfig) -> Error {
    Error::OutOfBounds {
        index,
        value: t,
        lo: cfg.tau0.unwrap_or(f64::NEG_INFINITY),
        hi: cfg.tau1.unwrap_or(f64::INFINITY),
    }
}

/// The multiplication factor for observation `t` at stake `c`.
///
/// `Upper` is `1 - c (t - mu)/(tau1 - mu)` and `Lower` is
/// `1 - c (mu - t)/(mu - tau0)`; both are non-negative on the support.
pub fn factor(branch: Branch, t: f64, cfg: &TestConfig, c: f64) -> Result<f64> {
    factor_at(0, branch, t, cfg, c)
}

/// Running state of one test martingale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleState {
    pub k: u64,
    #[serde(with = "crate::serde_ext")]
    pub log_m: f64,
    #[serde(with = "crate::serde_ext")]
    pub log_m_max: f64,
    pub absorbed: bool,
}

impl Default for MartingaleState {
    fn default() -> Self {
        Self::new()
    }
}

impl MartingaleState {
    /// `M_0 = 1`.
    pub fn new() -> Self {
        Self {
            k: 0,
            log_m: 0.0,
            log_m_max: 0.0,
            absorbed: false,
        }
    }

    pub fn value(&self) -> f64 {
        self.log_m.exp()
    }

    /// One observation on the branch implied by a one-sided `cfg`.
    pub fn step(&self, t: f64, c: f64, cfg: &TestConfig) -> Result<Self> {
        let branch = cfg.branch().ok_or(Error::InvalidConfig {
            field: "side",
            reason: "a single martingale needs a one-sided config".into(),
        })?;
        self.step_on(branch, t, c, cfg)
    }

    pub fn step_on(&self, branch: Branch, t: f64, c: f64, cfg: &TestConfig) -> Result<Self> {
        let f = factor_at(self.k + 1, branch, t, cfg, c)?;
        Ok(self.apply_log_factor(f.ln()))
    }

    /// Advances by a pre-computed log factor (`-inf` for a zero factor).
    pub fn apply_log_factor(&self, log_f: f64) -> Self {
        let mut next = *self;
        next.k += 1;
        if self.absorbed {
            return next;
        }
        next.log_m = self.log_m + log_f;
        if next.log_m == f64::NEG_INFINITY {
            next.absorbed = true;
        }
        next.log_m_max = self.log_m_max.max(next.log_m);
        next
    }

    /// A batch observed under one stake fixed before the batch. The running
    /// maximum is only refreshed at the end of the batch, so crossings inside
    /// the batch are not credited.
    pub fn batch_step(&self, ts: &[f64], c: f64, cfg: &TestConfig) -> Result<Self> {
        let branch = cfg.branch().ok_or(Error::InvalidConfig {
            field: "side",
            reason: "a single martingale needs a one-sided config".into(),
        })?;
        let mut next = *self;
        for (i, &t) in ts.iter().enumerate() {
            let f = factor_at(self.k + 1 + i as u64, branch, t, cfg, c)?;
            next.k += 1;
            if !next.absorbed {
                next.log_m += f.ln();
                if next.log_m == f64::NEG_INFINITY {
                    next.absorbed = true;
                }
            }
        }
        next.log_m_max = next.log_m_max.max(next.log_m);
        Ok(next)
    }
}

/// `ln(rho_plus M+ + (1 - rho_plus) M-)` for two martingales on the same stream.
pub fn two_sided_value(plus: &MartingaleState, minus: &MartingaleState, rho_plus: f64) -> Result<f64> {
    if plus.k != minus.k {
        return Err(Error::StreamDesync {
            plus: plus.k,
            minus: minus.k,
        });
    }
    Ok(log_mix(plus.log_m, minus.log_m, rho_plus))
}

pub(crate) fn log_mix(log_plus: f64, log_minus: f64, rho_plus: f64) -> f64 {
    let rho_minus = 1.0 - rho_plus;
    let a = if rho_plus > 0.0 { rho_plus.ln() + log_plus } else { f64::NEG_INFINITY };
    let b = if rho_minus > 0.0 { rho_minus.ln() + log_minus } else { f64::NEG_INFINITY };
    log_add(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Reject,
    Continue,
}

/// Reject iff the running maximum has reached `1/alpha` (ties reject).
pub fn decision(log_m_max: f64, alpha: f64) -> Decision {
    if log_m_max >= log_threshold(alpha) {
        Decision::Reject
    } else {
        Decision::Continue
    }
}
