//! A running sequential test: one stake policy driving one (or, for a
//! two-sided null, two) test martingales over an observation stream.
//!
//! Policies can be replaced between observations. The value accumulated so
//! far is frozen and the new policy's martingale starts at one on the next
//! observation, so the combined process is `M_{n+l} = M_n * N_l`.

use serde::{Deserialize, Serialize};

use crate::config::{Branch, Side, TestConfig};
use crate::error::{Error, Result};
use crate::martingale::{decision, log_mix, Decision, MartingaleState, StakePolicy};
use crate::mixture::{MixtureSpec, MixtureState, DEFAULT_NODES};

#[derive(Debug, Clone, PartialEq)]
enum Engine {
    Fixed(MartingaleState),
    Mixture(MixtureState),
}

impl Engine {
    fn new(policy: &StakePolicy, branch: Branch) -> Result<Self> {
        Ok(match policy {
            StakePolicy::Mixture(spec) => {
                let spec = match branch {
                    Branch::Upper => spec.clone(),
                    Branch::Lower => reflect(spec),
                };
                Engine::Mixture(MixtureState::new(&spec, DEFAULT_NODES)?)
            }
            _ => Engine::Fixed(MartingaleState::new()),
        })
    }

    fn log_value(&self) -> f64 {
        match self {
            Engine::Fixed(s) => s.log_m,
            Engine::Mixture(m) => m.value(),
        }
    }
}

/// Negated stakes, so the mixture grid evaluates lower-branch factors.
fn reflect(spec: &MixtureSpec) -> MixtureSpec {
    use crate::mixture::Density;
    let (a, b) = spec.support;
    let density = match &spec.density {
        Density::Uniform => Density::Uniform,
        Density::WeightedNodes { nodes, weights } => Density::WeightedNodes {
            nodes: nodes.iter().map(|c| -c).collect(),
            weights: weights.clone(),
        },
    };
    MixtureSpec {
        support: (-b, -a),
        density,
    }
}

/// Read-only view of a test after `k` observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestSnapshot {
    pub k: u64,
    #[serde(with = "crate::serde_ext")]
    pub log_m: f64,
    #[serde(with = "crate::serde_ext")]
    pub log_m_max: f64,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequentialTest {
    cfg: TestConfig,
    policy: StakePolicy,
    plus: Option<Engine>,
    minus: Option<Engine>,
    /// Log value frozen at the last policy switch.
    carried: f64,
    /// Observations seen under the current policy.
    segment_k: u64,
    k: u64,
    log_m: f64,
    log_m_max: f64,
}

impl SequentialTest {
    pub fn new(cfg: TestConfig, policy: StakePolicy) -> Result<Self> {
        cfg.validate()?;
        policy.validate(&cfg)?;
        let (plus, minus) = Self::engines(&cfg, &policy)?;
        Ok(Self {
            cfg,
            policy,
            plus,
            minus,
            carried: 0.0,
            segment_k: 0,
            k: 0,
            log_m: 0.0,
            log_m_max: 0.0,
        })
    }

    fn engines(cfg: &TestConfig, policy: &StakePolicy) -> Result<(Option<Engine>, Option<Engine>)> {
        let policy = &policy.resolve(cfg)?;
        let plus = match cfg.side {
            Side::UpperNull | Side::TwoSided { .. } => Some(Engine::new(policy, Branch::Upper)?),
            Side::LowerNull => None,
        };
        let minus = match cfg.side {
            Side::LowerNull | Side::TwoSided { .. } => Some(Engine::new(policy, Branch::Lower)?),
            Side::UpperNull => None,
        };
        Ok((plus, minus))
    }

    pub fn config(&self) -> &TestConfig {
        &self.cfg
    }

    pub fn policy(&self) -> &StakePolicy {
        &self.policy
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn log_m(&self) -> f64 {
        self.log_m
    }

    pub fn log_m_max(&self) -> f64 {
        self.log_m_max
    }

    pub fn decision(&self) -> Decision {
        decision(self.log_m_max, self.cfg.alpha)
    }

    pub fn snapshot(&self) -> TestSnapshot {
        TestSnapshot {
            k: self.k,
            log_m: self.log_m,
            log_m_max: self.log_m_max,
            decision: self.decision(),
        }
    }

    /// The stake committed for the next observation on the upper branch (or
    /// the lower branch for a lower null). For mixtures this is the
    /// effective stake of the mixture.
    pub fn next_stake(&self) -> Result<f64> {
        let engine = self.plus.as_ref().or(self.minus.as_ref()).expect("at least one branch");
        match engine {
            Engine::Fixed(_) => self
                .policy
                .fixed_stake(&self.cfg, self.segment_k + 1)
                .ok_or_else(|| Error::InvalidPolicy("policy yields no stake".into())),
            Engine::Mixture(m) => m.effective_c().map(f64::abs),
        }
    }

    pub fn push(&mut self, t: f64) -> Result<TestSnapshot> {
        self.cfg.check_observation(self.k + 1, t)?;
        let stake = self.policy.fixed_stake(&self.cfg, self.segment_k + 1);
        let cfg = &self.cfg;
        let k = self.k;
        let advance = |engine: &mut Engine, branch: Branch| -> Result<()> {
            match engine {
                Engine::Fixed(s) => {
                    let c = stake.ok_or_else(|| Error::InvalidPolicy("policy yields no stake".into()))?;
                    let f = crate::martingale::factor_at(k + 1, branch, t, cfg, c)?;
                    *s = s.apply_log_factor(f.ln());
                }
                Engine::Mixture(m) => m.update_in_place(t, cfg)?,
            }
            Ok(())
        };
        if let Some(e) = self.plus.as_mut() {
            advance(e, Branch::Upper)?;
        }
        if let Some(e) = self.minus.as_mut() {
            advance(e, Branch::Lower)?;
        }
        self.k += 1;
        self.segment_k += 1;
        self.log_m = self.carried + self.segment_log_value();
        if self.log_m > self.log_m_max {
            self.log_m_max = self.log_m;
        }
        Ok(self.snapshot())
    }

    fn segment_log_value(&self) -> f64 {
        match (&self.plus, &self.minus, self.cfg.side) {
            (Some(p), Some(m), Side::TwoSided { rho_plus }) => log_mix(p.log_value(), m.log_value(), rho_plus),
            (Some(p), _, _) => p.log_value(),
            (None, Some(m), _) => m.log_value(),
            (None, None, _) => 0.0,
        }
    }

    /// Replaces the stake policy from the next observation on.
    pub fn switch_policy(&mut self, policy: StakePolicy) -> Result<()> {
        policy.validate(&self.cfg)?;
        let (plus, minus) = Self::engines(&self.cfg, &policy)?;
        self.carried = self.log_m;
        self.plus = plus;
        self.minus = minus;
        self.policy = policy;
        self.segment_k = 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn audit() -> TestConfig {
        TestConfig::bounded(0.05, 0.0, 1.0, 0.05)
    }

    fn first_reject(mut test: SequentialTest, t: f64, cap: u64) -> Option<u64> {
        for _ in 0..cap {
            if test.push(t).unwrap().decision == Decision::Reject {
                return Some(test.k());
            }
        }
        None
    }

    #[test]
    fn constant_and_mixture_run_lengths() {
        let expect = [(0.2, 476), (0.4, 239), (0.6, 160), (0.8, 121), (1.0, 97)];
        for (c, n) in expect {
            let t = SequentialTest::new(audit(), StakePolicy::Constant(c)).unwrap();
            assert_eq!(first_reject(t, 0.02, 1000), Some(n), "c = {c}");
        }
        let t = SequentialTest::new(audit(), StakePolicy::Mixture(MixtureSpec::uniform(0.6, 1.0))).unwrap();
        assert_eq!(first_reject(t, 0.02, 1000), Some(117));
    }

    #[test]
    fn lower_null_mirrors_upper() {
        // reflect t -> 1 - t, mu -> 1 - mu
        let up = TestConfig::bounded(0.3, 0.0, 1.0, 0.05);
        let lo = TestConfig::bounded(0.7, 0.0, 1.0, 0.05).with_side(Side::LowerNull);
        let data = [0.1, 0.25, 0.0, 0.4, 0.2];
        for policy in [StakePolicy::Constant(0.5), StakePolicy::Mixture(MixtureSpec::uniform(0.2, 0.9))] {
            let mut a = SequentialTest::new(up.clone(), policy.clone()).unwrap();
            let mut b = SequentialTest::new(lo.clone(), policy).unwrap();
            for &t in &data {
                let sa = a.push(t).unwrap();
                let sb = b.push(1.0 - t).unwrap();
                assert_abs_diff_eq!(sa.log_m, sb.log_m, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn two_sided_blends_branches() {
        let cfg = TestConfig::bounded(0.5, 0.0, 1.0, 0.05).with_side(Side::TwoSided { rho_plus: 0.5 });
        let mut t = SequentialTest::new(cfg.clone(), StakePolicy::Constant(0.5)).unwrap();
        let mut plus = MartingaleState::new();
        let mut minus = MartingaleState::new();
        for x in [0.1, 0.2, 0.9, 0.0] {
            let s = t.push(x).unwrap();
            plus = plus.step_on(Branch::Upper, x, 0.5, &cfg).unwrap();
            minus = minus.step_on(Branch::Lower, x, 0.5, &cfg).unwrap();
            let want = crate::martingale::two_sided_value(&plus, &minus, 0.5).unwrap();
            assert_abs_diff_eq!(s.log_m, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn schedule_repeats_last_stake() {
        let cfg = audit();
        let mut t = SequentialTest::new(cfg.clone(), StakePolicy::Schedule(vec![0.2, 0.4])).unwrap();
        let mut s = MartingaleState::new();
        for (i, x) in [0.0, 0.1, 0.0, 0.0].into_iter().enumerate() {
            let c = if i == 0 { 0.2 } else { 0.4 };
            s = s.step(x, c, &cfg).unwrap();
            assert_eq!(t.push(x).unwrap().log_m, s.log_m);
        }
    }

    #[test]
    fn switching_composes_multiplicatively() {
        let cfg = audit();
        let mut t = SequentialTest::new(cfg.clone(), StakePolicy::Constant(0.6)).unwrap();
        for _ in 0..10 {
            t.push(0.0).unwrap();
        }
        let m10 = t.log_m();
        t.switch_policy(StakePolicy::Mixture(MixtureSpec::uniform(0.6, 1.0))).unwrap();
        let mut fresh = MixtureState::new(&MixtureSpec::uniform(0.6, 1.0), DEFAULT_NODES).unwrap();
        for x in [0.0, 0.3, 0.02] {
            let s = t.push(x).unwrap();
            fresh.update_in_place(x, &cfg).unwrap();
            assert_abs_diff_eq!(s.log_m, m10 + fresh.value(), epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input_without_advancing() {
        let mut t = SequentialTest::new(audit(), StakePolicy::Constant(0.5)).unwrap();
        assert!(matches!(t.push(2.0), Err(Error::OutOfBounds { index: 1, .. })));
        assert_eq!(t.k(), 0);
        assert!(SequentialTest::new(audit(), StakePolicy::Constant(1.5)).is_err());
    }
}
