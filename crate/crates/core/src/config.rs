//! Test configuration: the null mean, the support bounds and the level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which null hypothesis is being tested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `H0: E(T) >= mu`, needs the upper support bound `tau1`.
    UpperNull,
    /// `H0: E(T) <= mu`, needs the lower support bound `tau0`.
    LowerNull,
    /// `H0: E(T) = mu`, a `rho_plus : (1 - rho_plus)` blend of the two one-sided tests.
    TwoSided { rho_plus: f64 },
}

/// Branch of a factor: the upper-bound factor `1 - c (t - mu)/(tau1 - mu)`
/// or its reflection `1 - c (mu - t)/(mu - tau0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau1: Option<f64>,
    pub alpha: f64,
    pub side: Side,
}

impl TestConfig {
    /// `H0: E(T) >= mu` for observations bounded above by `tau1`.
    pub fn upper(mu: f64, tau1: f64, alpha: f64) -> Self {
        Self {
            mu,
            tau0: None,
            tau1: Some(tau1),
            alpha,
            side: Side::UpperNull,
        }
    }

    /// Same as [`TestConfig::upper`] but also records the lower bound, which
    /// the size bounds, intervals and several analysis routines need.
    pub fn bounded(mu: f64, tau0: f64, tau1: f64, alpha: f64) -> Self {
        Self {
            mu,
            tau0: Some(tau0),
            tau1: Some(tau1),
            alpha,
            side: Side::UpperNull,
        }
    }

    pub fn with_side(mut self, side: Side) -> Self {
        self.side = side;
        self
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| {
            Err(Error::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        if !self.mu.is_finite() {
            return bad("mu", "must be finite");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", "must lie in (0, 1)");
        }
        if let Some(t0) = self.tau0 {
            if !t0.is_finite() {
                return bad("tau0", "must be finite");
            }
        }
        if let Some(t1) = self.tau1 {
            if !t1.is_finite() {
                return bad("tau1", "must be finite");
            }
        }
        let needs_upper = matches!(self.side, Side::UpperNull | Side::TwoSided { .. });
        let needs_lower = matches!(self.side, Side::LowerNull | Side::TwoSided { .. });
        if needs_upper {
            match self.tau1 {
                None => return bad("tau1", "required for this side"),
                Some(t1) if self.mu >= t1 => return bad("mu", "must be below tau1"),
                _ => {}
            }
        }
        if needs_lower {
            match self.tau0 {
                None => return bad("tau0", "required for this side"),
                Some(t0) if self.mu <= t0 => return bad("mu", "must be above tau0"),
                _ => {}
            }
        }
        if let (Some(t0), Some(t1)) = (self.tau0, self.tau1) {
            if t0 >= t1 {
                return bad("tau0", "must be below tau1");
            }
        }
        if let Side::TwoSided { rho_plus } = self.side {
            if !(0.0..=1.0).contains(&rho_plus) {
                return bad("side.rho_plus", "must lie in [0, 1]");
            }
        }
        Ok(())
    }

    /// Rejection threshold `ln(1/alpha)` on the log scale.
    pub fn log_threshold(&self) -> f64 {
        crate::martingale::log_threshold(self.alpha)
    }

    /// The factor branch of a one-sided config; `None` for two-sided tests.
    pub fn branch(&self) -> Option<Branch> {
        match self.side {
            Side::UpperNull => Some(Branch::Upper),
            Side::LowerNull => Some(Branch::Lower),
            Side::TwoSided { .. } => None,
        }
    }

    /// Rejects observations outside the configured support; `index` is 1-based.
    pub fn check_observation(&self, index: u64, t: f64) -> Result<()> {
        let lo = self.tau0.unwrap_or(f64::NEG_INFINITY);
        let hi = self.tau1.unwrap_or(f64::INFINITY);
        if t.is_nan() || t < lo || t > hi {
            return Err(Error::OutOfBounds {
                index,
                value: t,
                lo,
                hi,
            });
        }
        Ok(())
    }

    pub(crate) fn require_tau1(&self) -> Result<f64> {
        self.tau1.ok_or(Error::InvalidConfig {
            field: "tau1",
            reason: "required".into(),
        })
    }

    pub(crate) fn require_tau0(&self) -> Result<f64> {
        self.tau0.ok_or(Error::InvalidConfig {
            field: "tau0",
            reason: "required".into(),
        })
    }
}
