//! Growth-rate and run-length analysis for a known data distribution.
//!
//! For a constant stake `c` the log of the martingale is a random walk with
//! drift `lambda(c) = E ln(1 - c (T - mu)/(tau1 - mu))`. Positive drift means
//! the test eventually rejects, and Wald's identities turn the drift and the
//! step variance into approximate run-length moments. Everything here is for
//! the upper null `E(T) >= mu`.

mod exact;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::config::{Branch, TestConfig};
use crate::error::{Error, Result};
use crate::martingale::{check_stake, factor, Decision, StakePolicy};
use crate::numeric::{bisect_flip, integrate_adaptive};
use crate::sequential::SequentialTest;

pub use exact::{exact_stop_dist, StopDistribution};

/// Absolute tolerance for integrals against Beta distributions.
const BETA_TOL: f64 = 1e-10;

/// Distribution of a single observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    /// `P(T = 1) = nu`, `P(T = 0) = 1 - nu`.
    Alt { nu: f64 },
    /// `P(T = value) = prob`, `P(T = 0) = 1 - prob`.
    ScaledAlt { value: f64, prob: f64 },
    Beta { a: f64, b: f64 },
    PointMass { t: f64 },
    FiniteSupport { points: Vec<f64>, probs: Vec<f64> },
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidDistribution(m));
        match self {
            DistributionSpec::Alt { nu } if !(0.0..=1.0).contains(nu) => bad(format!("nu = {nu} outside [0, 1]")),
            DistributionSpec::ScaledAlt { value, prob } if !value.is_finite() || !(0.0..=1.0).contains(prob) => {
                bad(format!("scaled alt needs finite value and prob in [0, 1], got {value}, {prob}"))
            }
            DistributionSpec::Beta { a, b } if !(*a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()) => {
                bad(format!("beta parameters must be positive, got {a}, {b}"))
            }
            DistributionSpec::PointMass { t } if !t.is_finite() => bad("point mass must be finite".into()),
            DistributionSpec::FiniteSupport { points, probs } => {
                if points.is_empty() || points.len() != probs.len() {
                    return bad("points and probs must be non-empty and of equal length".into());
                }
                if points.iter().any(|p| !p.is_finite()) || probs.iter().any(|p| !(*p > 0.0)) {
                    return bad("points must be finite and probs positive".into());
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad(format!("probs sum to {total}, not 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            DistributionSpec::Alt { nu } => *nu,
            DistributionSpec::ScaledAlt { value, prob } => value * prob,
            DistributionSpec::Beta { a, b } => a / (a + b),
            DistributionSpec::PointMass { t } => *t,
            DistributionSpec::FiniteSupport { points, probs } => points.iter().zip(probs).map(|(x, p)| x * p).sum(),
        }
    }

    /// Atoms with positive mass, sorted by value and merged; `None` for Beta.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        let raw: Vec<(f64, f64)> = match self {
            DistributionSpec::Alt { nu } => vec![(0.0, 1.0 - nu), (1.0, *nu)],
            DistributionSpec::ScaledAlt { value, prob } => vec![(0.0, 1.0 - prob), (*value, *prob)],
            DistributionSpec::PointMass { t } => vec![(*t, 1.0)],
            DistributionSpec::FiniteSupport { points, probs } => points.iter().copied().zip(probs.iter().copied()).collect(),
            DistributionSpec::Beta { .. } => return None,
        };
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut sorted = raw;
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (x, p) in sorted {
            if p <= 0.0 {
                continue;
            }
            match atoms.last_mut() {
                Some(last) if last.0 == x => last.1 += p,
                _ => atoms.push((x, p)),
            }
        }
        Some(atoms)
    }

    /// Smallest and largest possible values.
    pub fn support(&self) -> (f64, f64) {
        match self.atoms() {
            Some(a) => (a[0].0, a[a.len() - 1].0),
            None => (0.0, 1.0),
        }
    }

    pub fn check_against(&self, cfg: &TestConfig) -> Result<()> {
        self.validate()?;
        let (lo, hi) = self.support();
        let tau1 = cfg.require_tau1()?;
        let tau0 = cfg.tau0.unwrap_or(f64::NEG_INFINITY);
        if hi > tau1 || lo < tau0 {
            return Err(Error::InvalidDistribution(format!(
                "support [{lo}, {hi}] leaves [{tau0}, {tau1}]"
            )));
        }
        Ok(())
    }

    /// `(E h(T), E h(T)^2)` for `h = ln` of the upper factor at stake `c`.
    fn log_factor_moments(&self, cfg: &TestConfig, c: f64) -> Result<(f64, f64)> {
        self.check_against(cfg)?;
        check_stake(c)?;
        let mu = cfg.mu;
        let tau1 = cfg.require_tau1()?;
        let h = |t: f64| (1.0 - c * (t - mu) / (tau1 - mu)).max(0.0).ln();
        match (self, self.atoms()) {
            (_, Some(atoms)) => {
                let mut m1 = 0.0;
                let mut m2 = 0.0;
                for (x, p) in atoms {
                    let v = h(x);
                    m1 += p * v;
                    m2 += p * v * v;
                }
                Ok((m1, m2))
            }
            (DistributionSpec::Beta { a, b }, None) => {
                // E g(T) = g(0) + int_0^1 P(T > t) g'(t) dt, which stays finite
                // at c = 1 where g(1) itself is -inf.
                let (a, b) = (*a, *b);
                let surv = |t: f64| beta_reg(b, a, 1.0 - t);
                let dh = |t: f64| -c / (tau1 - mu) / (1.0 - c * (t - mu) / (tau1 - mu));
                let h0 = h(0.0);
                let m1 = h0 + integrate_adaptive(|t| surv(t) * dh(t), 0.0, 1.0, BETA_TOL);
                let m2 = h0 * h0 + integrate_adaptive(|t| surv(t) * 2.0 * h(t) * dh(t), 0.0, 1.0, BETA_TOL);
                Ok((m1, m2))
            }
            _ => unreachable!("only Beta lacks atoms"),
        }
    }

    /// `d lambda / dc = E[-Z / (1 - c Z)]` with `Z = (T - mu)/(tau1 - mu)`;
    /// decreasing in `c`, so its sign change is the maximiser.
    fn lambda_slope(&self, cfg: &TestConfig, c: f64) -> Result<f64> {
        let mu = cfg.mu;
        let tau1 = cfg.require_tau1()?;
        let z = |t: f64| (t - mu) / (tau1 - mu);
        match (self, self.atoms()) {
            (_, Some(atoms)) => Ok(atoms.iter().map(|&(x, p)| p * -z(x) / (1.0 - c * z(x))).sum()),
            (DistributionSpec::Beta { a, b }, None) => {
                let (a, b) = (*a, *b);
                let surv = |t: f64| beta_reg(b, a, 1.0 - t);
                let g0 = -z(0.0) / (1.0 - c * z(0.0));
                let dg = |t: f64| -1.0 / ((tau1 - mu) * (1.0 - c * z(t)).powi(2));
                Ok(g0 + integrate_adaptive(|t| surv(t) * dg(t), 0.0, 1.0, BETA_TOL))
            }
            _ => unreachable!("only Beta lacks atoms"),
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionSpec::Alt { nu } => write!(f, "Alt({nu})"),
            DistributionSpec::ScaledAlt { value, prob } => write!(f, "ScaledAlt({value},{prob})"),
            DistributionSpec::Beta { a, b } => write!(f, "Beta({a},{b})"),
            DistributionSpec::PointMass { t } => write!(f, "PointMass({t})"),
            DistributionSpec::FiniteSupport { points, probs } => {
                write!(f, "Finite(")?;
                for (i, (x, p)) in points.iter().zip(probs).enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}:{p}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Parses `alt:0.02`, `scaled_alt:0.2,0.1`, `beta:2,98`, `point:0.02` and
/// `finite:0:0.5,0.5:0.3,1:0.2` (value:prob pairs).
impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidDistribution(format!("cannot parse distribution `{s}`"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums = |a: &str| -> Result<Vec<f64>> {
            a.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect()
        };
        let spec = match kind.trim().to_ascii_lowercase().as_str() {
            "alt" => match nums(args)?[..] {
                [nu] => DistributionSpec::Alt { nu },
                _ => return Err(bad()),
            },
            "scaled_alt" | "scaledalt" => match nums(args)?[..] {
                [value, prob] => DistributionSpec::ScaledAlt { value, prob },
                _ => return Err(bad()),
            },
            "beta" => match nums(args)?[..] {
                [a, b] => DistributionSpec::Beta { a, b },
                _ => return Err(bad()),
            },
            "point" | "point_mass" | "pointmass" => match nums(args)?[..] {
                [t] => DistributionSpec::PointMass { t },
                _ => return Err(bad()),
            },
            "finite" => {
                let mut points = Vec::new();
                let mut probs = Vec::new();
                for pair in args.split(',') {
                    let (x, p) = pair.split_once(':').ok_or_else(bad)?;
                    points.push(x.trim().parse().map_err(|_| bad())?);
                    probs.push(p.trim().parse().map_err(|_| bad())?);
                }
                DistributionSpec::FiniteSupport { points, probs }
            }
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Expected log growth per observation at stake `c`; `-inf` when some
/// value with positive probability zeroes the factor.
pub fn lambda_fn(dist: &DistributionSpec, cfg: &TestConfig, c: f64) -> Result<f64> {
    Ok(dist.log_factor_moments(cfg, c)?.0)
}

fn require_growth(dist: &DistributionSpec, cfg: &TestConfig) -> Result<()> {
    dist.check_against(cfg)?;
    let mean = dist.mean();
    if mean >= cfg.mu {
        return Err(Error::NoPositiveGrowth { mean, mu: cfg.mu });
    }
    Ok(())
}

/// The growth-maximising stake and the growth rate there.
///
/// When `tau0` is configured the result is at least `(mu - nu)/(mu - tau0)`.
pub fn c_opt(dist: &DistributionSpec, cfg: &TestConfig) -> Result<(f64, f64)> {
    require_growth(dist, cfg)?;
    let lam = |c: f64| lambda_fn(dist, cfg, c).unwrap_or(f64::NEG_INFINITY);
    let slope = |c: f64| dist.lambda_slope(cfg, c).unwrap_or(f64::NEG_INFINITY);
    let mut c = if slope(1.0) >= 0.0 {
        1.0
    } else {
        let (lo, hi) = bisect_flip(0.0, 1.0, 1e-15, |c| slope(c) < 0.0);
        0.5 * (lo + hi)
    };
    let mut best = lam(c);
    if let Some(tau0) = cfg.tau0 {
        let floor = ((cfg.mu - dist.mean()) / (cfg.mu - tau0)).min(1.0);
        if c < floor {
            let at_floor = lam(floor);
            // the maximiser cannot lie below the floor, so any gap is
            // numerical flatness around the peak
            if at_floor >= best - 1e-15 * best.abs().max(1.0) {
                c = floor;
                best = at_floor;
            }
        }
    }
    Ok((c, best))
}

/// Largest stake with positive growth: the root of `lambda` above `c_opt`,
/// or 1 when `lambda(1) > 0`.
pub fn c_max(dist: &DistributionSpec, cfg: &TestConfig) -> Result<f64> {
    let (c0, _) = c_opt(dist, cfg)?;
    let lam = |c: f64| lambda_fn(dist, cfg, c).unwrap_or(f64::NEG_INFINITY);
    if lam(1.0) > 0.0 {
        return Ok(1.0);
    }
    let (lo, hi) = bisect_flip(c0, 1.0, 1e-10, |c| lam(c) <= 0.0);
    Ok(0.5 * (lo + hi))
}

pub fn kl_alt(a: f64, b: f64) -> f64 {
    let term = |p: f64, q: f64| if p == 0.0 { 0.0 } else { p * (p / q).ln() };
    term(a, b) + term(1.0 - a, 1.0 - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeBounds {
    /// `alpha / (1 - c (tau0 - mu)/(tau1 - mu))`.
    pub lower: f64,
    pub upper: f64,
    /// `alpha (tau1 - mu)/(tau1 - tau0)`, valid for every stake.
    pub coarse: f64,
}

/// Bounds on the rejection probability of a constant-stake test when the
/// data sit on the null boundary.
pub fn size_bounds(cfg: &TestConfig, c: f64) -> Result<SizeBounds> {
    let tau0 = cfg.require_tau0()?;
    let tau1 = cfg.require_tau1()?;
    check_stake(c)?;
    let (mu, alpha) = (cfg.mu, cfg.alpha);
    Ok(SizeBounds {
        lower: alpha / (1.0 - c * (tau0 - mu) / (tau1 - mu)),
        upper: alpha,
        coarse: alpha * (tau1 - mu) / (tau1 - tau0),
    })
}

/// Wald approximations `(E N, sd N)` of the run length at stake `c`.
pub fn wald_n(dist: &DistributionSpec, cfg: &TestConfig, c: f64) -> Result<(f64, f64)> {
    let (m1, m2) = dist.log_factor_moments(cfg, c)?;
    if !(m1 > 0.0) {
        return Err(Error::InfiniteExpectedSample { lambda: m1 });
    }
    let l = cfg.log_threshold();
    let var = (m2 - m1 * m1).max(0.0);
    Ok((l / m1, (var * l / (m1 * m1 * m1)).sqrt()))
}

/// `(1 - c) mu + c tau0`: a small value of `M_k(c)` signals that `E(T)`
/// exceeds this threshold.
pub fn inverse_signal_threshold(cfg: &TestConfig, c: f64) -> Result<f64> {
    let tau0 = cfg.require_tau0()?;
    check_stake(c)?;
    Ok((1.0 - c) * cfg.mu + c * tau0)
}

/// First rejection step for the constant stream `t, t, t, ...`.
pub fn deterministic_n(t: f64, cfg: &TestConfig, policy: &StakePolicy) -> Result<u64> {
    let mut test = SequentialTest::new(cfg.clone(), policy.clone())?;
    cfg.check_observation(1, t)?;
    if !can_grow(t, cfg, &policy.resolve(cfg)?)? {
        return Err(Error::NeverRejects { t });
    }
    loop {
        if test.push(t)?.decision == Decision::Reject {
            return Ok(test.k());
        }
    }
}

/// Whether some branch eventually multiplies by more than one on a constant
/// stream, which guarantees the loop in [`deterministic_n`] ends.
fn can_grow(t: f64, cfg: &TestConfig, policy: &StakePolicy) -> Result<bool> {
    let branches: &[Branch] = match cfg.branch() {
        Some(Branch::Upper) => &[Branch::Upper],
        Some(Branch::Lower) => &[Branch::Lower],
        None => &[Branch::Upper, Branch::Lower],
    };
    for &b in branches {
        if let crate::config::Side::TwoSided { rho_plus } = cfg.side {
            let w = if b == Branch::Upper { rho_plus } else { 1.0 - rho_plus };
            if w == 0.0 {
                continue;
            }
        }
        let grows = match policy {
            StakePolicy::Constant(c) => factor(b, t, cfg, *c)? > 1.0,
            StakePolicy::Schedule(cs) => factor(b, t, cfg, *cs.last().expect("validated"))? > 1.0,
            StakePolicy::Mixture(spec) => spec.support.1 > 0.0 && factor(b, t, cfg, spec.support.1)? > 1.0,
            StakePolicy::MuFamily(_) => unreachable!("resolved"),
        };
        if grows {
            return Ok(true);
        }
    }
    Ok(false)
}

/// `lambda` sampled on an interior grid of stakes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCurve {
    pub c_grid: Vec<f64>,
    pub lambda_vals: Vec<f64>,
}

impl GrowthCurve {
    /// `points` equally spaced stakes strictly inside `(0, 1)`.
    pub fn new(dist: &DistributionSpec, cfg: &TestConfig, points: usize) -> Result<Self> {
        let c_grid: Vec<f64> = (1..=points).map(|i| i as f64 / (points + 1) as f64).collect();
        let lambda_vals = c_grid.iter().map(|&c| lambda_fn(dist, cfg, c)).collect::<Result<_>>()?;
        Ok(Self { c_grid, lambda_vals })
    }
}

/// Everything `analyze` reports for one distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub dist: DistributionSpec,
    pub mean: f64,
    pub c_opt: f64,
    pub lambda_opt: f64,
    pub c_max: f64,
    pub wald_mean_n: f64,
    pub wald_sd_n: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<SizeBounds>,
}

pub fn growth_report(dist: &DistributionSpec, cfg: &TestConfig) -> Result<GrowthReport> {
    let (c, lam) = c_opt(dist, cfg)?;
    let cm = c_max(dist, cfg)?;
    let (wm, ws) = wald_n(dist, cfg, c).unwrap_or((f64::INFINITY, f64::NAN));
    let size = cfg.tau0.and_then(|_| size_bounds(cfg, c).ok());
    Ok(GrowthReport {
        dist: dist.clone(),
        mean: dist.mean(),
        c_opt: c,
        lambda_opt: lam,
        c_max: cm,
        wald_mean_n: wm,
        wald_sd_n: ws,
        size,
    })
}
