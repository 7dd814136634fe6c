//! Anytime-valid confidence upper bounds and intervals for `E(T)`.
//!
//! A *suitable family* is a test martingale `M_k^mu` for every candidate
//! null mean `mu` whose value is non-decreasing in `mu`. Then
//!
//! ```text
//! U_k = inf { mu : M_k^mu >= 1/alpha }
//! ```
//!
//! is a level `1 - alpha` upper bound at every `k` simultaneously, and so is
//! the running minimum `min_{l <= k} U_l`. Intervals come from a mixture over
//! stakes in `[-1, 1]`, which is convex in `mu`; the set
//! `{mu : M_k^mu < 1/alpha}` is then an interval that contains the sample
//! mean.
//!
//! Observations are stored as value counts, so evaluating `M_k^mu` costs
//! `O(distinct values * quadrature nodes)` however long the stream is.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{Side, TestConfig};
use crate::error::{Error, Result};
use crate::martingale::{check_stake, log_threshold, StakePolicy};
use crate::mixture::{MixtureGrid, MixtureSpec, DEFAULT_NODES};
use crate::numeric::{log_sum_exp, regula_falsi};

/// Absolute tolerance of every bound bisection.
pub const BOUND_TOL: f64 = 1e-8;
/// Distance kept from the support bounds when searching in `mu`.
pub const EDGE_GAP: f64 = 1e-9;

/// A stake rule `c(mu)` that may depend on the candidate null mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CPolicy {
    ConstantC(f64),
    MixtureC(MixtureSpec),
    /// `c(mu) = d (tau1 - mu)^r / (mu - tau0)^s`, used only for `mu >= tau0 + m`.
    PowerFamily { d: f64, r: f64, s: f64, m: f64 },
}

impl Default for CPolicy {
    fn default() -> Self {
        CPolicy::MixtureC(MixtureSpec::uniform(0.0, 1.0))
    }
}

impl CPolicy {
    /// Checks that do not need a config.
    pub fn validate_shape(&self) -> Result<()> {
        match self {
            CPolicy::ConstantC(c) => check_stake(*c),
            CPolicy::MixtureC(spec) => {
                spec.validate()?;
                if !spec.is_one_sided() {
                    return Err(Error::InvalidMixture(
                        "a bound family needs stake support inside [0, 1]".into(),
                    ));
                }
                Ok(())
            }
            CPolicy::PowerFamily { d, r, s, m } => {
                let ok = d.is_finite()
                    && *d >= 0.0
                    && (0.0..=1.0).contains(r)
                    && (0.0..=1.0).contains(s)
                    && m.is_finite()
                    && *m > 0.0;
                if ok {
                    Ok(())
                } else {
                    Err(Error::InvalidPolicy(
                        "power family needs d >= 0, r and s in [0, 1], m > 0".into(),
                    ))
                }
            }
        }
    }

    /// Smallest `mu` the family is defined for.
    pub fn floor(&self, cfg: &TestConfig) -> f64 {
        match self {
            CPolicy::PowerFamily { m, .. } => cfg.tau0.map_or(f64::NEG_INFINITY, |t0| t0 + m),
            _ => f64::NEG_INFINITY,
        }
    }

    /// `c(mu)` for single-stake families.
    pub fn stake_at(&self, cfg: &TestConfig, mu: f64) -> Result<f64> {
        match self {
            CPolicy::ConstantC(c) => Ok(*c),
            CPolicy::MixtureC(_) => Err(Error::InvalidPolicy("a mixture family has no single stake".into())),
            CPolicy::PowerFamily { d, r, s, m } => {
                let tau0 = cfg.require_tau0()?;
                let tau1 = cfg.require_tau1()?;
                if mu < tau0 + m {
                    return Err(Error::InvalidPolicy(format!(
                        "power family is only defined for mu >= tau0 + m = {}",
                        tau0 + m
                    )));
                }
                Ok(d * (tau1 - mu).powf(*r) / (mu - tau0).powf(*s))
            }
        }
    }

    /// The ordinary stake policy this family induces at null mean `mu`.
    pub fn at_mu(&self, cfg: &TestConfig, mu: f64) -> Result<StakePolicy> {
        match self {
            CPolicy::MixtureC(spec) => Ok(StakePolicy::Mixture(spec.clone())),
            _ => Ok(StakePolicy::Constant(self.stake_at(cfg, mu)?)),
        }
    }

    /// The family a stake policy belongs to, if it has one.
    pub fn from_stake_policy(policy: &StakePolicy) -> Option<CPolicy> {
        match policy {
            StakePolicy::Constant(c) => Some(CPolicy::ConstantC(*c)),
            StakePolicy::Mixture(spec) => Some(CPolicy::MixtureC(spec.clone())),
            StakePolicy::MuFamily(p) => Some(p.clone()),
            StakePolicy::Schedule(_) => None,
        }
    }
}

/// Outcome of [`validate_c_policy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub mu: f64,
    pub reason: String,
}

impl PolicyReport {
    fn ok() -> Self {
        Self { ok: true, violation: None }
    }

    fn fail(mu: f64, reason: impl Into<String>) -> Self {
        Self {
            ok: false,
            violation: Some(Violation { mu, reason: reason.into() }),
        }
    }
}

/// Checks that `c(mu)` keeps every factor non-decreasing in `mu`:
/// stakes in `[0, 1]` and `0 <= -d/dmu ln c(mu) <= 1/(tau1 - mu) + 1/(mu - tau0)`,
/// the derivative taken by central differences with step `1e-6` of the
/// grid span. Reports the first violating `mu`.
pub fn validate_c_policy(policy: &CPolicy, cfg: &TestConfig, mu_grid: &[f64]) -> Result<PolicyReport> {
    let tau0 = cfg.require_tau0()?;
    let tau1 = cfg.require_tau1()?;
    if let Err(e) = policy.validate_shape() {
        return Ok(PolicyReport::fail(f64::NAN, e.to_string()));
    }
    if let CPolicy::ConstantC(_) | CPolicy::MixtureC(_) = policy {
        return Ok(PolicyReport::ok());
    }
    let floor = policy.floor(cfg);
    if floor >= tau1 {
        return Ok(PolicyReport::fail(floor, "family floor tau0 + m is not below tau1"));
    }
    let c_floor = policy.stake_at(cfg, floor)?;
    if c_floor > 1.0 {
        return Ok(PolicyReport::fail(floor, format!("stake {c_floor} exceeds 1")));
    }
    let lo = mu_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mu_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let h = 1e-6 * (hi - lo).max(f64::EPSILON);
    for &mu in mu_grid {
        if !(mu > tau0 && mu < tau1) {
            return Err(Error::InvalidConfig {
                field: "mu_grid",
                reason: format!("{mu} is outside (tau0, tau1)"),
            });
        }
        if mu < floor {
            continue;
        }
        let c = policy.stake_at(cfg, mu)?;
        if !(0.0..=1.0).contains(&c) {
            return Ok(PolicyReport::fail(mu, format!("stake {c} outside [0, 1]")));
        }
        if c == 0.0 {
            continue;
        }
        let (a, b) = ((mu - h).max(floor), (mu + h).min(tau1 - EDGE_GAP));
        let slope = -(policy.stake_at(cfg, b)?.ln() - policy.stake_at(cfg, a)?.ln()) / (b - a);
        let band = 1.0 / (tau1 - mu) + 1.0 / (mu - tau0);
        let tol = 1e-6 * band;
        if slope < -tol {
            return Ok(PolicyReport::fail(mu, "c(mu) increases in mu"));
        }
        if slope > band + tol {
            return Ok(PolicyReport::fail(mu, "c(mu) decreases faster than the factor allows"));
        }
    }
    Ok(PolicyReport::ok())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    AtK,
    Running,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub k: u64,
    /// `U_k`, the bound from the current value alone.
    #[serde(with = "crate::serde_ext")]
    pub mu_r: f64,
    /// `min_{l <= k} U_l`.
    #[serde(with = "crate::serde_ext")]
    pub running_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    pub k: u64,
    pub at_k: Interval,
    /// Intersection of all prefix intervals; `None` once it is empty.
    pub running: Option<Interval>,
    pub last_nonempty: Interval,
}

impl IntervalResult {
    pub fn is_empty(&self) -> bool {
        self.running.is_none()
    }
}

/// Observation counts keyed by exact value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    counts: BTreeMap<u64, u64>,
    n: u64,
    sum: f64,
}

impl Histogram {
    pub fn push(&mut self, t: f64) {
        let t = if t == 0.0 { 0.0 } else { t };
        *self.counts.entry(t.to_bits()).or_insert(0) += 1;
        self.n += 1;
        self.sum += t;
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.counts.iter().map(|(&b, &n)| (f64::from_bits(b), n as f64))
    }
}

#[inline]
fn log_factor(c: f64, t: f64, mu: f64, tau0: f64, tau1: f64) -> f64 {
    let f = if c >= 0.0 {
        1.0 - c * (t - mu) / (tau1 - mu)
    } else {
        1.0 + c * (mu - t) / (mu - tau0)
    };
    f.max(0.0).ln()
}

fn log_m_constant(hist: &Histogram, c: f64, mu: f64, tau0: f64, tau1: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    hist.iter().map(|(t, n)| n * log_factor(c, t, mu, tau0, tau1)).sum()
}

fn log_m_grid(hist: &Histogram, grid: &MixtureGrid, mu: f64, tau0: f64, tau1: f64) -> f64 {
    log_sum_exp(
        grid.nodes
            .iter()
            .zip(&grid.log_weights)
            .map(|(&c, &w)| w + log_m_constant(hist, c, mu, tau0, tau1)),
    )
}

/// Observations gathered under one family.
#[derive(Debug, Clone, PartialEq)]
struct Segment {
    policy: CPolicy,
    grid: Option<MixtureGrid>,
    hist: Histogram,
}

impl Segment {
    fn new(policy: CPolicy) -> Result<Self> {
        let grid = match &policy {
            CPolicy::MixtureC(spec) => Some(MixtureGrid::new(spec, DEFAULT_NODES)?),
            _ => None,
        };
        Ok(Self {
            policy,
            grid,
            hist: Histogram::default(),
        })
    }

    fn log_m(&self, cfg: &TestConfig, mu: f64) -> f64 {
        if self.hist.is_empty() {
            return 0.0;
        }
        let tau0 = cfg.tau0.unwrap_or(f64::NEG_INFINITY);
        let tau1 = cfg.tau1.unwrap_or(f64::INFINITY);
        match &self.grid {
            Some(g) => log_m_grid(&self.hist, g, mu, tau0, tau1),
            None => {
                let c = self.policy.stake_at(cfg, mu).unwrap_or(0.0).clamp(0.0, 1.0);
                log_m_constant(&self.hist, c, mu, tau0, tau1)
            }
        }
    }
}

/// Incremental confidence upper bound for one stream, possibly spanning
/// several families: after a switch at `n` the value is `M_n^mu N_l^mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundTracker {
    cfg: TestConfig,
    segments: Vec<Segment>,
    k: u64,
    sum: f64,
    running_min: f64,
    /// Bounds before this step are not folded into the running minimum.
    from_k: u64,
}

impl BoundTracker {
    pub fn new(cfg: TestConfig, policy: CPolicy) -> Result<Self> {
        Self::starting_at(cfg, policy, 1)
    }

    /// A tracker whose running minimum only considers `k >= from_k`.
    pub fn starting_at(cfg: TestConfig, policy: CPolicy, from_k: u64) -> Result<Self> {
        let cfg = cfg.with_side(Side::UpperNull);
        cfg.validate()?;
        policy.validate_shape()?;
        Ok(Self {
            segments: vec![Segment::new(policy)?],
            cfg,
            k: 0,
            sum: 0.0,
            running_min: f64::INFINITY,
            from_k,
        })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.k as f64
    }

    pub fn running_min(&self) -> f64 {
        self.running_min
    }

    /// `ln M_k^mu`.
    pub fn log_m(&self, mu: f64) -> f64 {
        self.segments.iter().map(|s| s.log_m(&self.cfg, mu)).sum()
    }

    /// Starts a new family from the next observation on.
    pub fn switch(&mut self, policy: CPolicy) -> Result<()> {
        policy.validate_shape()?;
        self.segments.push(Segment::new(policy)?);
        Ok(())
    }

    /// Adds an observation and updates the running minimum. `U_k` itself
    /// is solved only on request, through [`Self::at_k`] or [`Self::result`].
    pub fn push(&mut self, t: f64) -> Result<()> {
        self.cfg.check_observation(self.k + 1, t)?;
        self.segments.last_mut().expect("one segment").hist.push(t);
        self.k += 1;
        self.sum += t;
        if self.k >= self.from_k {
            self.update_running();
        }
        Ok(())
    }

    fn threshold(&self) -> f64 {
        log_threshold(self.cfg.alpha)
    }

    /// Lowest `mu` worth searching: every segment is at most one at its own
    /// mean, and the family may not be defined further down.
    fn search_floor(&self) -> f64 {
        let mean_floor = self
            .segments
            .iter()
            .filter(|s| !s.hist.is_empty())
            .map(|s| s.hist.mean())
            .fold(f64::INFINITY, f64::min);
        let family_floor = self
            .segments
            .iter()
            .map(|s| s.policy.floor(&self.cfg))
            .fold(f64::NEG_INFINITY, f64::max);
        mean_floor.max(family_floor)
    }

    fn cap(&self) -> f64 {
        self.cfg.tau1.expect("validated") - EDGE_GAP
    }

    /// Smallest `mu` in `[floor, hi]` with `M_k^mu >= 1/alpha`, given that
    /// it holds at `hi`.
    fn solve_below(&self, hi: f64) -> f64 {
        let lo = self.search_floor();
        let thr = self.threshold();
        if lo >= hi || self.log_m(lo) >= thr {
            return lo.min(hi);
        }
        regula_falsi(|mu| self.log_m(mu) - thr, lo, hi, BOUND_TOL).1
    }

    fn update_running(&mut self) {
        let thr = self.threshold();
        if self.running_min.is_finite() {
            if self.log_m(self.running_min) >= thr {
                self.running_min = self.solve_below(self.running_min);
            }
        } else {
            self.running_min = self.at_k();
        }
    }

    /// `U_k` for the current history; `+inf` when even `mu` next to `tau1`
    /// is not rejected.
    pub fn at_k(&self) -> f64 {
        if self.k == 0 {
            return f64::INFINITY;
        }
        let cap = self.cap();
        if self.log_m(cap) < self.threshold() {
            return f64::INFINITY;
        }
        self.solve_below(cap)
    }

    /// Whether `U_k - mean <= m`, via one evaluation at `mean + m`.
    pub fn at_k_within(&self, m: f64) -> bool {
        if self.k == 0 {
            return false;
        }
        let mu = self.mean() + m;
        mu < self.cfg.tau1.expect("validated") && self.log_m(mu.max(self.search_floor())) >= self.threshold()
    }

    pub fn result(&self) -> BoundResult {
        BoundResult {
            k: self.k,
            mu_r: self.at_k(),
            running_min: self.running_min,
        }
    }
}

/// Confidence upper bound after the whole `history`.
///
/// In `AtK` mode only `U_k` is computed and `running_min` repeats it.
pub fn upper_bound(history: &[f64], cfg: &TestConfig, policy: &CPolicy, mode: Mode) -> Result<BoundResult> {
    let mut tracker = BoundTracker::new(cfg.clone(), policy.clone())?;
    match mode {
        Mode::AtK => {
            for (i, &t) in history.iter().enumerate() {
                tracker.cfg.check_observation(i as u64 + 1, t)?;
                tracker.segments[0].hist.push(t);
                tracker.k += 1;
                tracker.sum += t;
            }
            let u = tracker.at_k();
            Ok(BoundResult {
                k: tracker.k,
                mu_r: u,
                running_min: u,
            })
        }
        Mode::Running => {
            for &t in history {
                tracker.push(t)?;
            }
            Ok(tracker.result())
        }
    }
}

/// Both bounds at every prefix of `history`.
pub fn bound_trajectory(history: &[f64], cfg: &TestConfig, policy: &CPolicy) -> Result<Vec<BoundResult>> {
    let mut tracker = BoundTracker::new(cfg.clone(), policy.clone())?;
    history
        .iter()
        .map(|&t| {
            tracker.push(t)?;
            Ok(tracker.result())
        })
        .collect()
}

/// Two-sided mixture used for intervals.
pub fn default_interval_spec() -> MixtureSpec {
    MixtureSpec::uniform(-1.0, 1.0)
}

/// Incremental confidence interval from a mixture over stakes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTracker {
    tau0: f64,
    tau1: f64,
    alpha: f64,
    grid: MixtureGrid,
    hist: Histogram,
    running: Option<Interval>,
    last_nonempty: Interval,
}

impl IntervalTracker {
    pub fn new(cfg: &TestConfig, spec: &MixtureSpec) -> Result<Self> {
        let tau0 = cfg.require_tau0()?;
        let tau1 = cfg.require_tau1()?;
        if !(0.0 < cfg.alpha && cfg.alpha < 1.0) || tau0 >= tau1 {
            return Err(Error::InvalidConfig {
                field: "alpha",
                reason: "interval needs alpha in (0, 1) and tau0 < tau1".into(),
            });
        }
        let whole = Interval { lo: tau0, hi: tau1 };
        Ok(Self {
            tau0,
            tau1,
            alpha: cfg.alpha,
            grid: MixtureGrid::new(spec, DEFAULT_NODES)?,
            hist: Histogram::default(),
            running: Some(whole),
            last_nonempty: whole,
        })
    }

    /// `ln M_k^mu(pi)`.
    pub fn log_m(&self, mu: f64) -> f64 {
        if self.hist.is_empty() {
            return 0.0;
        }
        log_m_grid(&self.hist, &self.grid, mu, self.tau0, self.tau1)
    }

    pub fn k(&self) -> u64 {
        self.hist.len()
    }

    fn compute_at_k(&self) -> Interval {
        let thr = log_threshold(self.alpha);
        let mean = self.hist.mean();
        let (lo_cap, hi_cap) = (self.tau0 + EDGE_GAP, self.tau1 - EDGE_GAP);
        let g = |mu: f64| self.log_m(mu) - thr;
        let hi = if mean >= hi_cap || g(hi_cap) < 0.0 {
            self.tau1
        } else {
            regula_falsi(g, mean, hi_cap, BOUND_TOL).1
        };
        let lo = if mean <= lo_cap || g(lo_cap) < 0.0 {
            self.tau0
        } else {
            regula_falsi(g, mean, lo_cap, BOUND_TOL).1
        };
        Interval { lo, hi }
    }

    /// Adds an observation and returns the updated result.
    pub fn push(&mut self, t: f64) -> Result<IntervalResult> {
        self.observe(t)?;
        Ok(self.result())
    }

    /// Adds an observation, updating only the running interval.
    pub fn observe(&mut self, t: f64) -> Result<()> {
        if t.is_nan() || t < self.tau0 || t > self.tau1 {
            return Err(Error::OutOfBounds {
                index: self.hist.len() + 1,
                value: t,
                lo: self.tau0,
                hi: self.tau1,
            });
        }
        self.hist.push(t);
        if let Some(r) = self.running {
            self.running = self.shrink(r);
            if let Some(r) = self.running {
                self.last_nonempty = r;
            }
        }
        Ok(())
    }

    /// Intersects the running interval with the current one. By convexity,
    /// an end that is still accepted needs no work; a rejected end moves to
    /// the crossing between it and the sample mean, or empties the interval
    /// when the mean lies on the other side.
    fn shrink(&self, r: Interval) -> Option<Interval> {
        let thr = log_threshold(self.alpha);
        let (lo_cap, hi_cap) = (self.tau0 + EDGE_GAP, self.tau1 - EDGE_GAP);
        let g = |mu: f64| self.log_m(mu) - thr;
        let mean = self.hist.mean();
        let mut out = r;
        let hi_end = r.hi.min(hi_cap);
        if g(hi_end) >= 0.0 {
            if hi_end <= mean {
                return None;
            }
            out.hi = regula_falsi(g, mean, hi_end, BOUND_TOL).1;
        }
        let lo_end = r.lo.max(lo_cap);
        if g(lo_end) >= 0.0 {
            if lo_end >= mean {
                return None;
            }
            out.lo = regula_falsi(g, mean, lo_end, BOUND_TOL).1;
        }
        (out.lo <= out.hi).then_some(out)
    }

    pub fn running(&self) -> Option<Interval> {
        self.running
    }

    /// The interval from the current value alone.
    pub fn at_k(&self) -> Interval {
        if self.hist.is_empty() {
            Interval { lo: self.tau0, hi: self.tau1 }
        } else {
            self.compute_at_k()
        }
    }

    pub fn result(&self) -> IntervalResult {
        let at_k = self.at_k();
        // the two roots are solved from different brackets; clip so the
        // running interval never pokes out of the current one
        IntervalResult {
            k: self.hist.len(),
            at_k,
            running: self.running.and_then(|r| r.intersect(&at_k)),
            last_nonempty: self.last_nonempty,
        }
    }
}

/// Confidence interval after the whole `history`. In `AtK` mode `running`
/// repeats the current interval.
pub fn interval(history: &[f64], cfg: &TestConfig, spec: &MixtureSpec, mode: Mode) -> Result<IntervalResult> {
    let mut tracker = IntervalTracker::new(cfg, spec)?;
    match mode {
        Mode::Running => {
            for &t in history {
                tracker.push(t)?;
            }
            Ok(tracker.result())
        }
        Mode::AtK => {
            for (i, &t) in history.iter().enumerate() {
                cfg.check_observation(i as u64 + 1, t)?;
                tracker.hist.push(t);
            }
            let at_k = tracker.at_k();
            Ok(IntervalResult {
                k: tracker.k(),
                at_k,
                running: Some(at_k),
                last_nonempty: at_k,
            })
        }
    }
}

pub fn interval_trajectory(history: &[f64], cfg: &TestConfig, spec: &MixtureSpec) -> Result<Vec<IntervalResult>> {
    let mut tracker = IntervalTracker::new(cfg, spec)?;
    history.iter().map(|&t| tracker.push(t)).collect()
}

/// One line of a bound/interval trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub k: u64,
    #[serde(with = "crate::serde_ext::option")]
    pub mu_r: Option<f64>,
    #[serde(with = "crate::serde_ext::option")]
    pub running_min: Option<f64>,
    #[serde(with = "crate::serde_ext::option")]
    pub lo: Option<f64>,
    #[serde(with = "crate::serde_ext::option")]
    pub hi: Option<f64>,
    pub empty: bool,
}

impl TrajectoryRecord {
    pub fn new(k: u64, bound: Option<&BoundResult>, interval: Option<&IntervalResult>) -> Self {
        let running = interval.and_then(|i| i.running);
        Self {
            k,
            mu_r: bound.map(|b| b.mu_r),
            running_min: bound.map(|b| b.running_min),
            lo: running.map(|r| r.lo),
            hi: running.map(|r| r.hi),
            empty: interval.is_some_and(|i| i.is_empty()),
        }
    }
}
