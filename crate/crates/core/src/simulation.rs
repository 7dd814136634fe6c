//! Seeded Monte Carlo experiments.
//!
//! Run `i` of a scenario draws from `ChaCha8Rng` seeded with the scenario
//! seed on stream `i`, so results do not depend on how runs are scheduled
//! across threads. Runs execute in parallel and are aggregated in index
//! order, which keeps summaries and CSV output bit-identical across reruns.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::DistributionSpec;
use crate::confidence::{BoundTracker, CPolicy, IntervalTracker};
use crate::config::TestConfig;
use crate::error::{Error, Result};
use crate::martingale::{Decision, StakePolicy};
use crate::mixture::{Density, MixtureSpec};
use crate::numeric::format_sig;
use crate::sequential::SequentialTest;

fn default_min_n() -> u64 {
    50
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StopRule {
    /// Stop at the first rejection.
    #[default]
    RejectAtAlpha,
    /// Stop once the confidence upper bound is within `m` of the sample
    /// mean, consulting bounds only from step `min_n` on.
    PrecisionStop {
        m: f64,
        #[serde(default = "default_min_n")]
        min_n: u64,
    },
    /// Record the precision stops, then continue to rejection.
    Both {
        m: f64,
        #[serde(default = "default_min_n")]
        min_n: u64,
    },
}

impl StopRule {
    fn precision(&self) -> Option<(f64, u64)> {
        match *self {
            StopRule::RejectAtAlpha => None,
            StopRule::PrecisionStop { m, min_n } | StopRule::Both { m, min_n } => Some((m, min_n)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub id: String,
    pub dist: DistributionSpec,
    pub cfg: TestConfig,
    pub policy: StakePolicy,
    #[serde(default)]
    pub stop_rule: StopRule,
    pub cap: u64,
    pub runs: u64,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        self.policy.validate(&self.cfg)?;
        self.dist.validate()?;
        let (lo, hi) = self.dist.support();
        if self.cfg.check_observation(1, lo).is_err() || self.cfg.check_observation(1, hi).is_err() {
            return Err(Error::InvalidDistribution(format!(
                "support [{lo}, {hi}] leaves the configured bounds"
            )));
        }
        if self.runs == 0 {
            return Err(Error::InvalidConfig {
                field: "runs",
                reason: "at least one run".into(),
            });
        }
        if let Some((m, min_n)) = self.stop_rule.precision() {
            if self.cap < min_n {
                return Err(Error::InvalidConfig {
                    field: "cap",
                    reason: format!("cap {} below min_n {min_n}", self.cap),
                });
            }
            if !(m > 0.0) {
                return Err(Error::InvalidConfig {
                    field: "stop_rule.m",
                    reason: "precision must be positive".into(),
                });
            }
            if self.family().is_none() {
                return Err(Error::InvalidPolicy("precision rules need a constant, mixture or mu family".into()));
            }
        }
        Ok(())
    }

    fn family(&self) -> Option<CPolicy> {
        CPolicy::from_stake_policy(&self.policy)
    }
}

/// Seeded generator for run `run` of a scenario.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// A reusable sampler for one distribution.
#[derive(Debug, Clone)]
pub enum Sampler {
    Atoms { values: Vec<f64>, cdf: Vec<f64> },
    Beta { x: Gamma<f64>, y: Gamma<f64> },
}

impl Sampler {
    pub fn new(dist: &DistributionSpec) -> Result<Self> {
        dist.validate()?;
        Ok(match dist {
            DistributionSpec::Beta { a, b } => Sampler::Beta {
                x: Gamma::new(*a, 1.0).map_err(|e| Error::InvalidDistribution(e.to_string()))?,
                y: Gamma::new(*b, 1.0).map_err(|e| Error::InvalidDistribution(e.to_string()))?,
            },
            // keep the declared order so Alt draws `u < nu` as the success
            DistributionSpec::Alt { nu } => Sampler::Atoms {
                values: vec![1.0, 0.0],
                cdf: vec![*nu, 1.0],
            },
            DistributionSpec::ScaledAlt { value, prob } => Sampler::Atoms {
                values: vec![*value, 0.0],
                cdf: vec![*prob, 1.0],
            },
            DistributionSpec::PointMass { t } => Sampler::Atoms {
                values: vec![*t],
                cdf: vec![1.0],
            },
            DistributionSpec::FiniteSupport { points, probs } => {
                let mut acc = 0.0;
                let cdf = probs
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                Sampler::Atoms {
                    values: points.clone(),
                    cdf,
                }
            }
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Atoms { values, cdf } => {
                if values.len() == 1 {
                    return values[0];
                }
                let u: f64 = rng.random();
                let i = cdf.iter().position(|&c| u < c).unwrap_or(values.len() - 1);
                values[i]
            }
            Sampler::Beta { x, y } => loop {
                let a = x.sample(rng);
                let b = y.sample(rng);
                if a + b > 0.0 {
                    break a / (a + b);
                }
            },
        }
    }
}

/// `n` draws from `dist` on stream 0 of `seed`.
pub fn sample(dist: &DistributionSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = Sampler::new(dist)?;
    let mut rng = run_rng(seed, 0);
    Ok((0..n).map(|_| sampler.draw(&mut rng)).collect())
}

/// What happened in one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u64,
    /// Steps taken before the run stopped or hit the cap.
    pub steps: u64,
    pub n_reject: Option<u64>,
    pub tbar_reject: Option<f64>,
    /// First step with `running bound - mean <= m`.
    pub n_precision_running: Option<u64>,
    pub tbar_precision_running: Option<f64>,
    /// First step with `U_k - mean <= m`.
    pub n_precision_at_k: Option<u64>,
    pub tbar_precision_at_k: Option<f64>,
    pub final_mean: f64,
    #[serde(with = "crate::serde_ext::option")]
    pub final_bound: Option<f64>,
    #[serde(with = "crate::serde_ext")]
    pub log_m_max: f64,
    pub absorbed: bool,
}

impl RunRecord {
    /// The stop that defines the rule's sample number.
    pub fn primary(&self, rule: &StopRule) -> Option<(u64, f64)> {
        let (n, t) = match rule {
            StopRule::RejectAtAlpha | StopRule::Both { .. } => (self.n_reject, self.tbar_reject),
            StopRule::PrecisionStop { .. } => (self.n_precision_running, self.tbar_precision_running),
        };
        n.zip(t)
    }
}

/// Runs one trial of `scenario` on stream `run`.
pub fn run_trial(scenario: &Scenario, run: u64) -> Result<RunRecord> {
    let sampler = Sampler::new(&scenario.dist)?;
    let mut rng = run_rng(scenario.seed, run);
    let mut test = SequentialTest::new(scenario.cfg.clone(), scenario.policy.clone())?;
    let precision = scenario.stop_rule.precision();
    let mut tracker = match precision {
        Some((_, min_n)) => Some(BoundTracker::starting_at(
            scenario.cfg.clone(),
            scenario.family().expect("validated"),
            min_n,
        )?),
        None => None,
    };
    let mut rec = RunRecord {
        run,
        steps: 0,
        n_reject: None,
        tbar_reject: None,
        n_precision_running: None,
        tbar_precision_running: None,
        n_precision_at_k: None,
        tbar_precision_at_k: None,
        final_mean: f64::NAN,
        final_bound: None,
        log_m_max: 0.0,
        absorbed: false,
    };
    let mut sum = 0.0;
    for k in 1..=scenario.cap {
        let t = sampler.draw(&mut rng);
        sum += t;
        let mean = sum / k as f64;
        let snap = test.push(t)?;
        if rec.n_reject.is_none() && snap.decision == Decision::Reject {
            rec.n_reject = Some(k);
            rec.tbar_reject = Some(mean);
        }
        if let (Some(tr), Some((m, min_n))) = (tracker.as_mut(), precision) {
            tr.push(t)?;
            if k >= min_n {
                if rec.n_precision_running.is_none() && tr.running_min() - mean <= m {
                    rec.n_precision_running = Some(k);
                    rec.tbar_precision_running = Some(mean);
                }
                if rec.n_precision_at_k.is_none() && tr.at_k_within(m) {
                    rec.n_precision_at_k = Some(k);
                    rec.tbar_precision_at_k = Some(mean);
                }
            }
        }
        rec.steps = k;
        let precise = rec.n_precision_running.is_some() && rec.n_precision_at_k.is_some();
        let done = match scenario.stop_rule {
            StopRule::RejectAtAlpha => rec.n_reject.is_some(),
            StopRule::PrecisionStop { .. } => precise,
            StopRule::Both { .. } => precise && rec.n_reject.is_some(),
        };
        // an absorbed martingale can never reach the threshold
        let dead = rec.n_reject.is_none() && test.log_m() == f64::NEG_INFINITY;
        if done || (dead && precision.is_none()) {
            break;
        }
    }
    rec.final_mean = sum / rec.steps.max(1) as f64;
    rec.final_bound = tracker.as_ref().map(|t| t.running_min());
    rec.log_m_max = test.log_m_max();
    rec.absorbed = test.log_m() == f64::NEG_INFINITY;
    Ok(rec)
}

/// Mean, sample sd and count of a set of stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopStats {
    pub count: u64,
    pub mean_n: f64,
    pub sd_n: f64,
    pub mean_tbar: f64,
    pub sd_tbar: f64,
}

impl StopStats {
    fn from_pairs(pairs: impl Iterator<Item = (u64, f64)>) -> Self {
        let (ns, ts): (Vec<f64>, Vec<f64>) = pairs.map(|(n, t)| (n as f64, t)).unzip();
        let (mean_n, sd_n) = mean_sd(&ns);
        let (mean_tbar, sd_tbar) = mean_sd(&ts);
        Self {
            count: ns.len() as u64,
            mean_n,
            sd_n,
            mean_tbar,
            sd_tbar,
        }
    }
}

/// Mean and sample standard deviation (`n - 1` denominator).
fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    let sd = if xs.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, sd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionSummary {
    pub running: StopStats,
    pub at_k: StopStats,
    pub reject: StopStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: u64,
    /// Moments of the rule's sample number over runs that stopped.
    pub mean_n: f64,
    pub sd_n: f64,
    /// `sd_n / sqrt(stopped runs)`.
    pub se_n: f64,
    /// Smallest `n` with `P(N <= n) >= q` over all runs (cap hits count
    /// as never stopping), as in the exact distribution.
    pub q50_n: Option<u64>,
    pub q75_n: Option<u64>,
    pub q90_n: Option<u64>,
    pub mean_tbar: f64,
    pub sd_tbar: f64,
    pub reject_rate: f64,
    /// Runs that hit the cap before the rule's stop.
    pub not_stopped_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<PrecisionSummary>,
}

impl RunSummary {
    pub fn from_records(records: &[RunRecord], rule: &StopRule) -> Self {
        let primary = StopStats::from_pairs(records.iter().filter_map(|r| r.primary(rule)));
        let runs = records.len() as u64;
        let mut ns: Vec<u64> = records.iter().filter_map(|r| r.primary(rule)).map(|p| p.0).collect();
        ns.sort_unstable();
        let quantile = |q: f64| {
            let need = (q * runs as f64).ceil().max(1.0) as usize;
            ns.get(need - 1).copied()
        };
        let rejected = records.iter().filter(|r| r.n_reject.is_some()).count() as f64;
        let precision = rule.precision().map(|_| PrecisionSummary {
            running: StopStats::from_pairs(
                records
                    .iter()
                    .filter_map(|r| r.n_precision_running.zip(r.tbar_precision_running)),
            ),
            at_k: StopStats::from_pairs(records.iter().filter_map(|r| r.n_precision_at_k.zip(r.tbar_precision_at_k))),
            reject: StopStats::from_pairs(records.iter().filter_map(|r| r.n_reject.zip(r.tbar_reject))),
        });
        Self {
            runs,
            mean_n: primary.mean_n,
            sd_n: primary.sd_n,
            se_n: primary.sd_n / (primary.count as f64).sqrt(),
            q50_n: quantile(0.5),
            q75_n: quantile(0.75),
            q90_n: quantile(0.9),
            mean_tbar: primary.mean_tbar,
            sd_tbar: primary.sd_tbar,
            reject_rate: rejected / runs as f64,
            not_stopped_count: runs - primary.count,
            precision,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub scenario: Scenario,
    pub records: Vec<RunRecord>,
    pub summary: RunSummary,
}

pub fn experiment(scenario: &Scenario) -> Result<Experiment> {
    scenario.validate()?;
    let records: Vec<RunRecord> = (0..scenario.runs)
        .into_par_iter()
        .map(|i| run_trial(scenario, i))
        .collect::<Result<_>>()?;
    let summary = RunSummary::from_records(&records, &scenario.stop_rule);
    Ok(Experiment {
        scenario: scenario.clone(),
        records,
        summary,
    })
}

/// The four distributions of the published tables (all with mean 0.02)
/// followed by the constant stream.
pub fn table_distributions() -> Vec<DistributionSpec> {
    vec![
        DistributionSpec::Alt { nu: 0.02 },
        DistributionSpec::ScaledAlt { value: 0.2, prob: 0.1 },
        DistributionSpec::Beta { a: 0.02, b: 0.98 },
        DistributionSpec::Beta { a: 2.0, b: 98.0 },
        DistributionSpec::PointMass { t: 0.02 },
    ]
}

fn audit_config() -> TestConfig {
    TestConfig::bounded(0.05, 0.0, 1.0, 0.05)
}

/// Sample-number grid: every table distribution against the stakes
/// 0.2, 0.4, 0.6, 0.8, 1 and the mixture over `[0.6, 1]`.
pub fn table1_scenarios(runs: u64, seed: u64, cap: u64) -> Vec<Scenario> {
    let mut policies: Vec<StakePolicy> = [0.2, 0.4, 0.6, 0.8, 1.0].map(StakePolicy::Constant).to_vec();
    policies.push(StakePolicy::Mixture(MixtureSpec::uniform(0.6, 1.0)));
    let mut out = Vec::new();
    for dist in table_distributions() {
        for policy in &policies {
            let runs = if matches!(dist, DistributionSpec::PointMass { .. }) { 1 } else { runs };
            out.push(Scenario {
                id: format!("table1/{dist}/{}", policy_label(policy)),
                dist: dist.clone(),
                cfg: audit_config(),
                policy: policy.clone(),
                stop_rule: StopRule::RejectAtAlpha,
                cap,
                runs,
                seed,
            });
        }
    }
    out
}

/// Precision grid: the mixture over `[0.6, 1]` with precision 0.05 from
/// step 50 on, continued to rejection.
pub fn table2_scenarios(runs: u64, seed: u64, cap: u64) -> Vec<Scenario> {
    table_distributions()
        .into_iter()
        .map(|dist| Scenario {
            id: format!("table2/{dist}"),
            runs: if matches!(dist, DistributionSpec::PointMass { .. }) { 1 } else { runs },
            dist,
            cfg: audit_config(),
            policy: StakePolicy::Mixture(MixtureSpec::uniform(0.6, 1.0)),
            stop_rule: StopRule::Both { m: 0.05, min_n: 50 },
            cap,
            seed,
        })
        .collect()
}

/// Short label for the stake column of a results table.
pub fn policy_label(policy: &StakePolicy) -> String {
    fn mix(spec: &MixtureSpec) -> String {
        match spec.density {
            Density::Uniform => format!("[{},{}]", spec.support.0, spec.support.1),
            Density::WeightedNodes { .. } => format!("weighted[{},{}]", spec.support.0, spec.support.1),
        }
    }
    match policy {
        StakePolicy::Constant(c) => format!("{c}"),
        StakePolicy::Schedule(cs) => format!("schedule({})", cs.len()),
        StakePolicy::Mixture(spec) => mix(spec),
        StakePolicy::MuFamily(CPolicy::ConstantC(c)) => format!("{c}"),
        StakePolicy::MuFamily(CPolicy::MixtureC(spec)) => mix(spec),
        StakePolicy::MuFamily(CPolicy::PowerFamily { d, r, s, m }) => format!("power({d},{r},{s},{m})"),
    }
}

/// Header of [`write_summaries_csv`].
pub const SUMMARY_HEADER: [&str; 25] = [
    "scenario",
    "T",
    "c",
    "runs",
    "mean",
    "sd",
    "se",
    "q50",
    "q75",
    "q90",
    "tbar_mean",
    "tbar_sd",
    "reject_rate",
    "not_stopped",
    "mu_star_n_mean",
    "mu_star_n_sd",
    "mu_star_tbar_mean",
    "mu_star_tbar_sd",
    "mu_n_mean",
    "mu_n_sd",
    "mu_n_tbar_mean",
    "mu_n_tbar_sd",
    "reject_n_mean",
    "reject_n_sd",
    "seed",
];

/// One row per experiment in the layout of the published tables: sample
/// number moments per stake, plus the precision-stop columns when present.
///
/// `digits` rounds to that many significant digits; `None` writes the
/// shortest text that parses back to the same `f64`.
pub fn write_summaries_csv<W: Write>(out: W, experiments: &[Experiment], digits: Option<usize>) -> Result<()> {
    let fmt_opt = |x: f64| match (x.is_nan(), digits) {
        (true, _) => String::new(),
        (false, Some(d)) => format_sig(x, d),
        (false, None) => format!("{x}"),
    };
    let io = |e: csv::Error| Error::Storage(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER).map_err(io)?;
    for e in experiments {
        let s = &e.summary;
        let p = s.precision;
        let col = |f: fn(&PrecisionSummary) -> f64| p.as_ref().map(f).map(fmt_opt).unwrap_or_default();
        let row = vec![
            e.scenario.id.clone(),
            e.scenario.dist.to_string(),
            policy_label(&e.scenario.policy),
            s.runs.to_string(),
            fmt_opt(s.mean_n),
            fmt_opt(s.sd_n),
            fmt_opt(s.se_n),
            s.q50_n.map(|q| q.to_string()).unwrap_or_default(),
            s.q75_n.map(|q| q.to_string()).unwrap_or_default(),
            s.q90_n.map(|q| q.to_string()).unwrap_or_default(),
            fmt_opt(s.mean_tbar),
            fmt_opt(s.sd_tbar),
            fmt_opt(s.reject_rate),
            s.not_stopped_count.to_string(),
            col(|p| p.running.mean_n),
            col(|p| p.running.sd_n),
            col(|p| p.running.mean_tbar),
            col(|p| p.running.sd_tbar),
            col(|p| p.at_k.mean_n),
            col(|p| p.at_k.sd_n),
            col(|p| p.at_k.mean_tbar),
            col(|p| p.at_k.sd_tbar),
            col(|p| p.reject.mean_n),
            col(|p| p.reject.sd_n),
            e.scenario.seed.to_string(),
        ];
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Fraction of seeded runs whose running upper bound stays above the true
/// mean for `steps` observations.
pub fn bound_coverage(
    dist: &DistributionSpec,
    cfg: &TestConfig,
    family: &CPolicy,
    steps: u64,
    runs: u64,
    seed: u64,
) -> Result<f64> {
    let sampler = Sampler::new(dist)?;
    let truth = dist.mean();
    let covered: Vec<bool> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = run_rng(seed, i);
            let mut tr = BoundTracker::new(cfg.clone(), family.clone())?;
            for _ in 0..steps {
                tr.push(sampler.draw(&mut rng))?;
                if tr.running_min() <= truth {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect::<Result<_>>()?;
    Ok(covered.iter().filter(|&&c| c).count() as f64 / runs as f64)
}

/// Fraction of seeded runs whose running interval contains the true mean
/// after every one of `steps` observations.
pub fn interval_coverage(
    dist: &DistributionSpec,
    cfg: &TestConfig,
    spec: &MixtureSpec,
    steps: u64,
    runs: u64,
    seed: u64,
) -> Result<f64> {
    let sampler = Sampler::new(dist)?;
    let truth = dist.mean();
    let covered: Vec<bool> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = run_rng(seed, i);
            let mut tr = IntervalTracker::new(cfg, spec)?;
            for _ in 0..steps {
                tr.observe(sampler.draw(&mut rng))?;
                if !tr.running().is_some_and(|r| r.contains(truth)) {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect::<Result<_>>()?;
    Ok(covered.iter().filter(|&&c| c).count() as f64 / runs as f64)
}
