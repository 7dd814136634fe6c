//! `tmart`: sequential tests, confidence bounds and experiments from the
//! command line.
//!
//! Exit status is 0 on success, 2 for usage errors (bad flags, invalid
//! configuration) and 1 for data errors (unreadable or out-of-range input).

mod input;
mod num;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use tmart::analysis::{exact_stop_dist, growth_report, size_bounds, wald_n, DistributionSpec, GrowthCurve};
use tmart::confidence::{default_interval_spec, BoundTracker, CPolicy, IntervalTracker};
use tmart::simulation::{experiment, table1_scenarios, table2_scenarios, write_summaries_csv, Scenario, StopRule};
use tmart::{Decision, MixtureSpec, SequentialTest, Side, StakePolicy, TestConfig};

use num::g9;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

fn data(e: impl ToString) -> CliError {
    CliError::Data(e.to_string())
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "tmart", version, about = "Anytime-valid tests and confidence bounds for bounded means")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a sequential test over an observation file.
    Test(TestCmd),
    /// Running confidence upper bound for the mean.
    Bound(BoundCmd),
    /// Running confidence interval for the mean.
    Interval(IntervalCmd),
    /// Growth rate, optimal and maximal stakes, expected sample numbers.
    Analyze(AnalyzeCmd),
    /// Seeded Monte Carlo experiments.
    Simulate(SimulateCmd),
    /// Start the HTTP session service.
    Serve(ServeCmd),
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// JSON file with `mu`, `tau0`, `tau1`, `alpha`, `side` and optionally
    /// `policy`; flags override its fields.
    #[arg(long, env = "TMART_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tau0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tau1: Option<f64>,
    /// Significance level [default: 0.05]
    #[arg(long)]
    alpha: Option<f64>,
    /// Null hypothesis: `upper` is E(T) >= mu, `lower` is E(T) <= mu.
    #[arg(long, value_enum)]
    side: Option<SideArg>,
    /// Weight of the upper branch for a two-sided test.
    #[arg(long, default_value_t = 0.5)]
    rho_plus: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SideArg {
    Upper,
    Lower,
    TwoSided,
}

#[derive(Args, Debug, Clone)]
struct PolicyArgs {
    /// Constant stake.
    #[arg(long, group = "stake", allow_hyphen_values = true)]
    c: Option<f64>,
    /// Uniform mixture over stakes `a,b`.
    #[arg(long, group = "stake", value_name = "A,B", allow_hyphen_values = true)]
    mixture: Option<String>,
    /// Stake schedule `c1,c2,...`; the last stake repeats.
    #[arg(long, group = "stake", value_name = "C1,C2,...")]
    schedule: Option<String>,
    /// Mu-dependent stakes `d,r,s,m`: c(mu) = d (mu - tau0 - m)^r (tau1 - mu)^s.
    #[arg(long, group = "stake", value_name = "D,R,S,M")]
    power: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long = "out", short = 'o')]
    out: Option<PathBuf>,
    /// Print only the final summary.
    #[arg(long)]
    summary: bool,
}

#[derive(Args, Debug)]
struct TestCmd {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Observations (JSONL `{"t": x}` or one-column CSV); `-` for stdin.
    #[arg(long = "in", short = 'i')]
    input: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct BoundCmd {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long = "in", short = 'i')]
    input: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct IntervalCmd {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Uniform mixture over signed stakes `a,b` [default: -1,1]
    #[arg(long, value_name = "A,B", allow_hyphen_values = true)]
    mixture: Option<String>,
    #[arg(long = "in", short = 'i')]
    input: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct AnalyzeCmd {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Data distribution: `alt:NU`, `scaled_alt:V,P`, `beta:A,B`, `point:T`
    /// or `finite:X1:P1,X2:P2,...`.
    #[arg(long)]
    dist: String,
    /// Stake for the Wald, size and exact figures [default: c_opt]
    #[arg(long)]
    c: Option<f64>,
    /// Points on the growth-rate curve.
    #[arg(long, default_value_t = 9)]
    points: usize,
    /// Also compute the exact stopping distribution up to this many steps.
    #[arg(long, value_name = "N_MAX")]
    exact: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Preset {
    Table1,
    Table2,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum StopArg {
    Reject,
    Precision,
    Both,
}

#[derive(Args, Debug)]
struct SimulateCmd {
    /// Scenario JSON file (one object or an array).
    #[arg(long, conflicts_with_all = ["preset", "dist"])]
    scenario: Option<PathBuf>,
    /// Built-in scenario grids.
    #[arg(long, value_enum, conflicts_with = "dist")]
    preset: Option<Preset>,
    /// Data distribution for a single scenario built from flags.
    #[arg(long)]
    dist: Option<String>,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, value_enum, default_value_t = StopArg::Reject)]
    stop: StopArg,
    /// Precision for the precision rules.
    #[arg(long, default_value_t = 0.05)]
    m: f64,
    /// First step at which precision is checked.
    #[arg(long, default_value_t = 50)]
    min_n: u64,
    /// Runs per scenario (flags and presets).
    #[arg(long, default_value_t = 1000)]
    runs: u64,
    /// Steps before a run counts as not stopped (flags and presets).
    #[arg(long, default_value_t = 100_000)]
    cap: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ServeCmd {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory for session logs.
    #[arg(long, default_value = "tmart-data")]
    data_dir: PathBuf,
    /// Require `Authorization: Bearer <token>` on session routes.
    #[arg(long, env = "TMART_TOKEN")]
    token: Option<String>,
}

#[derive(Deserialize, Default)]
struct FileConfig {
    mu: Option<f64>,
    tau0: Option<f64>,
    tau1: Option<f64>,
    alpha: Option<f64>,
    side: Option<Side>,
    policy: Option<StakePolicy>,
}

impl ConfigArgs {
    fn load(&self) -> CliResult<FileConfig> {
        let Some(path) = &self.config else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    fn resolve(&self) -> CliResult<(TestConfig, Option<StakePolicy>)> {
        let file = self.load()?;
        let mu = self
            .mu
            .or(file.mu)
            .ok_or_else(|| usage("missing --mu (or `mu` in the config file)"))?;
        let side = match self.side {
            Some(SideArg::Upper) => Side::UpperNull,
            Some(SideArg::Lower) => Side::LowerNull,
            Some(SideArg::TwoSided) => Side::TwoSided {
                rho_plus: self.rho_plus,
            },
            None => file.side.unwrap_or(Side::UpperNull),
        };
        let cfg = TestConfig {
            mu,
            tau0: self.tau0.or(file.tau0),
            tau1: self.tau1.or(file.tau1),
            alpha: self.alpha.or(file.alpha).unwrap_or(0.05),
            side,
        };
        cfg.validate().map_err(usage)?;
        Ok((cfg, file.policy))
    }
}

fn parse_list(flag: &str, s: &str, len: Option<usize>) -> CliResult<Vec<f64>> {
    let xs = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| usage(format!("--{flag} `{s}`: {e}")))?;
    match len {
        Some(n) if xs.len() != n => Err(usage(format!("--{flag} expects {n} comma-separated numbers"))),
        _ => Ok(xs),
    }
}

fn parse_mixture(s: &str) -> CliResult<MixtureSpec> {
    let v = parse_list("mixture", s, Some(2))?;
    Ok(MixtureSpec::uniform(v[0], v[1]))
}

impl PolicyArgs {
    fn resolve(&self, from_file: Option<StakePolicy>) -> CliResult<StakePolicy> {
        if let Some(c) = self.c {
            return Ok(StakePolicy::Constant(c));
        }
        if let Some(m) = &self.mixture {
            return Ok(StakePolicy::Mixture(parse_mixture(m)?));
        }
        if let Some(s) = &self.schedule {
            return Ok(StakePolicy::Schedule(parse_list("schedule", s, None)?));
        }
        if let Some(p) = &self.power {
            let v = parse_list("power", p, Some(4))?;
            return Ok(StakePolicy::MuFamily(CPolicy::PowerFamily {
                d: v[0],
                r: v[1],
                s: v[2],
                m: v[3],
            }));
        }
        Ok(from_file.unwrap_or_else(|| StakePolicy::Mixture(MixtureSpec::uniform(0.0, 1.0))))
    }
}

fn open_output(out: &OutputArgs) -> CliResult<Box<dyn Write>> {
    Ok(match &out.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn with_line(lineno: usize, e: tmart::Error) -> CliError {
    data(format!("line {lineno}: {e}"))
}

fn run_test(cmd: &TestCmd) -> CliResult {
    let (cfg, file_policy) = cmd.cfg.resolve()?;
    let policy = cmd.policy.resolve(file_policy)?;
    let mut test = SequentialTest::new(cfg, policy).map_err(usage)?;
    let fmt = cmd.output.format;
    let rows = !cmd.output.summary;
    let mut out = open_output(&cmd.output)?;
    let mut steps = Vec::new();
    let mut first_reject = None;
    match (fmt, rows) {
        (Format::Text, true) => writeln!(out, "k\tt\tlog_m\tlog_m_max\tdecision")?,
        (Format::Csv, true) => writeln!(out, "k,t,log_m,log_m_max,decision")?,
        _ => {}
    }
    input::for_each_observation(&cmd.input, |lineno, t| {
        let snap = test.push(t).map_err(|e| with_line(lineno, e))?;
        if first_reject.is_none() && snap.decision == Decision::Reject {
            first_reject = Some(snap.k);
        }
        let decision = match snap.decision {
            Decision::Reject => "Reject",
            Decision::Continue => "Continue",
        };
        let (lm, mx) = (g9(snap.log_m), g9(snap.log_m_max));
        match (fmt, rows) {
            (Format::Text, true) => writeln!(out, "{}\t{}\t{lm}\t{mx}\t{decision}", snap.k, g9(t))?,
            (Format::Csv, true) => writeln!(out, "{},{},{lm},{mx},{decision}", snap.k, g9(t))?,
            (Format::Json, true) => steps.push(json!({"k": snap.k, "t": t, "log_m": lm, "log_m_max": mx, "decision": decision})),
            _ => {}
        }
        Ok(())
    })?;
    let m = g9(test.log_m().exp());
    match fmt {
        Format::Json => {
            let mut report = json!({
                "k": test.k(),
                "log_m": g9(test.log_m()),
                "log_m_max": g9(test.log_m_max()),
                "m": m,
                "first_reject": first_reject,
                "decision": if first_reject.is_some() { "Reject" } else { "Continue" },
            });
            if rows {
                report["steps"] = serde_json::Value::Array(steps);
            }
            writeln!(out, "{report}")?;
        }
        Format::Csv if rows => {}
        _ => match first_reject {
            Some(n) => writeln!(out, "REJECT at k={n} (k={}, M={m})", test.k())?,
            None => writeln!(out, "CONTINUE, k={}, M={m}", test.k())?,
        },
    }
    out.flush()?;
    Ok(())
}

fn run_bound(cmd: &BoundCmd) -> CliResult {
    let (cfg, file_policy) = cmd.cfg.resolve()?;
    let policy = cmd.policy.resolve(file_policy)?;
    let family = CPolicy::from_stake_policy(&policy)
        .ok_or_else(|| usage("bounds need --c, --mixture or --power (a schedule is not a mu family)"))?;
    let mut tracker = BoundTracker::new(cfg, family).map_err(usage)?;
    let fmt = cmd.output.format;
    let rows = !cmd.output.summary;
    let mut out = open_output(&cmd.output)?;
    let mut steps = Vec::new();
    match (fmt, rows) {
        (Format::Text, true) => writeln!(out, "k\tt\tmean\tbound_at_k\tbound")?,
        (Format::Csv, true) => writeln!(out, "k,t,mean,bound_at_k,bound")?,
        _ => {}
    }
    input::for_each_observation(&cmd.input, |lineno, t| {
        tracker.push(t).map_err(|e| with_line(lineno, e))?;
        if !rows {
            return Ok(());
        }
        let r = tracker.result();
        let (mean, at, run) = (g9(tracker.mean()), g9(r.mu_r), g9(r.running_min));
        match (fmt, rows) {
            (Format::Text, true) => writeln!(out, "{}\t{}\t{mean}\t{at}\t{run}", r.k, g9(t))?,
            (Format::Csv, true) => writeln!(out, "{},{},{mean},{at},{run}", r.k, g9(t))?,
            (Format::Json, true) => steps.push(json!({"k": r.k, "t": t, "mean": mean, "bound_at_k": at, "bound": run})),
            _ => {}
        }
        Ok(())
    })?;
    let r = tracker.result();
    match fmt {
        Format::Json => {
            let mut report = json!({"k": r.k, "mean": g9(tracker.mean()), "bound_at_k": g9(r.mu_r), "bound": g9(r.running_min)});
            if rows {
                report["steps"] = serde_json::Value::Array(steps);
            }
            writeln!(out, "{report}")?;
        }
        Format::Csv if rows => {}
        _ => writeln!(
            out,
            "k={}, mean={}, upper bound={} (at k: {})",
            r.k,
            g9(tracker.mean()),
            g9(r.running_min),
            g9(r.mu_r)
        )?,
    }
    out.flush()?;
    Ok(())
}

fn run_interval(cmd: &IntervalCmd) -> CliResult {
    let (cfg, _) = cmd.cfg.resolve()?;
    let spec = match &cmd.mixture {
        Some(m) => parse_mixture(m)?,
        None => default_interval_spec(),
    };
    let mut tracker = IntervalTracker::new(&cfg, &spec).map_err(usage)?;
    let fmt = cmd.output.format;
    let rows = !cmd.output.summary;
    let mut out = open_output(&cmd.output)?;
    let mut steps = Vec::new();
    let mut sum = 0.0;
    let mut emptied_at = None;
    match (fmt, rows) {
        (Format::Text, true) => writeln!(out, "k\tt\tmean\tlo\thi\trunning_lo\trunning_hi")?,
        (Format::Csv, true) => writeln!(out, "k,t,mean,lo,hi,running_lo,running_hi")?,
        _ => {}
    }
    input::for_each_observation(&cmd.input, |lineno, t| {
        let r = if rows {
            Some(tracker.push(t).map_err(|e| with_line(lineno, e))?)
        } else {
            tracker.observe(t).map_err(|e| with_line(lineno, e))?;
            None
        };
        sum += t;
        let k = tracker.k();
        if emptied_at.is_none() && tracker.running().is_none() {
            emptied_at = Some(k);
        }
        if let Some(r) = r {
            let mean = g9(sum / k as f64);
            let (lo, hi) = (g9(r.at_k.lo), g9(r.at_k.hi));
            let (rlo, rhi) = r
                .running
                .map(|i| (g9(i.lo), g9(i.hi)))
                .unwrap_or_else(|| ("empty".into(), "empty".into()));
            match fmt {
                Format::Text => writeln!(out, "{k}\t{}\t{mean}\t{lo}\t{hi}\t{rlo}\t{rhi}", g9(t))?,
                Format::Csv => writeln!(out, "{k},{},{mean},{lo},{hi},{rlo},{rhi}", g9(t))?,
                Format::Json => steps.push(json!({
                    "k": k, "t": t, "mean": mean, "lo": lo, "hi": hi,
                    "running": r.running.map(|i| json!({"lo": g9(i.lo), "hi": g9(i.hi)})),
                })),
            }
        }
        Ok(())
    })?;
    let r = tracker.result();
    let mean = if r.k == 0 { f64::NAN } else { sum / r.k as f64 };
    match fmt {
        Format::Json => {
            let mut report = json!({
                "k": r.k,
                "mean": g9(mean),
                "interval": {"lo": g9(r.at_k.lo), "hi": g9(r.at_k.hi)},
                "running": r.running.map(|i| json!({"lo": g9(i.lo), "hi": g9(i.hi)})),
                "last_nonempty": {"lo": g9(r.last_nonempty.lo), "hi": g9(r.last_nonempty.hi)},
                "emptied_at": emptied_at,
            });
            if rows {
                report["steps"] = serde_json::Value::Array(steps);
            }
            writeln!(out, "{report}")?;
        }
        Format::Csv if rows => {}
        _ => {
            let at = format!("[{}, {}]", g9(r.at_k.lo), g9(r.at_k.hi));
            match (r.running, emptied_at) {
                (Some(i), _) => writeln!(
                    out,
                    "k={}, mean={}, interval={at}, running=[{}, {}]",
                    r.k,
                    g9(mean),
                    g9(i.lo),
                    g9(i.hi)
                )?,
                (None, e) => writeln!(
                    out,
                    "k={}, mean={}, interval={at}, running interval EMPTY since k={}, last nonempty [{}, {}]",
                    r.k,
                    g9(mean),
                    e.unwrap_or(r.k),
                    g9(r.last_nonempty.lo),
                    g9(r.last_nonempty.hi)
                )?,
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn run_analyze(cmd: &AnalyzeCmd) -> CliResult {
    let (cfg, _) = cmd.cfg.resolve()?;
    let dist: DistributionSpec = cmd.dist.parse().map_err(usage)?;
    dist.check_against(&cfg).map_err(usage)?;
    let report = growth_report(&dist, &cfg).map_err(data)?;
    let c = cmd.c.unwrap_or(report.c_opt);
    let (wald_mean, wald_sd) = wald_n(&dist, &cfg, c).unwrap_or((f64::INFINITY, f64::NAN));
    let size = cfg.tau0.map(|_| size_bounds(&cfg, c)).transpose().map_err(usage)?;
    let curve = GrowthCurve::new(&dist, &cfg, cmd.points).map_err(data)?;
    let exact = cmd
        .exact
        .map(|n| exact_stop_dist(&dist, &cfg, c, n))
        .transpose()
        .map_err(data)?;
    let mut out = open_output(&cmd.output)?;
    match cmd.output.format {
        Format::Json => {
            let report = json!({
                "dist": dist.to_string(),
                "mean": g9(report.mean),
                "c_opt": g9(report.c_opt),
                "lambda_opt": g9(report.lambda_opt),
                "c_max": g9(report.c_max),
                "c": g9(c),
                "wald_mean_n": g9(wald_mean),
                "wald_sd_n": g9(wald_sd),
                "size": size.map(|s| json!({"lower": g9(s.lower), "upper": g9(s.upper), "coarse": g9(s.coarse)})),
                "lambda_curve": curve.c_grid.iter().zip(&curve.lambda_vals)
                    .map(|(c, l)| json!({"c": g9(*c), "lambda": g9(*l)})).collect::<Vec<_>>(),
                "exact": exact.as_ref().map(|d| json!({
                    "stopped_mass": g9(d.stopped_mass), "mean": g9(d.mean), "sd": g9(d.sd),
                    "q50": d.q50, "q75": d.q75, "q90": d.q90,
                })),
            });
            writeln!(out, "{report}")?;
        }
        Format::Csv => {
            writeln!(out, "c,lambda")?;
            for (c, l) in curve.c_grid.iter().zip(&curve.lambda_vals) {
                writeln!(out, "{},{}", g9(*c), g9(*l))?;
            }
        }
        Format::Text => {
            writeln!(out, "dist={dist} mean={}", g9(report.mean))?;
            writeln!(out, "c_opt={}", g9(report.c_opt))?;
            writeln!(out, "lambda_opt={}", g9(report.lambda_opt))?;
            writeln!(out, "c_max={}", g9(report.c_max))?;
            writeln!(out, "wald at c={}: mean_n={} sd_n={}", g9(c), g9(wald_mean), g9(wald_sd))?;
            if let Some(s) = size {
                writeln!(
                    out,
                    "size at c={}: lower={} upper={} coarse={}",
                    g9(c),
                    g9(s.lower),
                    g9(s.upper),
                    g9(s.coarse)
                )?;
            }
            if let Some(d) = &exact {
                let q = |x: Option<u64>| x.map_or("-".to_string(), |v| v.to_string());
                writeln!(
                    out,
                    "exact at c={}: stopped_mass={} mean_n={} sd_n={} q50={} q75={} q90={}",
                    g9(c),
                    g9(d.stopped_mass),
                    g9(d.mean),
                    g9(d.sd),
                    q(d.q50),
                    q(d.q75),
                    q(d.q90)
                )?;
            }
            if !cmd.output.summary {
                writeln!(out, "c\tlambda")?;
                for (c, l) in curve.c_grid.iter().zip(&curve.lambda_vals) {
                    writeln!(out, "{}\t{}", g9(*c), g9(*l))?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn load_scenarios(path: &Path) -> CliResult<Vec<Scenario>> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let list = if value.is_array() { value } else { json!([value]) };
    serde_json::from_value(list).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn run_simulate(cmd: &SimulateCmd) -> CliResult {
    let scenarios = if let Some(path) = &cmd.scenario {
        load_scenarios(path)?
    } else if let Some(preset) = cmd.preset {
        match preset {
            Preset::Table1 => table1_scenarios(cmd.runs, cmd.seed, cmd.cap),
            Preset::Table2 => table2_scenarios(cmd.runs, cmd.seed, cmd.cap),
        }
    } else {
        let dist_text = cmd
            .dist
            .as_deref()
            .ok_or_else(|| usage("give --scenario, --preset or --dist"))?;
        let dist: DistributionSpec = dist_text.parse().map_err(usage)?;
        let (cfg, file_policy) = cmd.cfg.resolve()?;
        let policy = cmd.policy.resolve(file_policy)?;
        let stop_rule = match cmd.stop {
            StopArg::Reject => StopRule::RejectAtAlpha,
            StopArg::Precision => StopRule::PrecisionStop {
                m: cmd.m,
                min_n: cmd.min_n,
            },
            StopArg::Both => StopRule::Both {
                m: cmd.m,
                min_n: cmd.min_n,
            },
        };
        vec![Scenario {
            id: dist_text.to_string(),
            dist,
            cfg,
            policy,
            stop_rule,
            cap: cmd.cap,
            runs: cmd.runs,
            seed: cmd.seed,
        }]
    };
    for s in &scenarios {
        s.validate().map_err(|e| usage(format!("scenario `{}`: {e}", s.id)))?;
    }
    let experiments = scenarios
        .iter()
        .map(|s| experiment(s).map_err(|e| data(format!("scenario `{}`: {e}", s.id))))
        .collect::<CliResult<Vec<_>>>()?;
    let mut out = open_output(&cmd.output)?;
    match cmd.output.format {
        Format::Json => {
            let rows: Vec<_> = experiments
                .iter()
                .map(|e| json!({"scenario": e.scenario, "summary": e.summary}))
                .collect();
            serde_json::to_writer_pretty(&mut out, &rows).map_err(data)?;
            writeln!(out)?;
        }
        Format::Csv | Format::Text => write_summaries_csv(&mut out, &experiments, Some(9)).map_err(data)?,
    }
    out.flush()?;
    Ok(())
}

fn run_serve(cmd: &ServeCmd) -> CliResult {
    tracing_subscriber::fmt().with_writer(io::stderr).init();
    let config = tmart_service::ServiceConfig {
        data_dir: cmd.data_dir.clone(),
        token: cmd.token.clone(),
    };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(tmart_service::serve(config, cmd.addr))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match &cli.command {
        Command::Test(c) => run_test(c),
        Command::Bound(c) => run_bound(c),
        Command::Interval(c) => run_interval(c),
        Command::Analyze(c) => run_analyze(c),
        Command::Simulate(c) => run_simulate(c),
        Command::Serve(c) => run_serve(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
