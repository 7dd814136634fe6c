//! Acceptance report: one PASS/FAIL line per primary criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report reads top to
//! bottom; exits non-zero when any criterion fails.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tmart::analysis::{
    c_max, c_opt, deterministic_n, exact_stop_dist, kl_alt, lambda_fn, size_bounds, DistributionSpec,
};
use tmart::confidence::{default_interval_spec, BoundTracker, CPolicy, IntervalTracker};
use tmart::session::{read_log, CreateSession, Event, Session, SessionStore};
use tmart::simulation::{
    bound_coverage, experiment, interval_coverage, run_trial, sample, write_summaries_csv, Sampler, Scenario,
    StopRule,
};
use tmart::{factor, Branch, MixtureSpec, StakePolicy, TestConfig};

type Check = Result<String, String>;

fn audit() -> TestConfig {
    TestConfig::bounded(0.05, 0.0, 1.0, 0.05)
}

fn mixture() -> StakePolicy {
    StakePolicy::Mixture(MixtureSpec::uniform(0.6, 1.0))
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: tmart::Error) -> String {
    e.to_string()
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

/// Desk-scale Monte Carlo: 200 runs, fixed seed, reject at alpha.
fn desk_experiment(dist: DistributionSpec, policy: StakePolicy, seed: u64) -> Result<tmart::simulation::RunSummary, String> {
    let scenario = Scenario {
        id: String::new(),
        dist,
        cfg: audit(),
        policy,
        stop_rule: StopRule::RejectAtAlpha,
        cap: 100_000,
        runs: 200,
        seed,
    };
    Ok(experiment(&scenario).map_err(err)?.summary)
}

fn stake_grid_run_lengths() -> Check {
    let start = Instant::now();
    let cfg = TestConfig::upper(0.05, 1.0, 0.05);
    let mut got = Vec::new();
    for c in [0.2, 0.4, 0.6, 0.8, 1.0] {
        got.push(deterministic_n(0.02, &cfg, &StakePolicy::Constant(c)).map_err(err)?);
    }
    got.push(deterministic_n(0.02, &cfg, &mixture()).map_err(err)?);
    let elapsed = start.elapsed();
    ensure(got == [476, 239, 160, 121, 97, 117], format!("run lengths {got:?}"))?;
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("{got:?} in {elapsed:.2?}"))
}

fn precision_stop_run_lengths() -> Check {
    let scenario = Scenario {
        id: String::new(),
        dist: DistributionSpec::PointMass { t: 0.02 },
        cfg: audit(),
        policy: mixture(),
        stop_rule: StopRule::Both { m: 0.05, min_n: 50 },
        cap: 1000,
        runs: 1,
        seed: 0,
    };
    let r = run_trial(&scenario, 0).map_err(err)?;
    let (n_run, t_run) = r.n_precision_running.zip(r.tbar_precision_running).ok_or("no running precision stop")?;
    let (n_at, t_at) = r.n_precision_at_k.zip(r.tbar_precision_at_k).ok_or("no at-k precision stop")?;
    let n_rej = r.n_reject.ok_or("no rejection")?;
    ensure(n_run == 70 && n_at == 70, format!("precision stops {n_run}/{n_at}"))?;
    ensure(within(t_run, 0.02, 1e-12) && within(t_at, 0.02, 1e-12), format!("means {t_run}/{t_at}"))?;
    ensure(n_rej == 117, format!("rejection at {n_rej}"))?;
    Ok(format!("precision stop n={n_at} mean={t_at:.4}, rejection n={n_rej}"))
}

fn desk_monte_carlo() -> Check {
    let start = Instant::now();
    let cells = [
        ("Alt(0.02) c=0.6", DistributionSpec::Alt { nu: 0.02 }, 0.6, 245.9, 169.2),
        ("Beta(2,98) c=1", DistributionSpec::Beta { a: 2.0, b: 98.0 }, 1.0, 97.2, 4.5),
        ("ScaledAlt(0.2,0.1) c=1", DistributionSpec::ScaledAlt { value: 0.2, prob: 0.1 }, 1.0, 104.0, 23.4),
    ];
    let mut notes = Vec::new();
    for (i, (name, dist, c, mean, sd)) in cells.into_iter().enumerate() {
        let s = desk_experiment(dist, StakePolicy::Constant(c), 20_240 + i as u64)?;
        let tol = 3.0 * sd / 200f64.sqrt();
        ensure(s.not_stopped_count == 0, format!("{name}: {} runs hit the cap", s.not_stopped_count))?;
        ensure(within(s.mean_n, mean, tol), format!("{name}: mean {:.1} vs {mean} (tol {tol:.1})", s.mean_n))?;
        notes.push(format!("{name} {:.1}", s.mean_n));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("{} in {elapsed:.1?}", notes.join(", ")))
}

fn dp_agreement() -> Check {
    let cfg = audit();
    let mut notes = Vec::new();
    for (i, c) in [0.2, 0.4, 0.6, 0.8].into_iter().enumerate() {
        let exact = exact_stop_dist(&DistributionSpec::Alt { nu: 0.02 }, &cfg, c, 40_000).map_err(err)?;
        ensure(exact.mass_not_stopped < 1e-6, format!("c={c}: DP mass left {}", exact.mass_not_stopped))?;
        let mc = desk_experiment(DistributionSpec::Alt { nu: 0.02 }, StakePolicy::Constant(c), 300 + i as u64)?;
        let se = mc.sd_n / 200f64.sqrt();
        ensure(
            within(mc.mean_n, exact.mean, 3.0 * se),
            format!("c={c}: MC {:.1} vs DP {:.1} (3 SE = {:.1})", mc.mean_n, exact.mean, 3.0 * se),
        )?;
        notes.push(format!("c={c} DP {:.1}/MC {:.1}", exact.mean, mc.mean_n));
    }
    for t in [0.0, 0.02, 0.03, 0.045] {
        for c in [0.2, 0.6, 1.0] {
            let n = deterministic_n(t, &cfg, &StakePolicy::Constant(c)).map_err(err)?;
            let d = exact_stop_dist(&DistributionSpec::PointMass { t }, &cfg, c, n + 10).map_err(err)?;
            ensure(
                d.pmf[n as usize - 1] == 1.0 && d.stopped_mass == 1.0,
                format!("point mass {t} c={c}: DP disagrees with n={n}"),
            )?;
        }
    }
    notes.push("point masses exact".into());
    Ok(notes.join(", "))
}

fn analysis_numbers() -> Check {
    let cfg = TestConfig::upper(0.05, 1.0, 0.05);
    let dist = DistributionSpec::Alt { nu: 0.02 };
    let (c, lam) = c_opt(&dist, &cfg).map_err(err)?;
    let cm = c_max(&dist, &cfg).map_err(err)?;
    let l06 = lambda_fn(&dist, &cfg, 0.6).map_err(err)?;
    let kl = kl_alt(0.02, 0.05);
    ensure(within(c, 0.6, 1e-6), format!("c_opt {c}"))?;
    ensure(within(lam, 0.012, 5e-4), format!("lambda(c_opt) {lam}"))?;
    ensure(within(cm, 0.895, 1e-3), format!("c_max {cm}"))?;
    ensure(within(kl, l06, 1e-10), format!("kl {kl} vs lambda(0.6) {l06}"))?;
    Ok(format!("c_opt={c:.9} lambda={lam:.6} c_max={cm:.6} |kl-lambda|={:.1e}", (kl - l06).abs()))
}

fn size_sandwich() -> Check {
    let cfg = audit();
    let bounds = size_bounds(&cfg, 0.6).map_err(err)?;
    let d = exact_stop_dist(&DistributionSpec::Alt { nu: 0.05 }, &cfg, 0.6, 100_000).map_err(err)?;
    ensure(within(bounds.lower, 0.048469, 1e-6), format!("formula lower bound {}", bounds.lower))?;
    ensure(
        d.stopped_mass > 0.0484 && d.stopped_mass < 0.05,
        format!("rejection mass {}", d.stopped_mass),
    )?;
    ensure(d.stopped_mass >= bounds.lower, format!("mass {} below {}", d.stopped_mass, bounds.lower))?;
    Ok(format!("mass={:.7} in ({:.6}, 0.05)", d.stopped_mass, bounds.lower))
}

/// Second differences of `f` on `xs` are at most `tol` (concave) or at
/// least `-tol` (convex).
fn second_differences(xs: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    ys.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect()
}

fn property_suites() -> Check {
    let mut notes = Vec::new();

    // martingale identity on the null boundary
    let mut worst: f64 = 0.0;
    for mu in [0.05, 0.2, 0.5, 0.8, 0.95] {
        let cfg = TestConfig::bounded(mu, 0.0, 1.0, 0.05);
        for i in 0..=20 {
            let c = i as f64 / 20.0;
            for points in [[0.0, 1.0], [mu * 0.5, (1.0 + mu) * 0.5]] {
                let p1 = (mu - points[0]) / (points[1] - points[0]);
                for branch in [Branch::Upper, Branch::Lower] {
                    let e = (1.0 - p1) * factor(branch, points[0], &cfg, c).map_err(err)?
                        + p1 * factor(branch, points[1], &cfg, c).map_err(err)?;
                    worst = worst.max((e - 1.0).abs());
                }
            }
        }
    }
    ensure(worst <= 1e-12, format!("martingale identity off by {worst:e}"))?;
    notes.push(format!("identity {worst:.0e}"));

    // log-concavity in c and concavity of lambda
    let cfg = audit();
    let cs: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0 * 0.98).collect();
    for seed in 0..20 {
        let data = sample(&DistributionSpec::Beta { a: 0.5, b: 4.0 }, 60, seed).map_err(err)?;
        let log_m = |c: f64| data.iter().map(|&t| factor(Branch::Upper, t, &cfg, c).unwrap().ln()).sum::<f64>();
        let max = second_differences(&cs, log_m).into_iter().fold(f64::NEG_INFINITY, f64::max);
        ensure(max <= 1e-9, format!("ln M_n(c) not concave (seed {seed}, {max:e})"))?;
    }
    for dist in [
        DistributionSpec::Alt { nu: 0.02 },
        DistributionSpec::Beta { a: 2.0, b: 98.0 },
        DistributionSpec::ScaledAlt { value: 0.2, prob: 0.1 },
    ] {
        let max = second_differences(&cs, |c| lambda_fn(&dist, &cfg, c).unwrap())
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        ensure(max <= 1e-9, format!("lambda not concave for {dist} ({max:e})"))?;
    }
    notes.push("concavity".into());

    // monotone and convex in mu, mean inside intervals and below bounds
    let mus: Vec<f64> = (1..200).map(|i| i as f64 / 200.0).collect();
    let mut bounds_seen = 0;
    for seed in 0..25 {
        let dist = if seed % 2 == 0 {
            DistributionSpec::Beta { a: 1.0, b: 9.0 }
        } else {
            DistributionSpec::FiniteSupport {
                points: vec![0.0, 0.3, 1.0],
                probs: vec![0.7, 0.25, 0.05],
            }
        };
        let data = sample(&dist, 80, 1000 + seed).map_err(err)?;
        let mut bound = BoundTracker::new(cfg.clone(), CPolicy::MixtureC(MixtureSpec::uniform(0.6, 1.0))).map_err(err)?;
        let mut interval = IntervalTracker::new(&cfg, &default_interval_spec()).map_err(err)?;
        let mut sum = 0.0;
        for (i, &t) in data.iter().enumerate() {
            bound.push(t).map_err(err)?;
            interval.observe(t).map_err(err)?;
            sum += t;
            let mean = sum / (i + 1) as f64;
            let r = bound.result();
            if r.mu_r.is_finite() {
                bounds_seen += 1;
                ensure(mean < r.mu_r, format!("mean {mean} not below bound {} (seed {seed})", r.mu_r))?;
            }
            ensure(mean < r.running_min, format!("mean {mean} not below running bound (seed {seed})"))?;
            let iv = interval.result();
            ensure(iv.at_k.lo <= mean && mean <= iv.at_k.hi, format!("mean {mean} outside {:?}", iv.at_k))?;
            if let Some(run) = iv.running {
                ensure(run.lo <= mean && mean <= run.hi, format!("mean {mean} outside running {run:?}"))?;
            }
        }
        let logs: Vec<f64> = mus.iter().map(|&mu| bound.log_m(mu)).collect();
        ensure(
            logs.windows(2).all(|w| w[1] >= w[0] - 1e-12),
            format!("M_k^mu not monotone in mu (seed {seed})"),
        )?;
        let scale = mus.iter().map(|&mu| interval.log_m(mu).exp()).fold(1.0, f64::max);
        let min = second_differences(&mus, |mu| interval.log_m(mu).exp())
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        ensure(min >= -1e-9 * scale, format!("M_n^mu(pi) not convex in mu (seed {seed}, {min:e})"))?;
    }
    notes.push(format!("monotone/convex/mean-inside ({bounds_seen} finite bounds)"));

    // coverage over 1000 seeded runs
    let alpha = 0.05;
    let se = (alpha * (1.0 - alpha) / 1000.0f64).sqrt();
    let family = CPolicy::MixtureC(MixtureSpec::uniform(0.6, 1.0));
    let cov_b = bound_coverage(&DistributionSpec::Alt { nu: 0.05 }, &audit(), &family, 400, 1000, 77).map_err(err)?;
    ensure(cov_b >= 1.0 - alpha - 3.0 * se, format!("bound coverage {cov_b}"))?;
    let cfg_mid = TestConfig::bounded(0.5, 0.0, 1.0, alpha);
    let cov_i = interval_coverage(
        &DistributionSpec::Alt { nu: 0.3 },
        &cfg_mid,
        &default_interval_spec(),
        300,
        1000,
        78,
    )
    .map_err(err)?;
    ensure(cov_i >= 1.0 - alpha - 3.0 * se, format!("interval coverage {cov_i}"))?;
    notes.push(format!("coverage bound {cov_b:.3} interval {cov_i:.3}"));

    Ok(notes.join(", "))
}

fn replay_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = SessionStore::open(dir.path()).map_err(err)?;
    let id = store
        .create(CreateSession {
            cfg: audit(),
            policy: StakePolicy::Constant(0.6),
        })
        .map_err(err)?
        .id;
    let sampler = Sampler::new(&DistributionSpec::Beta { a: 0.3, b: 6.0 }).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 1..=150u64 {
        if k == 41 {
            store.change_policy(&id, mixture(), 40).map_err(err)?;
        }
        if k == 101 {
            let family = CPolicy::PowerFamily { d: 1.0 / 0.95, r: 1.0, s: 0.0, m: 0.05 };
            store.change_policy(&id, StakePolicy::MuFamily(family), 100).map_err(err)?;
        }
        store
            .append_observation(&id, sampler.draw(&mut rng), k, None)
            .map_err(err)?;
    }
    let path = store.log_path(&id);
    let raw = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let events = read_log(&path).map_err(err)?;
    let session = Session::replay(&events).map_err(err)?;
    let rewritten: String = session
        .events()
        .iter()
        .map(|e| serde_json::to_string(e).unwrap() + "\n")
        .collect();
    ensure(rewritten == raw, "replayed log differs from the stored bytes")?;
    let observations = events.iter().filter(|e| matches!(e, Event::Observation { .. })).count();
    let reopened = SessionStore::open(dir.path()).map_err(err)?;
    ensure(
        *reopened.state(&id).map_err(err)? == *store.state(&id).map_err(err)?,
        "reloaded state differs",
    )?;

    let scenario = Scenario {
        id: "rerun".into(),
        dist: DistributionSpec::Beta { a: 0.02, b: 0.98 },
        cfg: audit(),
        policy: mixture(),
        stop_rule: StopRule::Both { m: 0.05, min_n: 50 },
        cap: 20_000,
        runs: 60,
        seed: 99,
    };
    let csv = |threads: usize| -> Result<Vec<u8>, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        let e = pool.install(|| experiment(&scenario)).map_err(err)?;
        let mut out = Vec::new();
        write_summaries_csv(&mut out, &[e], None).map_err(err)?;
        Ok(out)
    };
    let (a, b, c) = (csv(1)?, csv(1)?, csv(3)?);
    ensure(a == b && a == c, "scenario rerun changed the CSV")?;
    Ok(format!("{observations} observations replay byte-identical; CSV identical across 1 and 3 threads"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("deterministic run lengths (476/239/160/121/97/117)", stake_grid_run_lengths),
        ("deterministic precision stop (70, 0.02) and rejection (117)", precision_stop_run_lengths),
        ("Monte Carlo sample numbers at desk scale", desk_monte_carlo),
        ("exact stopping distribution agrees with Monte Carlo", dp_agreement),
        ("growth analysis numbers", analysis_numbers),
        ("size sandwich via exact distribution", size_sandwich),
        ("property suites", property_suites),
        ("replay determinism", replay_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let t = start.elapsed();
        match result {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({t:.1?})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why} ({t:.1?})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
