use proptest::prelude::*;

use tmart::analysis::DistributionSpec;
use tmart::confidence::default_interval_spec;
use tmart::simulation::sample;
use tmart::{
    factor, Branch, BoundTracker, CPolicy, IntervalTracker, MartingaleState, MixtureSpec, SequentialTest,
    StakePolicy, TestConfig,
};

fn audit() -> TestConfig {
    TestConfig::bounded(0.05, 0.0, 1.0, 0.05)
}

fn observations(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64], 1..len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn factors_average_to_one_under_the_null(
        mu in 0.01..0.99f64,
        c in 0.0..=1.0f64,
        a in 0.0..1.0f64,
        b in 0.0..1.0f64,
    ) {
        let cfg = TestConfig::bounded(mu, 0.0, 1.0, 0.05);
        let lo = a * mu;
        let hi = mu + b * (1.0 - mu);
        prop_assume!(hi - lo > 1e-6);
        let p = (mu - lo) / (hi - lo);
        for branch in [Branch::Upper, Branch::Lower] {
            let e = (1.0 - p) * factor(branch, lo, &cfg, c).unwrap() + p * factor(branch, hi, &cfg, c).unwrap();
            prop_assert!((e - 1.0).abs() < 1e-12, "{branch:?}: {e}");
        }
    }

    #[test]
    fn log_wealth_is_concave_in_the_stake(ts in observations(80)) {
        let cfg = audit();
        let log_m = |c: f64| ts.iter().map(|&t| factor(Branch::Upper, t, &cfg, c).unwrap().ln()).sum::<f64>();
        let cs: Vec<f64> = (0..=40).map(|i| i as f64 / 41.0).collect();
        for w in cs.windows(3) {
            let d2 = log_m(w[0]) - 2.0 * log_m(w[1]) + log_m(w[2]);
            prop_assert!(d2 <= 1e-9, "second difference {d2} at c={}", w[1]);
        }
    }

    #[test]
    fn batch_equals_sequential(ts in observations(60), c in 0.0..=1.0f64) {
        let cfg = audit();
        let mut s = MartingaleState::new();
        for &t in &ts {
            s = s.step(t, c, &cfg).unwrap();
        }
        let b = MartingaleState::new().batch_step(&ts, c, &cfg).unwrap();
        prop_assert!((s.log_m - b.log_m).abs() <= 1e-9 * (1.0 + s.log_m.abs()) || s.log_m == b.log_m);
        prop_assert!(b.log_m_max <= s.log_m_max + 1e-9);
    }

    #[test]
    fn running_max_dominates_and_rejection_sticks(ts in observations(200)) {
        let mut test = SequentialTest::new(audit(), StakePolicy::Constant(1.0)).unwrap();
        let mut rejected = false;
        for &t in &ts {
            let snap = test.push(t).unwrap();
            prop_assert!(snap.log_m_max >= snap.log_m);
            if rejected {
                prop_assert_eq!(snap.decision, tmart::Decision::Reject);
            }
            rejected = snap.decision == tmart::Decision::Reject;
        }
    }

    #[test]
    fn policy_switch_multiplies_wealth(
        head in observations(40),
        tail in observations(40),
        c in 0.05..=1.0f64,
    ) {
        let cfg = audit();
        let mut test = SequentialTest::new(cfg.clone(), StakePolicy::Mixture(MixtureSpec::uniform(0.6, 1.0))).unwrap();
        for &t in &head {
            test.push(t).unwrap();
        }
        let carried = test.log_m();
        prop_assume!(carried.is_finite());
        test.switch_policy(StakePolicy::Constant(c)).unwrap();
        let mut fresh = SequentialTest::new(cfg, StakePolicy::Constant(c)).unwrap();
        for &t in &tail {
            test.push(t).unwrap();
            fresh.push(t).unwrap();
        }
        let want = carried + fresh.log_m();
        prop_assert!(test.log_m() == want || (test.log_m() - want).abs() < 1e-9, "{} vs {want}", test.log_m());
    }

    #[test]
    fn bound_is_monotone_and_above_the_mean(seed in any::<u64>(), n in 1usize..120) {
        let cfg = audit();
        let ts = sample(&DistributionSpec::Beta { a: 0.5, b: 5.0 }, n, seed).unwrap();
        let mut tracker = BoundTracker::new(cfg, CPolicy::MixtureC(MixtureSpec::uniform(0.6, 1.0))).unwrap();
        let mut last = f64::INFINITY;
        for &t in &ts {
            tracker.push(t).unwrap();
            let r = tracker.result();
            prop_assert!(r.running_min <= last);
            prop_assert!(tracker.mean() < r.running_min);
            last = r.running_min;
        }
        let mus: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        for w in mus.windows(2) {
            prop_assert!(tracker.log_m(w[1]) >= tracker.log_m(w[0]) - 1e-12);
        }
    }

    #[test]
    fn intervals_shrink_and_cover_the_mean(seed in any::<u64>(), n in 1usize..120, mu in 0.1..0.9f64) {
        let cfg = TestConfig::bounded(mu, 0.0, 1.0, 0.05);
        let ts = sample(&DistributionSpec::Beta { a: 2.0, b: 3.0 }, n, seed).unwrap();
        let mut tracker = IntervalTracker::new(&cfg, &default_interval_spec()).unwrap();
        let mut sum = 0.0;
        let mut prev: Option<tmart::Interval> = None;
        for (i, &t) in ts.iter().enumerate() {
            sum += t;
            let mean = sum / (i + 1) as f64;
            let r = tracker.push(t).unwrap();
            prop_assert!(r.at_k.contains(mean), "{mean} outside {:?}", r.at_k);
            if let Some(run) = r.running {
                prop_assert!(run.contains(mean));
                // nested up to the root-finding tolerance
                if let Some(p) = prev {
                    prop_assert!(run.lo >= p.lo - 1e-7 && run.hi <= p.hi + 1e-7, "{run:?} escapes {p:?}");
                }
                prev = Some(run);
            }
        }
        let grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        let values: Vec<f64> = grid.iter().map(|&m| tracker.log_m(m).exp()).collect();
        let scale = values.iter().cloned().fold(1.0, f64::max);
        for w in values.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9 * scale);
        }
    }

    #[test]
    fn zero_factor_is_absorbing(before in observations(20), after in observations(20)) {
        let cfg = audit();
        let mut s = MartingaleState::new();
        for &t in &before {
            s = s.step(t, 1.0, &cfg).unwrap();
        }
        let max_before = s.log_m_max;
        s = s.step(1.0, 1.0, &cfg).unwrap();
        prop_assert_eq!(s.log_m, f64::NEG_INFINITY);
        for &t in &after {
            s = s.step(t, 1.0, &cfg).unwrap();
            prop_assert_eq!(s.log_m, f64::NEG_INFINITY);
        }
        prop_assert_eq!(s.log_m_max, max_before);
    }
}
