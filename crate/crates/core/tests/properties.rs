use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use tpe_core::harness::average_ranks;
use tpe_core::record::cumulative_min;
use tpe_core::sampler::pi_from_log_ratio;
use tpe_core::weighting::{weights_bohb_uniform, weights_ei, weights_old_decay, weights_uniform};
use tpe_core::{preset, ParamDomain, ParamSpec, SearchSpace, Study};

fn mixed_space() -> SearchSpace {
    SearchSpace::new(vec![
        ParamSpec::continuous("x", -2.0, 3.0),
        ParamSpec::log_continuous("lr", 1e-4, 1.0),
        ParamSpec::discrete("k", 0.0, 10.0, 2.0),
        ParamSpec::categorical("c", ["a", "b", "c"]),
        ParamSpec::continuous("m", 0.0, 1.0).when("c == b"),
    ])
    .unwrap()
}

fn objective(space: &SearchSpace, c: &tpe_core::Configuration) -> f64 {
    let raw = space.to_raw_map(c).unwrap();
    let x = raw["x"].as_f64().unwrap();
    let k = raw["k"].as_f64().unwrap();
    let m = raw.get("m").and_then(|v| v.as_f64()).unwrap_or(0.5);
    (x - 1.0).powi(2) + (k - 4.0).abs() + m
}

fn run(
    space: &SearchSpace,
    preset_name: &str,
    seed: u64,
    n: usize,
) -> Vec<(serde_json::Map<String, serde_json::Value>, f64)> {
    let cfg = preset(preset_name)
        .unwrap()
        .with_overrides(&json!({"seed": seed, "n_startup_trials": 5}))
        .unwrap();
    let mut study = Study::new(space.clone(), cfg).unwrap();
    study
        .optimize(n, |c| Ok::<f64, tpe_core::Error>(objective(space, c)))
        .unwrap()
        .into_iter()
        .map(|t| (t.params, t.value))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_sum_to_one(n in 1usize..200, t_old in 1usize..50, prior in any::<bool>(), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y_gamma = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let orders: Vec<usize> = (1..=n).collect();
        let masses: Vec<f64> = (0..n + usize::from(prior)).map(|_| rng.random_range(0.01..=1.0)).collect();
        for wv in [
            weights_uniform(n, prior).unwrap(),
            weights_old_decay(&orders, t_old, prior).unwrap(),
            weights_ei(&ys, y_gamma, prior).unwrap(),
            weights_bohb_uniform(&masses, prior).unwrap(),
        ] {
            prop_assert!((wv.total() - 1.0).abs() <= 1e-12);
            prop_assert!(wv.iter().all(|w| w >= 0.0));
        }
    }

    #[test]
    fn transform_round_trip(low in -100.0f64..100.0, width in 1e-3f64..100.0, u in 0.0f64..=1.0) {
        let high = low + width;
        let raw = low + u * width;
        let lin = ParamDomain::continuous(low, high, false).unwrap();
        prop_assert_eq!(lin.untransform(lin.transform(raw).unwrap()).unwrap(), raw);

        let (llo, lhi) = (low.abs() + 1e-3, low.abs() + 1e-3 + width);
        let lraw = llo + u * width;
        let log = ParamDomain::continuous(llo, lhi, true).unwrap();
        let back = log.untransform(log.transform(lraw).unwrap()).unwrap();
        prop_assert!((back - lraw).abs() <= 1e-12 * lraw);

        let count = 1 + (u * 50.0) as usize;
        let grid = ParamDomain::discrete(low, 0.25, count).unwrap();
        let idx = (u * (count - 1) as f64).round();
        let point = low + idx * 0.25;
        prop_assert_eq!(grid.transform(grid.untransform(grid.transform(point).unwrap()).unwrap()).unwrap(), grid.transform(point).unwrap());
    }

    #[test]
    fn pi_is_monotone_and_bounded(a in -50.0f64..50.0, d in 0.0f64..10.0, gamma in 0.01f64..0.99) {
        let (lo, hi) = (pi_from_log_ratio(a, gamma), pi_from_log_ratio(a + d, gamma));
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        prop_assert!(hi >= lo);
        let oracle = gamma * a.exp() / (gamma * a.exp() + 1.0 - gamma);
        prop_assert!((lo - oracle).abs() <= 1e-12);
    }

    #[test]
    fn average_ranks_preserve_total(values in prop::collection::vec(prop::sample::select(vec![0.0, 1.0, 2.5, -3.0, 7.0]), 1..40)) {
        let n = values.len() as f64;
        let ranks = average_ranks(&values);
        prop_assert!((ranks.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] < values[j] {
                    prop_assert!(ranks[i] < ranks[j]);
                }
            }
        }
    }

    #[test]
    fn cumulative_min_is_running_minimum(values in prop::collection::vec(-1e3f64..1e3, 1..100)) {
        let c = cumulative_min(values.iter().copied());
        for k in 0..values.len() {
            let m = values[..=k].iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(c[k], m);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn studies_are_deterministic(seed in any::<u64>(), preset_name in prop::sample::select(vec!["recommended", "tpe2011", "tpe2013", "bohb", "optuna"])) {
        let space = mixed_space();
        prop_assert_eq!(run(&space, preset_name, seed, 25), run(&space, preset_name, seed, 25));
    }

    #[test]
    fn proposals_stay_in_domain(seed in any::<u64>(), multivariate in any::<bool>(), group in any::<bool>()) {
        let space = mixed_space();
        let cfg = preset("recommended").unwrap()
            .with_overrides(&json!({"seed": seed, "multivariate": multivariate, "group": group, "n_startup_trials": 4}))
            .unwrap();
        let mut study = Study::new(space.clone(), cfg).unwrap();
        for _ in 0..20 {
            let c = study.ask().unwrap();
            prop_assert!(space.check(&c).is_ok());
            let y = objective(&space, &c);
            study.tell(c, y).unwrap();
        }
    }

    #[test]
    fn univariate_density_factorizes(seed in any::<u64>()) {
        let space = SearchSpace::new(vec![
            ParamSpec::continuous("x", -2.0, 3.0),
            ParamSpec::discrete("k", 0.0, 10.0, 2.0),
            ParamSpec::categorical("c", ["a", "b", "c"]),
        ]).unwrap();
        let cfg = preset("tpe2011").unwrap().with_overrides(&json!({"seed": seed})).unwrap();
        let mut study = Study::new(space.clone(), cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..30 {
            let c = space.random_sample(&mut rng);
            let y = objective(&space, &c);
            study.tell(c, y).unwrap();
        }
        let model = study.model().unwrap().unwrap();
        for _ in 0..20 {
            let c = space.random_sample(&mut rng);
            let p = model.project(&c).unwrap();
            for kde in [&model.better, &model.worse] {
                let joint = kde.log_pdf(&p).unwrap();
                let sum: f64 = p.iter().enumerate().map(|(j, &v)| kde.log_marginal(j, v)).sum();
                prop_assert!((joint - sum).abs() <= 1e-9 * joint.abs().max(1.0));
            }
        }
    }
}
