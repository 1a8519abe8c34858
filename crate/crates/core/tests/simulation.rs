use proptest::prelude::*;

use fair_rmab::sim::{aggregate_runs, run_experiment, run_seeds, Algorithm, Domain, ExperimentConfig};

fn domain() -> impl Strategy<Value = Domain> {
    prop_oneof![Just(Domain::Synthetic), Just(Domain::SyntheticAlternate), Just(Domain::Cpap)]
}

prop_compose! {
    fn small_config()(n in 2usize..8, frac in 0.0f64..1.0, episodes in 1u64..25, horizon in 1u32..30,
                      c in 0.0f64..5.0, domain in domain(), optimal in any::<bool>(), carry in any::<bool>())
                     -> ExperimentConfig {
        ExperimentConfig {
            num_arms: n,
            budget: 1 + ((n - 1) as f64 * frac) as usize,
            episodes,
            horizon,
            c,
            domain,
            algorithm: if optimal { Algorithm::Optimal } else { Algorithm::MfRmab },
            carry_over_state: carry,
            seeds: vec![0],
            ..Default::default()
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn run_invariants(cfg in small_config(), seed in any::<u64>()) {
        let r = run_experiment(&cfg, seed).unwrap();
        let steps = cfg.budget as u64 * cfg.horizon as u64 * cfg.episodes;
        prop_assert_eq!(r.exposure.iter().sum::<u64>(), steps);
        prop_assert_eq!(r.regret.per_episode.len() as u64, cfg.episodes);
        prop_assert!(r.regret.per_episode.iter().all(|&x| (0.0..=2.0 + 1e-12).contains(&x)));
        prop_assert!(r.regret.cumulative.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!((r.pi_star.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(r.mu_star.iter().all(|m| (-1.0..=1.0).contains(m)));
        prop_assert!(r.t0 >= 1);
        for ep in &r.arm_stats {
            prop_assert!((ep.iter().map(|s| s.pi).sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert_eq!(ep.iter().map(|s| s.pulls).sum::<u64>(), cfg.budget as u64 * cfg.horizon as u64);
            for s in ep {
                prop_assert!(s.gaps.eta1 <= 1.0 && s.gaps.eta2 <= 1.0);
                prop_assert!(s.gaps.omega1 <= s.gaps.eta1 && s.gaps.omega2 <= s.gaps.eta2);
            }
        }
        if let Some(g) = r.g_max {
            prop_assert!(g >= 1 && g <= cfg.episodes);
        }
    }
}

#[test]
fn seed_order_and_parallelism_do_not_matter() {
    let cfg = ExperimentConfig {
        episodes: 30,
        horizon: 20,
        seeds: vec![5, 3, 9, 1],
        ..Default::default()
    };
    let strip = |mut v: Vec<fair_rmab::RunRecord>| {
        v.iter_mut().for_each(|r| r.wall_time_secs = 0.0);
        v
    };
    let serial = strip(run_seeds(&cfg, Some(1)).unwrap());
    let parallel = strip(run_seeds(&cfg, Some(4)).unwrap());
    assert_eq!(serial, parallel);
    assert_eq!(serial.iter().map(|r| r.seed).collect::<Vec<_>>(), cfg.seeds);
    let agg = aggregate_runs(&serial).unwrap();
    assert_eq!(agg.fr_mean.len(), 30);
    assert!(agg.fr_std.iter().all(|s| *s >= 0.0));
}

#[test]
fn mf_rmab_beats_optimal_on_fairness() {
    let base = ExperimentConfig {
        episodes: 300,
        horizon: 50,
        seeds: (0..8).collect(),
        ..Default::default()
    };
    let mf = aggregate_runs(&run_seeds(&base, None).unwrap()).unwrap();
    let opt = ExperimentConfig {
        algorithm: Algorithm::Optimal,
        ..base
    };
    let opt = aggregate_runs(&run_seeds(&opt, None).unwrap()).unwrap();
    assert!(mf.final_fr_mean < opt.final_fr_mean, "{} vs {}", mf.final_fr_mean, opt.final_fr_mean);
}
