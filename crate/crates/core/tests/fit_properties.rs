use meta_bamdp::evaluate::{Agent, CompiledPolicy};
use meta_bamdp::fit::{
    fit_omega, fit_pooled, fit_trajectory, heuristic_loglik, heuristic_probs,
    simulate_heuristic_episode, HeuristicParams, SignConvention,
};
use meta_bamdp::meta::graph::BuildOptions;
use meta_bamdp::rational::frac;
use meta_bamdp::sim::{episode_rng, simulate_batch};
use meta_bamdp::{build_pruned_meta_graph, solve_bamdp_exact, solve_meta, ApproxParams, Belief, Environment};
use proptest::prelude::*;

proptest! {
    #[test]
    fn probabilities_sum_to_one(
        counts in prop::collection::vec(0u8..30, 4..=8),
        beta in 0.0f64..100.0,
        omega in -10.0f64..10.0,
        negated in any::<bool>(),
    ) {
        let counts = &counts[..counts.len() / 2 * 2];
        let b = Belief::from_counts(counts).unwrap();
        let sign = if negated { SignConvention::Negated } else { SignConvention::ValueSeeking };
        let p = heuristic_probs(&b, HeuristicParams { beta, omega }, sign);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn fitted_point_beats_uniform_choice() {
    let env = Environment::new(vec![0.3, 0.7]).unwrap();
    for sign in [SignConvention::ValueSeeking, SignConvention::Negated] {
        for i in 0..200 {
            let mut rng = episode_rng(5, i);
            let truth = HeuristicParams { beta: 10.0, omega: 2.0 };
            let tr = simulate_heuristic_episode(truth, sign, &env, 8, &mut rng);
            let fit = fit_trajectory(&tr, sign);
            let base = -heuristic_loglik(&tr, HeuristicParams { beta: 0.0, omega: 0.0 }, sign);
            assert!(fit.nll <= base + 1e-12, "episode {i}: {} > {base}", fit.nll);
        }
    }
}

#[test]
fn single_pulls_are_excluded() {
    let env = Environment::new(vec![0.5, 0.5]).unwrap();
    let params = HeuristicParams { beta: 5.0, omega: 1.0 };
    let trajs: Vec<_> = (0..20)
        .map(|i| simulate_heuristic_episode(params, SignConvention::ValueSeeking, &env, 1, &mut episode_rng(1, i)))
        .collect();
    let s = fit_omega(&trajs, SignConvention::ValueSeeking).unwrap();
    assert_eq!(s.n_degenerate, 20);
    assert_eq!(s.mean_omega, None);
}

#[test]
fn pooled_fit_recovers_the_generating_parameters() {
    let params = HeuristicParams { beta: 30.0, omega: 3.0 };
    let env = Environment::new(vec![0.5, 0.5]).unwrap();
    let mut errors = Vec::new();
    for n in [1_000u64, 30_000] {
        let trajs: Vec<_> = (0..n)
            .map(|i| {
                simulate_heuristic_episode(params, SignConvention::ValueSeeking, &env, 12, &mut episode_rng(8, i))
            })
            .collect();
        let fit = fit_pooled(&trajs, SignConvention::ValueSeeking).unwrap();
        errors.push((fit.omega - 3.0).abs());
    }
    // One grid cell is 0.2 wide in ω.
    assert!(errors[1] <= 0.2, "{errors:?}");
}

#[test]
fn greedy_behavior_fits_less_bonus_than_planning() {
    let env = Environment::new(vec![0.5, 0.5]).unwrap();
    let q = solve_bamdp_exact(2, 4).unwrap();
    let g = build_pruned_meta_graph(2, 4, &q, ApproxParams::default(), &BuildOptions::default()).unwrap();
    let (meta, _) = solve_meta(&g, &frac(0, 1)).unwrap();
    let fit = |agent| {
        let policy = CompiledPolicy::compile(agent, 2, 4).unwrap();
        let trajs = simulate_batch(&policy, &env, 10_000, 21);
        fit_omega(&trajs, SignConvention::ValueSeeking).unwrap().mean_omega.unwrap()
    };
    let greedy = fit(Agent::Greedy);
    let planner = fit(Agent::Meta(&meta));
    assert!(greedy <= planner, "{greedy} > {planner}");
}
