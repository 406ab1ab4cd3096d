use meta_bamdp::evaluate::{evaluate_bayes, evaluate_in_env, Agent, CompiledPolicy};
use meta_bamdp::rational::{frac, int, one, to_f64};
use meta_bamdp::{greedy_value, solve_bamdp_exact, Belief, Environment};
use proptest::prelude::*;

#[test]
fn known_values() {
    assert_eq!(solve_bamdp_exact(2, 1).unwrap().value(&Belief::zero(2)), frac(1, 2));
    assert_eq!(solve_bamdp_exact(2, 2).unwrap().value(&Belief::zero(2)), frac(13, 12));
    assert_eq!(greedy_value(2, 1).unwrap(), frac(1, 2));
}

#[test]
fn values_satisfy_the_recursion() {
    for (n, horizon) in [(2, 8), (3, 5)] {
        let q = solve_bamdp_exact(n, horizon).unwrap();
        for (b, qb) in q.iter() {
            if b.elapsed() >= horizon {
                continue;
            }
            let best = (0..n)
                .map(|i| {
                    let p = b.mean(i);
                    let vw = q.value(&b.after(i, true));
                    let vl = q.value(&b.after(i, false));
                    &p + &p * vw + (one() - &p) * vl
                })
                .max()
                .unwrap();
            assert_eq!(q.value(b), best);
            assert_eq!(qb.iter().max().unwrap(), &best);
        }
    }
}

#[test]
fn greedy_is_below_optimal_is_below_horizon() {
    for horizon in 1..=10 {
        let vg = greedy_value(2, horizon).unwrap();
        let vs = solve_bamdp_exact(2, horizon).unwrap().value(&Belief::zero(2));
        assert!(int(0) <= vg && vg <= vs && vs <= int(horizon as i64), "T={horizon}");
    }
}

proptest! {
    #[test]
    fn q_star_is_arm_symmetric(perm in Just(vec![0usize, 1, 2]).prop_shuffle(), idx in any::<prop::sample::Index>()) {
        let q = solve_bamdp_exact(3, 5).unwrap();
        let beliefs: Vec<&Belief> = q.iter().map(|(b, _)| b).collect();
        let b = beliefs[idx.index(beliefs.len())];
        let pb = b.permuted(&perm);
        for i in 0..3 {
            prop_assert_eq!(q.q_arm(&pb, i), q.q_arm(b, perm[i]));
        }
    }
}

/// Midpoint rule over the unit square against the Bayes value.
fn prior_average(policy: &CompiledPolicy, grid: usize) -> f64 {
    let h = 1.0 / grid as f64;
    let mut sum = 0.0;
    for i in 0..grid {
        for j in 0..grid {
            let env = Environment::new(vec![(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]).unwrap();
            sum += evaluate_in_env(policy, &env).reward;
        }
    }
    sum * h * h
}

#[test]
fn environment_average_equals_bayes_value() {
    let q = solve_bamdp_exact(2, 6).unwrap();
    for agent in [Agent::Greedy, Agent::BayesOptimal(&q)] {
        let policy = CompiledPolicy::compile(agent, 2, 6).unwrap();
        let bayes = to_f64(&evaluate_bayes(&policy).reward);
        let avg = prior_average(&policy, 100);
        assert!((avg - bayes).abs() <= 1e-3, "{agent:?}: {avg} vs {bayes}");
    }
}
