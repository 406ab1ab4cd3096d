#![allow(dead_code)]

use meta_bamdp::{Belief, PlanningBelief};
use rand::seq::SliceRandom;
use rand::Rng;

/// A two-armed belief with between 0 and `horizon - 1` pulls.
pub fn random_root<R: Rng>(rng: &mut R, horizon: u32) -> Belief {
    let t = rng.gen_range(0..horizon);
    let mut counts = [0u8; 4];
    for _ in 0..t {
        counts[rng.gen_range(0..4)] += 1;
    }
    Belief::from_counts(&counts).unwrap()
}

/// Adds up to `extra` random legal expansions.
pub fn grow<R: Rng>(plan: &PlanningBelief, rng: &mut R, extra: usize) -> PlanningBelief {
    let mut plan = plan.clone();
    for _ in 0..extra {
        let frontier = plan.frontier();
        let Some(e) = frontier.choose(rng) else { break };
        plan = plan.expand(&e.node, e.arm).unwrap();
    }
    plan
}

pub fn random_plan<R: Rng>(rng: &mut R, horizon: u32, max_expansions: usize) -> PlanningBelief {
    let root = random_root(rng, horizon);
    let n = rng.gen_range(0..=max_expansions);
    grow(&PlanningBelief::singleton(root, horizon), rng, n)
}

/// A pair `(b̃, b̃')` with `b̃ ⊆ b̃'` and equal roots.
pub fn nested_pair<R: Rng>(rng: &mut R, horizon: u32) -> (PlanningBelief, PlanningBelief) {
    let small = random_plan(rng, horizon, 12);
    let n = rng.gen_range(0..=12);
    let big = grow(&small, rng, n);
    (small, big)
}

/// The nine-point cost grid `3i/160`, i.e. `0, 0.01875, ..., 0.15`.
pub fn cost_grid() -> Vec<meta_bamdp::Rational> {
    (0..9).map(|i| meta_bamdp::rational::frac(3 * i, 160)).collect()
}

use std::collections::HashSet;

use meta_bamdp::meta::{search_computational_trajectories, SearchContext};
use meta_bamdp::oracle::brute_force_minimal_mind_changers;
use meta_bamdp::{ApproxParams, Expansion, MetaState, QStarTable};

/// `(node, arm)` is the greedy root action or lies under it.
fn in_greedy_region(plan: &PlanningBelief, e: &Expansion) -> bool {
    let root = plan.root();
    let greedy = root.greedy_arm();
    (e.node == *root && e.arm == greedy) || plan.subtree_of_root_arm(greedy).contains(&e.node)
}

/// Compares the pruned search with exhaustive enumeration at one state.
///
/// Away from M-beliefs the two must agree exactly. At an M-belief the search
/// may only drop sequences that leave the greedy region at some step.
pub fn compare_with_brute_force(
    state: &MetaState,
    qstar: &QStarTable,
    m: &HashSet<Belief>,
    params: ApproxParams,
) -> Result<(), String> {
    let ctx = SearchContext::new(qstar, m, params);
    let found = search_computational_trajectories(state, &ctx);
    let truth = brute_force_minimal_mind_changers(state, &params, 10_000_000)
        .map_err(|e| e.to_string())?;
    let truth_set: HashSet<_> = truth.iter().collect();
    if let Some(extra) = found.iter().find(|t| !truth_set.contains(t)) {
        return Err(format!("{state:?}: search returned a non-minimal sequence {:?}", extra.steps));
    }
    if !m.contains(state.belief()) {
        if found.len() != truth.len() {
            return Err(format!("{state:?}: found {} of {} sequences", found.len(), truth.len()));
        }
        return Ok(());
    }
    let found_set: HashSet<_> = found.iter().collect();
    for t in truth.iter().filter(|t| !found_set.contains(t)) {
        let mut plan = state.plan.clone();
        let mut leaves = false;
        for e in &t.steps {
            leaves |= !in_greedy_region(&plan, e);
            plan = plan.expand(&e.node, e.arm).unwrap();
        }
        if !leaves {
            return Err(format!("{state:?}: dropped {:?} inside the greedy region", t.steps));
        }
    }
    Ok(())
}
