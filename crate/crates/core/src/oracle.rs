//! Brute-force reference implementations for tiny instances.
//!
//! Nothing here uses the pruning rules; these are the ground truth the
//! pruned solver is tested against.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::bamdp::QStarTable;
use crate::belief::{argmax_set, check_problem, Belief};
use crate::error::{Error, Result};
use crate::meta::validate::{History, PhysicalBehavior};
use crate::meta::{
    arm_set, search_computational_trajectories, ApproxParams, ComputationalTrajectory, MetaAction,
    MetaState, Phase, SearchContext,
};
use crate::plan::{Expansion, PlanningBelief};
use crate::rational::{int, one, zero, Rational};

/// Largest horizon the full meta-solve accepts.
pub const MAX_ORACLE_HORIZON: u32 = 3;
pub const DEFAULT_PLAN_CAP: usize = 2_000_000;

/// Optimal meta-values over the complete, unpruned space of planning beliefs.
#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub n_arms: usize,
    pub horizon: u32,
    pub cost: Rational,
    pub value: Rational,
    pub actions: HashMap<PlanningBelief, MetaAction>,
    values: HashMap<PlanningBelief, Rational>,
}

impl OracleSolution {
    pub fn n_states(&self) -> usize {
        self.values.len()
    }

    pub fn value_of(&self, plan: &PlanningBelief) -> Option<&Rational> {
        self.values.get(plan)
    }

    /// Arms pulled after each reachable history, following the policy's
    /// computations before every pull.
    pub fn physical_behavior(&self) -> PhysicalBehavior {
        let mut out = BTreeMap::new();
        let start = PlanningBelief::singleton(Belief::zero(self.n_arms), self.horizon);
        let mut stack: Vec<(History, PlanningBelief)> = vec![(Vec::new(), start)];
        while let Some((hist, mut plan)) = stack.pop() {
            if plan.root().elapsed() >= self.horizon {
                continue;
            }
            while let Some(MetaAction::Expand(e)) = self.actions.get(&plan) {
                plan = plan.expand(&e.node, e.arm).expect("oracle actions are legal");
            }
            let arms = plan.terminal_arms();
            out.insert(hist.clone(), arm_set(&arms));
            for arm in arms {
                for won in [true, false] {
                    let next = plan.root().after(arm, won);
                    let mut h = hist.clone();
                    h.push((arm as u8, won));
                    stack.push((h, plan.restrict_reachable(&next).expect("one-step child")));
                }
            }
        }
        out
    }
}

struct Solver<'a> {
    horizon: u32,
    c: &'a Rational,
    cap: usize,
    values: HashMap<PlanningBelief, Rational>,
    actions: HashMap<PlanningBelief, MetaAction>,
}

impl Solver<'_> {
    fn value(&mut self, plan: &PlanningBelief) -> Result<Rational> {
        if let Some(v) = self.values.get(plan) {
            return Ok(v.clone());
        }
        if plan.root().elapsed() >= self.horizon {
            return Ok(zero());
        }
        if self.values.len() >= self.cap {
            return Err(Error::ResourceCap { what: "oracle planning beliefs", cap: self.cap });
        }
        let arms = plan.terminal_arms();
        let mut term = zero();
        for &arm in &arms {
            let p = plan.root().mean(arm);
            let win = plan.restrict_reachable(&plan.root().after(arm, true))?;
            let loss = plan.restrict_reachable(&plan.root().after(arm, false))?;
            let vw = self.value(&win)?;
            let vl = self.value(&loss)?;
            term += &p * (one() + vw) + (one() - &p) * vl;
        }
        let mut best = term / int(arms.len() as i64);
        let mut action = MetaAction::Terminate;
        for e in plan.frontier() {
            let next = plan.expand(&e.node, e.arm)?;
            let v = self.value(&next)? - self.c;
            if v > best {
                best = v;
                action = MetaAction::Expand(e);
            }
        }
        self.values.insert(plan.clone(), best.clone());
        self.actions.insert(plan.clone(), action);
        Ok(best)
    }
}

/// Exact backward induction over every `(b, b̃)` with no pruning.
pub fn brute_force_meta_solve(n_arms: usize, horizon: u32, c: &Rational) -> Result<OracleSolution> {
    brute_force_meta_solve_capped(n_arms, horizon, c, DEFAULT_PLAN_CAP)
}

pub fn brute_force_meta_solve_capped(
    n_arms: usize,
    horizon: u32,
    c: &Rational,
    cap: usize,
) -> Result<OracleSolution> {
    check_problem(n_arms, horizon)?;
    if n_arms != 2 || horizon > MAX_ORACLE_HORIZON {
        return Err(Error::InvalidArgument(format!(
            "oracle supports N=2, T<={MAX_ORACLE_HORIZON}; got N={n_arms}, T={horizon}"
        )));
    }
    let mut s = Solver { horizon, c, cap, values: HashMap::new(), actions: HashMap::new() };
    let root = PlanningBelief::singleton(Belief::zero(n_arms), horizon);
    let value = s.value(&root)?;
    Ok(OracleSolution {
        n_arms,
        horizon,
        cost: c.clone(),
        value,
        actions: s.actions,
        values: s.values,
    })
}

/// Every bounded expansion sequence from `state`, filtered to those that
/// change the best-arm set with no proper prefix already changing it.
pub fn brute_force_minimal_mind_changers(
    state: &MetaState,
    params: &ApproxParams,
    cap: usize,
) -> Result<Vec<ComputationalTrajectory>> {
    let spent = match state.phase {
        Phase::Committed => return Ok(Vec::new()),
        _ => state.spent(),
    };
    if state.is_terminal() {
        return Ok(Vec::new());
    }
    let entry = state.entry_arms();
    let budget = params.k_c.saturating_sub(spent) as usize;
    let mut all: Vec<Vec<Expansion>> = Vec::new();
    enumerate(&state.plan, params, budget, cap, &mut Vec::new(), &mut all)?;
    let mut out = Vec::new();
    for seq in all {
        let mut plan = state.plan.clone();
        let mut prefix_changed = false;
        for (i, e) in seq.iter().enumerate() {
            plan = plan.expand(&e.node, e.arm)?;
            if i + 1 < seq.len() && arm_set(&plan.terminal_arms()) != entry {
                prefix_changed = true;
                break;
            }
        }
        if !prefix_changed && arm_set(&plan.terminal_arms()) != entry {
            out.push(ComputationalTrajectory { steps: seq, plan });
        }
    }
    out.sort();
    Ok(out)
}

/// Differences between the pruned search and exhaustive enumeration at
/// `state`, described in words; empty when they agree.
///
/// Away from M-beliefs the two must return the same sequences. At an
/// M-belief the search may drop only sequences that leave the greedy arm's
/// region at some step.
pub fn search_discrepancies(
    state: &MetaState,
    qstar: &QStarTable,
    m_beliefs: &HashSet<Belief>,
    params: ApproxParams,
    cap: usize,
) -> Result<Vec<String>> {
    let ctx = SearchContext::new(qstar, m_beliefs, params);
    let found = search_computational_trajectories(state, &ctx);
    let truth = brute_force_minimal_mind_changers(state, &params, cap)?;
    let truth_set: HashSet<&ComputationalTrajectory> = truth.iter().collect();
    let found_set: HashSet<&ComputationalTrajectory> = found.iter().collect();
    let mut out: Vec<String> = found
        .iter()
        .filter(|t| !truth_set.contains(t))
        .map(|t| format!("{}: not a minimal mind changer: {:?}", state.key(), t.steps))
        .collect();
    let restricted = m_beliefs.contains(state.belief());
    for t in truth.iter().filter(|t| !found_set.contains(t)) {
        if restricted && leaves_greedy_region(&state.plan, &t.steps) {
            continue;
        }
        out.push(format!("{}: missed {:?}", state.key(), t.steps));
    }
    Ok(out)
}

fn leaves_greedy_region(plan: &PlanningBelief, steps: &[Expansion]) -> bool {
    let greedy = plan.root().greedy_arm();
    let mut plan = plan.clone();
    for e in steps {
        let inside = (e.node == *plan.root() && e.arm == greedy)
            || plan.subtree_of_root_arm(greedy).contains(&e.node);
        if !inside {
            return true;
        }
        plan = plan.with_expansion(e.clone());
    }
    false
}

fn enumerate(
    plan: &PlanningBelief,
    params: &ApproxParams,
    budget: usize,
    cap: usize,
    path: &mut Vec<Expansion>,
    out: &mut Vec<Vec<Expansion>>,
) -> Result<()> {
    if path.len() >= budget || plan.edge_count() + 2 > params.k {
        return Ok(());
    }
    for e in plan.frontier() {
        if plan.depth_of(&e.node) >= params.d {
            continue;
        }
        if out.len() >= cap {
            return Err(Error::ResourceCap { what: "oracle expansion sequences", cap });
        }
        let next = plan.expand(&e.node, e.arm)?;
        path.push(e);
        out.push(path.clone());
        enumerate(&next, params, budget, cap, path, out)?;
        path.pop();
    }
    Ok(())
}

/// Root value of `plan` by plain recursion over paths, without node merging
/// or memoization.
pub fn unmemoized_subjective_value(plan: &PlanningBelief) -> Rational {
    let q = unmemoized_root_q(plan);
    q.iter().max().cloned().unwrap_or_else(zero)
}

pub fn unmemoized_root_q(plan: &PlanningBelief) -> Vec<Rational> {
    let root = plan.root().clone();
    node_q(plan, &root)
}

fn node_q(plan: &PlanningBelief, node: &Belief) -> Vec<Rational> {
    let tau = int(node.remaining(plan.horizon()) as i64);
    (0..node.n_arms())
        .map(|arm| {
            let p = node.mean(arm);
            if plan.expansions().contains(&Expansion::new(node.clone(), arm)) {
                let vw = node_v(plan, &node.after(arm, true));
                let vl = node_v(plan, &node.after(arm, false));
                &p + &p * vw + (one() - &p) * vl
            } else {
                p * &tau
            }
        })
        .collect()
}

fn node_v(plan: &PlanningBelief, node: &Belief) -> Rational {
    let q = node_q(plan, node);
    let best = argmax_set(&q)[0];
    q[best].clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bamdp::{greedy_value, solve_bamdp_exact};
    use crate::rational::frac;

    #[test]
    fn tiny_meta_values() {
        for c in [zero(), frac(1, 4), int(10)] {
            let s = brute_force_meta_solve(2, 1, &c).unwrap();
            assert_eq!(s.value, frac(1, 2));
            let root = PlanningBelief::singleton(Belief::zero(2), 1);
            assert_eq!(s.actions[&root], MetaAction::Terminate);
        }
        let s0 = brute_force_meta_solve(2, 2, &zero()).unwrap();
        assert_eq!(s0.value, frac(13, 12));
        let s10 = brute_force_meta_solve(2, 2, &int(10)).unwrap();
        assert_eq!(s10.value, frac(13, 12));
        assert_eq!(s10.value, greedy_value(2, 2).unwrap());
        assert!(s10.actions.values().all(|a| *a == MetaAction::Terminate));
    }

    #[test]
    fn rejects_large_instances() {
        assert!(brute_force_meta_solve(2, 4, &zero()).is_err());
        assert!(brute_force_meta_solve(3, 2, &zero()).is_err());
        let r = brute_force_meta_solve_capped(2, 3, &zero(), 1000);
        assert!(matches!(r, Err(Error::ResourceCap { .. })));
    }

    #[test]
    fn unmemoized_matches_known_values() {
        let plan = PlanningBelief::singleton(Belief::zero(2), 10);
        assert_eq!(unmemoized_subjective_value(&plan), int(5));
        let b = Belief::from_pairs(&[(0, 0), (2, 3)]);
        let plan = PlanningBelief::singleton(b.clone(), 7).expand(&b, 0).unwrap();
        assert_eq!(unmemoized_subjective_value(&plan), frac(22, 21));
        let full = PlanningBelief::fully_expanded(Belief::zero(2), 4);
        let q = solve_bamdp_exact(2, 4).unwrap();
        assert_eq!(unmemoized_root_q(&full), q.q(&Belief::zero(2)).unwrap().to_vec());
    }

    #[test]
    fn search_agrees_at_the_start() {
        let q = solve_bamdp_exact(2, 3).unwrap();
        let m = crate::meta::m_beliefs(&q);
        let params = ApproxParams::new(16, 3, 3).unwrap();
        let s = MetaState::initial(2, 3);
        assert!(search_discrepancies(&s, &q, &m, params, 1_000_000).unwrap().is_empty());
    }

    #[test]
    fn last_step_has_no_mind_changers() {
        let b = Belief::from_pairs(&[(1, 0), (0, 1)]);
        let s = MetaState::entry(PlanningBelief::singleton(b, 3));
        let params = ApproxParams::new(16, 3, 3).unwrap();
        assert!(brute_force_minimal_mind_changers(&s, &params, 1_000_000).unwrap().is_empty());
    }
}
