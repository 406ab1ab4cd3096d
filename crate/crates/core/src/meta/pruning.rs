//! Pruning rules and the search for minimal mind-changing computations.
//!
//! * An optimal meta-policy only computes when the computation changes the
//!   terminal action, and stops at the first change along a path. The
//!   terminal action is the set of subjectively best arms, since a pull picks
//!   uniformly among them.
//! * Subjective values never decrease under expansion and never exceed `Q*`,
//!   so once the current action's subjective value beats every other arm's
//!   `Q*`, no computation can change the action.
//! * At M-beliefs, computing along a non-greedy root arm is useless.

use std::collections::HashSet;

use crate::bamdp::QStarTable;
use crate::belief::Belief;
use crate::plan::{Expansion, PlanningBelief};
use crate::rational::Rational;

use super::{arm_set, ApproxParams, ArmSet, MetaState, Phase};

/// Intentionally wrong pruning rules, used as negative controls for the
/// theorem walks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PruningFault {
    /// Skip the lock and forced-termination pruning and treat every
    /// expansion as the end of a mind-changing sequence.
    AcceptNonChanging,
}

impl std::str::FromStr for PruningFault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "accept-non-changing" => Ok(PruningFault::AcceptNonChanging),
            other => Err(format!("unknown fault {other:?}")),
        }
    }
}

/// Beliefs where the greedy arm's root-only value already dominates every
/// other arm's optimal `Q*`.
pub fn m_beliefs(qstar: &QStarTable) -> HashSet<Belief> {
    qstar
        .iter()
        .filter(|(b, q)| {
            let greedy = b.greedy_arm();
            let tau = crate::rational::int(b.remaining(qstar.horizon()) as i64);
            let q_greedy = b.mean(greedy) * tau;
            q.iter().enumerate().filter(|(j, _)| *j != greedy).all(|(_, qj)| q_greedy >= *qj)
        })
        .map(|(b, _)| b.clone())
        .collect()
}

/// True when `Q(a⊥ | b̃) >= Q*(b, a)` for every other arm `a`.
pub fn is_termination_forced(state: &MetaState, qstar: &QStarTable) -> bool {
    if state.is_terminal() {
        return true;
    }
    let q = state.plan.root_q();
    let action = crate::belief::argmax_set(&q)[0];
    (0..q.len()).filter(|&j| j != action).all(|j| q[action] >= qstar.q_arm(state.belief(), j))
}

/// True when no further expansion can change the set of best arms `arms`.
///
/// Subjective values only grow and are capped by `Q*`. An outside arm joins
/// the set by reaching the current maximum; when several arms tie, any of
/// them rising above the maximum splits the tie.
fn arms_locked(plan: &PlanningBelief, arms: ArmSet, qstar: &QStarTable) -> bool {
    let q = plan.root_q();
    let b = plan.root();
    let best = q.iter().max().expect("at least two arms");
    let tied = arms.count_ones() > 1;
    (0..q.len()).all(|j| {
        let cap = qstar.q_arm(b, j);
        if arms & (1 << j) == 0 {
            cap < *best
        } else {
            !tied || cap <= *best
        }
    })
}

/// Shared inputs for the trajectory search.
pub struct SearchContext<'a> {
    pub qstar: &'a QStarTable,
    pub m_beliefs: &'a HashSet<Belief>,
    pub params: ApproxParams,
    pub fault: Option<PruningFault>,
}

impl<'a> SearchContext<'a> {
    pub fn new(qstar: &'a QStarTable, m_beliefs: &'a HashSet<Belief>, params: ApproxParams) -> Self {
        SearchContext { qstar, m_beliefs, params, fault: None }
    }

    /// Expansions permitted at `plan` by the bounds and the M-belief rule.
    fn allowed(&self, plan: &PlanningBelief) -> Vec<Expansion> {
        if plan.edge_count() + 2 > self.params.k {
            return Vec::new();
        }
        let root = plan.root();
        let greedy_region = if self.m_beliefs.contains(root) {
            let greedy = root.greedy_arm();
            Some((greedy, plan.subtree_of_root_arm(greedy)))
        } else {
            None
        };
        plan.frontier()
            .into_iter()
            .filter(|e| plan.depth_of(&e.node) < self.params.d)
            .filter(|e| match &greedy_region {
                None => true,
                Some((greedy, region)) => {
                    (e.node == *root && e.arm == *greedy) || region.contains(&e.node)
                }
            })
            .collect()
    }
}

/// A sequence of expansions and the plan it produces.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComputationalTrajectory {
    pub steps: Vec<Expansion>,
    pub plan: PlanningBelief,
}

/// Depth-first enumeration of the minimal expansion sequences from `state`
/// that change its set of best arms, within the approximation bounds.
///
/// From a `Computing` state the search continues relative to the set the run
/// started with, using the remaining expansion budget.
pub fn search_computational_trajectories(
    state: &MetaState,
    ctx: &SearchContext<'_>,
) -> Vec<ComputationalTrajectory> {
    let (arms, spent) = match state.phase {
        Phase::Entry => (arm_set(&state.plan.terminal_arms()), 0),
        Phase::Computing { entry_arms, spent } => (entry_arms, spent),
        Phase::Committed => return Vec::new(),
    };
    if state.is_terminal() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut path = Vec::new();
    dfs(&state.plan, arms, spent, ctx, &mut path, &mut out);
    out
}

fn dfs(
    plan: &PlanningBelief,
    arms: ArmSet,
    spent: u32,
    ctx: &SearchContext<'_>,
    path: &mut Vec<Expansion>,
    out: &mut Vec<ComputationalTrajectory>,
) {
    if spent >= ctx.params.k_c {
        return;
    }
    if ctx.fault.is_none() && arms_locked(plan, arms, ctx.qstar) {
        return;
    }
    for e in ctx.allowed(plan) {
        let next = plan.with_expansion(e.clone());
        path.push(e);
        let changed = arm_set(&next.terminal_arms()) != arms;
        if changed || ctx.fault == Some(PruningFault::AcceptNonChanging) {
            out.push(ComputationalTrajectory { steps: path.clone(), plan: next });
        } else {
            dfs(&next, arms, spent + 1, ctx, path, out);
        }
        path.pop();
    }
}

/// `Q(a⊥|b̃)` minus the best other-arm `Q*`; nonnegative iff termination is forced.
pub fn termination_margin(state: &MetaState, qstar: &QStarTable) -> Option<Rational> {
    if state.is_terminal() {
        return None;
    }
    let q = state.plan.root_q();
    let action = crate::belief::argmax_set(&q)[0];
    (0..q.len())
        .filter(|&j| j != action)
        .map(|j| &q[action] - qstar.q_arm(state.belief(), j))
        .min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bamdp::solve_bamdp_exact;

    #[test]
    fn last_step_beliefs_are_m_beliefs() {
        let q = solve_bamdp_exact(2, 4).unwrap();
        let m = m_beliefs(&q);
        for b in crate::belief::beliefs_at(2, 3) {
            assert!(m.contains(&b), "{b}");
        }
        let q3 = solve_bamdp_exact(3, 3).unwrap();
        let m3 = m_beliefs(&q3);
        for b in crate::belief::beliefs_at(3, 2) {
            assert!(m3.contains(&b), "{b}");
        }
    }

    #[test]
    fn large_lead_is_m_belief() {
        let b = Belief::from_pairs(&[(5, 0), (0, 1)]);
        for tau in 1..=3 {
            let q = solve_bamdp_exact(2, 6 + tau).unwrap();
            assert!(m_beliefs(&q).contains(&b), "tau={tau}");
        }
    }

    #[test]
    fn root_membership_matches_direct_comparison() {
        let q = solve_bamdp_exact(2, 6).unwrap();
        let z = Belief::zero(2);
        let direct = crate::rational::int(3) >= q.q_arm(&z, 1);
        assert_eq!(m_beliefs(&q).contains(&z), direct);
        let s = MetaState::initial(2, 6);
        assert_eq!(is_termination_forced(&s, &q), direct);
    }

    #[test]
    fn forced_at_last_step_and_when_fully_expanded() {
        let q = solve_bamdp_exact(2, 4).unwrap();
        let b = Belief::from_pairs(&[(1, 1), (0, 1)]);
        assert!(is_termination_forced(&MetaState::entry(PlanningBelief::singleton(b, 4)), &q));
        let full = PlanningBelief::fully_expanded(Belief::zero(2), 4);
        assert!(is_termination_forced(&MetaState::entry(full), &q));
    }

    #[test]
    fn symmetric_root_search_is_symmetric() {
        let q = solve_bamdp_exact(2, 3).unwrap();
        let m = m_beliefs(&q);
        let ctx = SearchContext::new(&q, &m, ApproxParams::new(16, 3, 3).unwrap());
        let found = search_computational_trajectories(&MetaState::initial(2, 3), &ctx);
        // Expanding either root arm breaks the tie.
        let z = Belief::zero(2);
        let steps: Vec<_> = found.iter().map(|t| t.steps.clone()).collect();
        assert_eq!(
            steps,
            vec![vec![Expansion::new(z.clone(), 0)], vec![Expansion::new(z.clone(), 1)]]
        );
        let swapped: Vec<_> =
            found.iter().map(|t| t.plan.permuted(&[1, 0]).canonical_key()).collect();
        let mut orig: Vec<_> = found.iter().map(|t| t.plan.canonical_key()).collect();
        orig.reverse();
        assert_eq!(swapped, orig);
    }

    #[test]
    fn sequences_are_minimal() {
        let q = solve_bamdp_exact(2, 8).unwrap();
        let m = m_beliefs(&q);
        let ctx = SearchContext::new(&q, &m, ApproxParams::new(16, 3, 3).unwrap());
        let b = Belief::from_pairs(&[(0, 0), (2, 1)]);
        let start = PlanningBelief::singleton(b.clone(), 8);
        let found = search_computational_trajectories(&MetaState::entry(start.clone()), &ctx);
        assert!(found.iter().any(|t| t.steps.len() > 1));
        let entry = start.terminal_arms();
        for tr in &found {
            assert_ne!(tr.plan.terminal_arms(), entry);
            let mut p = start.clone();
            for e in &tr.steps[..tr.steps.len() - 1] {
                p = p.expand(&e.node, e.arm).unwrap();
                assert_eq!(p.terminal_arms(), entry);
            }
        }
    }

    #[test]
    fn nothing_at_last_step() {
        let q = solve_bamdp_exact(2, 3).unwrap();
        let m = m_beliefs(&q);
        let ctx = SearchContext::new(&q, &m, ApproxParams::new(16, 3, 3).unwrap());
        let b = Belief::from_pairs(&[(1, 0), (0, 1)]);
        let s = MetaState::entry(PlanningBelief::singleton(b, 3));
        assert!(search_computational_trajectories(&s, &ctx).is_empty());
    }
}
