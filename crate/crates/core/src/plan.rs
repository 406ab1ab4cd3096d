//! Planning beliefs: rooted sub-DAGs of the belief-action graph.
//!
//! A planning belief records which `(belief, arm)` action nodes the agent has
//! expanded. Nodes are identified by their count tuple, so two expansion
//! paths that reach the same counts share a node. Subjective values come
//! from backward induction over the expanded part, with unexpanded arms
//! valued as if the agent exploited that arm's current mean until the
//! horizon.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use num_traits::Zero;

use crate::bamdp::lookahead;
use crate::belief::{argmax_set, Belief};
use crate::error::{Error, Result};
use crate::rational::{int, Rational};

/// One computational action: expand `arm` at `node`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expansion {
    pub node: Belief,
    pub arm: usize,
}

impl Expansion {
    pub fn new(node: Belief, arm: usize) -> Self {
        Expansion { node, arm }
    }

    pub fn key(&self) -> String {
        format!("{}@{}", self.node.key(), self.arm)
    }

    pub fn parse_key(s: &str) -> Result<Expansion> {
        let (node, arm) =
            s.split_once('@').ok_or_else(|| Error::Parse(format!("bad expansion key {s:?}")))?;
        let arm = arm.parse().map_err(|_| Error::Parse(format!("bad arm in {s:?}")))?;
        Ok(Expansion { node: Belief::parse_key(node)?, arm })
    }
}

impl fmt::Debug for Expansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}@{}", self.node, self.arm)
    }
}

/// A rooted sub-DAG `b̃`: the root belief and the set of expanded action nodes.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlanningBelief {
    root: Belief,
    horizon: u32,
    expansions: BTreeSet<Expansion>,
}

/// Subjective values implied by a planning belief.
#[derive(Clone, Debug)]
pub struct SubjectiveValues {
    pub node_values: HashMap<Belief, Rational>,
    pub root_q: Vec<Rational>,
}

impl SubjectiveValues {
    pub fn root_value(&self) -> Rational {
        self.root_q.iter().max().cloned().unwrap_or_else(Rational::zero)
    }
}

/// Value of an unexpanded node: best posterior mean times the pulls left.
pub fn frontier_value(b: &Belief, horizon: u32) -> Rational {
    let tau = int(b.remaining(horizon) as i64);
    (0..b.n_arms()).map(|arm| b.mean(arm) * &tau).max().unwrap_or_else(Rational::zero)
}

impl PlanningBelief {
    /// The plan containing only `root`.
    pub fn singleton(root: Belief, horizon: u32) -> Self {
        PlanningBelief { root, horizon, expansions: BTreeSet::new() }
    }

    pub fn root(&self) -> &Belief {
        &self.root
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn expansions(&self) -> &BTreeSet<Expansion> {
        &self.expansions
    }

    pub fn n_expansions(&self) -> usize {
        self.expansions.len()
    }

    /// `|b̃|`: two outcome edges per expansion.
    pub fn edge_count(&self) -> usize {
        2 * self.expansions.len()
    }

    pub fn n_arms(&self) -> usize {
        self.root.n_arms()
    }

    pub fn is_expanded(&self, node: &Belief, arm: usize) -> bool {
        self.expansions.contains(&Expansion { node: node.clone(), arm })
    }

    fn expanded_arms<'a>(&'a self, node: &'a Belief) -> impl Iterator<Item = usize> + 'a {
        (0..self.n_arms()).filter(move |&arm| self.is_expanded(node, arm))
    }

    /// Nodes reachable from `from` through expanded edges, including `from`.
    fn reachable_from(&self, from: &Belief) -> BTreeSet<Belief> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        seen.insert(from.clone());
        queue.push_back(from.clone());
        while let Some(v) = queue.pop_front() {
            for arm in self.expanded_arms(&v).collect::<Vec<_>>() {
                for win in [true, false] {
                    let child = v.after(arm, win);
                    if seen.insert(child.clone()) {
                        queue.push_back(child);
                    }
                }
            }
        }
        seen
    }

    /// Nodes of the plan (reachable from the root).
    pub fn nodes(&self) -> BTreeSet<Belief> {
        self.reachable_from(&self.root)
    }

    /// Nodes below the root's `arm` action node; empty if it is unexpanded.
    pub fn subtree_of_root_arm(&self, arm: usize) -> BTreeSet<Belief> {
        if !self.is_expanded(&self.root, arm) {
            return BTreeSet::new();
        }
        let mut out = self.reachable_from(&self.root.after(arm, true));
        out.extend(self.reachable_from(&self.root.after(arm, false)));
        out
    }

    /// Returns a new plan with `(node, arm)` expanded.
    pub fn expand(&self, node: &Belief, arm: usize) -> Result<PlanningBelief> {
        if arm >= self.n_arms() {
            return Err(Error::InvalidExpansion(format!("arm {arm} out of range")));
        }
        if node.n_arms() != self.n_arms() {
            return Err(Error::InvalidExpansion(format!("{node} has the wrong arm count")));
        }
        if self.is_expanded(node, arm) {
            return Err(Error::InvalidExpansion(format!("{node}@{arm} already expanded")));
        }
        if node.elapsed() >= self.horizon {
            return Err(Error::InvalidExpansion(format!("{node} has no pulls left")));
        }
        if !self.nodes().contains(node) {
            return Err(Error::InvalidExpansion(format!("{node} is not reachable from the root")));
        }
        Ok(self.with_expansion(Expansion { node: node.clone(), arm }))
    }

    /// Adds an expansion without precondition checks; callers take it from `frontier`.
    pub(crate) fn with_expansion(&self, e: Expansion) -> PlanningBelief {
        let mut next = self.clone();
        next.expansions.insert(e);
        next
    }

    /// `R_{b'}(b̃)`: the part of the plan reachable from `new_root`, which must
    /// be the root itself or one of its one-step successors.
    pub fn restrict_reachable(&self, new_root: &Belief) -> Result<PlanningBelief> {
        if *new_root == self.root {
            return Ok(self.clone());
        }
        let is_child = (0..self.n_arms())
            .any(|arm| [true, false].iter().any(|&w| self.root.after(arm, w) == *new_root));
        if !is_child {
            return Err(Error::NotASuccessor(new_root.to_string()));
        }
        Ok(self.rerooted(new_root))
    }

    /// Re-roots at any node; expansions not reachable from it are dropped.
    pub(crate) fn rerooted(&self, new_root: &Belief) -> PlanningBelief {
        let reach = self.reachable_from(new_root);
        let expansions =
            self.expansions.iter().filter(|e| reach.contains(&e.node)).cloned().collect();
        PlanningBelief { root: new_root.clone(), horizon: self.horizon, expansions }
    }

    /// Every legal next expansion: reachable nodes with pulls left, arms not yet expanded.
    pub fn frontier(&self) -> Vec<Expansion> {
        let mut out = Vec::new();
        for node in self.nodes() {
            if node.elapsed() >= self.horizon {
                continue;
            }
            for arm in 0..self.n_arms() {
                if !self.is_expanded(&node, arm) {
                    out.push(Expansion { node: node.clone(), arm });
                }
            }
        }
        out
    }

    fn node_value(&self, node: &Belief, memo: &mut HashMap<Belief, Rational>) -> Rational {
        if let Some(v) = memo.get(node) {
            return v.clone();
        }
        let v = self
            .node_q(node, memo)
            .into_iter()
            .max()
            .unwrap_or_else(Rational::zero);
        memo.insert(node.clone(), v.clone());
        v
    }

    fn node_q(&self, node: &Belief, memo: &mut HashMap<Belief, Rational>) -> Vec<Rational> {
        let tau = int(node.remaining(self.horizon) as i64);
        (0..self.n_arms())
            .map(|arm| {
                let p = node.mean(arm);
                if self.is_expanded(node, arm) {
                    let vw = self.node_value(&node.after(arm, true), memo);
                    let vl = self.node_value(&node.after(arm, false), memo);
                    lookahead(&p, &vw, &vl)
                } else {
                    p * &tau
                }
            })
            .collect()
    }

    /// Backward induction over the plan with frontier-value leaves.
    pub fn subjective_values(&self) -> SubjectiveValues {
        let mut memo = HashMap::new();
        let root_q = self.node_q(&self.root, &mut memo);
        let root_v = root_q.iter().max().cloned().unwrap_or_else(Rational::zero);
        memo.insert(self.root.clone(), root_v);
        SubjectiveValues { node_values: memo, root_q }
    }

    /// Subjective `Q(·, root | b̃)`.
    pub fn root_q(&self) -> Vec<Rational> {
        let mut memo = HashMap::new();
        self.node_q(&self.root, &mut memo)
    }

    /// Arms maximizing the subjective root Q, increasing.
    pub fn terminal_arms(&self) -> Vec<usize> {
        argmax_set(&self.root_q())
    }

    /// The terminal action `a⊥`: the subjective argmax, lowest index on ties.
    pub fn terminal_action(&self) -> usize {
        self.terminal_arms()[0]
    }

    /// Depth of `node` below the root, in pulls.
    pub fn depth_of(&self, node: &Belief) -> u32 {
        node.elapsed() - self.root.elapsed()
    }

    /// Checks the closure and horizon invariants.
    pub fn validate(&self) -> Result<()> {
        let nodes = self.nodes();
        for e in &self.expansions {
            if !nodes.contains(&e.node) {
                return Err(Error::InvalidExpansion(format!("{e:?} is unreachable")));
            }
            if e.node.elapsed() >= self.horizon {
                return Err(Error::InvalidExpansion(format!("{e:?} is past the horizon")));
            }
        }
        Ok(())
    }

    /// Order-independent canonical text key: `root|horizon|exp;exp;...`.
    pub fn canonical_key(&self) -> String {
        let exps: Vec<String> = self.expansions.iter().map(Expansion::key).collect();
        format!("{}|{}|{}", self.root.key(), self.horizon, exps.join(";"))
    }

    pub fn parse_key(s: &str) -> Result<PlanningBelief> {
        let mut parts = s.splitn(3, '|');
        let bad = || Error::Parse(format!("bad plan key {s:?}"));
        let root = Belief::parse_key(parts.next().ok_or_else(bad)?)?;
        let horizon = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let exps = parts.next().ok_or_else(bad)?;
        let expansions = if exps.is_empty() {
            BTreeSet::new()
        } else {
            exps.split(';').map(Expansion::parse_key).collect::<Result<BTreeSet<_>>>()?
        };
        let plan = PlanningBelief { root, horizon, expansions };
        plan.validate()?;
        Ok(plan)
    }

    /// Relabels arms: arm `i` of the result is arm `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> PlanningBelief {
        let mut inverse = vec![0; perm.len()];
        for (i, &src) in perm.iter().enumerate() {
            inverse[src] = i;
        }
        PlanningBelief {
            root: self.root.permuted(perm),
            horizon: self.horizon,
            expansions: self
                .expansions
                .iter()
                .map(|e| Expansion { node: e.node.permuted(perm), arm: inverse[e.arm] })
                .collect(),
        }
    }

    /// Plan with every reachable `(node, arm)` expanded.
    pub fn fully_expanded(root: Belief, horizon: u32) -> PlanningBelief {
        let mut plan = PlanningBelief::singleton(root, horizon);
        loop {
            let frontier = plan.frontier();
            if frontier.is_empty() {
                return plan;
            }
            plan.expansions.extend(frontier);
        }
    }

    /// Same root and a subset of the expansions.
    pub fn is_subset_of(&self, other: &PlanningBelief) -> bool {
        self.root == other.root && self.expansions.is_subset(&other.expansions)
    }
}

impl fmt::Debug for PlanningBelief {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Plan[{:?} T={} {:?}]", self.root, self.horizon, self.expansions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bamdp::solve_bamdp_exact;
    use crate::rational::frac;

    fn zero2() -> Belief {
        Belief::zero(2)
    }

    #[test]
    fn singleton_is_empty_and_greedy() {
        let p = PlanningBelief::singleton(zero2(), 10);
        assert_eq!(p.edge_count(), 0);
        let sv = p.subjective_values();
        assert_eq!(sv.root_value(), int(5));
        assert_eq!(sv.root_q, vec![int(5), int(5)]);
        assert_eq!(p.terminal_action(), 0);

        let b = Belief::from_pairs(&[(1, 0), (0, 0)]);
        assert_eq!(PlanningBelief::singleton(b.clone(), 4).terminal_action(), b.greedy_arm());
    }

    #[test]
    fn singleton_at_horizon_cannot_expand() {
        let b = Belief::from_pairs(&[(1, 0), (0, 1)]);
        let p = PlanningBelief::singleton(b.clone(), 2);
        assert!(p.frontier().is_empty());
        assert!(p.expand(&b, 0).is_err());
    }

    #[test]
    fn expand_and_guards() {
        let p = PlanningBelief::singleton(zero2(), 4);
        let p1 = p.expand(&zero2(), 0).unwrap();
        assert_eq!(p1.n_expansions(), 1);
        assert_eq!(p1.edge_count(), 2);
        assert_eq!(p.n_expansions(), 0);
        assert!(p1.expand(&zero2(), 0).is_err());
        let far = Belief::from_pairs(&[(2, 0), (0, 0)]);
        assert!(p1.expand(&far, 0).is_err());
        let win = zero2().after(0, true);
        let p2 = p1.expand(&win, 1).unwrap();
        p2.validate().unwrap();
    }

    #[test]
    fn case_two_example() {
        // root ((0,0),(2,3)) with two pulls left, arm 1 expanded.
        let root = Belief::from_pairs(&[(0, 0), (2, 3)]);
        let plan = PlanningBelief::singleton(root.clone(), 7).expand(&root, 0).unwrap();
        let sv = plan.subjective_values();
        assert_eq!(sv.root_q[0], frac(22, 21));
        assert_eq!(sv.root_q[1], frac(6, 7));
        assert_eq!(sv.root_value(), frac(22, 21));
        assert_eq!(plan.terminal_action(), 0);
    }

    #[test]
    fn case_one_leaves_q_unchanged() {
        for horizon in 2..8 {
            let root = Belief::from_pairs(&[(1, 0), (0, 0)]);
            let plan = PlanningBelief::singleton(root.clone(), horizon + 1).expand(&root, 0).unwrap();
            assert_eq!(plan.root_q()[0], frac(2, 3) * int(horizon as i64));
        }
    }

    #[test]
    fn frontier_enumeration() {
        let p = PlanningBelief::singleton(zero2(), 3);
        assert_eq!(p.frontier().len(), 2);
        let p1 = p.expand(&zero2(), 0).unwrap();
        let f: BTreeSet<_> = p1.frontier().into_iter().collect();
        let w = zero2().after(0, true);
        let l = zero2().after(0, false);
        let expected: BTreeSet<_> = [
            Expansion::new(zero2(), 1),
            Expansion::new(w.clone(), 0),
            Expansion::new(w, 1),
            Expansion::new(l.clone(), 0),
            Expansion::new(l, 1),
        ]
        .into_iter()
        .collect();
        assert_eq!(f, expected);

        // root one pull before the horizon: children are never expandable.
        let b = Belief::from_pairs(&[(1, 0), (0, 0)]);
        let p = PlanningBelief::singleton(b.clone(), 2).expand(&b, 0).unwrap().expand(&b, 1).unwrap();
        assert!(p.frontier().is_empty());
    }

    #[test]
    fn restriction() {
        let p = PlanningBelief::singleton(zero2(), 4);
        let w = zero2().after(0, true);
        assert_eq!(p.restrict_reachable(&w).unwrap(), PlanningBelief::singleton(w.clone(), 4));

        let p1 = p.expand(&zero2(), 0).unwrap();
        let other = zero2().after(1, false);
        assert_eq!(p1.restrict_reachable(&other).unwrap(), PlanningBelief::singleton(other, 4));

        let p2 = p1.expand(&w, 1).unwrap();
        let r = p2.restrict_reachable(&w).unwrap();
        assert_eq!(r.n_expansions(), 1);
        assert!(r.is_expanded(&w, 1));

        let far = Belief::from_pairs(&[(2, 0), (0, 0)]);
        assert!(p2.restrict_reachable(&far).is_err());
    }

    #[test]
    fn canonical_keys() {
        let z = zero2();
        let a = PlanningBelief::singleton(z.clone(), 4).expand(&z, 0).unwrap().expand(&z, 1).unwrap();
        let b = PlanningBelief::singleton(z.clone(), 4).expand(&z, 1).unwrap().expand(&z, 0).unwrap();
        assert_eq!(a.canonical_key(), b.canonical_key());
        let c = PlanningBelief::singleton(Belief::from_pairs(&[(1, 0), (0, 0)]), 4);
        assert_ne!(PlanningBelief::singleton(z, 4).canonical_key(), c.canonical_key());
        assert_eq!(a.canonical_key(), "0.0.0.0|4|0.0.0.0@0;0.0.0.0@1");
        assert_eq!(PlanningBelief::parse_key(&a.canonical_key()).unwrap(), a);
    }

    #[test]
    fn full_expansion_matches_qstar() {
        let horizon = 4;
        let q = solve_bamdp_exact(2, horizon).unwrap();
        for b in crate::belief::enumerate_beliefs(2, horizon - 1).unwrap() {
            let plan = PlanningBelief::fully_expanded(b.clone(), horizon);
            assert_eq!(plan.root_q(), q.q(&b).unwrap().to_vec(), "at {b}");
        }
    }

    #[test]
    fn frontier_values_match_leaf_values() {
        let z = zero2();
        let plan = PlanningBelief::singleton(z.clone(), 5).expand(&z, 1).unwrap();
        let sv = plan.subjective_values();
        for child in [z.after(1, true), z.after(1, false)] {
            assert_eq!(sv.node_values[&child], frontier_value(&child, 5));
        }
    }
}
