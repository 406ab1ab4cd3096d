//! Backward induction over the meta-graph.

use std::collections::{HashMap, VecDeque};

use num_traits::Signed;

use crate::error::{Error, Result};
use crate::rational::{int, one, zero, Rational};

use super::graph::MetaGraph;
use super::{ApproxParams, MetaAction, MetaState};

/// Deterministic meta-policy with the problem it was solved for.
#[derive(Clone, Debug)]
pub struct MetaPolicy {
    pub n_arms: usize,
    pub horizon: u32,
    pub cost: Rational,
    pub params: ApproxParams,
    pub actions: HashMap<MetaState, MetaAction>,
}

#[derive(Clone, Debug)]
pub struct MetaValueTable {
    pub values: HashMap<MetaState, Rational>,
    pub root_value: Rational,
}

impl MetaPolicy {
    pub fn action(&self, state: &MetaState) -> Result<&MetaAction> {
        self.actions.get(state).ok_or_else(|| Error::MissingPolicyState(state.key()))
    }

    pub fn initial_state(&self) -> MetaState {
        MetaState::initial(self.n_arms, self.horizon)
    }

    /// Non-terminal states reachable from the initial state under the policy.
    pub fn reachable_states(&self) -> Result<Vec<MetaState>> {
        let mut seen = std::collections::HashSet::new();
        let mut queue = VecDeque::new();
        let mut out = Vec::new();
        let start = self.initial_state();
        seen.insert(start.clone());
        queue.push_back(start);
        while let Some(s) = queue.pop_front() {
            if s.is_terminal() {
                continue;
            }
            let next: Vec<MetaState> = match self.action(&s)? {
                MetaAction::Expand(e) => vec![s.after_expansion(e)?],
                MetaAction::Terminate => s
                    .plan
                    .terminal_arms()
                    .into_iter()
                    .flat_map(|a| [s.after_pull(a, true), s.after_pull(a, false)])
                    .collect(),
            };
            out.push(s);
            for n in next {
                if seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
        Ok(out)
    }

    /// Drops states the policy never visits.
    pub fn restricted_to_reachable(&self) -> Result<MetaPolicy> {
        let keep = self.reachable_states()?;
        let actions = keep
            .into_iter()
            .map(|s| {
                let a = self.actions[&s].clone();
                (s, a)
            })
            .collect();
        Ok(MetaPolicy { actions, ..self.clone() })
    }
}

/// Solves the meta-Bellman equation on `graph` with cost `c` per expansion.
///
/// Nodes are processed by decreasing time, then by decreasing plan size, so
/// every successor is solved first. Ties prefer Terminate, then the smallest
/// expansion.
pub fn solve_meta(graph: &MetaGraph, c: &Rational) -> Result<(MetaPolicy, MetaValueTable)> {
    if c.is_negative() {
        return Err(Error::InvalidArgument("cost must be nonnegative".into()));
    }
    let mut order: Vec<usize> = (0..graph.len()).collect();
    let size = |i: usize| graph.nodes[i].state.plan.n_expansions();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (&graph.nodes[a].state, &graph.nodes[b].state);
        sb.t().cmp(&sa.t()).then(size(b).cmp(&size(a)))
    });

    let mut value: Vec<Option<Rational>> = vec![None; graph.len()];
    let mut actions = HashMap::with_capacity(graph.len());
    for &i in &order {
        let node = &graph.nodes[i];
        if node.state.is_terminal() {
            value[i] = Some(zero());
            continue;
        }
        let solved = |j: usize| -> Result<&Rational> {
            value[j].as_ref().ok_or_else(|| Error::SameTimeCycle(node.state.key()))
        };
        let mut best: Option<(Rational, MetaAction)> = None;
        if !node.pulls.is_empty() {
            let mut total = zero();
            for edge in &node.pulls {
                let vw = solved(edge.win)?;
                let vl = solved(edge.loss)?;
                total += &edge.p_win * (one() + vw) + (one() - &edge.p_win) * vl;
            }
            best = Some((total / int(node.pulls.len() as i64), MetaAction::Terminate));
        }
        for (e, j) in &node.computes {
            let v = solved(*j)? - c;
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, MetaAction::Expand(e.clone())));
            }
        }
        let (v, a) = best.ok_or_else(|| {
            Error::InvalidArgument(format!("meta-state {} has no moves", node.state.key()))
        })?;
        value[i] = Some(v);
        actions.insert(node.state.clone(), a);
    }

    let values: HashMap<MetaState, Rational> = graph
        .nodes
        .iter()
        .zip(value)
        .map(|(n, v)| (n.state.clone(), v.expect("all nodes solved")))
        .collect();
    let root_value = values[&graph.nodes[graph.root].state].clone();
    let policy = MetaPolicy {
        n_arms: graph.n_arms,
        horizon: graph.horizon,
        cost: c.clone(),
        params: graph.params,
        actions,
    };
    Ok((policy, MetaValueTable { values, root_value }))
}
