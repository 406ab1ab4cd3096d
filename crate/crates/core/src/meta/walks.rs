//! Policy walks that check the structural guarantees of an optimal
//! meta-policy, plus audits of the graph edges the walks rely on.

use std::collections::HashSet;

use serde::Serialize;

use crate::bamdp::QStarTable;
use crate::belief::Belief;

use super::graph::{phase_consistent, MetaGraph};
use super::pruning::is_termination_forced;
use super::solve::MetaPolicy;
use super::{arm_set, MetaAction, MetaState, Phase};

#[derive(Clone, Debug, Default, Serialize)]
pub struct CheckResult {
    pub checked: usize,
    pub violations: Vec<String>,
}

impl CheckResult {
    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.violations.push(what());
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct WalkReport {
    pub mind_changer: CheckResult,
    pub minimality: CheckResult,
    pub forced_termination: CheckResult,
    pub m_belief_restriction: CheckResult,
    pub edge_audit: CheckResult,
}

impl WalkReport {
    pub fn passed(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.passed())
    }

    pub fn checks(&self) -> [(&'static str, &CheckResult); 5] {
        [
            ("mind-changer", &self.mind_changer),
            ("minimality", &self.minimality),
            ("forced-termination", &self.forced_termination),
            ("m-belief-restriction", &self.m_belief_restriction),
            ("edge-audit", &self.edge_audit),
        ]
    }

    pub fn total_violations(&self) -> usize {
        self.checks().iter().map(|(_, c)| c.violations.len()).sum()
    }
}

/// Walks the policy's computation chain from every `Entry` node of `graph`.
///
/// Successors are taken from the graph rather than recomputed, so a graph
/// built with a faulty pruning rule is walked as built.
pub fn theorem_walks(
    graph: &MetaGraph,
    policy: &MetaPolicy,
    qstar: &QStarTable,
    m_beliefs: &HashSet<Belief>,
) -> WalkReport {
    let mut report = WalkReport::default();

    for (i, node) in graph.nodes.iter().enumerate() {
        for (_, j) in &node.computes {
            report.edge_audit.record(phase_consistent(graph, i, *j), || {
                format!("{:?} -> {:?}", node.state, graph.nodes[*j].state)
            });
        }
    }

    for node in &graph.nodes {
        let start = &node.state;
        if start.phase != Phase::Entry || start.is_terminal() {
            continue;
        }
        let entry_arms = arm_set(&start.plan.terminal_arms());
        let mut chain: Vec<MetaState> = vec![start.clone()];
        let mut first_step = None;
        let mut broken = false;
        loop {
            let cur = chain.last().expect("chain starts non-empty");
            let action = match policy.actions.get(cur) {
                Some(a) => a.clone(),
                None => {
                    report.mind_changer.record(false, || format!("no action at {cur:?}"));
                    broken = true;
                    break;
                }
            };
            if is_termination_forced(cur, qstar) {
                report.forced_termination.record(action == MetaAction::Terminate, || {
                    format!("expands at forced state {cur:?}")
                });
            }
            match action {
                MetaAction::Terminate => break,
                MetaAction::Expand(e) => {
                    first_step.get_or_insert(e.clone());
                    let next = graph
                        .node(cur)
                        .and_then(|n| n.computes.iter().find(|(x, _)| *x == e))
                        .map(|(_, j)| graph.nodes[*j].state.clone());
                    match next {
                        Some(s) => chain.push(s),
                        None => {
                            report.mind_changer.record(false, || {
                                format!("policy expansion {e:?} at {cur:?} is not a graph edge")
                            });
                            broken = true;
                            break;
                        }
                    }
                }
            }
        }
        if broken || chain.len() == 1 {
            continue;
        }
        let last = chain.last().expect("non-empty");
        report.mind_changer.record(arm_set(&last.plan.terminal_arms()) != entry_arms, || {
            format!("computation from {start:?} ends without changing the action")
        });
        for mid in &chain[1..chain.len() - 1] {
            report.minimality.record(arm_set(&mid.plan.terminal_arms()) == entry_arms, || {
                format!("prefix {mid:?} already changed the action")
            });
        }
        let root = start.belief();
        if m_beliefs.contains(root) {
            let greedy = root.greedy_arm();
            let e = first_step.expect("chain has an expansion");
            let ok = (e.node == *root && e.arm == greedy)
                || start.plan.subtree_of_root_arm(greedy).contains(&e.node);
            report.m_belief_restriction.record(ok, || {
                format!("non-greedy computation {e:?} at M-belief {root}")
            });
        }
    }
    report
}
