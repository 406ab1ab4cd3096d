//! Agreement of solutions across approximation settings.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bamdp::QStarTable;
use crate::error::{Error, Result};
use crate::rational::{format_rational, Rational};

use super::graph::{build_pruned_meta_graph, BuildOptions, MetaGraph};
use super::solve::{solve_meta, MetaPolicy};
use super::{arm_set, ApproxParams, ArmSet, MetaAction};

/// Observation history: one `(arm, won)` pair per pull.
pub type History = Vec<(u8, bool)>;

/// The arms (uniformly mixed) the policy pulls after each reachable history.
pub type PhysicalBehavior = BTreeMap<History, ArmSet>;

/// Follows the policy's computations at a node and returns the node it
/// terminates from.
fn settle(graph: &MetaGraph, policy: &MetaPolicy, mut i: usize) -> Result<usize> {
    loop {
        let node = &graph.nodes[i];
        let action = policy.action(&node.state)?;
        match action {
            MetaAction::Terminate => return Ok(i),
            MetaAction::Expand(e) => {
                i = node
                    .computes
                    .iter()
                    .find(|(x, _)| x == e)
                    .map(|(_, j)| *j)
                    .ok_or_else(|| Error::MissingPolicyState(node.state.key()))?;
            }
        }
    }
}

pub fn physical_behavior(graph: &MetaGraph, policy: &MetaPolicy) -> Result<PhysicalBehavior> {
    let mut out = BTreeMap::new();
    let mut stack: Vec<(History, usize)> = vec![(Vec::new(), graph.root)];
    while let Some((hist, i)) = stack.pop() {
        if graph.nodes[i].state.is_terminal() {
            continue;
        }
        let term = settle(graph, policy, i)?;
        let node = &graph.nodes[term];
        out.insert(hist.clone(), arm_set(&node.state.plan.terminal_arms()));
        for edge in &node.pulls {
            for (won, next) in [(true, edge.win), (false, edge.loss)] {
                let mut h = hist.clone();
                h.push((edge.arm as u8, won));
                stack.push((h, next));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct SettingResult {
    pub params: ApproxParams,
    pub graph_nodes: usize,
    pub meta_value: String,
    #[serde(skip)]
    pub value: Rational,
    #[serde(skip)]
    pub behavior: PhysicalBehavior,
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproxReport {
    pub n_arms: usize,
    pub horizon: u32,
    pub cost: String,
    pub settings: Vec<SettingResult>,
    /// `behavior_agree[i][j]`: settings `i` and `j` pull the same arms after
    /// every history.
    pub behavior_agree: Vec<Vec<bool>>,
    pub value_agree: Vec<Vec<bool>>,
}

impl ApproxReport {
    pub fn all_behavior_agree(&self) -> bool {
        self.behavior_agree.iter().flatten().all(|&b| b)
    }

    pub fn all_values_agree(&self) -> bool {
        self.value_agree.iter().flatten().all(|&b| b)
    }

    /// Index pairs whose behavior differs.
    pub fn disagreements(&self) -> Vec<(ApproxParams, ApproxParams)> {
        let mut out = Vec::new();
        for i in 0..self.settings.len() {
            for j in i + 1..self.settings.len() {
                if !self.behavior_agree[i][j] {
                    out.push((self.settings[i].params, self.settings[j].params));
                }
            }
        }
        out
    }
}

/// Solves under each parameter setting and compares the results pairwise.
pub fn validate_approximation(
    qstar: &QStarTable,
    c: &Rational,
    params: &[ApproxParams],
    opts: &BuildOptions,
) -> Result<ApproxReport> {
    let (n_arms, horizon) = (qstar.n_arms(), qstar.horizon());
    let mut settings = Vec::with_capacity(params.len());
    for &p in params {
        let graph = build_pruned_meta_graph(n_arms, horizon, qstar, p, opts)?;
        let (policy, values) = solve_meta(&graph, c)?;
        let behavior = physical_behavior(&graph, &policy)?;
        settings.push(SettingResult {
            params: p,
            graph_nodes: graph.len(),
            meta_value: format_rational(&values.root_value),
            value: values.root_value,
            behavior,
        });
    }
    let n = settings.len();
    let matrix = |f: &dyn Fn(&SettingResult, &SettingResult) -> bool| -> Vec<Vec<bool>> {
        (0..n).map(|i| (0..n).map(|j| f(&settings[i], &settings[j])).collect()).collect()
    };
    let behavior_agree = matrix(&|a, b| a.behavior == b.behavior);
    let value_agree = matrix(&|a, b| a.value == b.value);
    Ok(ApproxReport {
        n_arms,
        horizon,
        cost: format_rational(c),
        settings,
        behavior_agree,
        value_agree,
    })
}

/// The parameter grid k ∈ {2,4,8,16}, k_c ∈ {1,2,3}, d ∈ {1,2,3}.
pub fn standard_param_grid() -> Vec<ApproxParams> {
    let mut out = Vec::new();
    for k in [2, 4, 8, 16] {
        for k_c in 1..=3 {
            for d in 1..=3 {
                out.push(ApproxParams { k, k_c, d });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bamdp::{greedy_values, solve_bamdp_exact};
    use crate::belief::Belief;
    use crate::rational::{int, zero};

    #[test]
    fn greedy_behavior_at_huge_cost() {
        let q = solve_bamdp_exact(2, 4).unwrap();
        let params = [ApproxParams::default(), ApproxParams::new(16, 3, 3).unwrap()];
        let r = validate_approximation(&q, &int(10), &params, &BuildOptions::default()).unwrap();
        assert!(r.all_behavior_agree() && r.all_values_agree());
        let g = greedy_values(2, 4).unwrap();
        assert_eq!(r.settings[0].value, g[&Belief::zero(2)]);
        // Greedy pulls both arms at the symmetric root.
        assert_eq!(r.settings[0].behavior[&Vec::new()], 0b11);
    }

    #[test]
    fn behavior_covers_every_reachable_history() {
        let q = solve_bamdp_exact(2, 3).unwrap();
        let r = validate_approximation(&q, &zero(), &[ApproxParams::default()], &BuildOptions::default())
            .unwrap();
        let b = &r.settings[0].behavior;
        assert!(b.keys().all(|h| h.len() < 3));
        assert!(b.contains_key(&Vec::new()));
        assert_eq!(standard_param_grid().len(), 36);
    }
}
