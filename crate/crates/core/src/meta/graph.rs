//! Breadth-first construction of the pruned meta-graph.

use std::collections::{HashMap, VecDeque};

use crate::bamdp::QStarTable;
use crate::belief::check_problem;
use crate::error::{Error, Result};
use crate::plan::Expansion;
use crate::rational::Rational;

use super::pruning::{
    is_termination_forced, m_beliefs, search_computational_trajectories, PruningFault,
    SearchContext,
};
use super::{arm_set, ApproxParams, MetaState, Phase};

pub const DEFAULT_NODE_CAP: usize = 2_000_000;

#[derive(Clone, Debug)]
pub struct BuildOptions {
    pub node_cap: usize,
    pub fault: Option<PruningFault>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { node_cap: DEFAULT_NODE_CAP, fault: None }
    }
}

/// One arm of a Terminate move, with both outcome successors.
#[derive(Clone, Debug)]
pub struct PullEdge {
    pub arm: usize,
    pub p_win: Rational,
    pub win: usize,
    pub loss: usize,
}

#[derive(Clone, Debug)]
pub struct MetaNode {
    pub state: MetaState,
    /// One edge per subjectively best arm; empty at the horizon and at
    /// `Computing` states, which must keep expanding.
    pub pulls: Vec<PullEdge>,
    /// Computational successors, sorted by expansion.
    pub computes: Vec<(Expansion, usize)>,
}

#[derive(Clone, Debug)]
pub struct MetaGraph {
    pub n_arms: usize,
    pub horizon: u32,
    pub params: ApproxParams,
    pub nodes: Vec<MetaNode>,
    pub index: HashMap<MetaState, usize>,
    pub root: usize,
}

impl MetaGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, state: &MetaState) -> Option<&MetaNode> {
        self.index.get(state).map(|&i| &self.nodes[i])
    }

    pub fn n_compute_edges(&self) -> usize {
        self.nodes.iter().map(|n| n.computes.len()).sum()
    }
}

/// First steps of the admissible minimal mind-changing sequences from
/// `state`, paired with the state each step leads to.
///
/// A sequence is dropped when termination is forced at any intermediate
/// plan, so forced states never appear mid-computation.
pub(crate) fn compute_successors(
    state: &MetaState,
    ctx: &SearchContext<'_>,
) -> Vec<(Expansion, MetaState)> {
    if state.phase == Phase::Committed
        || (ctx.fault.is_none() && is_termination_forced(state, ctx.qstar))
    {
        return Vec::new();
    }
    let entry_arms = state.entry_arms();
    let spent = state.spent();
    let mut out: Vec<(Expansion, MetaState)> = Vec::new();
    for tr in search_computational_trajectories(state, ctx) {
        let mut probe = state.clone();
        let mut admissible = true;
        for e in &tr.steps[..tr.steps.len() - 1] {
            probe = MetaState {
                plan: probe.plan.with_expansion(e.clone()),
                phase: Phase::Computing { entry_arms, spent: 0 },
            };
            if is_termination_forced(&probe, ctx.qstar) {
                admissible = false;
                break;
            }
        }
        if !admissible {
            continue;
        }
        let first = tr.steps[0].clone();
        if out.iter().any(|(e, _)| *e == first) {
            continue;
        }
        let plan = state.plan.with_expansion(first.clone());
        let phase = if tr.steps.len() == 1 {
            Phase::Committed
        } else {
            Phase::Computing { entry_arms, spent: spent + 1 }
        };
        out.push((first, MetaState { plan, phase }));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Builds the meta-graph reachable from `(𝟘, singleton(𝟘))`.
pub fn build_pruned_meta_graph(
    n_arms: usize,
    horizon: u32,
    qstar: &QStarTable,
    params: ApproxParams,
    opts: &BuildOptions,
) -> Result<MetaGraph> {
    check_problem(n_arms, horizon)?;
    params.validate()?;
    if qstar.n_arms() != n_arms || qstar.horizon() != horizon {
        return Err(Error::InvalidArgument(format!(
            "Q* table is for N={}, T={}, not N={n_arms}, T={horizon}",
            qstar.n_arms(),
            qstar.horizon()
        )));
    }
    let m = m_beliefs(qstar);
    let mut ctx = SearchContext::new(qstar, &m, params);
    ctx.fault = opts.fault;

    let mut nodes: Vec<MetaNode> = Vec::new();
    let mut index: HashMap<MetaState, usize> = HashMap::new();
    let mut queue = VecDeque::new();

    let mut intern = |state: MetaState,
                      nodes: &mut Vec<MetaNode>,
                      queue: &mut VecDeque<usize>|
     -> Result<usize> {
        if let Some(&i) = index.get(&state) {
            return Ok(i);
        }
        if nodes.len() >= opts.node_cap {
            return Err(Error::ResourceCap { what: "meta-graph nodes", cap: opts.node_cap });
        }
        let i = nodes.len();
        index.insert(state.clone(), i);
        nodes.push(MetaNode { state, pulls: Vec::new(), computes: Vec::new() });
        queue.push_back(i);
        Ok(i)
    };

    let root = intern(MetaState::initial(n_arms, horizon), &mut nodes, &mut queue)?;
    while let Some(i) = queue.pop_front() {
        let state = nodes[i].state.clone();
        if state.is_terminal() {
            continue;
        }
        let mut computes = Vec::new();
        for (e, next) in compute_successors(&state, &ctx) {
            computes.push((e, intern(next, &mut nodes, &mut queue)?));
        }
        let mut pulls = Vec::new();
        if !matches!(state.phase, Phase::Computing { .. }) {
            for arm in state.plan.terminal_arms() {
                let win = intern(state.after_pull(arm, true), &mut nodes, &mut queue)?;
                let loss = intern(state.after_pull(arm, false), &mut nodes, &mut queue)?;
                pulls.push(PullEdge { arm, p_win: state.belief().mean(arm), win, loss });
            }
        }
        nodes[i].computes = computes;
        nodes[i].pulls = pulls;
    }
    Ok(MetaGraph { n_arms, horizon, params, nodes, index, root })
}

/// True when a compute edge's target phase agrees with whether it changed
/// the set of best arms.
pub(crate) fn phase_consistent(graph: &MetaGraph, from: usize, to: usize) -> bool {
    let src = &graph.nodes[from].state;
    let dst = &graph.nodes[to].state;
    let changed = arm_set(&dst.plan.terminal_arms()) != src.entry_arms();
    match dst.phase {
        Phase::Committed => changed,
        Phase::Computing { .. } => !changed,
        Phase::Entry => false,
    }
}
