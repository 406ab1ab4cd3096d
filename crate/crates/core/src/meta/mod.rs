//! The meta-level decision problem: when to stop planning and pull.
//!
//! A meta-state pairs the physical belief with the agent's planning belief.
//! Meta-actions are either `Terminate` (pull the subjectively best arm) or a
//! single node expansion that costs `c`. Computational actions happen within
//! the same physical time step.

use std::fmt;

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::plan::{Expansion, PlanningBelief};

pub mod cache;
pub mod graph;
pub mod pruning;
pub mod solve;
pub mod validate;
pub mod walks;

pub use graph::{build_pruned_meta_graph, BuildOptions, MetaGraph, MetaNode, PullEdge};
pub use pruning::{
    is_termination_forced, m_beliefs, search_computational_trajectories, ComputationalTrajectory,
    PruningFault, SearchContext,
};
pub use solve::{solve_meta, MetaPolicy, MetaValueTable};

/// Bounds on the planning process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct ApproxParams {
    /// Maximum edge count `|b̃|` of any plan (two edges per expansion).
    pub k: usize,
    /// Maximum expansions between two consecutive pulls.
    pub k_c: u32,
    /// Maximum depth, in pulls below the current root, of an expanded node.
    pub d: u32,
}

impl Default for ApproxParams {
    fn default() -> Self {
        ApproxParams { k: 2, k_c: 1, d: 3 }
    }
}

impl ApproxParams {
    pub fn new(k: usize, k_c: u32, d: u32) -> Result<Self> {
        let p = ApproxParams { k, k_c, d };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || !self.k.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("k must be even and >= 2, got {}", self.k)));
        }
        if self.k_c < 1 {
            return Err(Error::InvalidArgument("k_c must be >= 1".into()));
        }
        if self.d < 1 {
            return Err(Error::InvalidArgument("d must be >= 1".into()));
        }
        Ok(())
    }
}

impl fmt::Display for ApproxParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k={},k_c={},d={}", self.k, self.k_c, self.d)
    }
}

/// Bitmask of arms; bit `i` set means arm `i` is in the set.
pub type ArmSet = u32;

pub fn arm_set(arms: &[usize]) -> ArmSet {
    arms.iter().fold(0, |acc, &a| acc | (1 << a))
}

pub fn arms_of(set: ArmSet) -> Vec<usize> {
    (0..32).filter(|i| set & (1 << i) != 0).collect()
}

/// Where a meta-state sits within a run of computations.
///
/// An agent enters a belief after a pull (`Entry`). Expansions that keep the
/// set of subjectively best arms unchanged lead to `Computing`; the first
/// expansion that changes it leads to `Committed`, from which the only move
/// is to pull.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Entry,
    Computing { entry_arms: ArmSet, spent: u32 },
    Committed,
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetaState {
    pub plan: PlanningBelief,
    pub phase: Phase,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetaAction {
    Terminate,
    Expand(Expansion),
}

impl MetaAction {
    pub fn key(&self) -> String {
        match self {
            MetaAction::Terminate => "T".to_string(),
            MetaAction::Expand(e) => format!("E:{}", e.key()),
        }
    }

    pub fn parse_key(s: &str) -> Result<MetaAction> {
        if s == "T" {
            return Ok(MetaAction::Terminate);
        }
        match s.strip_prefix("E:") {
            Some(rest) => Ok(MetaAction::Expand(Expansion::parse_key(rest)?)),
            None => Err(Error::Parse(format!("bad meta-action {s:?}"))),
        }
    }
}

impl MetaState {
    /// `(𝟘, singleton(𝟘))` at time 0.
    pub fn initial(n_arms: usize, horizon: u32) -> Self {
        MetaState::entry(PlanningBelief::singleton(Belief::zero(n_arms), horizon))
    }

    pub fn entry(plan: PlanningBelief) -> Self {
        MetaState { plan, phase: Phase::Entry }
    }

    pub fn belief(&self) -> &Belief {
        self.plan.root()
    }

    pub fn t(&self) -> u32 {
        self.plan.root().elapsed()
    }

    pub fn horizon(&self) -> u32 {
        self.plan.horizon()
    }

    pub fn is_terminal(&self) -> bool {
        self.t() >= self.horizon()
    }

    /// Expansions made since the last pull.
    pub fn spent(&self) -> u32 {
        match self.phase {
            Phase::Entry => 0,
            Phase::Computing { spent, .. } => spent,
            // Not tracked once committed; only Terminate is available.
            Phase::Committed => 0,
        }
    }

    /// Subjectively best arms at the start of the current run of computations.
    pub fn entry_arms(&self) -> ArmSet {
        match self.phase {
            Phase::Computing { entry_arms, .. } => entry_arms,
            _ => arm_set(&self.plan.terminal_arms()),
        }
    }

    /// State reached by performing `e` here.
    pub fn after_expansion(&self, e: &Expansion) -> Result<MetaState> {
        if self.phase == Phase::Committed {
            return Err(Error::InvalidExpansion("committed states only terminate".into()));
        }
        let entry_arms = self.entry_arms();
        let plan = self.plan.expand(&e.node, e.arm)?;
        let phase = if arm_set(&plan.terminal_arms()) != entry_arms {
            Phase::Committed
        } else {
            Phase::Computing { entry_arms, spent: self.spent() + 1 }
        };
        Ok(MetaState { plan, phase })
    }

    /// Entry state after pulling `arm` and observing `win`.
    pub fn after_pull(&self, arm: usize, win: bool) -> MetaState {
        let next = self.belief().after(arm, win);
        MetaState::entry(self.plan.rerooted(&next))
    }

    /// Canonical text key, `plan_key#phase`.
    pub fn key(&self) -> String {
        let phase = match self.phase {
            Phase::Entry => "E".to_string(),
            Phase::Computing { entry_arms, spent } => format!("C{entry_arms}.{spent}"),
            Phase::Committed => "X".to_string(),
        };
        format!("{}#{}", self.plan.canonical_key(), phase)
    }

    pub fn parse_key(s: &str) -> Result<MetaState> {
        let (plan, phase) =
            s.rsplit_once('#').ok_or_else(|| Error::Parse(format!("bad meta-state key {s:?}")))?;
        let plan = PlanningBelief::parse_key(plan)?;
        let phase = match phase {
            "E" => Phase::Entry,
            "X" => Phase::Committed,
            other => {
                let bad = || Error::Parse(format!("bad phase {other:?}"));
                let body = other.strip_prefix('C').ok_or_else(bad)?;
                let (a, s) = body.split_once('.').ok_or_else(bad)?;
                Phase::Computing {
                    entry_arms: a.parse().map_err(|_| bad())?,
                    spent: s.parse().map_err(|_| bad())?,
                }
            }
        };
        Ok(MetaState { plan, phase })
    }
}

impl fmt::Debug for MetaState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MetaState[{:?} {:?}]", self.plan, self.phase)
    }
}
