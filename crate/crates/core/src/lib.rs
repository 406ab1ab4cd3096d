//! Optimal planning-versus-acting policies for Bernoulli bandit tasks.
//!
//! An agent facing an N-armed Bernoulli bandit with a uniform prior can
//! either pull an arm or pay a cost `c` to expand one node of its planning
//! graph, refining its subjective action values. This crate solves that
//! meta-level problem exactly on a pruned graph and measures the behavior of
//! the resulting policies.
//!
//! * [`bamdp`]: exact Bayes-optimal and greedy values.
//! * [`plan`]: planning beliefs and their subjective values.
//! * [`meta`]: the pruned meta-graph, its solver, validation and caching.
//! * [`oracle`]: unpruned brute-force references for tiny instances.
//! * [`evaluate`], [`sim`], [`metrics`]: exact and Monte-Carlo observables.
//! * [`fit`]: the softmax uncertainty-bonus fit.

pub mod bamdp;
pub mod belief;
pub mod error;
pub mod evaluate;
pub mod fit;
pub mod meta;
pub mod metrics;
pub mod oracle;
pub mod plan;
pub mod rational;
pub mod sim;

pub use bamdp::{greedy_value, greedy_values, solve_bamdp_exact, QStarTable};
pub use belief::{enumerate_beliefs, posterior_mean, Belief, Environment};
pub use error::{Error, Result};
pub use meta::{
    build_pruned_meta_graph, solve_meta, ApproxParams, MetaAction, MetaGraph, MetaPolicy,
    MetaState, MetaValueTable,
};
pub use plan::{Expansion, PlanningBelief, SubjectiveValues};
pub use rational::Rational;
