//! Exact forward evaluation of policies.
//!
//! A policy is first compiled into a DAG of physical decision points: at each
//! one the agent performs a fixed list of expansions, then pulls uniformly
//! among a set of arms. Probability mass is then pushed forward through the
//! DAG, either with posterior-predictive transition weights (the Bayes value
//! under the uniform prior) or with a fixed environment.

use std::collections::{HashMap, VecDeque};
use std::ops::{Add, Div, Mul, Sub};

use num_traits::{One, Zero};

use crate::bamdp::QStarTable;
use crate::belief::{check_problem, Belief, Environment};
use crate::error::Result;
use crate::meta::{MetaAction, MetaPolicy, MetaState};
use crate::metrics::{exploratory_flag, histogram_entropy_bits};
use crate::plan::Expansion;
use crate::rational::{int, to_f64, Rational};

/// Policies that can be compiled and evaluated.
#[derive(Clone, Copy, Debug)]
pub enum Agent<'a> {
    /// Pull the arms with the highest posterior mean.
    Greedy,
    /// Pull the arms attaining `V*`.
    BayesOptimal(&'a QStarTable),
    Meta(&'a MetaPolicy),
}

#[derive(Clone, Debug)]
pub struct DecisionNode {
    pub belief: Belief,
    /// Expansions performed, in order, before the pull.
    pub expansions: Vec<Expansion>,
    /// Arms pulled, uniformly at random.
    pub arms: Vec<usize>,
    /// Per entry of `arms`: successor node after a win and after a loss;
    /// `None` at the horizon.
    pub next: Vec<[Option<usize>; 2]>,
}

/// Decision DAG of a policy; node 0 is the start and nodes are in
/// nondecreasing time order.
#[derive(Clone, Debug)]
pub struct CompiledPolicy {
    pub n_arms: usize,
    pub horizon: u32,
    pub nodes: Vec<DecisionNode>,
}

impl CompiledPolicy {
    pub fn compile(agent: Agent<'_>, n_arms: usize, horizon: u32) -> Result<CompiledPolicy> {
        check_problem(n_arms, horizon)?;
        match agent {
            Agent::Greedy | Agent::BayesOptimal(_) => {
                compile_with(Belief::zero(n_arms), n_arms, horizon, |b: &Belief| {
                    let arms = match agent {
                        Agent::BayesOptimal(q) => q.optimal_arms(b),
                        _ => b.greedy_arms(),
                    };
                    let next = arms.iter().map(|&a| [b.after(a, true), b.after(a, false)]).collect();
                    Ok((b.clone(), Vec::new(), arms, next))
                })
            }
            Agent::Meta(policy) => {
                compile_with(policy.initial_state(), n_arms, horizon, |s: &MetaState| {
                    let mut cur = s.clone();
                    let mut expansions = Vec::new();
                    while let MetaAction::Expand(e) = policy.action(&cur)? {
                        cur = cur.after_expansion(e)?;
                        expansions.push(e.clone());
                    }
                    let arms = cur.plan.terminal_arms();
                    let next = arms
                        .iter()
                        .map(|&a| [cur.after_pull(a, true), cur.after_pull(a, false)])
                        .collect();
                    Ok((s.belief().clone(), expansions, arms, next))
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

type Step<S> = (Belief, Vec<Expansion>, Vec<usize>, Vec<[S; 2]>);

/// Breadth-first compilation; `step` gives a decision point's belief,
/// expansions, arms and per-arm outcome states.
fn compile_with<S, F>(start: S, n_arms: usize, horizon: u32, step: F) -> Result<CompiledPolicy>
where
    S: Clone + Eq + std::hash::Hash,
    F: Fn(&S) -> Result<Step<S>>,
{
    let mut index: HashMap<S, usize> = HashMap::from([(start.clone(), 0)]);
    let mut states: Vec<S> = vec![start];
    let mut nodes: Vec<DecisionNode> = Vec::new();
    let mut queue: VecDeque<usize> = VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        let (belief, expansions, arms, succ) = step(&states[i])?;
        let last_step = belief.elapsed() + 1 >= horizon;
        let mut next = Vec::with_capacity(arms.len());
        for pair in succ {
            let mut out = [None, None];
            if !last_step {
                for (slot, s) in pair.into_iter().enumerate() {
                    let j = *index.entry(s.clone()).or_insert_with(|| {
                        states.push(s);
                        queue.push_back(states.len() - 1);
                        states.len() - 1
                    });
                    out[slot] = Some(j);
                }
            }
            next.push(out);
        }
        nodes.push(DecisionNode { belief, expansions, arms, next });
    }
    Ok(CompiledPolicy { n_arms, horizon, nodes })
}

/// Number type for forward evaluation.
pub trait Weight:
    Clone
    + Zero
    + One
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    fn from_u32(n: u32) -> Self;
    fn as_f64(&self) -> f64;
}

impl Weight for f64 {
    fn from_u32(n: u32) -> Self {
        n as f64
    }

    fn as_f64(&self) -> f64 {
        *self
    }
}

impl Weight for Rational {
    fn from_u32(n: u32) -> Self {
        int(n as i64)
    }

    fn as_f64(&self) -> f64 {
        to_f64(self)
    }
}

/// Expected observables of a policy.
#[derive(Clone, Debug)]
pub struct Evaluation<W> {
    /// External reward; computation costs are not subtracted.
    pub reward: W,
    pub n_computations: W,
    /// Sum over computations of the (0-based) time step they occur at.
    pub computation_time_sum: W,
    /// Probability of at least one computation in an episode.
    pub p_any_computation: W,
    /// `arm_dist[t][i]`: probability of pulling arm `i` at step `t`.
    pub arm_dist: Vec<Vec<W>>,
    pub n_exploratory: W,
    pub exploratory_time_sum: W,
    /// Expected entropy, in bits, of the episode's arm histogram.
    pub entropy_bits: f64,
}

impl<W: Weight> Evaluation<W> {
    /// Mean computation time step over all computation events, divided by T.
    pub fn tau_c_mean_norm(&self, horizon: u32) -> Option<f64> {
        let n = self.n_computations.as_f64();
        (n > 0.0).then(|| self.computation_time_sum.as_f64() / n / horizon as f64)
    }

    /// Mean time step of exploratory pulls.
    pub fn tau_explore_mean(&self) -> Option<f64> {
        let n = self.n_exploratory.as_f64();
        (n > 0.0).then(|| self.exploratory_time_sum.as_f64() / n)
    }

    /// Total meta-value: reward minus `c` per expected computation.
    pub fn net_value(&self, c: &W) -> W {
        self.reward.clone() - c.clone() * self.n_computations.clone()
    }
}

/// Pushes probability mass through `policy`; `p_win(b, arm)` is the success
/// probability of `arm` at belief `b`.
pub fn evaluate<W, P>(policy: &CompiledPolicy, p_win: P) -> Evaluation<W>
where
    W: Weight,
    P: Fn(&Belief, usize) -> W,
{
    let zero = W::zero;
    // Mass per node, split by whether a computation has happened yet.
    let mut mass: Vec<[W; 2]> = vec![[zero(), zero()]; policy.len()];
    if !policy.is_empty() {
        mass[0][0] = W::one();
    }
    let mut ev = Evaluation {
        reward: zero(),
        n_computations: zero(),
        computation_time_sum: zero(),
        p_any_computation: zero(),
        arm_dist: vec![vec![zero(); policy.n_arms]; policy.horizon as usize],
        n_exploratory: zero(),
        exploratory_time_sum: zero(),
        entropy_bits: 0.0,
    };
    for (i, node) in policy.nodes.iter().enumerate() {
        let [clean, dirty] = mass[i].clone();
        let total = clean.clone() + dirty.clone();
        if total.is_zero() {
            continue;
        }
        let t = node.belief.elapsed();
        let k = W::from_u32(node.expansions.len() as u32);
        let computes = !node.expansions.is_empty();
        ev.n_computations = ev.n_computations + total.clone() * k.clone();
        ev.computation_time_sum =
            ev.computation_time_sum + total.clone() * k * W::from_u32(t);
        // Mass leaving this node split by the "has computed" flag.
        let (out_clean, out_dirty) = if computes {
            ev.p_any_computation = ev.p_any_computation + clean.clone();
            (zero(), total.clone())
        } else {
            (clean, dirty)
        };
        let share = W::one() / W::from_u32(node.arms.len() as u32);
        for (&arm, next) in node.arms.iter().zip(&node.next) {
            let p = p_win(&node.belief, arm);
            let q = W::one() - p.clone();
            let w = total.clone() * share.clone();
            ev.reward = ev.reward + w.clone() * p.clone();
            ev.arm_dist[t as usize][arm] = ev.arm_dist[t as usize][arm].clone() + w.clone();
            if exploratory_flag(&node.belief, arm) {
                ev.n_exploratory = ev.n_exploratory + w.clone();
                ev.exploratory_time_sum = ev.exploratory_time_sum + w.clone() * W::from_u32(t);
            }
            for (slot, pr) in [(0, p), (1, q)] {
                let f = share.clone() * pr;
                match next[slot] {
                    Some(j) => {
                        let m = &mut mass[j];
                        m[0] = m[0].clone() + out_clean.clone() * f.clone();
                        m[1] = m[1].clone() + out_dirty.clone() * f;
                    }
                    None => {
                        let fin = node.belief.after(arm, slot == 0);
                        let pulls: Vec<u32> = (0..policy.n_arms).map(|a| fin.pulls(a)).collect();
                        ev.entropy_bits += (total.clone() * f).as_f64() * histogram_entropy_bits(&pulls);
                    }
                }
            }
        }
    }
    ev
}

/// Bayes-expected observables under the uniform prior.
pub fn evaluate_bayes(policy: &CompiledPolicy) -> Evaluation<Rational> {
    evaluate(policy, |b, arm| b.mean(arm))
}

pub fn evaluate_in_env(policy: &CompiledPolicy, env: &Environment) -> Evaluation<f64> {
    evaluate(policy, |_, arm| env.probs()[arm])
}

/// Expectations of a policy in a fixed environment.
#[derive(Clone, Debug)]
pub struct PolicyValue {
    pub reward: f64,
    pub n_computations: f64,
    /// Computation cost, reported separately from the reward.
    pub computation_cost: f64,
    pub arm_dist: Vec<Vec<f64>>,
}

pub fn policy_value_in_env(
    agent: Agent<'_>,
    n_arms: usize,
    horizon: u32,
    env: &Environment,
    c: f64,
) -> Result<PolicyValue> {
    let compiled = CompiledPolicy::compile(agent, n_arms, horizon)?;
    let ev = evaluate_in_env(&compiled, env);
    Ok(PolicyValue {
        reward: ev.reward,
        n_computations: ev.n_computations,
        computation_cost: c * ev.n_computations,
        arm_dist: ev.arm_dist,
    })
}
