//! Monte-Carlo simulation of episodes.
//!
//! Every episode owns a generator derived from the master seed and its
//! index, so batches are reproducible however the work is scheduled.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::belief::{Belief, Environment};
use crate::error::{Error, Result};
use crate::evaluate::CompiledPolicy;
use crate::meta::{MetaAction, MetaPolicy};
use crate::metrics::{exploratory_flag, histogram_entropy_bits};
use crate::plan::Expansion;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Step {
    pub t: u32,
    /// Belief the pull was chosen at.
    pub belief: Belief,
    pub arm: usize,
    pub reward: bool,
    /// Expansions performed before the pull.
    pub computations: Vec<Expansion>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Trajectory {
    pub n_arms: usize,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn total_reward(&self) -> u32 {
        self.steps.iter().filter(|s| s.reward).count() as u32
    }

    pub fn n_computations(&self) -> usize {
        self.steps.iter().map(|s| s.computations.len()).sum()
    }

    pub fn arm_histogram(&self) -> Vec<u32> {
        let mut h = vec![0; self.n_arms];
        for s in &self.steps {
            h[s.arm] += 1;
        }
        h
    }

    /// Entropy in bits of the arms pulled in this episode.
    pub fn action_entropy(&self) -> f64 {
        histogram_entropy_bits(&self.arm_histogram())
    }
}

/// Mean entropy across a batch.
pub fn action_entropy(trajs: &[Trajectory]) -> f64 {
    if trajs.is_empty() {
        return 0.0;
    }
    trajs.iter().map(Trajectory::action_entropy).sum::<f64>() / trajs.len() as f64
}

/// Generator for episode `index` of a batch seeded with `master`.
pub fn episode_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Runs one episode of a compiled policy.
pub fn simulate_compiled(
    policy: &CompiledPolicy,
    env: &Environment,
    rng: &mut ChaCha8Rng,
) -> Trajectory {
    let mut steps = Vec::with_capacity(policy.horizon as usize);
    let mut cur = Some(0);
    while let Some(i) = cur {
        let node = &policy.nodes[i];
        let k = if node.arms.len() == 1 { 0 } else { rng.gen_range(0..node.arms.len()) };
        let arm = node.arms[k];
        let reward = rng.gen_bool(env.probs()[arm]);
        steps.push(Step {
            t: node.belief.elapsed(),
            belief: node.belief.clone(),
            arm,
            reward,
            computations: node.expansions.clone(),
        });
        cur = node.next[k][usize::from(!reward)];
    }
    Trajectory { n_arms: policy.n_arms, steps }
}

/// Runs one episode by following `policy` state by state.
pub fn simulate_episode(policy: &MetaPolicy, env: &Environment, seed: u64) -> Result<Trajectory> {
    if env.n_arms() != policy.n_arms {
        return Err(Error::InvalidArgument("environment and policy arm counts differ".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = policy.initial_state();
    let mut steps = Vec::with_capacity(policy.horizon as usize);
    while !state.is_terminal() {
        let mut computations = Vec::new();
        while let MetaAction::Expand(e) = policy.action(&state)? {
            state = state.after_expansion(e)?;
            computations.push(e.clone());
        }
        let arms = state.plan.terminal_arms();
        let arm = *arms.choose(&mut rng).expect("at least one best arm");
        let reward = rng.gen_bool(env.probs()[arm]);
        steps.push(Step { t: state.t(), belief: state.belief().clone(), arm, reward, computations });
        state = state.after_pull(arm, reward);
    }
    Ok(Trajectory { n_arms: policy.n_arms, steps })
}

pub fn simulate_batch(
    policy: &CompiledPolicy,
    env: &Environment,
    episodes: u64,
    master_seed: u64,
) -> Vec<Trajectory> {
    (0..episodes)
        .into_par_iter()
        .map(|i| simulate_compiled(policy, env, &mut episode_rng(master_seed, i)))
        .collect()
}

/// Like [`simulate_batch`], but each episode first draws its success
/// probabilities from the uniform prior.
pub fn simulate_batch_from_prior(
    policy: &CompiledPolicy,
    episodes: u64,
    master_seed: u64,
) -> Vec<Trajectory> {
    (0..episodes)
        .into_par_iter()
        .map(|i| {
            let mut rng = episode_rng(master_seed, i);
            let probs = (0..policy.n_arms).map(|_| rng.gen::<f64>()).collect();
            let env = Environment::new(probs).expect("probabilities drawn from [0, 1)");
            simulate_compiled(policy, &env, &mut rng)
        })
        .collect()
}

/// Batch means with standard errors where the tests need them.
#[derive(Clone, Debug)]
pub struct McSummary {
    pub episodes: usize,
    pub reward_mean: f64,
    pub reward_se: f64,
    pub n_c_mean: f64,
    /// Pooled over computation events, divided by T.
    pub tau_c_mean_norm: Option<f64>,
    pub frac_with_computation: f64,
    pub tau_explore_mean: Option<f64>,
    pub entropy_mean: f64,
    pub entropy_se: f64,
}

fn mean_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    if n == 0.0 {
        return (0.0, 0.0);
    }
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn summarize(trajs: &[Trajectory], horizon: u32) -> McSummary {
    let (reward_mean, reward_se) = mean_se(trajs.iter().map(|t| t.total_reward() as f64));
    let (entropy_mean, entropy_se) = mean_se(trajs.iter().map(Trajectory::action_entropy));
    let n = trajs.len().max(1) as f64;
    let mut comps = 0usize;
    let mut comp_time = 0u64;
    let mut with_comp = 0usize;
    let mut explore = 0usize;
    let mut explore_time = 0u64;
    for tr in trajs {
        if tr.n_computations() > 0 {
            with_comp += 1;
        }
        for s in &tr.steps {
            comps += s.computations.len();
            comp_time += s.computations.len() as u64 * s.t as u64;
            if exploratory_flag(&s.belief, s.arm) {
                explore += 1;
                explore_time += s.t as u64;
            }
        }
    }
    McSummary {
        episodes: trajs.len(),
        reward_mean,
        reward_se,
        n_c_mean: comps as f64 / n,
        tau_c_mean_norm: (comps > 0).then(|| comp_time as f64 / comps as f64 / horizon as f64),
        frac_with_computation: with_comp as f64 / n,
        tau_explore_mean: (explore > 0).then(|| explore_time as f64 / explore as f64),
        entropy_mean,
        entropy_se,
    }
}
