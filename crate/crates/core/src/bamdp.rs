//! Exact backward induction for the Bernoulli-bandit BAMDP.
//!
//! Values are exact rationals: the pruning rules downstream compare
//! quantities that coincide in degenerate cases, and floating point
//! would flip those comparisons.

use std::collections::HashMap;

use num_traits::Zero;

use crate::belief::{argmax_set, belief_count, beliefs_at, check_problem, Belief};
use crate::error::{Error, Result};
use crate::rational::{int, one, zero, Rational};

/// Default cap on the belief lattice size.
pub const DEFAULT_BELIEF_CAP: usize = 5_000_000;

/// Optimal action-values `Q*(b, i)` for every belief with `t(b) < T`.
#[derive(Clone, Debug)]
pub struct QStarTable {
    n_arms: usize,
    horizon: u32,
    q: HashMap<Belief, Vec<Rational>>,
}

impl QStarTable {
    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Per-arm values at `b`; `None` at the horizon or for unknown beliefs.
    pub fn q(&self, b: &Belief) -> Option<&[Rational]> {
        self.q.get(b).map(Vec::as_slice)
    }

    pub fn q_arm(&self, b: &Belief, arm: usize) -> Rational {
        self.q(b).map(|q| q[arm].clone()).unwrap_or_else(zero)
    }

    /// `V*(b)`, zero at the horizon.
    pub fn value(&self, b: &Belief) -> Rational {
        match self.q(b) {
            Some(q) => q.iter().max().cloned().unwrap_or_else(zero),
            None => zero(),
        }
    }

    /// Arms attaining `V*(b)`.
    pub fn optimal_arms(&self, b: &Belief) -> Vec<usize> {
        match self.q(b) {
            Some(q) => argmax_set(q),
            None => Vec::new(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Belief, &[Rational])> {
        self.q.iter().map(|(b, q)| (b, q.as_slice()))
    }
}

fn check_cap(n_arms: usize, horizon: u32, cap: usize) -> Result<()> {
    if belief_count(n_arms, horizon) > cap as u128 {
        return Err(Error::ResourceCap { what: "belief lattice", cap });
    }
    Ok(())
}

/// One-step lookahead `p(1 + V(win)) + (1-p) V(loss)`.
pub(crate) fn lookahead(p: &Rational, v_win: &Rational, v_loss: &Rational) -> Rational {
    p * (one() + v_win) + (one() - p) * v_loss
}

/// Solves the BAMDP exactly with the default lattice cap.
pub fn solve_bamdp_exact(n_arms: usize, horizon: u32) -> Result<QStarTable> {
    solve_bamdp_exact_capped(n_arms, horizon, DEFAULT_BELIEF_CAP)
}

pub fn solve_bamdp_exact_capped(n_arms: usize, horizon: u32, cap: usize) -> Result<QStarTable> {
    check_problem(n_arms, horizon)?;
    check_cap(n_arms, horizon, cap)?;
    let mut q: HashMap<Belief, Vec<Rational>> = HashMap::new();
    // V* on the next layer; the horizon layer is implicitly zero.
    let mut next_v: HashMap<Belief, Rational> = HashMap::new();
    for t in (0..horizon).rev() {
        let mut layer_v = HashMap::new();
        for b in beliefs_at(n_arms, t) {
            let qs: Vec<Rational> = (0..n_arms)
                .map(|arm| {
                    let vw = next_v.get(&b.after(arm, true)).cloned().unwrap_or_else(zero);
                    let vl = next_v.get(&b.after(arm, false)).cloned().unwrap_or_else(zero);
                    lookahead(&b.mean(arm), &vw, &vl)
                })
                .collect();
            let v = qs.iter().max().cloned().unwrap_or_else(zero);
            layer_v.insert(b.clone(), v);
            q.insert(b, qs);
        }
        next_v = layer_v;
    }
    Ok(QStarTable { n_arms, horizon, q })
}

/// Bayes value of the greedy policy from every belief with `t < T`.
///
/// Ties between arms with equal posterior mean are broken uniformly at
/// random, so the value averages over the tied branches.
pub fn greedy_values(n_arms: usize, horizon: u32) -> Result<HashMap<Belief, Rational>> {
    check_problem(n_arms, horizon)?;
    check_cap(n_arms, horizon, DEFAULT_BELIEF_CAP)?;
    let mut values: HashMap<Belief, Rational> = HashMap::new();
    for t in (0..horizon).rev() {
        for b in beliefs_at(n_arms, t) {
            let arms = b.greedy_arms();
            let mut total = Rational::zero();
            for &arm in &arms {
                let vw = values.get(&b.after(arm, true)).cloned().unwrap_or_else(zero);
                let vl = values.get(&b.after(arm, false)).cloned().unwrap_or_else(zero);
                total += lookahead(&b.mean(arm), &vw, &vl);
            }
            values.insert(b, total / int(arms.len() as i64));
        }
    }
    Ok(values)
}

/// `V^g(𝟘)`.
pub fn greedy_value(n_arms: usize, horizon: u32) -> Result<Rational> {
    let values = greedy_values(n_arms, horizon)?;
    Ok(values[&Belief::zero(n_arms)].clone())
}
