//! Beta-Bernoulli beliefs over the arms of a bandit task.
//!
//! A belief stores, per arm, the number of observed successes and failures.
//! Under the uniform Beta(1,1) prior these counts are a sufficient statistic
//! for the posterior, and their total is the elapsed time.

use std::fmt;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::rational::{frac, Rational};

/// Per-arm (successes, failures) counts, laid out as `[α1, β1, α2, β2, ...]`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Belief {
    counts: SmallVec<[u8; 8]>,
}

impl Belief {
    /// The all-zero belief with `n_arms` arms.
    pub fn zero(n_arms: usize) -> Self {
        Belief { counts: SmallVec::from_elem(0, 2 * n_arms) }
    }

    /// Builds a belief from `(successes, failures)` pairs.
    pub fn from_pairs(pairs: &[(u8, u8)]) -> Self {
        let mut counts = SmallVec::with_capacity(pairs.len() * 2);
        for &(a, b) in pairs {
            counts.push(a);
            counts.push(b);
        }
        Belief { counts }
    }

    pub fn from_counts(counts: &[u8]) -> Result<Self> {
        if counts.len() < 4 || !counts.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "belief needs an even number (>= 4) of counts, got {}",
                counts.len()
            )));
        }
        Ok(Belief { counts: SmallVec::from_slice(counts) })
    }

    pub fn counts(&self) -> &[u8] {
        &self.counts
    }

    pub fn n_arms(&self) -> usize {
        self.counts.len() / 2
    }

    pub fn successes(&self, arm: usize) -> u8 {
        self.counts[2 * arm]
    }

    pub fn failures(&self, arm: usize) -> u8 {
        self.counts[2 * arm + 1]
    }

    /// Number of times `arm` has been pulled.
    pub fn pulls(&self, arm: usize) -> u32 {
        self.successes(arm) as u32 + self.failures(arm) as u32
    }

    /// Elapsed time, i.e. the total number of pulls so far.
    pub fn elapsed(&self) -> u32 {
        self.counts.iter().map(|&c| c as u32).sum()
    }

    /// Pulls left before `horizon`; zero once the horizon is reached.
    pub fn remaining(&self, horizon: u32) -> u32 {
        horizon.saturating_sub(self.elapsed())
    }

    /// Belief after observing `win` (or a loss) on `arm`.
    pub fn after(&self, arm: usize, win: bool) -> Belief {
        let mut next = self.clone();
        next.counts[2 * arm + usize::from(!win)] += 1;
        next
    }

    /// Posterior predictive success probability of `arm`.
    pub fn mean(&self, arm: usize) -> Rational {
        posterior_mean(self.successes(arm) as u32, self.failures(arm) as u32)
    }

    pub fn mean_f64(&self, arm: usize) -> f64 {
        (self.successes(arm) as f64 + 1.0) / (self.pulls(arm) as f64 + 2.0)
    }

    /// All arms whose posterior mean is maximal, in increasing order.
    pub fn greedy_arms(&self) -> Vec<usize> {
        let means: Vec<Rational> = (0..self.n_arms()).map(|i| self.mean(i)).collect();
        argmax_set(&means)
    }

    /// Lexicographically smallest greedy arm.
    pub fn greedy_arm(&self) -> usize {
        self.greedy_arms()[0]
    }

    /// Applies an arm permutation: arm `i` of the result is arm `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Belief {
        let pairs: Vec<(u8, u8)> =
            perm.iter().map(|&src| (self.successes(src), self.failures(src))).collect();
        Belief::from_pairs(&pairs)
    }

    /// Canonical text form: counts joined by `.`.
    pub fn key(&self) -> String {
        let parts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        parts.join(".")
    }

    pub fn parse_key(s: &str) -> Result<Belief> {
        let counts = s
            .split('.')
            .map(|p| p.parse::<u8>().map_err(|_| Error::Parse(format!("bad belief key {s:?}"))))
            .collect::<Result<Vec<u8>>>()?;
        Belief::from_counts(&counts)
    }
}

impl fmt::Debug for Belief {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for arm in 0..self.n_arms() {
            if arm > 0 {
                write!(f, ",")?;
            }
            write!(f, "({},{})", self.successes(arm), self.failures(arm))?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Belief {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Indices attaining the maximum, increasing.
pub fn argmax_set<T: PartialOrd>(values: &[T]) -> Vec<usize> {
    let mut best: Vec<usize> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        match best.first() {
            None => best.push(i),
            Some(&b) => {
                if *v > values[b] {
                    best.clear();
                    best.push(i);
                } else if *v == values[b] {
                    best.push(i);
                }
            }
        }
    }
    best
}

/// `(α+1)/(α+β+2)`, the Beta(1,1)-posterior mean.
pub fn posterior_mean(successes: u32, failures: u32) -> Rational {
    frac(successes as i64 + 1, successes as i64 + failures as i64 + 2)
}

/// Stationary reward probabilities of the arms.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    probs: Vec<f64>,
}

impl Environment {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidArgument("environment needs at least 2 arms".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidArgument(format!("reward probability {p} outside [0,1]")));
        }
        Ok(Environment { probs })
    }

    pub fn symmetric(n_arms: usize, p: f64) -> Result<Self> {
        Environment::new(vec![p; n_arms])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_arms(&self) -> usize {
        self.probs.len()
    }
}

pub(crate) fn check_problem(n_arms: usize, horizon: u32) -> Result<()> {
    if n_arms < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 arms, got {n_arms}")));
    }
    if horizon < 1 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if horizon > u8::MAX as u32 {
        return Err(Error::InvalidArgument(format!("horizon {horizon} too large")));
    }
    Ok(())
}

/// Number of beliefs with `n_arms` arms and at most `horizon` pulls: C(T+2N, 2N).
pub fn belief_count(n_arms: usize, horizon: u32) -> u128 {
    let k = 2 * n_arms as u128;
    let n = horizon as u128 + k;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Beliefs with exactly `t` pulls, in lexicographic order.
pub fn beliefs_at(n_arms: usize, t: u32) -> Vec<Belief> {
    fn rec(slots: usize, left: u32, prefix: &mut Vec<u8>, out: &mut Vec<Belief>) {
        if slots == 1 {
            prefix.push(left as u8);
            out.push(Belief { counts: SmallVec::from_slice(prefix) });
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c as u8);
            rec(slots - 1, left - c, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(2 * n_arms, t, &mut Vec::with_capacity(2 * n_arms), &mut out);
    out
}

/// Every belief reachable within `horizon` pulls.
pub fn enumerate_beliefs(n_arms: usize, horizon: u32) -> Result<Vec<Belief>> {
    check_problem(n_arms, horizon)?;
    Ok((0..=horizon).flat_map(|t| beliefs_at(n_arms, t)).collect())
}
