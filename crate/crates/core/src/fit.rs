//! Maximum-likelihood fit of a softmax policy with an uncertainty bonus.
//!
//! The policy picks arm `i` with probability proportional to
//! `exp(s·(β·μ̂_i + ω·σ̂_i))`, where `μ̂` and `σ̂` are the posterior mean and
//! standard deviation and `s` is the sign convention.

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::belief::{Belief, Environment};
use crate::error::{Error, Result};
use crate::sim::{Step, Trajectory};

pub const BETA_BOUNDS: (f64, f64) = (0.0, 100.0);
pub const OMEGA_BOUNDS: (f64, f64) = (-10.0, 10.0);
const GRID: usize = 100;
const OMEGA_TOL: f64 = 1e-4;

/// Standard deviation of the Beta(α+1, β+1) posterior.
pub fn posterior_std(alpha: u32, beta: u32) -> f64 {
    let (a, b) = (alpha as f64 + 1.0, beta as f64 + 1.0);
    let s = a + b;
    (a * b / (s * s * (s + 1.0))).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeuristicParams {
    pub beta: f64,
    pub omega: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum SignConvention {
    /// Higher `β·μ̂ + ω·σ̂` makes an arm more likely.
    #[default]
    ValueSeeking,
    /// The negated exponent `-(β·μ̂ + ω·σ̂)`.
    Negated,
}

impl SignConvention {
    pub fn sign(&self) -> f64 {
        match self {
            SignConvention::ValueSeeking => 1.0,
            SignConvention::Negated => -1.0,
        }
    }
}

impl FromStr for SignConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+1" | "1" | "value-seeking" => Ok(SignConvention::ValueSeeking),
            "-1" | "negated" => Ok(SignConvention::Negated),
            other => Err(Error::Parse(format!("bad sign convention {other:?}"))),
        }
    }
}

fn features(b: &Belief) -> (Vec<f64>, Vec<f64>) {
    (0..b.n_arms())
        .map(|i| (b.mean_f64(i), posterior_std(b.successes(i) as u32, b.failures(i) as u32)))
        .unzip()
}

fn log_softmax(mu: &[f64], sigma: &[f64], p: HeuristicParams, s: f64, arm: usize) -> f64 {
    let logits: Vec<f64> =
        mu.iter().zip(sigma).map(|(m, sd)| s * (p.beta * m + p.omega * sd)).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits[arm] - lse
}

/// Choice probabilities at `b`.
pub fn heuristic_probs(b: &Belief, params: HeuristicParams, sign: SignConvention) -> Vec<f64> {
    let (mu, sigma) = features(b);
    (0..b.n_arms()).map(|i| log_softmax(&mu, &sigma, params, sign.sign(), i).exp()).collect()
}

pub fn heuristic_loglik(traj: &Trajectory, params: HeuristicParams, sign: SignConvention) -> f64 {
    Observations::new(&traj.steps).loglik(params, sign.sign())
}

/// Per-step features of a trajectory, precomputed for repeated evaluation.
struct Observations {
    mu: Vec<Vec<f64>>,
    sigma: Vec<Vec<f64>>,
    arms: Vec<usize>,
    /// Multiplicity of each observation.
    weights: Vec<f64>,
}

impl Observations {
    fn new(steps: &[Step]) -> Self {
        Self::weighted(steps.iter().map(|s| ((&s.belief, s.arm), 1.0)))
    }

    /// Every step of a batch, identical choices merged into one weighted row.
    fn pooled(trajs: &[Trajectory]) -> Self {
        let mut counts: BTreeMap<(&Belief, usize), f64> = BTreeMap::new();
        for s in trajs.iter().flat_map(|t| &t.steps) {
            *counts.entry((&s.belief, s.arm)).or_default() += 1.0;
        }
        Self::weighted(counts.into_iter())
    }

    fn weighted<'a>(rows: impl Iterator<Item = ((&'a Belief, usize), f64)>) -> Self {
        let mut obs =
            Observations { mu: Vec::new(), sigma: Vec::new(), arms: Vec::new(), weights: Vec::new() };
        for ((b, arm), w) in rows {
            let (mu, sigma) = features(b);
            obs.mu.push(mu);
            obs.sigma.push(sigma);
            obs.arms.push(arm);
            obs.weights.push(w);
        }
        obs
    }

    fn loglik(&self, p: HeuristicParams, s: f64) -> f64 {
        (0..self.arms.len())
            .map(|k| self.weights[k] * log_softmax(&self.mu[k], &self.sigma[k], p, s, self.arms[k]))
            .sum()
    }

    /// No step separates the arms by uncertainty, so `ω` has no effect.
    fn degenerate(&self) -> bool {
        self.weights.iter().sum::<f64>() < 2.0
            || self.sigma.iter().all(|sd| {
                let lo = sd.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = sd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                hi - lo < 1e-12
            })
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrajectoryFit {
    pub beta: f64,
    pub omega: f64,
    pub nll: f64,
    /// Optimum on the edge of the parameter box.
    pub boundary_hit: bool,
    /// Excluded from batch means.
    pub degenerate: bool,
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    // The endpoints matter when the minimum sits on the box edge.
    [lo, mid, hi].into_iter().min_by(|a, b| f(*a).total_cmp(&f(*b))).expect("three candidates")
}

fn fit_observations(obs: &Observations, sign: f64) -> TrajectoryFit {
    let nll = |beta: f64, omega: f64| -obs.loglik(HeuristicParams { beta, omega }, sign);
    let (b_lo, b_hi) = BETA_BOUNDS;
    let (w_lo, w_hi) = OMEGA_BOUNDS;
    let db = (b_hi - b_lo) / GRID as f64;
    let dw = (w_hi - w_lo) / GRID as f64;

    let mut best = (0.0, 0.0, nll(0.0, 0.0));
    for i in 0..GRID {
        let beta = b_lo + (i as f64 + 0.5) * db;
        for j in 0..GRID {
            let omega = w_lo + (j as f64 + 0.5) * dw;
            let v = nll(beta, omega);
            if v < best.2 {
                best = (beta, omega, v);
            }
        }
    }

    // The NLL is convex in (β, ω), so coordinate line searches over the
    // whole box converge to the constrained minimum.
    let (mut beta, mut omega, mut value) = best;
    for _ in 0..200 {
        let nb = golden_min(|b| nll(b, omega), b_lo, b_hi, 1e-7);
        let nw = golden_min(|w| nll(nb, w), w_lo, w_hi, 1e-7);
        let nv = nll(nb, nw);
        if nv > value {
            break;
        }
        let done = (nw - omega).abs() < OMEGA_TOL && (nb - beta).abs() < OMEGA_TOL;
        (beta, omega, value) = (nb, nw, nv);
        if done {
            break;
        }
    }
    let edge = 1e-3;
    TrajectoryFit {
        beta,
        omega,
        nll: value,
        boundary_hit: beta <= b_lo + edge
            || beta >= b_hi - edge
            || omega <= w_lo + edge
            || omega >= w_hi - edge,
        degenerate: obs.degenerate(),
    }
}

pub fn fit_trajectory(traj: &Trajectory, sign: SignConvention) -> TrajectoryFit {
    fit_observations(&Observations::new(&traj.steps), sign.sign())
}

/// One `(β, ω)` maximizing the likelihood of the whole batch at once.
pub fn fit_pooled(trajs: &[Trajectory], sign: SignConvention) -> Result<TrajectoryFit> {
    if trajs.is_empty() {
        return Err(Error::InvalidArgument("no trajectories to fit".into()));
    }
    Ok(fit_observations(&Observations::pooled(trajs), sign.sign()))
}

#[derive(Clone, Debug, Serialize)]
pub struct FitSummary {
    pub sign_convention: SignConvention,
    pub n_trajectories: usize,
    pub n_degenerate: usize,
    pub mean_omega: Option<f64>,
    pub sd_omega: Option<f64>,
    pub se_omega: Option<f64>,
    pub mean_beta: Option<f64>,
    pub boundary_hit_rate: f64,
    #[serde(skip)]
    pub fits: Vec<TrajectoryFit>,
}

/// Fits every trajectory and averages `ω` over the non-degenerate ones.
/// Identical trajectories are fitted once.
pub fn fit_omega(trajs: &[Trajectory], sign: SignConvention) -> Result<FitSummary> {
    if trajs.is_empty() {
        return Err(Error::InvalidArgument("no trajectories to fit".into()));
    }
    let mut unique: HashMap<Vec<(Belief, usize)>, usize> = HashMap::new();
    let mut reps: Vec<&Trajectory> = Vec::new();
    let slot: Vec<usize> = trajs
        .iter()
        .map(|t| {
            let key: Vec<(Belief, usize)> =
                t.steps.iter().map(|s| (s.belief.clone(), s.arm)).collect();
            *unique.entry(key).or_insert_with(|| {
                reps.push(t);
                reps.len() - 1
            })
        })
        .collect();
    let fitted: Vec<TrajectoryFit> = reps.par_iter().map(|t| fit_trajectory(t, sign)).collect();
    let fits: Vec<TrajectoryFit> = slot.iter().map(|&i| fitted[i]).collect();

    let used: Vec<&TrajectoryFit> = fits.iter().filter(|f| !f.degenerate).collect();
    let n = used.len() as f64;
    let mean = |g: fn(&TrajectoryFit) -> f64| (n > 0.0).then(|| used.iter().map(|f| g(f)).sum::<f64>() / n);
    let mean_omega = mean(|f| f.omega);
    let sd_omega = mean_omega.filter(|_| n > 1.0).map(|m| {
        (used.iter().map(|f| (f.omega - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    });
    Ok(FitSummary {
        sign_convention: sign,
        n_trajectories: fits.len(),
        n_degenerate: fits.len() - used.len(),
        mean_omega,
        se_omega: sd_omega.map(|sd| sd / n.sqrt()),
        sd_omega,
        mean_beta: mean(|f| f.beta),
        boundary_hit_rate: if n > 0.0 {
            used.iter().filter(|f| f.boundary_hit).count() as f64 / n
        } else {
            0.0
        },
        fits,
    })
}

/// One episode of the heuristic policy itself.
pub fn simulate_heuristic_episode<R: Rng>(
    params: HeuristicParams,
    sign: SignConvention,
    env: &Environment,
    horizon: u32,
    rng: &mut R,
) -> Trajectory {
    let n = env.n_arms();
    let mut b = Belief::zero(n);
    let mut steps = Vec::with_capacity(horizon as usize);
    for t in 0..horizon {
        let probs = heuristic_probs(&b, params, sign);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut arm = n - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                arm = i;
                break;
            }
        }
        let reward = rng.gen_bool(env.probs()[arm]);
        steps.push(Step { t, belief: b.clone(), arm, reward, computations: Vec::new() });
        b = b.after(arm, reward);
    }
    Trajectory { n_arms: n, steps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::episode_rng;

    fn traj(steps: &[(&[(u8, u8)], usize)]) -> Trajectory {
        Trajectory {
            n_arms: 2,
            steps: steps
                .iter()
                .enumerate()
                .map(|(t, (b, arm))| Step {
                    t: t as u32,
                    belief: Belief::from_pairs(b),
                    arm: *arm,
                    reward: false,
                    computations: Vec::new(),
                })
                .collect(),
        }
    }

    #[test]
    fn posterior_std_values() {
        assert!((posterior_std(0, 0) - (1.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!((posterior_std(1, 0) - (1.0f64 / 18.0).sqrt()).abs() < 1e-15);
        assert!(posterior_std(10_000, 10_000) < 0.004);
    }

    #[test]
    fn loglik_limits() {
        let single = traj(&[(&[(0, 0), (0, 0)], 1)]);
        for (beta, omega) in [(0.0, 0.0), (50.0, -3.0), (99.0, 9.0)] {
            let p = HeuristicParams { beta, omega };
            let ll = heuristic_loglik(&single, p, SignConvention::ValueSeeking);
            assert!((ll - 0.5f64.ln()).abs() < 1e-12);
        }
        let greedy = traj(&[(&[(3, 0), (0, 3)], 0), (&[(4, 0), (0, 3)], 0)]);
        let p = HeuristicParams { beta: 1000.0, omega: 0.0 };
        assert!(heuristic_loglik(&greedy, p, SignConvention::ValueSeeking).abs() < 1e-9);
        let uniform = HeuristicParams { beta: 0.0, omega: 0.0 };
        let ll = heuristic_loglik(&greedy, uniform, SignConvention::Negated);
        assert!((ll - 2.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn probabilities_normalize() {
        let b = Belief::from_pairs(&[(2, 1), (0, 4), (1, 1)]);
        for sign in [SignConvention::ValueSeeking, SignConvention::Negated] {
            let p = heuristic_probs(&b, HeuristicParams { beta: 37.0, omega: -4.5 }, sign);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_and_baseline() {
        let single = traj(&[(&[(0, 0), (0, 0)], 1)]);
        assert!(fit_trajectory(&single, SignConvention::ValueSeeking).degenerate);
        let env = Environment::new(vec![0.4, 0.7]).unwrap();
        let p = HeuristicParams { beta: 10.0, omega: 2.0 };
        for i in 0..20 {
            let tr = simulate_heuristic_episode(p, SignConvention::ValueSeeking, &env, 8, &mut episode_rng(1, i));
            let f = fit_trajectory(&tr, SignConvention::ValueSeeking);
            let base = -heuristic_loglik(&tr, HeuristicParams { beta: 0.0, omega: 0.0 }, SignConvention::ValueSeeking);
            assert!(f.nll <= base + 1e-12);
        }
    }

    #[test]
    fn golden_section_finds_minimum() {
        let x = golden_min(|x| (x - 2.5).powi(2), 0.0, 10.0, 1e-9);
        assert!((x - 2.5).abs() < 1e-6);
        let edge = golden_min(|x| x, 0.0, 10.0, 1e-9);
        assert_eq!(edge, 0.0);
    }
}
