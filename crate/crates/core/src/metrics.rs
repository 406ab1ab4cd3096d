//! Behavioral observables and the metrics CSV contract.

use std::fmt::Write as _;

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::rational::Rational;

/// `(V - V^g) / (V* - V^g)`.
pub fn normalized_reward(v: f64, v_g: f64, v_star: f64) -> Result<f64> {
    let den = v_star - v_g;
    if den == 0.0 {
        return Err(Error::DegenerateNormalization);
    }
    Ok((v - v_g) / den)
}

pub fn normalized_reward_exact(v: &Rational, v_g: &Rational, v_star: &Rational) -> Result<Rational> {
    if v_star == v_g {
        return Err(Error::DegenerateNormalization);
    }
    Ok((v - v_g) / (v_star - v_g))
}

/// True when `arm` has a lower posterior mean than the best arm, or ties it
/// while having been pulled strictly less often than another tied arm.
pub fn exploratory_flag(b: &Belief, arm: usize) -> bool {
    let means: Vec<Rational> = (0..b.n_arms()).map(|i| b.mean(i)).collect();
    let best = means.iter().max().expect("at least two arms");
    if means[arm] < *best {
        return true;
    }
    (0..b.n_arms()).any(|j| j != arm && means[j] == means[arm] && b.pulls(j) > b.pulls(arm))
}

/// Shannon entropy in bits of a histogram of counts.
pub fn histogram_entropy_bits(counts: &[u32]) -> f64 {
    let total: u32 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// `∫ (dX/dc)² dc` on a uniform grid: central differences inside, one-sided
/// at the ends, trapezoidal quadrature.
pub fn sensitivity(cs: &[f64], xs: &[f64]) -> Result<f64> {
    let n = cs.len();
    if n < 3 {
        return Err(Error::GridTooSmall(n));
    }
    if xs.len() != n {
        return Err(Error::InvalidArgument(format!("{} costs but {} samples", n, xs.len())));
    }
    let h = (cs[n - 1] - cs[0]) / (n - 1) as f64;
    if h <= 0.0 {
        return Err(Error::InvalidArgument("cost grid must be increasing".into()));
    }
    let uniform = cs.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0));
    if !uniform {
        return Err(Error::InvalidArgument("cost grid must be uniform".into()));
    }
    let d: Vec<f64> = (0..n)
        .map(|i| match i {
            0 => (xs[1] - xs[0]) / h,
            i if i == n - 1 => (xs[n - 1] - xs[n - 2]) / h,
            i => (xs[i + 1] - xs[i - 1]) / (2.0 * h),
        })
        .collect();
    let sq: Vec<f64> = d.iter().map(|v| v * v).collect();
    let inner: f64 = sq[1..n - 1].iter().sum();
    Ok(h * (inner + 0.5 * (sq[0] + sq[n - 1])))
}

/// The environment with the most expected computations; ties go to the
/// smallest `p`. `None` when nothing computes anywhere.
pub fn most_computed_env(ps: &[f64], counts: &[f64]) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for (&p, &n) in ps.iter().zip(counts) {
        if n <= 0.0 {
            continue;
        }
        match best {
            Some((bp, bn)) if n < bn || (n == bn && p >= bp) => {}
            _ => best = Some((p, n)),
        }
    }
    best.map(|(p, _)| p)
}

pub const CSV_HEADER: &str = "N,T,c,env_p1,env_p2,env_kind,V,V_g,V_star,V_N,n_c_mean,\
tau_c_mean_norm,tau_explore_mean,H_pi_bits,omega,seed,episodes";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    Explicit,
    Symmetric,
    UniformMixture,
}

impl EnvKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvKind::Explicit => "explicit",
            EnvKind::Symmetric => "symmetric",
            EnvKind::UniformMixture => "uniform-mixture",
        }
    }
}

/// One row of the metrics CSV. Optional fields are written as empty cells.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub n_arms: usize,
    pub horizon: u32,
    pub c: f64,
    pub env_p1: Option<f64>,
    pub env_p2: Option<f64>,
    pub env_kind: EnvKind,
    pub v: Option<f64>,
    pub v_g: Option<f64>,
    pub v_star: Option<f64>,
    pub v_n: Option<f64>,
    pub n_c_mean: Option<f64>,
    pub tau_c_mean_norm: Option<f64>,
    pub tau_explore_mean: Option<f64>,
    pub h_pi_bits: Option<f64>,
    pub omega: Option<f64>,
    pub seed: Option<u64>,
    pub episodes: u64,
}

/// 17 significant digits, enough to round-trip an `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

impl MetricsRecord {
    pub fn to_csv_row(&self) -> String {
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n_arms,
            self.horizon,
            format_float(self.c),
            opt(self.env_p1),
            opt(self.env_p2),
            self.env_kind.as_str(),
            opt(self.v),
            opt(self.v_g),
            opt(self.v_star),
            opt(self.v_n),
            opt(self.n_c_mean),
            opt(self.tau_c_mean_norm),
            opt(self.tau_explore_mean),
            opt(self.h_pi_bits),
            opt(self.omega),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.episodes,
        )
        .expect("writing to a String");
        s
    }

    pub fn parse_csv_row(line: &str) -> Result<MetricsRecord> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 17 {
            return Err(Error::Parse(format!("expected 17 fields, got {}", f.len())));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| Error::Parse(format!("bad number {s:?}")))
            }
        };
        let req = |s: &str| -> Result<f64> {
            num(s)?.ok_or_else(|| Error::Parse("missing required field".into()))
        };
        let env_kind = match f[5] {
            "explicit" => EnvKind::Explicit,
            "symmetric" => EnvKind::Symmetric,
            "uniform-mixture" => EnvKind::UniformMixture,
            other => return Err(Error::Parse(format!("bad env kind {other:?}"))),
        };
        let int = |s: &str| s.parse::<u64>().map_err(|_| Error::Parse(format!("bad integer {s:?}")));
        Ok(MetricsRecord {
            n_arms: int(f[0])? as usize,
            horizon: int(f[1])? as u32,
            c: req(f[2])?,
            env_p1: num(f[3])?,
            env_p2: num(f[4])?,
            env_kind,
            v: num(f[6])?,
            v_g: num(f[7])?,
            v_star: num(f[8])?,
            v_n: num(f[9])?,
            n_c_mean: num(f[10])?,
            tau_c_mean_norm: num(f[11])?,
            tau_explore_mean: num(f[12])?,
            h_pi_bits: num(f[13])?,
            omega: num(f[14])?,
            seed: if f[15].is_empty() { None } else { Some(int(f[15])?) },
            episodes: int(f[16])?,
        })
    }
}
