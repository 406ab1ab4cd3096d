//! One metrics row per (cost, environment).
//!
//! Rows are appended and flushed cost by cost. A resume marker holding the
//! resolved configuration and the number of finished rows is kept next to
//! the CSV until the sweep completes; `--resume` continues from it.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use meta_bamdp::evaluate::{evaluate_bayes, evaluate_in_env, Agent, CompiledPolicy};
use meta_bamdp::fit::{fit_omega, FitSummary, SignConvention};
use meta_bamdp::metrics::{normalized_reward, normalized_reward_exact, MetricsRecord, CSV_HEADER};
use meta_bamdp::rational::{format_rational, to_f64};
use meta_bamdp::sim::{simulate_batch, simulate_batch_from_prior, summarize, Trajectory};
use meta_bamdp::{Environment, Rational};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{env_seed, policy_source, write_atomic};
use crate::config::{EnvSet, Resolved};
use crate::error::{CliError, CliResult};

pub const METRICS_FILE: &str = "metrics.csv";
pub const MARKER_FILE: &str = "sweep.resume.json";
/// One JSON object per fitted row, in CSV order.
pub const FIT_FILE: &str = "fit_summary.jsonl";

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct Marker {
    snapshot: String,
    rows_done: usize,
}

/// Exact values of the two reference policies in one environment.
pub struct Baseline {
    v_g: f64,
    v_star: f64,
    exact: Option<(Rational, Rational)>,
}

pub fn baselines(r: &Resolved, qstar: &meta_bamdp::QStarTable) -> CliResult<Vec<Baseline>> {
    let (n, t) = (r.config.n_arms, r.config.horizon);
    let greedy = CompiledPolicy::compile(Agent::Greedy, n, t)?;
    let bayes = CompiledPolicy::compile(Agent::BayesOptimal(qstar), n, t)?;
    Ok(match &r.envs {
        EnvSet::UniformMixture => {
            let g = evaluate_bayes(&greedy).reward;
            let s = evaluate_bayes(&bayes).reward;
            vec![Baseline { v_g: to_f64(&g), v_star: to_f64(&s), exact: Some((g, s)) }]
        }
        EnvSet::Fixed { envs, .. } => envs
            .iter()
            .map(|e| Baseline {
                v_g: evaluate_in_env(&greedy, e).reward,
                v_star: evaluate_in_env(&bayes, e).reward,
                exact: None,
            })
            .collect(),
    })
}

pub fn simulate(policy: &CompiledPolicy, env: Option<&Environment>, episodes: u64, seed: u64) -> Vec<Trajectory> {
    match env {
        Some(e) => simulate_batch(policy, e, episodes, seed),
        None => simulate_batch_from_prior(policy, episodes, seed),
    }
}

/// Monte-Carlo columns: entropy, and `ω` when fitting.
pub fn mc_columns(
    policy: &CompiledPolicy,
    env: Option<&Environment>,
    episodes: u64,
    seed: u64,
    fit: Option<SignConvention>,
) -> CliResult<(f64, Option<FitSummary>)> {
    let trajs = simulate(policy, env, episodes, seed);
    let summary = summarize(&trajs, policy.horizon);
    let fit = fit.map(|sign| fit_omega(&trajs, sign)).transpose()?;
    Ok((summary.entropy_mean, fit))
}

pub fn base_record(r: &Resolved, c: &Rational, env: Option<&Environment>) -> MetricsRecord {
    let probs = env.map(|e| e.probs());
    MetricsRecord {
        n_arms: r.config.n_arms,
        horizon: r.config.horizon,
        c: to_f64(c),
        env_p1: probs.map(|p| p[0]),
        env_p2: probs.map(|p| p[1]),
        env_kind: r.envs.kind(),
        v: None,
        v_g: None,
        v_star: None,
        v_n: None,
        n_c_mean: None,
        tau_c_mean_norm: None,
        tau_explore_mean: None,
        h_pi_bits: None,
        omega: None,
        seed: None,
        episodes: r.config.episodes,
    }
}

#[derive(Serialize)]
pub struct FitRow {
    pub c: String,
    pub env: Option<Vec<f64>>,
    #[serde(flatten)]
    pub summary: FitSummary,
}

fn row(
    r: &Resolved,
    c: &Rational,
    policy: &CompiledPolicy,
    index: usize,
    env: Option<&Environment>,
    base: &Baseline,
) -> CliResult<(MetricsRecord, Option<FitSummary>)> {
    let t = r.config.horizon;
    let mut rec = base_record(r, c, env);
    let (v, n_c, tau_c, tau_x, v_n) = match env {
        None => {
            let ev = evaluate_bayes(policy);
            let (g, s) = base.exact.as_ref().expect("mixture baselines are exact");
            let v_n = normalized_reward_exact(&ev.reward, g, s).ok().map(|x| to_f64(&x));
            (to_f64(&ev.reward), to_f64(&ev.n_computations), ev.tau_c_mean_norm(t), ev.tau_explore_mean(), v_n)
        }
        Some(e) => {
            let ev = evaluate_in_env(policy, e);
            let v_n = normalized_reward(ev.reward, base.v_g, base.v_star).ok();
            (ev.reward, ev.n_computations, ev.tau_c_mean_norm(t), ev.tau_explore_mean(), v_n)
        }
    };
    rec.v = Some(v);
    rec.v_g = Some(base.v_g);
    rec.v_star = Some(base.v_star);
    rec.v_n = v_n;
    rec.n_c_mean = Some(n_c);
    rec.tau_c_mean_norm = tau_c;
    rec.tau_explore_mean = tau_x;
    let mut fit = None;
    if r.config.episodes > 0 {
        let seed = env_seed(r.config.seed, index);
        let (h, f) = mc_columns(policy, env, r.config.episodes, seed, r.config.fit.then_some(r.sign))?;
        rec.h_pi_bits = Some(h);
        rec.omega = f.as_ref().and_then(|f| f.mean_omega);
        rec.seed = Some(r.config.seed);
        fit = f;
    }
    Ok((rec, fit))
}

/// Keeps the first `keep` lines of a file; false when it has fewer or the
/// first line is not `header`.
fn truncate_lines(path: &Path, keep: usize, header: Option<&str>) -> CliResult<bool> {
    let Ok(file) = File::open(path) else { return Ok(keep == 0) };
    let lines: Vec<String> = BufReader::new(file).lines().take(keep).collect::<Result<_, _>>()?;
    if lines.len() != keep || header.is_some_and(|h| lines.first().map(String::as_str) != Some(h)) {
        return Ok(false);
    }
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    fs::write(path, text)?;
    Ok(true)
}

pub fn run(r: &Resolved, resume: bool) -> CliResult<PathBuf> {
    if r.config.fit && r.config.episodes == 0 {
        return Err(CliError::Config("fitting needs episodes > 0".into()));
    }
    let snapshot = r.snapshot_text("sweep")?;
    r.write_snapshot("sweep")?;
    let out = r.out_dir();
    let csv_path = out.join(METRICS_FILE);
    let fit_path = out.join(FIT_FILE);
    let marker_path = out.join(MARKER_FILE);
    let fitting = r.config.fit;

    let mut done = 0;
    if resume {
        if let Ok(text) = fs::read_to_string(&marker_path) {
            let marker: Marker = serde_json::from_str(&text)
                .map_err(|e| CliError::Runtime(format!("unreadable resume marker: {e}")))?;
            if marker.snapshot != snapshot {
                return Err(CliError::Config("resume marker was written for a different configuration".into()));
            }
            let n = marker.rows_done;
            if truncate_lines(&csv_path, n + 1, Some(CSV_HEADER))?
                && (!fitting || truncate_lines(&fit_path, n, None)?)
            {
                done = marker.rows_done;
                eprintln!("resuming after {done} rows");
            }
        }
    }
    if done == 0 {
        fs::write(&csv_path, format!("{CSV_HEADER}\n"))?;
        if fitting {
            fs::write(&fit_path, "")?;
        } else if fit_path.exists() {
            fs::remove_file(&fit_path)?;
        }
    }
    let mut csv = OpenOptions::new().append(true).open(&csv_path)?;
    let mut fit_out = if fitting { Some(OpenOptions::new().append(true).open(&fit_path)?) } else { None };

    let mut src = policy_source(r)?;
    let bases = baselines(r, &src.qstar)?;
    let points = r.envs.points();
    let mut rows = 0;
    for c in &r.costs {
        if rows + points.len() <= done {
            rows += points.len();
            continue;
        }
        let (policy, _) = src.get(c)?;
        let compiled = CompiledPolicy::compile(Agent::Meta(&policy), r.config.n_arms, r.config.horizon)?;
        let results: Vec<(usize, MetricsRecord, Option<FitSummary>)> = points
            .par_iter()
            .enumerate()
            .skip(done.saturating_sub(rows))
            .map(|(i, env)| row(r, c, &compiled, i, *env, &bases[i]).map(|(rec, f)| (i, rec, f)))
            .collect::<CliResult<_>>()?;
        for (i, rec, fit) in results {
            writeln!(csv, "{}", rec.to_csv_row())?;
            if let (Some(out), Some(summary)) = (fit_out.as_mut(), fit) {
                let env = points[i].map(|e| e.probs().to_vec());
                writeln!(out, "{}", serde_json::to_string(&FitRow { c: format_rational(c), env, summary })?)?;
            }
        }
        rows += points.len();
        csv.flush()?;
        if let Some(out) = fit_out.as_mut() {
            out.flush()?;
        }
        let marker = Marker { snapshot: snapshot.clone(), rows_done: rows };
        write_atomic(&marker_path, &serde_json::to_string(&marker)?)?;
    }
    fs::remove_file(&marker_path)?;
    println!("wrote {rows} rows to {}", csv_path.display());
    Ok(csv_path)
}
