//! Fits the uncertainty-bonus heuristic to simulated behavior.

use std::fs::{self, OpenOptions};
use std::io::Write;

use meta_bamdp::evaluate::{Agent, CompiledPolicy};
use meta_bamdp::fit::{fit_omega, simulate_heuristic_episode, HeuristicParams};
use meta_bamdp::metrics::CSV_HEADER;
use meta_bamdp::rational::format_rational;
use meta_bamdp::sim::episode_rng;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::sweep::{base_record, mc_columns, FitRow, METRICS_FILE};
use super::{env_seed, policy_source, write_atomic};
use crate::config::Resolved;
use crate::error::{CliError, CliResult};

pub fn parse_heuristic(s: &str) -> CliResult<HeuristicParams> {
    let bad = || CliError::Config(format!("expected BETA,OMEGA, got {s:?}"));
    let (b, w) = s.split_once(',').ok_or_else(bad)?;
    Ok(HeuristicParams {
        beta: b.trim().parse().map_err(|_| bad())?,
        omega: w.trim().parse().map_err(|_| bad())?,
    })
}

#[derive(Serialize)]
struct HeuristicRow {
    generating: HeuristicParams,
    env: Option<Vec<f64>>,
    #[serde(flatten)]
    summary: meta_bamdp::fit::FitSummary,
}

pub fn run(r: &Resolved, heuristic: Option<HeuristicParams>) -> CliResult<()> {
    let episodes = r.config.episodes;
    if episodes == 0 {
        return Err(CliError::Config("fit needs episodes > 0".into()));
    }
    r.write_snapshot("fit")?;
    let out = r.out_dir();
    let points = r.envs.points();

    if let Some(params) = heuristic {
        // Recovery check: fit data generated by the heuristic itself.
        let mut rows = Vec::new();
        for (i, env) in points.iter().enumerate() {
            let seed = env_seed(r.config.seed, i);
            let trajs: Vec<_> = (0..episodes)
                .into_par_iter()
                .map(|k| {
                    let mut rng = episode_rng(seed, k);
                    let env = match env {
                        Some(e) => (*e).clone(),
                        None => {
                            let probs = (0..r.config.n_arms).map(|_| rng.gen::<f64>()).collect();
                            meta_bamdp::Environment::new(probs).expect("drawn from [0, 1)")
                        }
                    };
                    simulate_heuristic_episode(params, r.sign, &env, r.config.horizon, &mut rng)
                })
                .collect();
            let summary = fit_omega(&trajs, r.sign)?;
            println!(
                "env {:?}: mean omega {} over {} fits",
                env.map(|e| e.probs()),
                summary.mean_omega.map_or("n/a".into(), |w| format!("{w:.4}")),
                summary.n_trajectories - summary.n_degenerate
            );
            rows.push(HeuristicRow { generating: params, env: env.map(|e| e.probs().to_vec()), summary });
        }
        write_atomic(&out.join("fit_summary.json"), &(serde_json::to_string_pretty(&rows)? + "\n"))?;
        return Ok(());
    }

    let csv_path = out.join(METRICS_FILE);
    if !csv_path.exists() {
        fs::write(&csv_path, format!("{CSV_HEADER}\n"))?;
    }
    let mut csv = OpenOptions::new().append(true).open(&csv_path)?;
    let mut src = policy_source(r)?;
    let mut fits = Vec::new();
    for c in &r.costs {
        let (policy, _) = src.get(c)?;
        let compiled = CompiledPolicy::compile(Agent::Meta(&policy), r.config.n_arms, r.config.horizon)?;
        for (i, env) in points.iter().enumerate() {
            let seed = env_seed(r.config.seed, i);
            let (h, summary) = mc_columns(&compiled, *env, episodes, seed, Some(r.sign))?;
            let summary = summary.expect("fit requested");
            let mut rec = base_record(r, c, *env);
            rec.h_pi_bits = Some(h);
            rec.omega = summary.mean_omega;
            rec.seed = Some(r.config.seed);
            writeln!(csv, "{}", rec.to_csv_row())?;
            fits.push(FitRow { c: format_rational(c), env: env.map(|e| e.probs().to_vec()), summary });
        }
        csv.flush()?;
    }
    write_atomic(&out.join("fit_summary.json"), &(serde_json::to_string_pretty(&fits)? + "\n"))?;
    println!("appended {} fitted rows to {}", fits.len(), csv_path.display());
    Ok(())
}
