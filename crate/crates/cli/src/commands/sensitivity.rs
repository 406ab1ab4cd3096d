//! Sensitivity of exact observables to the computation cost, per environment.

use meta_bamdp::evaluate::{evaluate_in_env, Agent, CompiledPolicy};
use meta_bamdp::metrics::{format_float, sensitivity};
use rayon::prelude::*;

use super::{policy_source, write_atomic};
use crate::config::{EnvSet, Resolved};
use crate::error::{CliError, CliResult};

pub const SENSITIVITY_FILE: &str = "sensitivity.csv";
pub const SENSITIVITY_HEADER: &str = "N,T,p1,p2,chi_tau,chi_V";

pub fn run(r: &Resolved) -> CliResult<()> {
    let EnvSet::Fixed { envs, .. } = &r.envs else {
        return Err(CliError::Config("sensitivity needs fixed environments".into()));
    };
    let cs = r.costs_f64();
    if cs.len() < 3 {
        return Err(meta_bamdp::Error::GridTooSmall(cs.len()).into());
    }
    r.write_snapshot("sensitivity")?;
    let mut src = policy_source(r)?;
    let (n, t) = (r.config.n_arms, r.config.horizon);
    let mut policies = Vec::with_capacity(r.costs.len());
    for c in &r.costs {
        let (policy, _) = src.get(c)?;
        policies.push(CompiledPolicy::compile(Agent::Meta(&policy), n, t)?);
    }
    let rows: Vec<String> = envs
        .par_iter()
        .map(|env| {
            let evs: Vec<_> = policies.iter().map(|p| evaluate_in_env(p, env)).collect();
            let rewards: Vec<f64> = evs.iter().map(|e| e.reward).collect();
            let chi_v = sensitivity(&cs, &rewards)?;
            // Undefined where some cost never explores.
            let taus: Option<Vec<f64>> = evs.iter().map(|e| e.tau_explore_mean()).collect();
            let chi_tau = taus.map(|x| sensitivity(&cs, &x)).transpose()?;
            let p = env.probs();
            Ok(format!(
                "{n},{t},{},{},{},{}",
                format_float(p[0]),
                format_float(p[1]),
                chi_tau.map(format_float).unwrap_or_default(),
                format_float(chi_v)
            ))
        })
        .collect::<Result<_, meta_bamdp::Error>>()?;
    let mut text = format!("{SENSITIVITY_HEADER}\n");
    for row in &rows {
        text.push_str(row);
        text.push('\n');
    }
    let path = r.out_dir().join(SENSITIVITY_FILE);
    write_atomic(&path, &text)?;
    println!("wrote {} environments to {}", rows.len(), path.display());
    Ok(())
}
