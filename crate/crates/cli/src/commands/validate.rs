//! Validation suites: theorem walks, oracle agreement, approximation robustness.

use meta_bamdp::meta::graph::BuildOptions;
use meta_bamdp::meta::validate::{physical_behavior, standard_param_grid, validate_approximation, ApproxReport};
use meta_bamdp::meta::walks::theorem_walks;
use meta_bamdp::meta::{m_beliefs, Phase, PruningFault};
use meta_bamdp::oracle::{brute_force_meta_solve, search_discrepancies, DEFAULT_PLAN_CAP};
use meta_bamdp::rational::{format_rational, frac, int, zero};
use meta_bamdp::{build_pruned_meta_graph, solve_bamdp_exact, solve_meta};
use serde::Serialize;

use super::write_atomic;
use crate::config::Resolved;
use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    Theorems,
    Oracle,
    Approx,
    All,
}

#[derive(Debug, Default, Serialize)]
pub struct Section {
    pub name: String,
    pub checked: usize,
    pub failures: Vec<String>,
}

impl Section {
    fn new(name: &str) -> Self {
        Section { name: name.into(), ..Section::default() }
    }

    fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Serialize)]
struct Report<'a> {
    scope: Scope,
    fault: Option<String>,
    passed: bool,
    sections: &'a [Section],
    approx: &'a [ApproxReport],
}

fn theorems(r: &Resolved, fault: Option<PruningFault>) -> CliResult<Section> {
    let mut s = Section::new("theorems");
    let opts = BuildOptions { node_cap: r.config.node_cap, fault };
    for horizon in 1..=r.config.horizon {
        let q = solve_bamdp_exact(r.config.n_arms, horizon)?;
        let m = m_beliefs(&q);
        let g = build_pruned_meta_graph(r.config.n_arms, horizon, &q, r.params, &opts)?;
        for c in &r.costs {
            let (policy, _) = solve_meta(&g, c)?;
            let report = theorem_walks(&g, &policy, &q, &m);
            for (name, check) in report.checks() {
                s.checked += check.checked;
                for v in check.violations.iter().take(3) {
                    s.failures.push(format!("T={horizon} c={}: {name}: {v}", format_rational(c)));
                }
            }
        }
    }
    Ok(s)
}

fn oracle(r: &Resolved) -> CliResult<Section> {
    let mut s = Section::new("oracle");
    let costs = [zero(), frac(1, 64), frac(1, 16), frac(1, 4), int(1), int(10)];
    for horizon in 1..=2 {
        let q = solve_bamdp_exact(2, horizon)?;
        let g = build_pruned_meta_graph(2, horizon, &q, r.params, &BuildOptions::default())?;
        for c in &costs {
            let truth = brute_force_meta_solve(2, horizon, c)?;
            let (policy, values) = solve_meta(&g, c)?;
            s.checked += 1;
            if values.root_value != truth.value {
                s.failures.push(format!(
                    "T={horizon} c={}: value {} but brute force {}",
                    format_rational(c),
                    format_rational(&values.root_value),
                    format_rational(&truth.value)
                ));
            }
            if physical_behavior(&g, &policy)? != truth.physical_behavior() {
                s.failures.push(format!("T={horizon} c={}: physical behavior differs", format_rational(c)));
            }
        }
    }
    let q = solve_bamdp_exact(2, 3)?;
    let m = m_beliefs(&q);
    let g = build_pruned_meta_graph(2, 3, &q, r.params, &BuildOptions::default())?;
    for node in g.nodes.iter().filter(|n| n.state.phase != Phase::Committed) {
        s.checked += 1;
        s.failures.extend(search_discrepancies(&node.state, &q, &m, r.params, DEFAULT_PLAN_CAP)?);
    }
    Ok(s)
}

fn approx(r: &Resolved) -> CliResult<(Section, Vec<ApproxReport>)> {
    let mut s = Section::new("approx");
    let q = solve_bamdp_exact(r.config.n_arms, r.config.horizon)?;
    let grid = standard_param_grid();
    let opts = BuildOptions { node_cap: r.config.node_cap, fault: None };
    let mut reports = Vec::new();
    for c in &r.costs {
        let report = validate_approximation(&q, c, &grid, &opts)?;
        s.checked += grid.len();
        for (a, b) in report.disagreements() {
            s.failures.push(format!("c={}: {a} and {b} behave differently", format_rational(c)));
        }
        reports.push(report);
    }
    Ok((s, reports))
}

pub fn run(r: &Resolved, scope: Scope, fault: Option<&str>) -> CliResult<()> {
    let fault: Option<PruningFault> = fault.map(|f| f.parse().map_err(CliError::Config)).transpose()?;
    r.write_snapshot("validate")?;
    let mut sections = Vec::new();
    let mut approx_reports = Vec::new();
    if matches!(scope, Scope::Theorems | Scope::All) {
        sections.push(theorems(r, fault)?);
    }
    if matches!(scope, Scope::Oracle | Scope::All) {
        sections.push(oracle(r)?);
    }
    if matches!(scope, Scope::Approx | Scope::All) {
        let (s, reports) = approx(r)?;
        sections.push(s);
        approx_reports = reports;
    }
    let passed = sections.iter().all(Section::passed);
    for s in &sections {
        let status = if s.passed() { "PASS" } else { "FAIL" };
        println!("{status} {}: {} checks, {} failures", s.name, s.checked, s.failures.len());
        for f in s.failures.iter().take(5) {
            println!("  {f}");
        }
    }
    let report = Report {
        scope,
        fault: fault.map(|f| format!("{f:?}")),
        passed,
        sections: &sections,
        approx: &approx_reports,
    };
    write_atomic(&r.out_dir().join("validate.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    if passed {
        Ok(())
    } else {
        let failed: Vec<&str> = sections.iter().filter(|s| !s.passed()).map(|s| s.name.as_str()).collect();
        Err(CliError::Validation(failed.join(", ")))
    }
}
