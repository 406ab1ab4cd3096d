//! End-to-end runs of the `meta-bamdp` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_meta-bamdp"));
    cmd.env_remove("META_BAMDP_CACHE_DIR");
    cmd
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out-dir").arg(out).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}\nstdout:\n{}\nstderr:\n{}", o.status.code(), stdout(o), stderr(o));
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn solve_is_idempotent_through_the_cache() {
    let dir = TempDir::new().unwrap();
    let first = run(&["solve", "--horizon", "6"], dir.path());
    ok(&first);
    assert!(stdout(&first).contains("9 solved, 0 cache hits"), "{}", stdout(&first));
    let report = json(&dir.path().join("solve.json"));
    assert_eq!(report["entries"].as_array().unwrap().len(), 9);
    assert_eq!(fs::read_dir(dir.path().join("cache")).unwrap().count(), 9);

    let second = run(&["solve", "--horizon", "6"], dir.path());
    ok(&second);
    assert!(stdout(&second).contains("0 solved, 9 cache hits"), "{}", stdout(&second));
    let again = json(&dir.path().join("solve.json"));
    assert_eq!(report["entries"], again["entries"]);
}

#[test]
fn corrupt_cache_entries_are_replaced() {
    let dir = TempDir::new().unwrap();
    ok(&run(&["solve", "--horizon", "4", "--costs", "0.05"], dir.path()));
    let entry = fs::read_dir(dir.path().join("cache")).unwrap().next().unwrap().unwrap().path();
    let text = fs::read_to_string(&entry).unwrap();
    fs::write(&entry, &text[..text.len() / 2]).unwrap();

    let o = run(&["solve", "--horizon", "4", "--costs", "0.05"], dir.path());
    ok(&o);
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    assert!(stdout(&o).contains("1 solved, 0 cache hits, 1 corrupt"), "{}", stdout(&o));
    assert_eq!(fs::read_to_string(&entry).unwrap(), text);
}

#[test]
fn cache_dir_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let cache = dir.path().join("shared-cache");
    let o = bin()
        .args(["solve", "--horizon", "3", "--costs", "0,0.1"])
        .arg("--out-dir")
        .arg(dir.path().join("out"))
        .env("META_BAMDP_CACHE_DIR", &cache)
        .output()
        .unwrap();
    ok(&o);
    assert_eq!(fs::read_dir(&cache).unwrap().count(), 2);
    assert!(!dir.path().join("out/cache").exists());
}

#[test]
fn snapshot_records_the_resolved_configuration() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"horizon": 3, "costs": "0,0.25", "seed": 9}"#).unwrap();
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--seed", "11"], dir.path());
    ok(&o);
    let snap = json(&dir.path().join("config.resolved.json"));
    assert_eq!(snap["command"], "solve");
    assert_eq!(snap["config"]["horizon"], 3);
    assert_eq!(snap["config"]["seed"], 11);
    assert!(snap["code-version"].is_string());
}

#[test]
fn sweep_without_episodes_leaves_monte_carlo_columns_empty() {
    let dir = TempDir::new().unwrap();
    ok(&run(&["sweep", "--horizon", "5", "--env", "symmetric:0.2:0.8:3"], dir.path()));
    let (header, rows) = csv_rows(&dir.path().join("metrics.csv"));
    assert_eq!(rows.len(), 9 * 3);
    for name in ["V", "V_g", "V_star", "n_c_mean"] {
        let i = column(&header, name);
        assert!(rows.iter().all(|r| !r[i].is_empty()), "{name} missing");
    }
    for name in ["H_pi_bits", "omega", "seed"] {
        let i = column(&header, name);
        assert!(rows.iter().all(|r| r[i].is_empty()), "{name} filled");
    }
    assert!(!dir.path().join("sweep.resume.json").exists());
}

#[test]
fn sweep_is_deterministic_for_a_seed() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["sweep", "--horizon", "4", "--episodes", "300", "--seed", "5", "--costs", "0,0.05,0.2"];
    ok(&run(&args, a.path()));
    ok(&run(&args, b.path()));
    let x = fs::read(a.path().join("metrics.csv")).unwrap();
    let y = fs::read(b.path().join("metrics.csv")).unwrap();
    assert_eq!(x, y);
    let (header, rows) = csv_rows(&a.path().join("metrics.csv"));
    let h = column(&header, "H_pi_bits");
    assert!(rows.iter().all(|r| !r[h].is_empty()));
}

#[test]
fn mixture_sweep_reports_exact_normalized_value() {
    let dir = TempDir::new().unwrap();
    ok(&run(&["sweep", "--horizon", "6", "--env", "uniform-mixture", "--costs", "0"], dir.path()));
    let (header, rows) = csv_rows(&dir.path().join("metrics.csv"));
    let v_n: f64 = rows[0][column(&header, "V_N")].parse().unwrap();
    assert_eq!(v_n, 1.0);
    assert_eq!(rows[0][column(&header, "env_kind")], "uniform-mixture");
}

#[test]
fn interrupted_sweep_resumes_to_the_same_output() {
    let dir = TempDir::new().unwrap();
    let args = ["sweep", "--horizon", "4", "--episodes", "200", "--seed", "2", "--fit", "--env", "symmetric:0.3:0.7:2"];
    ok(&run(&args, dir.path()));
    let full_csv = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let full_fit = fs::read_to_string(dir.path().join("fit_summary.jsonl")).unwrap();
    assert_eq!(full_fit.lines().count(), 18);

    // Simulate a crash after four rows, mid-way through writing the fifth.
    let snapshot = fs::read_to_string(dir.path().join("config.resolved.json")).unwrap();
    let marker = serde_json::json!({"snapshot": snapshot.trim_end(), "rows-done": 4});
    fs::write(dir.path().join("sweep.resume.json"), marker.to_string()).unwrap();
    let partial: String = full_csv.lines().take(5).map(|l| format!("{l}\n")).collect::<String>() + "2,4,0.1";
    fs::write(dir.path().join("metrics.csv"), partial).unwrap();
    let partial_fit: String = full_fit.lines().take(4).map(|l| format!("{l}\n")).collect();
    fs::write(dir.path().join("fit_summary.jsonl"), partial_fit).unwrap();

    let mut resumed: Vec<&str> = args.to_vec();
    resumed.push("--resume");
    let o = run(&resumed, dir.path());
    ok(&o);
    assert!(stderr(&o).contains("resuming after 4 rows"), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(dir.path().join("metrics.csv")).unwrap(), full_csv);
    assert_eq!(fs::read_to_string(dir.path().join("fit_summary.jsonl")).unwrap(), full_fit);
    assert!(!dir.path().join("sweep.resume.json").exists());
}

#[test]
fn resume_refuses_a_different_configuration() {
    let dir = TempDir::new().unwrap();
    ok(&run(&["sweep", "--horizon", "3"], dir.path()));
    let marker = serde_json::json!({"snapshot": "something else", "rows-done": 1});
    fs::write(dir.path().join("sweep.resume.json"), marker.to_string()).unwrap();
    let o = run(&["sweep", "--horizon", "3", "--resume"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn validate_oracle_and_approx_pass() {
    let dir = TempDir::new().unwrap();
    let o = run(&["validate", "--scope", "oracle"], dir.path());
    ok(&o);
    assert!(stdout(&o).contains("PASS oracle"));

    let o = run(&["validate", "--scope", "approx", "--horizon", "4"], dir.path());
    ok(&o);
    let report = json(&dir.path().join("validate.json"));
    assert_eq!(report["passed"], true);
    assert_eq!(report["approx"].as_array().unwrap().len(), 9);
}

#[test]
fn injected_pruning_fault_fails_validation() {
    let dir = TempDir::new().unwrap();
    ok(&run(&["validate", "--scope", "theorems", "--horizon", "4"], dir.path()));
    let o = run(
        &["validate", "--scope", "theorems", "--horizon", "4", "--inject-fault", "accept-non-changing"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL theorems"));
    assert_eq!(json(&dir.path().join("validate.json"))["passed"], false);

    let o = run(&["validate", "--scope", "theorems", "--inject-fault", "no-such-fault"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sensitivity_is_swap_symmetric_and_zero_for_constant_reward() {
    let dir = TempDir::new().unwrap();
    ok(&run(&["sensitivity", "--horizon", "4", "--env", "grid:5"], dir.path()));
    let (header, rows) = csv_rows(&dir.path().join("sensitivity.csv"));
    assert_eq!(header.join(","), "N,T,p1,p2,chi_tau,chi_V");
    assert_eq!(rows.len(), 25);
    let key = |r: &Vec<String>| (r[2].clone(), r[3].clone());
    for r in &rows {
        let swapped = rows.iter().find(|s| key(s) == (r[3].clone(), r[2].clone())).unwrap();
        let chi_v: f64 = r[5].parse().unwrap();
        let chi_v_swapped: f64 = swapped[5].parse().unwrap();
        assert!((chi_v - chi_v_swapped).abs() < 1e-12, "{r:?} vs {swapped:?}");
        assert_eq!(r[4].is_empty(), swapped[4].is_empty());
        if !r[4].is_empty() {
            let a: f64 = r[4].parse().unwrap();
            let b: f64 = swapped[4].parse().unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }
    for p in ["0.0000000000000000e0", "1.0000000000000000e0"] {
        let r = rows.iter().find(|r| r[2] == p && r[3] == p).unwrap();
        assert_eq!(r[5].parse::<f64>().unwrap(), 0.0, "{r:?}");
    }
}

#[test]
fn sensitivity_needs_three_costs_and_fixed_environments() {
    let dir = TempDir::new().unwrap();
    let o = run(&["sensitivity", "--horizon", "3", "--costs", "0,0.1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["sensitivity", "--horizon", "3", "--env", "uniform-mixture"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_appends_omega_rows_and_recovers_heuristic_mode() {
    let dir = TempDir::new().unwrap();
    let o = run(&["fit", "--horizon", "4", "--episodes", "200", "--costs", "0,0.1"], dir.path());
    ok(&o);
    let (header, rows) = csv_rows(&dir.path().join("metrics.csv"));
    assert_eq!(rows.len(), 2);
    let w = column(&header, "omega");
    assert!(rows.iter().all(|r| r[w].parse::<f64>().is_ok()));
    assert_eq!(json(&dir.path().join("fit_summary.json")).as_array().unwrap().len(), 2);

    let o = run(&["fit", "--horizon", "4", "--episodes", "200", "--heuristic", "30,2"], dir.path());
    ok(&o);
    let rows = json(&dir.path().join("fit_summary.json"));
    assert_eq!(rows[0]["generating"]["omega"], 2.0);

    let o = run(&["fit", "--horizon", "4", "--episodes", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["fit", "--horizon", "4", "--episodes", "10", "--heuristic", "thirty"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes_distinguish_configuration_and_resource_errors() {
    let dir = TempDir::new().unwrap();
    let o = run(&["solve", "--horizon", "40"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["solve", "--costs", "-0.1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"horizn": 3}"#).unwrap();
    let o = run(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = run(&["solve", "--horizon", "8", "--node-cap", "10"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("resource cap"));
}
