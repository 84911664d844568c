use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use wsn_energy::ScenarioConfig;

const FLOW_COLUMNS: [&str; 5] = ["b_individual", "b_local", "b_global", "b_environment", "b_snk"];

fn wsn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsn-energy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = wsn(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

/// Rows of a CSV file keyed by header name.
fn csv_rows(path: &str) -> Vec<Vec<(String, String)>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            headers.iter().cloned().zip(rec.iter().map(String::from)).collect()
        })
        .collect()
}

fn field(row: &[(String, String)], key: &str) -> f64 {
    row.iter().find(|(k, _)| k == key).unwrap().1.parse().unwrap()
}

/// First `key,value` row in a report whose first cell is `key`.
fn report_value(path: &str, key: &str) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")).map(String::from))
        .unwrap_or_else(|| panic!("{key} missing from {path}"))
}

/// Value under `key` in the report's summary header/row pair.
fn summary_value(path: &str, key: &str) -> String {
    let text = fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let at = lines.iter().position(|l| l.starts_with("mape_pct,")).unwrap();
    let col = lines[at].split(',').position(|h| h == key).unwrap();
    lines[at + 1].split(',').nth(col).unwrap().to_string()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = p(dir, name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (p(&dir, "a.csv"), p(&dir, "b.csv"));
    let out_a = ok(&["simulate", "--output", &a, "--seed", "4"]);
    let out_b = ok(&["simulate", "--output", &b, "--seed", "4"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(out_a, out_b);
    assert!(out_a.contains("seed: 4"));
}

#[test]
fn invalid_sensing_radius_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.toml", "[flows.individual]\nr_sense = 0.0\n");
    let out = wsn(&["simulate", "--config", &cfg, "--output", &p(&dir, "t.csv")]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("r_sense > 0"), "{err}");
    assert!(err.contains("= 0"), "{err}");
    assert!(!dir.path().join("t.csv").exists());
}

#[test]
fn minimal_two_node_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "min.toml", "[sim]\nseed = 3\nnodes = 2\n");
    let (a, b) = (p(&dir, "a.csv"), p(&dir, "b.csv"));
    ok(&["simulate", "--config", &cfg, "--output", &a]);
    ok(&["simulate", "--config", &cfg, "--output", &b]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let rows = csv_rows(&a);
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| field(r, "alive_nodes") <= 2.0));
    assert_eq!(field(&rows[0], "alive_nodes"), 2.0);
}

#[test]
fn single_run_sweep_equals_simulate_and_aggregate() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "fixed.toml", "[sweep.ranges]\n");
    let sweep = p(&dir, "sweep.csv");
    ok(&[
        "sweep", "--config", &cfg, "--output", &sweep, "--seed", "17", "--runs", "1",
    ]);
    let rows = csv_rows(&sweep);
    assert_eq!(rows.len(), 1);
    let seed = rows[0].iter().find(|(k, _)| k == "seed").unwrap().1.clone();

    let trace = p(&dir, "trace.csv");
    ok(&["simulate", "--config", &cfg, "--output", &trace, "--seed", &seed]);
    let slices = csv_rows(&trace);
    assert_eq!(field(&rows[0], "slices"), slices.len() as f64);
    for col in FLOW_COLUMNS.iter().chain(&["energy_j"]) {
        let total: f64 = slices.iter().map(|r| field(r, col)).sum();
        let got = field(&rows[0], col);
        assert!(
            (got - total).abs() <= 1e-9 * total.abs().max(1e-300),
            "{col}: {got} vs {total}"
        );
    }
}

#[test]
fn sweep_rows_are_boundary_valid_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (p(&dir, "a.csv"), p(&dir, "b.csv"));
    ok(&["sweep", "--output", &a, "--seed", "5", "--runs", "50"]);
    ok(&["sweep", "--output", &b, "--seed", "5", "--runs", "50"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let defaults = ScenarioConfig::default();
    let rows = csv_rows(&a);
    assert_eq!(rows.len(), 50);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(field(row, "run"), i as f64);
        let mut cfg = defaults.clone();
        for (key, [lo, hi]) in &defaults.sweep.ranges {
            let v = field(row, key);
            assert!(v >= *lo && v <= *hi, "run {i}: {key} = {v}");
            cfg.set_parameter(key, v).unwrap();
        }
        cfg.validate().unwrap();
        for col in FLOW_COLUMNS.iter().chain(&["energy_j"]) {
            let v = field(row, col);
            assert!(v.is_finite() && v >= 0.0, "run {i}: {col} = {v}");
        }
    }
}

#[test]
fn sweep_requires_a_seed() {
    let dir = TempDir::new().unwrap();
    let out = wsn(&["sweep", "--output", &p(&dir, "s.csv"), "--runs", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

fn exact_model_trace(path: &str) {
    let mut text = String::from("slice,phase,b_individual,b_local,b_global,b_environment,b_snk,energy_j,alive_nodes\n");
    for i in 0..40u32 {
        let x = f64::from(i);
        let b = [
            10.0 + x,
            20.0 + 3.0 * (x * 0.9).sin() + 0.5 * x,
            5.0 + 4.0 * (x * 1.7).cos(),
        ];
        let e = 2e-4 * b[0] + 1e-4 * b[1] + 8e-4 * b[2];
        let phase = if i < 3 { "initialization" } else { "collection" };
        text.push_str(&format!("{i},{phase},{},{},{},0,0,{e},10\n", b[0], b[1], b[2]));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn fit_recovers_exact_model() {
    let dir = TempDir::new().unwrap();
    let (trace, report) = (p(&dir, "exact.csv"), p(&dir, "report.csv"));
    exact_model_trace(&trace);
    ok(&["fit", "--input", &trace, "--output", &report]);
    let mape: f64 = summary_value(&report, "mape_pct").parse().unwrap();
    assert!(mape < 1e-3, "{mape}");
    let alpha: f64 = report_value(&report, "global")
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((alpha - 8e-4).abs() < 1e-12);
}

#[test]
fn all_constituent_mask_names_dependent_column() {
    let dir = TempDir::new().unwrap();
    let trace = p(&dir, "exact.csv");
    exact_model_trace(&trace);
    let out = wsn(&["fit", "--input", &trace, "--output", &p(&dir, "r.csv"), "--mask", "all"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("b_environment"), "{err}");
}

#[test]
fn default_trace_fit_finds_global_dominant() {
    let dir = TempDir::new().unwrap();
    let (trace, report) = (p(&dir, "t.csv"), p(&dir, "r.csv"));
    ok(&["simulate", "--output", &trace]);
    let stdout = ok(&["fit", "--input", &trace, "--output", &report, "--train-fraction", "0.7"]);
    assert_eq!(summary_value(&report, "dominant_constituent"), "global");
    assert!(stdout.contains("dominant_constituent: global"));
}

#[test]
fn budget_schedules_and_reports_infeasibility() {
    let dir = TempDir::new().unwrap();
    let (trace, report) = (p(&dir, "t.csv"), p(&dir, "r.csv"));
    ok(&["simulate", "--output", &trace]);
    ok(&["fit", "--input", &trace, "--output", &report]);
    let tasks = write(
        &dir,
        "tasks.toml",
        r#"
battery = 1.0
[constraints]
local = true
global = true

[[task]]
id = 1
constituent = "local"
packets = 2
importance = 1.0
mandatory = true

[[task]]
id = 2
constituent = "global"
packets = 3
importance = 2.0
mandatory = true

[[task]]
id = 3
constituent = "individual"
packets = 10
importance = 5.0
"#,
    );
    let schedule = p(&dir, "s.csv");
    let stdout = ok(&["budget", "--input", &tasks, "--model", &report, "--output", &schedule]);
    assert!(stdout.contains("feasible: true"));
    assert_eq!(report_value(&schedule, "feasible"), "true");
    assert_eq!(report_value(&schedule, "method"), "exact");
    let text = fs::read_to_string(&schedule).unwrap();
    assert_eq!(text.split("\n\n").next().unwrap().lines().count(), 4);

    let out = wsn(&[
        "budget",
        "--input",
        &tasks,
        "--model",
        &report,
        "--output",
        &schedule,
        "--battery",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
    assert_eq!(report_value(&schedule, "feasible"), "false");
}

#[test]
fn missing_input_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    assert!(!Path::new(&missing).exists());
    let out = wsn(&[
        "fit",
        "--input",
        missing.to_str().unwrap(),
        "--output",
        &p(&dir, "r.csv"),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
