use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vsnslice"));
    c.env("VSNSLICE_WORKERS", "1");
    c
}

fn two_nodes() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/two_nodes.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn run_writes_one_artifact_per_strategy_seed_and_sweep_value() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let o = run(&[
        "run",
        "--preset",
        "1",
        "--test-points",
        "1",
        "--strategy",
        "heuristic,mixed",
        "--seeds",
        "3..5",
        "--sweep",
        "delta=10,60",
        "--max-expansions",
        "2000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let runs = read_dir_sorted(&out.join("runs"));
    assert_eq!(runs.len(), 2 * 2 * 2);
    assert!(runs.iter().any(|(n, _)| n == "mixed_delta60_seed4.json"));
    for name in ["runs.csv", "summary.csv", "summary.json", "series.csv", "energy.csv"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let csv = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let deployed: Vec<&str> = summary.lines().filter(|l| l.contains(",deployed,")).collect();
    assert_eq!(deployed.len(), 4);
    assert!(deployed.iter().all(|l| l.split(',').nth(4) == Some("2")));
    assert!(stdout(&o).contains("delta=60"));

    let artifact: serde_json::Value = serde_json::from_slice(&runs[0].1).unwrap();
    let manifest = &artifact["manifest"];
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["seed"].is_u64());
    assert_eq!(manifest["workload"]["generated"]["seed"], manifest["seed"]);

    let again = tmp.path().join("again");
    let o = run(&[
        "run",
        "--preset",
        "1",
        "--test-points",
        "1",
        "--strategy",
        "mixed,heuristic",
        "--seeds",
        "3..=4",
        "--sweep",
        "delta=60,10",
        "--max-expansions",
        "2000",
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(read_dir_sorted(&out.join("runs")), read_dir_sorted(&again.join("runs")));
    assert_eq!(fs::read(out.join("runs.csv")).unwrap(), fs::read(again.join("runs.csv")).unwrap());
    assert_eq!(fs::read(out.join("summary.csv")).unwrap(), fs::read(again.join("summary.csv")).unwrap());
}

#[test]
fn empty_or_unknown_strategies_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    for list in ["", ",", "random"] {
        let o = run(&["run", "--strategy", list, "--out", tmp.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{list:?}");
    }
    let o = run(&["run", "--strategy", ""]);
    assert!(stderr(&o).contains("strategy list is empty"));
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn malformed_arguments_are_rejected() {
    for args in [
        vec!["run", "--seeds", "4..2"],
        vec!["run", "--sweep", "gamma=1"],
        vec!["run", "--preset", "1", "--scenario", "x.json"],
        vec!["export-lp", "--mode", "dynamic@0", "--out", "x.lp"],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
    let o = bin().env("VSNSLICE_WORKERS", "0").args(["run", "--out", "/nonexistent/x"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("VSNSLICE_WORKERS"));
    let o = run(&["run", "--preset", "9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("preset"));
}

#[test]
fn fixed_scenarios_take_a_single_seed() {
    let tmp = TempDir::new().unwrap();
    let scenario = two_nodes();
    let o = run(&[
        "run",
        "--scenario",
        scenario.to_str().unwrap(),
        "--seeds",
        "0..3",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["run", "--scenario", scenario.to_str().unwrap(), "--test-points", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("generated"));
}

#[test]
fn global_export_lists_every_offline_family_and_is_stable() {
    let tmp = TempDir::new().unwrap();
    let lp = tmp.path().join("g.lp");
    let o = run(&["export-lp", "--scenario", two_nodes().to_str().unwrap(), "--out", lp.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("g.json")).unwrap()).unwrap();
    let families: Vec<(&str, u64)> = manifest["model"]["families"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["family"].as_str().unwrap(), f["rows"].as_u64().unwrap()))
        .collect();
    for expected in [
        "sensed",
        "nocover",
        "window",
        "tpcap",
        "deployed",
        "memory",
        "processing",
        "rate",
        "conserve",
        "collect",
        "activeLo",
        "activeHi",
        "route",
        "airtime",
        "ptx",
        "prx",
        "energy",
        "uLeX",
        "uLePrev",
        "uGe",
        "vLeY",
        "vLePrev",
        "vGe",
    ] {
        assert!(families.iter().any(|&(f, n)| f == expected && n > 0), "family {expected} missing");
    }
    let rows: u64 = families.iter().map(|f| f.1).sum();
    assert_eq!(manifest["model"]["rows"].as_u64(), Some(rows));
    let text = fs::read_to_string(&lp).unwrap();
    let first = fs::read(&lp).unwrap();
    assert!(text.contains("z_2"));

    let o = run(&["export-lp", "--scenario", two_nodes().to_str().unwrap(), "--out", lp.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(fs::read(&lp).unwrap(), first);
}

#[test]
fn first_arrival_model_only_knows_the_arriving_app() {
    let tmp = TempDir::new().unwrap();
    let lp = tmp.path().join("d.lp");
    let o = run(&[
        "export-lp",
        "--scenario",
        two_nodes().to_str().unwrap(),
        "--mode",
        "dynamic@1",
        "--objective",
        "maxmin",
        "--out",
        lp.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&lp).unwrap();
    let app_vars: Vec<&str> =
        text.split(|c: char| c.is_whitespace()).filter(|t| t.starts_with("y_") || t.starts_with("r_")).collect();
    assert!(!app_vars.is_empty());
    assert!(app_vars.iter().all(|v| v.rsplit('_').nth(usize::from(v.starts_with("y_"))) == Some("0")), "{app_vars:?}");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("d.json")).unwrap()).unwrap();
    assert_eq!(manifest["arriving_app"], 0);
    assert_eq!(manifest["objective"], "max_min");
}

#[test]
fn arrival_index_past_the_end_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let lp = tmp.path().join("d.lp");
    let o = run(&[
        "export-lp",
        "--scenario",
        two_nodes().to_str().unwrap(),
        "--mode",
        "dynamic@4",
        "--out",
        lp.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("out of range"), "{}", stderr(&o));
    assert!(!lp.exists());
}

#[test]
fn explain_shows_placements_and_refusals() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path();
    let o = run(&[
        "run",
        "--scenario",
        two_nodes().to_str().unwrap(),
        "--strategy",
        "mixed",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let artifact = out.join("runs/mixed_fixed.json");

    let o = run(&["explain", artifact.to_str().unwrap(), "--app", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("Accepted"), "{text}");
    assert!(text.contains("re-check: feasible"), "{text}");
    assert!(text.contains("lambda"), "{text}");

    let o = run(&["explain", artifact.to_str().unwrap(), "--app", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("coverage: test point 0 uncovered"), "{}", stdout(&o));

    let o = run(&["explain", artifact.to_str().unwrap(), "--app", "1", "--json"]);
    let e: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(e["placements"][0]["node"], 1);
    assert_eq!(e["report"]["feasible"], true);
    assert!(e["placements"][0]["lambda"].as_f64().unwrap() > 0.0);

    let o = run(&["explain", artifact.to_str().unwrap(), "--app", "7"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("application 7"));
}

#[test]
fn malformed_or_tampered_artifacts_name_the_file() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let o = run(&["explain", bad.to_str().unwrap(), "--app", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.json"), "{}", stderr(&o));

    let out = tmp.path().join("o");
    assert!(run(&[
        "run",
        "--scenario",
        two_nodes().to_str().unwrap(),
        "--strategy",
        "or",
        "--out",
        out.to_str().unwrap()
    ])
    .status
    .success());
    let path = out.join("runs/or_fixed.json");
    let text = fs::read_to_string(&path).unwrap().replace("\"move_cost\": 10.0", "\"move_cost\": 11.0");
    fs::write(&path, text).unwrap();
    let o = run(&["explain", path.to_str().unwrap(), "--app", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("hash"), "{}", stderr(&o));
}

#[test]
fn report_rebuilds_the_summary() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path();
    let o = run(&[
        "run",
        "--preset",
        "1",
        "--test-points",
        "1",
        "--strategy",
        "heuristic",
        "--seeds",
        "0..3",
        "--sweep",
        "phi=10,40",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["report", out.to_str().unwrap(), "--metric", "activations"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("activations"), "{text}");
    assert!(text.contains("phi=10") && text.contains("phi=40"), "{text}");

    let o = run(&["report", out.to_str().unwrap(), "--json"]);
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let written: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(rows, written["rows"]);

    assert_eq!(run(&["report", out.to_str().unwrap(), "--metric", "speed"]).status.code(), Some(2));
    let empty = TempDir::new().unwrap();
    assert_eq!(run(&["report", empty.path().to_str().unwrap()]).status.code(), Some(1));
}
