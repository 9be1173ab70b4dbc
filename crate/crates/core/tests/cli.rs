use std::fs;
use std::path::Path;
use std::process::Command;

use darksite::config::{run_experiment, ExperimentConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_darksite"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const SWEEP: &str = r#"{
  "name": "sweep",
  "lattice": {"geometry": "cell3"},
  "params": {"Delta": 0.0, "F": 0.3, "J": 2.0, "U": 0.5},
  "solver": "exact",
  "sweep": {"axis": "Delta", "grid": {"start": -1.0, "stop": 1.0, "points": 5}},
  "exact": {"truncation": {"kind": "total_number", "n_max": 5}},
  "pairs": [[1, 0], [1, 2]]
}"#;

#[test]
fn identical_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(SWEEP).unwrap();
    let a = run_experiment(&cfg, &dir.path().join("a"), 1).unwrap();
    let b = run_experiment(&cfg, &dir.path().join("b"), 3).unwrap();
    assert_eq!(fs::read(&a.csv).unwrap(), fs::read(&b.csv).unwrap());
    assert_eq!(fs::read(&a.sidecar).unwrap(), fs::read(&b.sidecar).unwrap());
    let text = fs::read_to_string(&a.csv).unwrap();
    let header = text.lines().next().unwrap();
    for col in ["Delta", "F", "J", "U", "n_b", "g2_b", "g3_b", "g2_b_a", "residual", "cutoff", "M", "status"] {
        assert!(header.split(',').any(|c| c == col), "missing column {col}");
    }
    assert_eq!(text.lines().count(), 6);
    let deltas: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(deltas, ["-1", "-0.5", "0", "0.5", "1"]);
}

#[test]
fn sidecar_holds_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(SWEEP).unwrap();
    let s = run_experiment(&cfg, dir.path(), 1).unwrap();
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&s.sidecar).unwrap()).unwrap();
    let back: ExperimentConfig = serde_json::from_value(v["config"].clone()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(v["points"], 5);
}

#[test]
fn failed_points_are_recorded_and_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "big.json",
        r#"{"name": "big", "lattice": {"geometry": "lieb1d", "cells": 12, "boundary": "periodic"},
            "params": {"Delta": 0.0, "F": 0.1, "J": 1.0, "U": 0.3}, "solver": "exact",
            "sweep": {"axis": "U", "values": [0.1, 0.2]},
            "exact": {"truncation": {"kind": "per_site", "n_max": 5}}}"#,
    );
    let out = bin().arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = fs::read_to_string(dir.path().join("big.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.contains("error:")));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"name": "x", "lattice": {"geometry": "cell3"}, "params": {"Delta": 0, "F": 1, "J": 1, "U": 1}, "solver": "magic"}"#,
        r#"{"name": "x", "lattice": {"geometry": "cell3"}, "params": {"Delta": 0, "F": -1, "J": 1, "U": 1}, "solver": "exact"}"#,
        r#"{"name": "x", "lattice": {"geometry": "cell3"}, "params": {"Delta": 0, "F": 1, "J": 1, "U": 1}, "solver": "exact",
            "sweep": {"axis": "U", "grid": {"start": 0, "stop": 1, "points": 3, "scale": "log"}}}"#,
        r#"{"name": "x", "lattice": {"geometry": "cell3"}, "params": {"Delta": 0, "F": 1, "J": 1, "U": 1}, "solver": "exact",
            "exact": {"cutoffs": [5, 4]}}"#,
        r#"{"name": "x", "lattice": {"geometry": "cell3"}, "params": {"Delta": 0, "F": 1, "J": 1, "U": 1}, "solver": "exact",
            "pairs": [[0, 7]]}"#,
        "not json",
    ];
    for (k, text) in cases.iter().enumerate() {
        let cfg = write(dir.path(), &format!("bad{k}.json"), text);
        let out = bin().arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "case {k}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = bin().args(["--config", "/nonexistent.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(bin().output().unwrap().status.code(), Some(2));
}

#[test]
fn solver_override_and_site_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "chain.json",
        r#"{"name": "chain", "lattice": {"geometry": "lieb1d", "cells": 3, "boundary": "open"},
            "params": {"Delta": 0.0, "F": 0.1, "J": 2.0, "U": 0.3}, "solver": "corner",
            "table": {"role": "B"}}"#,
    );
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .args(["--solver", "weakpump", "--workers", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("chain_sites.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 1 + 3);
    assert!(rows[0].ends_with("n,n_rel,g2,g3,g2_i_ref"));
    let first: Vec<&str> = rows[1].split(',').collect();
    let last: Vec<&str> = rows[3].split(',').collect();
    // Mirror-symmetric chain: outer dark sites agree.
    let n1: f64 = first[7].parse().unwrap();
    let n3: f64 = last[7].parse().unwrap();
    assert!((n1 - n3).abs() < 1e-9 * n1);
    let main = fs::read_to_string(dir.path().join("chain.csv")).unwrap();
    let header = main.lines().next().unwrap();
    assert!(header.contains("g2_b0_b2"));
    let row = main.lines().nth(1).unwrap();
    assert!(row.ends_with(",3,NaN,ok"), "{row}");
}

#[test]
fn spectra_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("--spectra").arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let bands = fs::read_to_string(dir.path().join("bands_lieb1d.csv")).unwrap();
    assert_eq!(bands.lines().next().unwrap(), "index,energy,b_weight");
    assert_eq!(bands.lines().count(), 37);
    let pairs = fs::read_to_string(dir.path().join("two_photon_cell3.csv")).unwrap();
    assert_eq!(pairs.lines().count(), 82);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            ExperimentConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 10);
}
