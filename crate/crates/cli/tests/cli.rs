use std::path::Path;
use std::process::Command;

use nls_cli::commands::{self, RunManifest, MANIFEST};
use nls_cli::{parse_config_str, CliError, Format};
use nls_core::evolution::checkpoint::Checkpoint;
use nls_core::experiments::{ExperimentConfig, Scenario};

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn nls(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nls")).args(args).output().unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_slice(&std::fs::read(dir.join(MANIFEST)).unwrap()).unwrap()
}

#[test]
fn minimal_config_takes_scenario_defaults() {
    let cfg = parse_config_str("scenario = \"monotonicity\"\n").unwrap();
    assert_eq!(cfg, ExperimentConfig::defaults(Scenario::Monotonicity));
    let cfg = parse_config_str("scenario = \"conservation\"\nn = 1024\n").unwrap();
    assert_eq!(cfg.n, 1024);
    assert_eq!(cfg.r_max, ExperimentConfig::defaults(Scenario::Conservation).r_max);
}

#[test]
fn unknown_key_is_named_with_its_line() {
    let err = parse_config_str("scenario = \"free_flow\"\np = 3.0\nfoo = 1\n").unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, CliError::Parse { line: 3, .. }), "{msg}");
    assert!(msg.contains("foo"), "{msg}");
}

#[test]
fn p_at_one_is_a_range_error() {
    let err = parse_config_str("scenario = \"free_flow\"\n\np = 1.0\n").unwrap_err();
    match err {
        CliError::Range { key, line, .. } => assert_eq!((key.as_str(), line), ("p", 3)),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn ill_typed_and_missing_keys_are_rejected() {
    let err = parse_config_str("scenario = \"free_flow\"\nn = \"many\"\n").unwrap_err();
    assert!(matches!(err, CliError::Parse { line: 2, .. }), "{err}");
    let err = parse_config_str("p = 3.0\n").unwrap_err();
    assert!(err.to_string().contains("scenario"), "{err}");
    let err = parse_config_str("scenario = \"nosuch\"\n").unwrap_err();
    assert!(err.to_string().contains("polynomial_sweep"), "{err}");
}

#[test]
fn unknown_scenario_lists_valid_names() {
    let out = nls(&["experiment", "nosuch", "--out", "/tmp/unused-nls-out"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    for s in Scenario::ALL {
        assert!(stderr.contains(s.name()), "{stderr}");
    }
}

#[test]
fn norms_of_unit_gaussian() {
    let (text, _) = commands::norms(None, Scenario::FreeFlow, None).unwrap();
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mass = report["values"]["mass"].as_f64().unwrap();
    assert!((mass - std::f64::consts::PI.powf(1.5)).abs() < 1e-10, "{mass}");
}

#[test]
fn experiment_output_is_complete_and_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(tmp.path(), "c.toml", "scenario = \"commutation\"\nn = 1024\nr_max = 32.0\nt_end = 1.0\n");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = commands::experiment("commutation", Some(&config), &a, Format::Json).unwrap();
    assert!(out.passed);
    commands::experiment("commutation", Some(&config), &b, Format::Json).unwrap();
    let bytes = std::fs::read(a.join("commutation.json")).unwrap();
    assert_eq!(bytes, std::fs::read(b.join("commutation.json")).unwrap());

    let tree: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    let again: serde_json::Value = serde_json::from_str(&serde_json::to_string(&tree).unwrap()).unwrap();
    assert_eq!(tree, again);
    let text = std::fs::read_to_string(&config).unwrap();
    let hash = nls_cli::config::sha256_hex(text.as_bytes());
    assert_eq!(tree["provenance"]["config_hash"], hash);

    let m = manifest(&a);
    assert_eq!(m.config_hash, hash);
    assert!(m.passed && m.assertions_failed == 0);
    let mut listed = m.artifacts.clone();
    listed.sort();
    let mut on_disk: Vec<String> =
        std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    on_disk.sort();
    assert_eq!(listed, on_disk);
}

#[test]
fn monotonicity_csv_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(tmp.path(), "m.toml", "scenario = \"monotonicity\"\nn = 1024\nr_max = 64.0\nt_end = 0.8\n");
    commands::experiment("monotonicity", Some(&config), tmp.path(), Format::Csv).unwrap();
    let csv = std::fs::read_to_string(tmp.path().join("pseudoconformal.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,E_pc,part_vector,part_potential,rhs,defect"));
    assert_eq!(lines.next(), Some("time,energy,energy,energy,energy/time,energy/time"));
    assert!(lines.count() > 10);
}

#[test]
fn simulate_emits_logs_and_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(
        tmp.path(),
        "s.toml",
        "scenario = \"conservation\"\nn = 512\nr_max = 32.0\nt_end = 0.5\ndt = 0.005\nnorm_pairs = [[8.0, 4.0]]\n",
    );
    let dir = tmp.path().join("out");
    let out = nls(&["simulate", "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = std::fs::read_to_string(dir.join("conservation.csv")).unwrap();
    assert!(log.starts_with("t,mass,energy\ntime,mass,energy\n"));
    assert_eq!(log.lines().count(), 2 + 11);
    let norms = std::fs::read_to_string(dir.join("norms.csv")).unwrap();
    assert!(norms.starts_with("t,q8_r4\n"));
}

#[test]
fn failing_assertions_give_exit_code_one() {
    let tmp = tempfile::tempdir().unwrap();
    let config =
        write(tmp.path(), "f.toml", "scenario = \"conservation\"\nn = 512\nr_max = 32.0\nt_end = 1.0\ndt = 0.01\n");
    let dir = tmp.path().join("out");
    let out =
        nls(&["experiment", "conservation", "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!manifest(&dir).passed);
}

#[test]
fn resume_matches_straight_run() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(
        tmp.path(),
        "r.toml",
        "scenario = \"conservation\"\np = 2.5\nn = 512\nr_max = 32.0\ndt = 0.002\nnorm_pairs = [[4.2, 3.5]]\n",
    );
    let mid = tmp.path().join("mid.ckpt");
    let resumed = tmp.path().join("resumed.ckpt");
    let straight = tmp.path().join("straight.ckpt");
    commands::checkpoint_save(&config, 0.1, &mid, 10).unwrap();
    let dir = tmp.path().join("out");
    let out = nls(&[
        "checkpoint",
        "resume",
        "--checkpoint",
        mid.to_str().unwrap(),
        "--t-end",
        "0.2",
        "--out",
        dir.to_str().unwrap(),
        "--save",
        resumed.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    commands::checkpoint_save(&config, 0.2, &straight, 10).unwrap();

    let (a, b) = (Checkpoint::load(&resumed).unwrap(), Checkpoint::load(&straight).unwrap());
    assert_eq!(a.step, b.step);
    let worst = a.field.values().iter().zip(b.field.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(worst <= 1e-12, "{worst}");
    assert_eq!(a.norms, b.norms);
    assert!(manifest(&dir).artifacts.contains(&"conservation.csv".to_string()));
}
