use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_terrace"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> i32 {
    let output = bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .output()
        .unwrap();
    output.status.code().unwrap()
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_RUN: &str = r#"
[reaction]
family = "dcubic"
a = 0.25
gamma = 0.05

[grid]
x_min = -10.0
x_max = 10.0
n = 201

[time]
t_end = 2.0
snapshots = 2
front_dt = 0.5

[initial]
kind = "tanh"
center = 0.0
width = 1.0
"#;

#[test]
fn symmetric_wave_has_zero_speed() {
    let out = TempDir::new().unwrap();
    assert_eq!(run(&["wave"], &configs().join("symmetric.toml"), out.path()), 0);
    let v = json(&out.path().join("wave.json"));
    assert!(v["wave"]["speed"].as_f64().unwrap().abs() <= 1e-6);
    let csv = std::fs::read_to_string(out.path().join("profile.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), format!("# config_sha256={}", v["config_sha256"].as_str().unwrap()));
    assert!(lines.next().unwrap().starts_with("# c="));
    assert_eq!(lines.find(|l| !l.starts_with('#')).unwrap(), "z,phi,dphi");
}

#[test]
fn blocked_connection_exits_2() {
    let out = TempDir::new().unwrap();
    assert_eq!(run(&["wave"], &configs().join("tristable_symmetric.toml"), out.path()), 2);
    let v = json(&out.path().join("wave.json"));
    assert_eq!(v["no_wave"]["reason"], "pinned");
}

#[test]
fn malformed_config_exits_1() {
    let dir = TempDir::new().unwrap();
    let bad = write_config(&dir, "bad.toml", "[reaction]\nfamily = \"dcubic\"\na = 'x'\n");
    assert_eq!(run(&["wave"], &bad, dir.path()), 1);
    let unknown = write_config(&dir, "unknown.toml", &format!("{SMALL_RUN}\n[extra]\nk = 1\n"));
    assert_eq!(run(&["simulate"], &unknown, dir.path()), 1);
    assert_eq!(run(&["simulate"], &dir.path().join("missing.toml"), dir.path()), 1);
}

#[test]
fn terrace_summaries() {
    let out = TempDir::new().unwrap();
    assert_eq!(run(&["terrace"], &configs().join("bistable.toml"), out.path()), 0);
    let v = json(&out.path().join("terrace.json"));
    assert_eq!(v["terrace"]["speeds"].as_array().unwrap().len(), 1);

    assert_eq!(run(&["terrace"], &configs().join("tristable_symmetric.toml"), out.path()), 0);
    let v = json(&out.path().join("terrace.json"));
    let speeds: Vec<f64> = v["terrace"]["speeds"].as_array().unwrap().iter().map(|s| s.as_f64().unwrap()).collect();
    assert_eq!(speeds.len(), 2);
    assert!(speeds.iter().all(|c| c.abs() <= 1e-6));

    assert_eq!(run(&["terrace"], &configs().join("tristable_ordered.toml"), out.path()), 0);
    let v = json(&out.path().join("terrace.json"));
    let speeds: Vec<f64> = v["terrace"]["speeds"].as_array().unwrap().iter().map(|s| s.as_f64().unwrap()).collect();
    assert!(speeds[0] > speeds[1]);
    assert!(out.path().join("wave_2.csv").exists());
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "run.toml", SMALL_RUN);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&["simulate"], &cfg, &a), 0);
    assert_eq!(run(&["simulate"], &cfg, &b), 0);
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 5);
    for name in names {
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
    let m = json(&a.join("manifest.json"));
    let hash = m["config_sha256"].as_str().unwrap();
    let fronts = std::fs::read_to_string(a.join("fronts.csv")).unwrap();
    assert!(fronts.starts_with(&format!("# config_sha256={hash}")));
    assert_eq!(m["variant"], "regularized");
    assert_eq!(m["epsilon"], m["dx"]);
}

#[test]
fn seed_override_changes_hash() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "run.toml", SMALL_RUN);
    let out = dir.path().join("o");
    assert_eq!(run(&["wave"], &cfg, &out), 0);
    let h1 = json(&out.join("wave.json"))["config_sha256"].clone();
    let status = bin().args(["wave", "--quiet", "--seed", "9", "--out"]).arg(&out).arg("--config").arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert_ne!(json(&out.join("wave.json"))["config_sha256"], h1);
}

#[test]
fn zero_horizon_gives_initial_snapshot_only() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "run.toml", &SMALL_RUN.replace("t_end = 2.0", "t_end = 0.0"));
    assert_eq!(run(&["simulate"], &cfg, dir.path()), 0);
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["snapshot_times"].as_array().unwrap().len(), 1);
    assert_eq!(m["steps"], 0);
}

#[test]
fn narrow_domain_warns_in_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "run.toml", SMALL_RUN);
    assert_eq!(run(&["simulate"], &cfg, dir.path()), 0);
    let m = json(&dir.path().join("manifest.json"));
    let warnings = m["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("domain edge")));
}

#[test]
fn verify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = write_config(&dir, "good.toml", "criteria = [2]\n");
    assert_eq!(run(&["verify"], &good, &dir.path().join("good")), 0);
    let v = json(&dir.path().join("good/verdict.json"));
    assert_eq!(v["pass"], true);
    assert!(dir.path().join("good/criterion_2/result.json").exists());

    let sabotaged = write_config(&dir, "zero.toml", "criteria = [2]\n[tolerances]\nspeed_identity = 0.0\n");
    assert_eq!(run(&["verify"], &sabotaged, dir.path()), 3);

    assert_eq!(run(&["verify"], &dir.path().join("absent.toml"), dir.path()), 1);
    let bad_id = write_config(&dir, "bad.toml", "criteria = [12]\n");
    assert_eq!(run(&["verify"], &bad_id, dir.path()), 1);
}
