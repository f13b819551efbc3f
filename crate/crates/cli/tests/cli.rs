use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn sweep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sweep"))
        .args(args)
        .env_remove("SWEEP_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, name: &str, extra: &[&str]) -> Output {
    let file = scenario(name);
    let mut args = vec!["run", file.to_str().unwrap(), "--quiet", "--out-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    sweep(&args)
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

fn write_scenario(dir: &Path, doc: &str) -> PathBuf {
    let p = dir.join("scenario.json");
    fs::write(&p, doc).unwrap();
    p
}

#[test]
fn halfline_run_matches_running_minimum_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), "halfline_reflect", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    let t = column(&csv, "t");
    let x = column(&csv, "x_1");
    // x = l + max(0, max_{s <= t} -l(s)) for the driver 0.5 + sin(5t)
    let mut push: f64 = 0.0;
    for (ti, xi) in t.iter().zip(&x) {
        let l = 0.5 + (5.0 * ti).sin();
        push = push.max(-l);
        assert!((xi - (l + push)).abs() <= 1e-12, "t = {ti}: {xi} vs {}", l + push);
    }
    assert_eq!(t.len(), 1001);
}

#[test]
fn step_too_large_reports_node() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), "step_too_large", &[]);
    assert_eq!(out.status.code(), Some(3));
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "step-too-large");
    assert_eq!(m["error"]["node"], 1);
}

#[test]
fn crowd_run_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let out = run_in(dir, "crowd_headon", &["--seed=7"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |d: &Path| fs::read(d.join("trajectory.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_eq!(manifest(a.path())["seed"], 7);
}

#[test]
fn manifest_config_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let out = run_in(&first, "reflected_bm", &["--paths", "20", "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0));
    let config = manifest(&first)["config"].to_string();
    let replay = write_scenario(tmp.path(), &config);
    let second = tmp.path().join("second");
    let out = sweep(&["run", replay.to_str().unwrap(), "--quiet", "--out-dir", second.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let read = |d: &Path| fs::read(d.join("trajectories.csv")).unwrap();
    assert_eq!(read(&first), read(&second));
}

#[test]
fn overrides_match_an_edited_file() {
    let tmp = tempfile::tempdir().unwrap();
    let flagged = tmp.path().join("flagged");
    let out = run_in(
        &flagged,
        "halfline_reflect",
        &["--override", "scenario.step=0.01", "--override", "scenario.driver.amplitude=2"],
    );
    assert_eq!(out.status.code(), Some(0));

    let mut doc: Value = serde_json::from_str(&fs::read_to_string(scenario("halfline_reflect")).unwrap()).unwrap();
    doc["scenario"]["step"] = 0.01.into();
    doc["scenario"]["driver"]["amplitude"] = 2.into();
    let edited = write_scenario(tmp.path(), &doc.to_string());
    let plain = tmp.path().join("plain");
    let out = sweep(&["run", edited.to_str().unwrap(), "--quiet", "--out-dir", plain.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let read = |d: &Path| fs::read(d.join("trajectory.csv")).unwrap();
    assert_eq!(read(&flagged), read(&plain));
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), "halfline_reflect", &["--override", "scenario.stepp=0.01"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run_in(tmp.path(), "halfline_reflect", &["--override", "no-equals-sign"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run_in(tmp.path(), "halfline_reflect", &["--paths", "10"]);
    assert_eq!(out.status.code(), Some(2));

    let doc = fs::read_to_string(scenario("halfline_reflect")).unwrap();
    let typo = write_scenario(tmp.path(), &doc.replace("\"horizon\"", "\"horizn\""));
    let out = sweep(&["run", typo.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let kind = write_scenario(tmp.path(), &doc.replace("\"skorohod\"", "\"teleport\""));
    let out = sweep(&["run", kind.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let version = write_scenario(tmp.path(), &doc.replace("\"schema_version\": 1", "\"schema_version\": 2"));
    let out = sweep(&["run", version.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn io_errors_exit_with_five() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.json");
    let out = sweep(&["run", missing.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));

    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = run_in(&blocker.join("out"), "halfline_reflect", &[]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn out_dir_defaults_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let file = scenario("halfline_reflect");
    let out = Command::new(env!("CARGO_BIN_EXE_sweep"))
        .args(["run", file.to_str().unwrap(), "--quiet"])
        .env("SWEEP_OUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("trajectory.csv").exists());
}

fn geometry(name: &str) -> Value {
    let tmp = tempfile::tempdir().unwrap();
    let file = scenario(name);
    let out = sweep(&["geometry-check", file.to_str().unwrap(), "--quiet", "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap()
}

#[test]
fn two_disk_probe_certificate() {
    let report = geometry("geometry_disks");
    let probe = &report["probes"][0];
    assert_eq!(probe["active"], serde_json::json!([0]));
    let gamma = probe["gamma"].as_f64().unwrap();
    assert!((gamma - 1.0).abs() < 1e-12);
    // g = |q_2 - q_1| - 2 has gradient (-e, e) with e the unit contact normal
    let alpha = 2f64.sqrt();
    let beta = 2f64.sqrt();
    let nu = alpha * alpha / (4.0 * gamma * gamma * 1.0 * beta);
    assert_eq!(probe["p"], 1);
    assert!((probe["good_direction"]["nu"].as_f64().unwrap() - nu).abs() < 1e-12);
    let u: Vec<f64> = probe["good_direction"]["u"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let h = 0.5f64.sqrt();
    for (a, b) in u.iter().zip([-h, 0.0, h, 0.0]) {
        assert!((a - b).abs() < 1e-9, "{u:?}");
    }
    assert_eq!(probe["admissibility"], "certified");
    assert_eq!(report["probes"][2]["status"], "skipped");
    assert_eq!(report["hypomonotonicity"]["violations"], 0);
}

#[test]
fn opposite_normals_fail_reverse_triangle() {
    let report = geometry("squeeze_check");
    let probe = &report["probes"][0];
    assert!(probe["r_rho"].as_str().unwrap().starts_with("R_rho fails"));
    assert!(probe["gamma"].is_null());
    assert!(probe["admissibility"].as_str().unwrap().starts_with("not certified"));
}

#[test]
fn moving_half_line_hausdorff_sample() {
    let report = geometry("moving_halfline_check");
    let d = report["hausdorff"][0]["estimate"].as_f64().unwrap();
    assert!((d - 0.5).abs() < 1e-12, "{d}");
}

#[test]
fn subcommands_check_scenario_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let file = scenario("halfline_reflect");
    for cmd in ["geometry-check", "sweep"] {
        let out = sweep(&[cmd, file.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
    }
    let stability = scenario("stability_halfline");
    let out = sweep(&["sweep", stability.to_str().unwrap(), "--paths", "20", "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("log-log slope"), "{stdout}");
    let csv = fs::read_to_string(tmp.path().join("stability.csv")).unwrap();
    assert_eq!(column(&csv, "epsilon"), vec![0.1, 0.05, 0.025, 0.0125]);
}
