use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qss(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qss"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("qss runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn write_config(tmp: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = tmp.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn q_estimate_for_log_power_is_three_halves() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("q");
    let o = qss(&["q-estimate", "--f", "log_power", "--p", "3", "--r", "1", "--n", "2"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = report(&out);
    let q = rep["result"]["q"].as_f64().unwrap();
    assert!((q - 1.5).abs() < 1e-2, "{q}");
    assert_eq!(rep["result"]["sequence"].as_array().unwrap().len(), 25);
    assert_eq!(rep["result"]["fujita"]["verdict"], "subcritical");
    let csv = fs::read_to_string(out.join("sequence.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "s,dfF"));
    assert!(fs::read_to_string(out.join("plot.py")).unwrap().contains("sequence.csv"));
}

#[test]
fn profile_reports_golden_decay_limit() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("p");
    let o = qss(&["profile", "--kind", "power", "--p", "3", "--n", "3", "--alpha", "0.1"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ell = report(&out)["result"]["ell"].as_f64().unwrap();
    // RK4/Richardson oracle value
    assert!((ell - 0.174_911_781_68).abs() < 1e-9, "{ell}");
    let csv = fs::read_to_string(out.join("profile.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# model=power(p=3)"));
    assert!(csv.contains("# alpha=0.1\n") && csv.contains("# tol=1e-10\n"));
    assert!(csv.lines().any(|l| l == "r,v,dv,tracked"));
}

#[test]
fn report_keys_have_fixed_order() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("q");
    assert!(qss(&["q-estimate", "--f", "power", "--p", "3"], &out).status.success());
    let text = fs::read_to_string(out.join("report.json")).unwrap();
    let pos: Vec<usize> = ["\"format_version\"", "\"command\"", "\"subject\"", "\"config_hash\"", "\"config\"", "\"result\""]
        .iter()
        .map(|k| text.find(k).unwrap())
        .collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{pos:?}");
    let hash = report(&out)["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
}

#[test]
fn invalid_configs_fail_without_outputs() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("empty.json", ""),
        ("malformed.json", "{\"T_max\": "),
        ("unknown.json", "{\"T_max\": 1, \"bogus\": 2}"),
        ("negative.json", "{\"T_max\": -1}"),
        ("dimension.json", "{\"n_dim\": 0}"),
    ];
    for (name, text) in cases {
        let cfg = write_config(&tmp, name, text);
        let out = tmp.path().join(format!("out-{name}"));
        let o = qss(&["evolve", "--f", "power", "--p", "3", "--gamma", "1", "--config", cfg.to_str().unwrap()], &out);
        assert_eq!(o.status.code(), Some(2), "{name}");
        let err: Value = serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("{name}: stderr is not JSON"));
        assert_eq!(err["error"]["kind"], "config", "{name}");
        assert!(!out.exists(), "{name}: partial outputs written");
    }
}

#[test]
fn missing_parameters_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    for args in [
        &["q-estimate", "--f", "power"][..],
        &["q-estimate", "--f", "no_such_registry_entry"][..],
        &["evolve", "--f", "power", "--p", "3"][..],
        &["verify-identity", "--f", "power", "--p", "2", "--g", "cubic"][..],
    ] {
        let out = tmp.path().join("o");
        let o = qss(args, &out);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!out.exists());
    }
}

#[test]
fn numerical_failure_exits_one_without_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("t");
    // both ends blow up
    let o = qss(&["threshold", "--f", "power", "--p", "5", "--lo", "0.3", "--hi", "1"], &out);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "numerical");
    assert_eq!(err["error"]["variant"], "InvalidBracket");
    assert!(!out.exists());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "short.json", "{\"T_max\": 2, \"dr\": 0.2, \"snapshot_times\": [0, 1, 2]}");
    let runs: [&[&str]; 3] = [
        &["profile", "--kind", "exp", "--n", "2", "--alpha", "-1"],
        &["evolve", "--f", "exp_inverse", "--gamma", "0.5", "--config", cfg.to_str().unwrap()],
        &["verify-identity", "--f", "power", "--p", "2", "--g", "power:3", "--n", "2", "--count", "4"],
    ];
    for args in runs {
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        assert!(qss(args, &a).status.success(), "{args:?}");
        assert!(qss(args, &b).status.success(), "{args:?}");
        assert_eq!(files(&a), files(&b), "{args:?}");
        fs::remove_dir_all(&a).unwrap();
        fs::remove_dir_all(&b).unwrap();
    }
}

#[test]
fn config_hash_tracks_the_config() {
    let tmp = TempDir::new().unwrap();
    let hash = |t_max: &str| {
        let cfg = write_config(&tmp, "c.json", &format!("{{\"T_max\": {t_max}, \"dr\": 0.2}}"));
        let out = tmp.path().join(format!("e{t_max}"));
        let o = qss(&["evolve", "--f", "power", "--p", "3", "--gamma", "0.01", "--config", cfg.to_str().unwrap()], &out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let rep = report(&out);
        assert_eq!(rep["config"]["solver"]["T_max"].as_f64(), Some(t_max.parse().unwrap()));
        rep["config_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(hash("1"), hash("2"));
}

#[test]
fn evolve_writes_snapshots_and_history() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "c.json", "{\"T_max\": 1, \"dr\": 0.1, \"snapshot_times\": [0, 0.5, 1]}");
    let out = tmp.path().join("e");
    let o = qss(&["evolve", "--f", "power", "--p", "3", "--n", "3", "--gamma", "0.01", "--config", cfg.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = report(&out);
    assert_eq!(rep["result"]["verdict"], "global");
    assert_eq!(rep["result"]["snapshot_times"], serde_json::json!([0.0, 0.5, 1.0]));
    let snaps = fs::read_to_string(out.join("snapshots.csv")).unwrap();
    assert!(snaps.lines().any(|l| l == "t,r,u"));
    let times: std::collections::BTreeSet<&str> =
        snaps.lines().filter(|l| !l.starts_with('#') && *l != "t,r,u").map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(times.len(), 3);
}

#[test]
fn verify_identity_converges_at_second_order() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("i");
    let o = qss(&["verify-identity", "--f", "exp_inverse", "--g", "power:2", "--count", "5"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = report(&out);
    assert!(rep["result"]["min_order"].as_f64().unwrap() >= 1.9);
    assert_eq!(rep["result"]["cases"].as_array().unwrap().len(), 5);
}
