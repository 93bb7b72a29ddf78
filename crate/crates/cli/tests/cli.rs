use std::fs;
use std::process::{Command, Output};

fn eulerdisc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eulerdisc"))
        .args(args)
        .env_remove("EULERDISC_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// The pretty-printed report that precedes the one-line run summary.
fn report(text: &str) -> serde_json::Value {
    let end = text.rfind("\n{\"kind\"").expect("run summary line");
    serde_json::from_str(&text[..end]).unwrap()
}

#[test]
fn correct_emits_probabilities() {
    let o = eulerdisc(&["correct", "--b", "2", "--y", "1.9", "--t", "1", "--n", "50", "--mc-samples", "200000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["uncorrected", "corrected", "mc_estimate", "mc_se"] {
        assert!(v[key].is_f64(), "{key}");
    }
    let mc = v["mc_estimate"].as_f64().unwrap();
    let c = v["corrected"].as_f64().unwrap();
    let u = v["uncorrected"].as_f64().unwrap();
    assert!((mc - c).abs() < (mc - u).abs());
}

#[test]
fn correct_rejects_threshold_above_barrier() {
    let o = eulerdisc(&["correct", "--b", "1", "--y", "2", "--n", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds barrier"));
}

#[test]
fn simulate_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = eulerdisc(&[
        "simulate",
        "--kind",
        "min_finite",
        "--set",
        "n=64",
        "--samples",
        "300",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("min_finite.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("time_err,pos_err,frac"));
    assert_eq!(csv.lines().count(), 301);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("min_finite.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["n"], 64);
    assert_eq!(json["components"]["pos_err"]["count"], 300);
    // Nothing else was written next to the output directory.
    let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_eulerdisc"))
        .args(["limit", "--kind", "hit", "--samples", "100", "--format", "json"])
        .env("EULERDISC_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("limit_hit.json").exists());
    assert!(!dir.path().join("limit_hit.csv").exists());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, "kind = overshoot\nm = 4\nsamples = 50\nseed = 9\n").unwrap();
    let o = eulerdisc(&["simulate", "--config", cfg.to_str().unwrap(), "--samples", "70"]);
    assert!(o.status.success());
    let r = report(&stdout(&o));
    assert_eq!(r["attempted"], 70);
    assert_eq!(r["config"]["m"], 4.0);
}

#[test]
fn runs_are_reproducible() {
    let args = ["limit", "--kind", "min", "--samples", "500", "--seed", "5"];
    assert_eq!(stdout(&eulerdisc(&args)), stdout(&eulerdisc(&args)));
    let sharded = ["limit", "--kind", "min", "--samples", "500", "--seed", "5", "--shards", "4"];
    let one = report(&stdout(&eulerdisc(&args)));
    let four = report(&stdout(&eulerdisc(&sharded)));
    assert_eq!(one["components"], four["components"]);
}

#[test]
fn failed_threshold_sets_exit_code() {
    let o = eulerdisc(&["limit", "--kind", "min", "--samples", "200", "--set", "mean_tol=0"]);
    assert_eq!(o.status.code(), Some(1));
    let last = stdout(&o).lines().last().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&last).unwrap();
    assert_eq!(v["passed"], false);
    assert_eq!(v["failures"][0]["name"], "mean:pos_comp");
}

#[test]
fn bad_config_is_a_usage_error() {
    let o = eulerdisc(&["simulate", "--kind", "min_infinite", "--set", "mu=0", "--samples", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mu > 0"));
    let o = eulerdisc(&["simulate", "--kind", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_single_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let o = eulerdisc(&["verify", "--criteria", "1", "--output", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("[PASS]  1 beta constant"), "{text}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
}
