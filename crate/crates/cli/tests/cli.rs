use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orlicz-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn strip_runtime(text: &str) -> String {
    text.lines().filter(|l| !l.contains("\"runtime_ms\"")).collect::<Vec<_>>().join("\n")
}

#[test]
fn square_is_not_in_b2() {
    let out = lab(&["young", "--family", "power", "--a", "2", "--p", "2", "--bp-check"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["member"], Value::Bool(false));
}

#[test]
fn power_three_halves_is_in_b2() {
    let out = lab(&["young", "--family", "power", "--a", "1.5", "--p", "2", "--bp-check"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["member"], Value::Bool(true));
    // ∫_1^∞ t^{1.5} t^{-2} dt/t = 2
    let integral = v["bp"]["integral"].as_f64().unwrap();
    assert!((integral - 2.0).abs() < 1e-6, "{integral}");
}

#[test]
fn quick_suite_passes() {
    let out = lab(&["suite", "--quick"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["pass"], Value::Bool(true));
}

#[test]
fn positive_verify_passes() {
    let out = lab(&["verify", "--config", &config("t1_power.json"), "--depths", "5,6"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["verdict"], "PASS");
}

#[test]
fn negative_control_exits_one() {
    let out = lab(&["verify", "--thm", "T1", "--config", &config("t1_negative.json"), "--depths", "6,7,8"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["verdict"], "FAIL");
}

#[test]
fn verify_writes_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = lab(&[
        "verify",
        "--config",
        &config("t1_power.json"),
        "--depths",
        "5,6",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for key in ["instance", "condition", "ratios", "assertions", "runtime_ms"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v["ratios"][0].get("witness_f").is_some());
}

#[test]
fn config_errors_exit_two_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"theorem": "T1", "p": 0.5}"#).unwrap();
    let out = lab(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`p`"));

    std::fs::write(&path, r#"{"theorem": "T1", "omgea": {"kind": "constant", "value": 1}}"#).unwrap();
    let out = lab(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("omgea"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(lab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(lab(&["young", "--nope"]).status.code(), Some(2));
    assert_eq!(lab(&["verify", "--thm", "T9"]).status.code(), Some(2));
}

#[test]
fn maximal_csv_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("field.csv");
    let out = lab(&["maximal", "--op", "dyadic", "--beta", "1/3", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let cells = stdout_json(&out)["cells"].as_u64().unwrap() as usize;
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("level,index,value"));
    assert_eq!(lines.count(), cells);
}

#[test]
fn stopping_family_checks_hold() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("family.json");
    let out = lab(&["stopping", "--lambda", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["lambda"], 3.0);
    for key in ["disjoint", "threshold", "maximal", "union"] {
        assert_eq!(v["checks"][key], Value::Bool(true), "{key}");
    }
    for i in v["intervals"].as_array().unwrap() {
        assert!(i["norm"].as_f64().unwrap() > 3.0);
    }
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let path = dir.path().join(format!("suite{threads}.json"));
        let out = lab(&["suite", "--quick", "--threads", threads, "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        strip_runtime(&std::fs::read_to_string(&path).unwrap())
    };
    assert_eq!(run("1"), run("4"));

    let seeded = |seed: &str| lab(&["stopping", "--lambda", "2", "--seed", seed]).stdout;
    assert_eq!(seeded("0xabc"), seeded("abc"));
    assert_ne!(seeded("0xabc"), seeded("0xabd"));
}
