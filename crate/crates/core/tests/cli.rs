use std::process::{Command, Output};

fn dqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

#[test]
fn verify_mub_exit_codes() {
    assert_eq!(
        dqkd(&["verify-mub", "--p", "2", "--m", "2", "--tol", "1e-9"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        dqkd(&["verify-mub", "--p", "3", "--m", "1"]).status.code(),
        Some(0)
    );
    let bad = dqkd(&["verify-mub", "--p", "6", "--m", "1"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("not a prime power"));
    assert!(bad.stdout.is_empty());
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["bogus"][..],
        &["simulate"],
        &["simulate", "--d", "3", "--runs", "abc"],
        &["scan", "--dims", "2,3,12"],
        &["qdc", "--d", "3", "--c", "0.5"],
        &["export-mub", "--d", "1"],
    ] {
        assert_eq!(dqkd(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn verify_appendix_negative_control() {
    let ok = dqkd(&["verify-appendix", "--d", "16"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    let wrong = dqkd(&["verify-appendix", "--d", "16", "--wrong-sign"]);
    assert_eq!(wrong.status.code(), Some(1));
    assert!(stdout(&wrong).lines().last().unwrap().contains("FAIL"));
}

#[test]
fn verify_appendix_json() {
    let o = dqkd(&["verify-appendix", "--d", "5", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], true);
    let checks = v["checks"].as_array().unwrap();
    assert!(checks
        .iter()
        .any(|c| c["status"] == "skipped" && c["note"] == "skipped (odd p)"));
}

#[test]
fn simulate_writes_stats_and_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("stats.json");
    let transcript = dir.path().join("runs.jsonl");
    let o = dqkd(&[
        "simulate",
        "--d",
        "2",
        "--runs",
        "60000",
        "--attack",
        "intercept-resend",
        "--seed",
        "3",
        "--out",
        stats.to_str().unwrap(),
        "--transcript",
        transcript.to_str().unwrap(),
        "--check",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&stats).unwrap();
    assert!(text.ends_with('\n'));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in [
        "d",
        "attack",
        "c",
        "seed",
        "n_runs",
        "n_control",
        "n_coincident",
        "n_detected",
        "pe_hat",
        "pe_ci_lo",
        "pe_ci_hi",
        "eve_message_accuracy",
        "pe_analytic",
        "ir_analytic",
        "i_e",
    ] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["attack"], "intercept_resend");
    assert_eq!(v["eve_message_accuracy"], 1.0);
    let lines = std::fs::read_to_string(&transcript).unwrap();
    assert_eq!(lines.lines().count(), 60000);
    let detected = lines
        .lines()
        .filter(|l| l.contains("\"detected\":true"))
        .count();
    assert_eq!(v["n_detected"], detected as u64);
}

#[test]
fn simulate_check_without_attack() {
    // no attack: zero detections against a closed form of 0
    let o = dqkd(&["simulate", "--d", "3", "--runs", "20000", "--check"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn scan_json_and_csv_agree() {
    let csv = stdout(&dqkd(&[
        "scan", "--dims", "2,3,4", "--runs", "20000", "--seed", "1",
    ]));
    let json = stdout(&dqkd(&[
        "scan", "--dims", "2,3,4", "--runs", "20000", "--seed", "1", "--format", "json",
    ]));
    let rows: Vec<serde_json::Value> = serde_json::from_str(&json).unwrap();
    assert_eq!(csv.lines().count(), rows.len() + 1);
    for (line, row) in csv.lines().skip(1).zip(&rows) {
        let n: u64 = line.split(',').nth(5).unwrap().parse().unwrap();
        assert_eq!(row["n_control"], n);
    }
}

#[test]
fn qdc_curve_output() {
    let o = dqkd(&[
        "qdc", "--c", "0.5", "--d", "3", "--bits", "128", "--step", "32",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let p: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(p.len(), 5);
    assert_eq!(p[0], 1.0);
    assert!(p.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn export_mub_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mub.json");
    let o = dqkd(&[
        "export-mub",
        "--p",
        "3",
        "--m",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["reduction_poly"], serde_json::json!([1, 0, 1]));
    assert_eq!(v["bases"].as_array().unwrap().len(), 10);
}
