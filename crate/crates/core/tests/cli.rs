use std::process::Command;

use serde_json::Value;

fn nurules(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nurules"))
        .args(args)
        .env_remove("NURULES_PARALLELISM")
        .output()
        .expect("binary runs")
}

fn stdout(out: &std::process::Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn oracle_prints_primary_law() {
    let out = nurules(&["oracle", "--scenario", "primary-only"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let law: Vec<(String, f64)> = text
        .lines()
        .filter_map(|l| l.split_once('\t'))
        .map(|(a, b)| (a.to_string(), b.parse().unwrap()))
        .collect();
    assert_eq!(law.len(), 2, "{text}");
    assert!(law
        .iter()
        .any(|(l, p)| l == "capture" && (p - 0.6).abs() < 1e-12));
    assert!(law
        .iter()
        .any(|(l, p)| l == "no-capture" && (p - 0.4).abs() < 1e-12));
}

#[test]
fn oracle_prints_a_cdf() {
    let out = nurules(&[
        "oracle",
        "--scenario",
        "primary-only",
        "--cdf",
        "D1",
        "--points",
        "3",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<&str> = text
        .lines()
        .skip_while(|l| !l.starts_with("cdf"))
        .skip(1)
        .collect();
    assert_eq!(rows.len(), 3, "{text}");
    let mid: f64 = rows[1].split('\t').nth(1).unwrap().parse().unwrap();
    assert!((mid - 0.3).abs() < 1e-12);
}

#[test]
fn run_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("obs");
    let out = nurules(&[
        "run",
        "--scenario",
        "observer",
        "--trials",
        "3000",
        "--master-seed",
        "42",
        "--parallelism",
        "2",
        "--output",
        prefix.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(prefix.with_extension("csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("label,count,frequency,std_error,oracle_probability")
    );
    let counts: u64 = lines
        .map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(counts, 3000);
    let json: Value =
        serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(json["trials"], 3000);
    assert_eq!(json["master_seed"], 42);
    assert!((json["oracle"]["ground-then-capture"].as_f64().unwrap() - 0.1).abs() < 1e-9);
}

#[test]
fn runs_are_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for workers in ["1", "3"] {
        let prefix = dir.path().join(format!("w{workers}"));
        let out = nurules(&[
            "run",
            "-s",
            "two-observers",
            "-n",
            "2000",
            "--parallelism",
            workers,
            "-o",
            prefix.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        csvs.push(std::fs::read_to_string(prefix.with_extension("csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn export_then_run_from_file() {
    let out = nurules(&["export-scenario", "counter-chain:3"]);
    assert!(out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.toml");
    std::fs::write(&path, out.stdout).unwrap();
    let out = nurules(&["oracle", "--scenario", path.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).starts_with("reading-1>reading-2\t1.0000"));
}

#[test]
fn trace_emits_ordered_json_lines() {
    let out = nurules(&["trace", "--scenario", "two-observers", "--master-seed", "7"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let records: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let (last, events) = records.split_last().unwrap();
    assert!(last["outcome"].is_string());
    let mut prev = f64::NEG_INFINITY;
    for r in events {
        let t = r["time"].as_f64().unwrap();
        assert!(t >= prev);
        prev = t;
        let hash = r["weights_sha256"].as_str().unwrap();
        assert_eq!(hash.len(), 64);
        assert!(r["weights"].is_object());
    }
    assert!(events.iter().any(|r| r["kind"] == "Collapse"));
}

#[test]
fn trace_dense_sampling_adds_samples() {
    let plain = nurules(&["trace", "-s", "primary-only", "--master-seed", "3"]);
    let dense = nurules(&[
        "trace",
        "-s",
        "primary-only",
        "--master-seed",
        "3",
        "--dense-dt",
        "0.5",
    ]);
    assert!(plain.status.success() && dense.status.success());
    let samples = stdout(&dense)
        .lines()
        .filter(|l| l.contains("\"Sample\""))
        .count();
    assert!(samples > 0);
    assert!(!stdout(&plain).contains("\"Sample\""));
    assert_eq!(stdout(&plain).lines().last(), stdout(&dense).lines().last());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(nurules(&["run"]).status.code(), Some(2));
    assert_eq!(nurules(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        nurules(&["run", "-s", "observer", "-n", "many"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn bad_inputs_exit_with_one() {
    let out = nurules(&["oracle", "--scenario", "/no/such/file.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/file.toml"));
    let out = nurules(&["run", "-s", "three-level-atom:1,1", "-n", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strong_rate"));
}

#[test]
fn verify_runs_selected_criteria() {
    let out = nurules(&["verify", "--only", "9", "--parallelism", "2"]);
    let text = stdout(&out);
    assert!(text.starts_with("criterion 9 PASS"), "{text}");
    assert!(out.status.success());
}
