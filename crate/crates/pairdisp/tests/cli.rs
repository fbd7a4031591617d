use std::path::Path;
use std::process::Command;

const SMALL: &str = r#"
[simulate]
t_end = 1.0
paths = 3
audit_paths = 50

[control]
n = 2
steps = 65536
"#;

fn pairdisp(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pairdisp")).args(args).current_dir(dir).env_remove("PAIRDISP_WORKERS").output().unwrap()
}

#[test]
fn simulate_reruns_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    for (out, workers) in [("a", "2"), ("b", "1")] {
        let o = pairdisp(&["simulate", "--config", "small.toml", "--seed", "5", "--out", out, "--workers", workers], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert!(stdout.contains("PASS simulate/reflection_invariants"), "{stdout}");
        assert!(!stdout.contains("FAIL"), "{stdout}");
    }
    for i in 0..3 {
        let f = format!("simulate/path_{i}.csv");
        let a = std::fs::read(dir.path().join("a").join(&f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(&f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f}");
    }
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["passed"], true);
    let echoed = std::fs::read_to_string(dir.path().join("a/config.toml")).unwrap();
    assert!(echoed.contains("seed = 5"), "{echoed}");
}

#[test]
fn different_seeds_differ() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    for (seed, out) in [("1", "a"), ("2", "b")] {
        assert!(pairdisp(&["simulate", "--config", "small.toml", "--seed", seed, "--out", out], dir.path()).status.success());
    }
    let a = std::fs::read(dir.path().join("a/simulate/path_0.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/simulate/path_0.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn invalid_ledger_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[ledger]\nq1 = 0.5\n").unwrap();
    let o = pairdisp(&["verify", "--config", "bad.toml", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("q1 must be 0"));
    assert!(!dir.path().join("o/manifest.json").exists());
}

#[test]
fn unknown_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = pairdisp(&["figure2"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn control_writes_reach_reports() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let o = pairdisp(&["control", "--config", "small.toml", "--out", "c"], dir.path());
    assert!(o.status.success(), "{}\n{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr));
    for f in ["control/reach_low.json", "control/reach_high.json"] {
        assert!(dir.path().join("c").join(f).exists(), "{f}");
    }
}
