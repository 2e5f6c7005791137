use std::path::Path;
use std::process::{Command, Output};

fn smc_optl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smc-optl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn config_prints_builtin_json() {
    let out = smc_optl(&["config", "bimodal"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["K"], 1000);
    assert_eq!(v["strategy"], "gmm-opt:2");
}

#[test]
fn run_writes_trace_and_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("toy");
    let out = smc_optl(&[
        "run",
        "--experiment",
        "2d_toy",
        "--strategy",
        "forward",
        "--n",
        "80",
        "--k",
        "15",
        "--seed",
        "4",
        "--replicates",
        "1",
        "--ess-threshold",
        "0.3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let trace = read(&out_dir.join("trace.csv"));
    let mut lines = trace.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("iteration,ess,resampled,mean_0,mean_1,cov_00"));
    assert_eq!(lines.count(), 15);
    assert!(!out_dir.join("study.csv").exists());

    let cfg: serde_json::Value = serde_json::from_str(&read(&out_dir.join("config.json"))).unwrap();
    assert_eq!(cfg["N"], 80);
    assert_eq!(cfg["K"], 15);
    assert_eq!(cfg["seed"], 4);
    assert_eq!(cfg["strategy"], "forward");
    assert_eq!(cfg["ess_threshold_ratio"], 0.3);
}

#[test]
fn run_with_replicates_writes_one_trace_each() {
    let dir = tempfile::tempdir().unwrap();
    let out = smc_optl(&[
        "run",
        "--experiment",
        "2d_toy",
        "--n",
        "60",
        "--k",
        "8",
        "--replicates",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    for name in ["trace.csv", "trace_r1.csv", "trace_r2.csv", "study.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let study = read(&dir.path().join("study.csv"));
    assert_eq!(study.lines().count(), 1 + 3 + 1);
    assert_ne!(
        read(&dir.path().join("trace.csv")),
        read(&dir.path().join("trace_r1.csv"))
    );
}

#[test]
fn study_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let path = dir.path().join(sub);
        let out = smc_optl(&[
            "study",
            "--experiment",
            "2d_toy",
            "--strategies",
            "forward,gauss-opt",
            "--n",
            "60",
            "--k",
            "10",
            "--replicates",
            "4",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(path.join("trace_forward.csv").exists());
        assert!(path.join("trace_gauss-opt.csv").exists());
        read(&path.join("study.csv"))
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    assert_eq!(a.lines().filter(|l| l.contains(",variance,")).count(), 2);
}

#[test]
fn final_iteration_flag_changes_table() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, extra: &[&str]| {
        let path = dir.path().join(sub);
        let mut args = vec![
            "study",
            "--experiment",
            "2d_toy",
            "--strategies",
            "gauss-opt",
            "--n",
            "60",
            "--k",
            "10",
            "--replicates",
            "3",
            "--out",
            path.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        assert!(smc_optl(&args).status.success());
        read(&path.join("study.csv"))
    };
    assert_ne!(run("recycled", &[]), run("final", &["--final-iteration"]));
}

#[test]
fn unknown_experiment_lists_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let out = smc_optl(&[
        "run",
        "--experiment",
        "nope",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("2d_toy") && err.contains("bimodal"), "{err}");
}

#[test]
fn malformed_strategy_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = smc_optl(&[
        "run",
        "--experiment",
        "2d_toy",
        "--strategy",
        "gmm-opt:0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(!dir.path().join("config.json").exists());
}

#[test]
fn degenerate_run_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("far.json");
    std::fs::write(
        &cfg,
        r#"{"name": "far", "target": {"type": "gaussian", "mean": [1e200], "cov": [[1.0]]},
            "proposal": {"initial": {"mean": [0.0], "cov": [[1.0]]}, "random_walk_cov": [[1.0]]},
            "N": 50, "K": 5, "strategy": "forward", "replicates": 1}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = smc_optl(&[
        "run",
        "--experiment",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicate 0"));
}
