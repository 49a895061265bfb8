use std::path::Path;
use std::process::{Command, Output};

fn roylab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roylab"))
        .args(args)
        .env_remove("ROYLAB_THREADS")
        .output()
        .unwrap()
}

fn code(args: &[&str]) -> i32 {
    roylab(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scenarios_lists_the_eight_builtins() {
    let out = roylab(&["scenarios"]);
    assert!(out.status.success());
    let names: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(
        names,
        [
            "no-shocks",
            "moderate-shocks",
            "vlarge-shocks",
            "persistent-shocks",
            "switch-costs-no-shocks",
            "moderate-switch-costs",
            "high-switch-costs",
            "trends-amenities",
        ]
    );
}

#[test]
fn experiment_from_a_dumped_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfgs = dir.path().join("cfg");
    assert_eq!(code(&["scenarios", "--dump", s(&cfgs)]), 0);
    let out = dir.path().join("out");
    let cfg = cfgs.join("no-shocks.json");
    let args = [
        "experiment",
        "--config",
        s(&cfg),
        "--set",
        "repetitions=2",
        "--set",
        "n_workers=300",
        "--out",
        s(&out),
        "--threads",
        "2",
    ];
    assert_eq!(code(&args), 0);
    let root = out.join("no-shocks");
    assert!(root.join("report.json").is_file());
    assert!(root.join("ols").join("prices.csv").is_file());
    assert!(root.join("ols").join("gammas.csv").is_file());
}

#[test]
fn simulate_then_estimate_and_describe() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let sim_args = ["simulate", "--scenario", "moderate-shocks", "--set", "n_workers=300", "--out", s(&sim)];
    assert_eq!(code(&sim_args), 0);
    let panel = sim.join("panel.csv");
    let levels = sim.join("levels.csv");
    let est = dir.path().join("est");
    for m in ["ols", "iv", "fe"] {
        let args = [
            "estimate",
            "--panel",
            s(&panel),
            "--levels",
            s(&levels),
            "--method",
            m,
            "--out",
            s(&est),
        ];
        assert_eq!(code(&args), 0, "{m}");
    }
    assert!(est.join("iv").join("prices.csv").is_file());
    assert!(est.join("fe_stint").join("gammas.csv").is_file());

    let desc = dir.path().join("desc");
    assert_eq!(code(&["describe", "--panel", s(&panel), "--levels", s(&levels), "--out", s(&desc)]), 0);
    assert!(std::fs::read_dir(&desc).unwrap().count() >= 4);
}

#[test]
fn iv_without_two_lags_fails_with_estimation_code() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert_eq!(code(&["simulate", "--set", "n_workers=200", "--out", s(&sim)]), 0);
    let text = std::fs::read_to_string(sim.join("panel.csv")).unwrap();
    let mut lines = text.lines();
    let mut short = format!("{}\n", lines.next().unwrap());
    for l in lines.filter(|l| l.split(',').nth(1) == Some("1976")) {
        short.push_str(l);
        short.push('\n');
    }
    let panel = dir.path().join("short.csv");
    std::fs::write(&panel, short).unwrap();
    assert_eq!(code(&["estimate", "--panel", s(&panel), "--method", "iv", "--out", s(dir.path())]), 3);
}

#[test]
fn bad_input_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert_eq!(code(&["experiment", "--set", "no_such_key=1", "--out", out]), 2);
    assert_eq!(code(&["experiment", "--scenario", "nope", "--out", out]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["experiment", "--config", "/nonexistent/cfg.json", "--out", out]), 4);
    assert_eq!(code(&["estimate", "--panel", "/nonexistent/panel.csv", "--out", out]), 4);
    assert_eq!(code(&["--version"]), 0);
}
