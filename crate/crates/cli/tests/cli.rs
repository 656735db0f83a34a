//! End-to-end checks of the command-line surface against real files.

use std::path::Path;
use std::process::Command;

fn geslab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_geslab"))
}

const TWO_STATE_MDP: &str = "\
schema_version = 1
n_states = 2
n_actions = 2
gamma = 0.999
transition 0 0 = 0 1
transition 0 1 = 1 0
transition 1 0 = 0 1
transition 1 1 = 1 0
policy target 0 = 1 0
policy target 1 = 1 0
policy behavior 0 = 0.5 0.5
policy behavior 1 = 0.5 0.5
order = 0:0 1:0 0:1 1:1
feature 0 0 = 1 0
feature 1 0 = 2 0
feature 0 1 = 0 1
feature 1 1 = 0 2
";

fn write_two_state(dir: &Path, gamma: f64, reward_line: &str) -> std::path::PathBuf {
    let path = dir.join("two_state.mdp");
    let text = TWO_STATE_MDP.replace("gamma = 0.999", &format!("gamma = {gamma}"));
    let text = if reward_line.is_empty() {
        text
    } else {
        format!("{text}{reward_line}\n")
    };
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn analyze_reports_instability_in_the_divergent_regime() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = write_two_state(dir.path(), 0.999, "");
    let report = dir.path().join("report.kv");
    let out = geslab()
        .args(["analyze"])
        .arg(&mdp)
        .args(["--lambda", "0.99", "--out"])
        .arg(&report)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("UNSTABLE"), "{stdout}");
    let kv = std::fs::read_to_string(&report).unwrap();
    assert!(kv.contains("stable = false"));
    assert!(kv.contains("max_real_part"));
}

#[test]
fn analyze_reports_stability_with_safe_step() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = write_two_state(dir.path(), 0.9, "");
    let out = geslab()
        .args(["analyze"])
        .arg(&mdp)
        .args(["--lambda", "0.99"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("STABLE"), "{stdout}");
    assert!(stdout.contains("safe step size"), "{stdout}");
}

#[test]
fn fixed_points_prints_both_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = write_two_state(dir.path(), 0.9, "reward 0 0 = 1.0");
    let out = geslab()
        .args(["fixed-points"])
        .arg(&mdp)
        .args(["--lambda", "0.5"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("GES"), "{stdout}");
    assert!(stdout.contains("GTB"), "{stdout}");
    assert!(stdout.contains("residual"), "{stdout}");
}

#[test]
fn demo_divergence_crosses_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("curve.csv");
    let out = geslab()
        .args([
            "demo-divergence",
            "--gamma",
            "0.999",
            "--lambda",
            "0.99",
            "--alpha",
            "0.1",
            "--out",
        ])
        .arg(&curve)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("divergent regime"), "{stdout}");
    assert!(stdout.contains("crossed 1e6"), "{stdout}");
    let csv = std::fs::read_to_string(&curve).unwrap();
    assert!(csv.starts_with("step,abs_theta_1"));
    assert!(csv.lines().count() > 100);
}

#[test]
fn run_and_sweep_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("results");
    let config = dir.path().join("exp.cfg");
    std::fs::write(
        &config,
        format!(
            "\
environment = two-state
gamma = 0.5
lambda = 0.5
rewards = 1,0,0,0
schedule = constant alpha=0.01 beta=0.01
grid_alpha = -6,-4
grid_ratio = 0
n_runs = 2
n_episodes = 50
stride = 200
out_dir = {}
",
            out_dir.display()
        ),
    )
    .unwrap();

    let out = geslab().args(["run"]).arg(&config).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("runs.csv").exists());

    let out = geslab().args(["sweep"]).arg(&config).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let runs = std::fs::read_to_string(out_dir.join("runs.csv")).unwrap();
    assert!(runs.starts_with("env,lambda,gamma,alpha,beta_over_alpha,seed,step,mspbe"));
    // 2 cells x 2 seeds, each with at least 2 recorded rows
    assert!(runs.lines().count() > 8, "{runs}");
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3, "{summary}");
    assert!(out_dir.join("config.txt").exists());
}

#[test]
fn missing_policy_is_a_clean_error() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = write_two_state(dir.path(), 0.9, "");
    let out = geslab()
        .args(["analyze"])
        .arg(&mdp)
        .args(["--target", "nonexistent"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("no policy named"), "{stderr}");
}
