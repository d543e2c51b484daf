use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crl_mnp::harness::{read_trace_csv, run_experiment, ExperimentConfig};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crl-mnp"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run_cli(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const QLEARN_SMALL: &str = r#"
seed = 42
repeats = 3
output = "trace.csv"

[environment]
kind = "gridworld"
horizon_cap = 60

[target.box]
lower = [0.0, 0.0]
upper = [11.0, 0.5]

[oracle]
kind = "q_learning"
episodes = 300
eval_rollouts = 50

[solver]
max_major_cycles = 12
stop_tolerance = 0.0
"#;

#[test]
fn solve_is_byte_identical_across_processes() {
    for (name, text) in [("worstcase", fs::read_to_string(bundled("worstcase.toml")).unwrap()), ("qlearn", QLEARN_SMALL.to_string())] {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let dir = TempDir::new().unwrap();
            let cfg = write_config(dir.path(), "c.toml", &text);
            let out = dir.path().join("trace.csv");
            let status = run_cli(&["solve", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--quiet"], dir.path());
            assert!(status.status.success(), "{name}: {}", String::from_utf8_lossy(&status.stderr));
            outputs.push((fs::read(&out).unwrap(), fs::read(out.with_extension("json")).unwrap()));
        }
        assert!(!outputs[0].0.is_empty());
        assert_eq!(outputs[0].0, outputs[1].0, "{name}: CSV differs");
        assert_eq!(outputs[0].1, outputs[1].1, "{name}: JSON differs");
    }
}

#[test]
fn compare_is_byte_identical_and_paired() {
    let mut csvs = Vec::new();
    for _ in 0..2 {
        let dir = TempDir::new().unwrap();
        let out = dir.path().join("paired.csv");
        let status = run_cli(&["compare", "--config", bundled("rps.toml").to_str().unwrap(), "--output", out.to_str().unwrap(), "--quiet"], dir.path());
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        csvs.push(fs::read_to_string(&out).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let header = csvs[0].lines().next().unwrap();
    assert!(header.starts_with("run_id,t,"));
    assert!(header.contains("cg_stored_policies") && header.contains("mnp_stored_policies"));
    assert_eq!(csvs[0].lines().count(), 101);
}

#[test]
fn emitted_csv_round_trips_to_the_in_process_rows() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("trace.csv");
    let status = run_cli(&["solve", bundled("worstcase.toml").to_str().unwrap(), "--output", out.to_str().unwrap(), "--quiet"], dir.path());
    assert!(status.status.success());
    let from_disk = read_trace_csv(fs::File::open(&out).unwrap()).unwrap();

    let mut cfg = ExperimentConfig::load(&bundled("worstcase.toml")).unwrap();
    cfg.output = dir.path().join("again.csv");
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(from_disk, report.rows);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&cfg.output).unwrap());

    let header = fs::read_to_string(&out).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "run_id,t,oracle_calls,dist_sq,err,stored_policies,minor_cycles,drop_step,wall_time_ms");
    for run in 0..5 {
        let ts: Vec<usize> = from_disk.iter().filter(|r| r.run_id == run).map(|r| r.t).collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert!(from_disk.iter().filter(|r| r.run_id == run).all(|r| r.oracle_calls == r.t && r.stored_policies <= 4));
    }
}

#[test]
fn worstcase_summary_reports_m_plus_one_policies() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("w.csv");
    assert!(run_cli(&["solve", bundled("worstcase.toml").to_str().unwrap(), "--output", out.to_str().unwrap(), "--quiet"], dir.path()).status.success());
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["final_stored_policies"]["median"], 4.0);
    assert_eq!(summary["repeats"], 5);
    assert_eq!(summary["all_reached_target"], true);
}

#[test]
fn seed_override_changes_the_run_seeds() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "q.toml", QLEARN_SMALL);
    let mut summaries = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(format!("s{seed}.csv"));
        assert!(run_cli(&["solve", cfg.to_str().unwrap(), "--seed", seed, "--output", out.to_str().unwrap(), "--quiet"], dir.path()).status.success());
        let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.with_extension("json")).unwrap()).unwrap();
        assert_eq!(summary["seed"], seed.parse::<u64>().unwrap());
        summaries.push(summary["runs"].as_array().unwrap().iter().map(|r| r["seed"].as_u64().unwrap()).collect::<Vec<_>>());
    }
    assert_eq!(summaries[0], vec![1, 0, 3]);
    assert_eq!(summaries[1], vec![2, 3, 0]);
}

#[test]
fn validate_reports_dimensions() {
    let dir = TempDir::new().unwrap();
    let out = run_cli(&["validate", bundled("navigation.toml").to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("states=54") && text.contains("m=2"), "{text}");
}

#[test]
fn config_errors_exit_with_one_and_name_the_field() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("box.toml", "[environment]\nkind = \"worstcase\"\nm = 2\n[target.box]\nlower = [1.0, 0.0]\nupper = [0.0, 1.0]\n", "target"),
        ("dim.toml", "[environment]\nkind = \"gridworld\"\n[target]\nsingleton = [1.0, 1.0, 1.0]\n", "dimension mismatch"),
        ("parse.toml", "[environment\nkind = 3\n", "parse"),
        ("unknown.toml", "[environment]\nkind = \"worstcase\"\nm = 2\nspeed = 3\n[target]\nsingleton = [0.25, 0.25]\n", "speed"),
        ("map.toml", "[environment]\nkind = \"gridworld\"\nmap_path = \"missing.txt\"\n[target]\nsingleton = [1.0, 1.0]\n", "environment.map_path"),
        ("repeats.toml", "repeats = 0\n[environment]\nkind = \"worstcase\"\nm = 2\n[target]\nsingleton = [0.25, 0.25]\n", "repeats"),
    ];
    for (name, text, needle) in cases {
        let cfg = write_config(dir.path(), name, text);
        for verb in ["validate", "solve"] {
            let out = run_cli(&[verb, cfg.to_str().unwrap()], dir.path());
            assert_eq!(out.status.code(), Some(1), "{verb} {name}");
            let err = String::from_utf8_lossy(&out.stderr);
            assert!(err.contains(needle), "{verb} {name}: {err}");
        }
    }
    let missing = run_cli(&["validate", "no-such-file.toml"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn require_feasible_exit_codes() {
    let dir = TempDir::new().unwrap();
    let infeasible = write_config(
        dir.path(),
        "far.toml",
        "output = \"far.csv\"\n[environment]\nkind = \"worstcase\"\nm = 2\n[target]\nsingleton = [1.0, 1.0]\n",
    );
    assert_eq!(run_cli(&["solve", infeasible.to_str().unwrap(), "--quiet"], dir.path()).status.code(), Some(0));
    assert_eq!(run_cli(&["solve", infeasible.to_str().unwrap(), "--quiet", "--require-feasible"], dir.path()).status.code(), Some(3));
    assert_eq!(run_cli(&["compare", infeasible.to_str().unwrap(), "--quiet", "--require-feasible"], dir.path()).status.code(), Some(3));
    let out = dir.path().join("ok.csv");
    let ok = run_cli(&["solve", bundled("worstcase.toml").to_str().unwrap(), "--quiet", "--require-feasible", "--output", out.to_str().unwrap()], dir.path());
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    fs::create_dir(dir.path().join("taken.csv")).unwrap();
    let out = run_cli(&["solve", bundled("worstcase.toml").to_str().unwrap(), "--output", "taken.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn enumerate_lists_every_deterministic_policy() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "w.toml", "[environment]\nkind = \"worstcase\"\nm = 2\n[target]\nsingleton = [0.25, 0.25]\n");
    let out = run_cli(&["enumerate", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "policy,j0,j1\n0,1,0\n1,0,1\n2,0,0\n");

    let rps = run_cli(&["enumerate", bundled("rps.toml").to_str().unwrap()], dir.path());
    let text = String::from_utf8(rps.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(1).unwrap().ends_with(",0.3333333333333333,0,0"));
}
