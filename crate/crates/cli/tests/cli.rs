use std::path::{Path, PathBuf};
use std::process::Command;

use chainlab_cli::manifest::blob_hash;
use chainlab_cli::{run_experiment, Experiment};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pos-chainlab"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("chainlab-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn status(args: &[&str]) -> i32 {
    bin().args(args).output().unwrap().status.code().unwrap()
}

fn config_file(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn phi_table_writes_csv_and_manifest() {
    let d = scratch("phi");
    let out = d.join("out");
    assert_eq!(status(&["phi-table", "--assert", "--out", out.to_str().unwrap()]), 0);
    let csv = std::fs::read_to_string(out.join("phi_table.csv")).unwrap();
    assert!(csv.starts_with("c,phi,psi,theta_star,beta_c\n"));
    assert!(csv.contains("\n1,2.718282,"));
    assert_eq!(csv.lines().count(), 11);

    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["experiment"], "phi-table");
    assert_eq!(m["seed"], 0);
    assert_eq!(m["config"]["cross_check_max_c"], 256);
    let entry = m["outputs"].as_array().unwrap().iter().find(|o| o["file"] == "phi_table.csv").unwrap();
    assert_eq!(entry["sha256"], blob_hash(csv.as_bytes()));
}

#[test]
fn config_errors_exit_2() {
    let d = scratch("cfg");
    let out = d.join("out");
    let out = out.to_str().unwrap();
    let unknown = config_file(&d, r#"{"lambda_a": 0.1, "lambda_b": 2}"#);
    assert_eq!(status(&["nas-growth", "--config", &unknown, "--out", out]), 2);
    let malformed = config_file(&d, "{ not json");
    assert_eq!(status(&["tail-bound", "--config", &malformed, "--out", out]), 2);
    let invalid = config_file(&d, r#"{"beta": 1.5}"#);
    assert_eq!(status(&["balance-attack", "--config", &invalid, "--out", out]), 2);
    assert_eq!(status(&["tail-bound", "--config", "/nonexistent/config.json", "--out", out]), 2);
    assert_eq!(status(&["no-such-experiment"]), 2);
    assert_eq!(status(&["phi-table", "--runs", "0", "--out", out]), 2);
}

#[test]
fn failed_checks_exit_3_only_with_assert() {
    let d = scratch("assert");
    let out = d.join("out");
    let out = out.to_str().unwrap();
    // No attack produces a 100-block fork in 100 slots.
    let cfg = config_file(&d, r#"{"horizon_slots": 100, "min_advantage": 0.5}"#);
    assert_eq!(status(&["balance-attack", "--config", &cfg, "--runs", "2", "--out", out, "--assert"]), 3);
    assert_eq!(status(&["balance-attack", "--config", &cfg, "--runs", "2", "--out", out]), 0);
    let m = std::fs::read_to_string(Path::new(out).join("manifest.json")).unwrap();
    assert!(m.contains("\"passed\": false"));
}

#[test]
fn unwritable_out_dir_exits_1() {
    let d = scratch("unwritable");
    let blocker = d.join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("out");
    assert_eq!(status(&["phi-table", "--out", out.to_str().unwrap()]), 1);
}

#[test]
fn more_runs_keep_earlier_runs() {
    let cfg = r#"{"horizon": 100}"#;
    let rows = |runs| {
        let (_, o) = run_experiment(Experiment::ConvergenceFreq, Some(cfg), Some(runs), 9).unwrap();
        o.get("convergence.csv").unwrap().contents.lines().map(str::to_owned).collect::<Vec<_>>()
    };
    let (few, many) = (rows(2), rows(5));
    assert_eq!(many.len(), 6);
    assert_eq!(few[..], many[..3]);
}

#[test]
fn thread_count_does_not_change_output() {
    let d = scratch("threads");
    let cfg = config_file(&d, r#"{"horizon_slots": 600}"#);
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = d.join(format!("out{threads}"));
        let st = bin()
            .env("CHAINLAB_THREADS", threads)
            .args(["coin-grind-demo", "--config", &cfg, "--runs", "6", "--seed", "5", "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(st.success());
        outputs.push(std::fs::read(out.join("coin_grind.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
