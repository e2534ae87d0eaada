//! End-to-end tests of the `lsssc` binary: exit codes, output shapes, and
//! flag overrides, all through real process spawns.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_lsssc");

/// A tiny clean two-subspace problem; first grid cell is d=1, noiseless.
const SMALL: &str = r#"{
    "ambient_dims": [8],
    "num_subspaces": 2,
    "dims": [1, 2],
    "kappa": 3.0,
    "trials": 2,
    "seed": 11
}"#;

struct TempDir(PathBuf);

impl TempDir {
    fn new(name: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("lsssc-cli-{}-{name}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        TempDir(dir)
    }

    fn path(&self) -> &Path {
        &self.0
    }

    fn write(&self, name: &str, contents: &str) -> PathBuf {
        let path = self.0.join(name);
        fs::write(&path, contents).unwrap();
        path
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn lsssc")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process was signalled")
}

fn stdout_json(output: &Output) -> Value {
    let text = String::from_utf8(output.stdout.clone()).unwrap();
    serde_json::from_str(&text).expect("stdout is not valid JSON")
}

fn stderr_text(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    let help = run(&["--help"]);
    assert_eq!(exit_code(&help), 0);
    let text = String::from_utf8(help.stdout).unwrap();
    for subcommand in ["trial", "sweep", "geometry", "certify"] {
        assert!(
            text.contains(subcommand),
            "help does not mention {subcommand}"
        );
    }

    let version = run(&["--version"]);
    assert_eq!(exit_code(&version), 0);

    let sub_help = run(&["sweep", "--help"]);
    assert_eq!(exit_code(&sub_help), 0);
}

#[test]
fn missing_config_file_exits_one() {
    let out = run(&["trial", "--config", "/nonexistent/nowhere.json"]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_text(&out).contains("error:"));
}

#[test]
fn malformed_json_exits_one() {
    let dir = TempDir::new("badjson");
    let config = dir.write("config.json", "{ this is not json");
    let out = run(&["trial", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn unknown_config_field_exits_one() {
    let dir = TempDir::new("unknown-field");
    let config = dir.write(
        "config.json",
        r#"{"ambient_dims":[8],"num_subspaces":2,"dims":[1],"kappa":3.0,
            "trials":1,"seed":1,"not_a_real_field":true}"#,
    );
    let out = run(&["trial", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_text(&out).contains("not_a_real_field"));
}

#[test]
fn invalid_config_values_exit_one() {
    let dir = TempDir::new("zero-trials");
    let config = dir.write(
        "config.json",
        r#"{"ambient_dims":[8],"num_subspaces":2,"dims":[1],"kappa":3.0,
            "trials":0,"seed":1}"#,
    );
    let out = run(&["sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn bad_lambda_flag_exits_one() {
    let dir = TempDir::new("badlambda");
    let config = dir.write("config.json", SMALL);
    for bad in ["-3", "0", "nan", "inf", "fast"] {
        let out = run(&[
            "trial",
            "--config",
            config.to_str().unwrap(),
            "--lambda",
            bad,
        ]);
        assert_eq!(exit_code(&out), 1, "--lambda {bad} should be rejected");
    }
}

#[test]
fn trial_prints_the_outcome_as_json() {
    let dir = TempDir::new("trial");
    let config = dir.write("config.json", SMALL);
    let out = run(&["trial", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0);
    let value = stdout_json(&out);
    assert_eq!(value["trial"], 0);
    assert_eq!(value["cell"]["n"], 8);
    assert_eq!(value["cell"]["d"], 1);
    assert_eq!(value["detection"], Value::Bool(true));
    assert_eq!(value["nontrivial"], Value::Bool(true));
    assert!(value["seed"].is_u64());
    assert!(value["clustering_error"].is_number());
}

#[test]
fn lambda_flag_overrides_the_grid() {
    let dir = TempDir::new("lambda-override");
    let config = dir.write("config.json", SMALL);

    let fixed = run(&[
        "trial",
        "--config",
        config.to_str().unwrap(),
        "--lambda",
        "2.5",
    ]);
    assert_eq!(exit_code(&fixed), 0);
    let value = stdout_json(&fixed);
    assert_eq!(value["cell"]["lambda"], 2.5);
    assert_eq!(value["cell"]["auto_lambda"], Value::Bool(false));

    let auto = run(&[
        "trial",
        "--config",
        config.to_str().unwrap(),
        "--lambda",
        "auto",
    ]);
    assert_eq!(exit_code(&auto), 0);
    let value = stdout_json(&auto);
    assert_eq!(value["cell"]["auto_lambda"], Value::Bool(true));
}

#[test]
fn seed_flag_changes_the_draws() {
    let dir = TempDir::new("seed-override");
    let config = dir.write("config.json", SMALL);
    let a = stdout_json(&run(&[
        "trial",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "7",
    ]));
    let b = stdout_json(&run(&[
        "trial",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "8",
    ]));
    let c = stdout_json(&run(&[
        "trial",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "7",
    ]));
    assert_ne!(a["seed"], b["seed"]);
    assert_eq!(a, c, "same seed must reproduce the whole outcome");
}

#[test]
fn sweep_writes_results_and_summary() {
    let dir = TempDir::new("sweep");
    let config = dir.write("config.json", SMALL);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("wrote"), "sweep should report the row count");

    let csv = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "cell_id,trial,seed,n,N,L,d,kappa,delta,m,lambda,\
         detection,false_positives,nontrivial,L_hat,clustering_error,r,mu,wall_ms",
    );
    // Two cells (d = 1, 2) x two trials.
    assert_eq!(lines.count(), 4);

    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["cells"].as_array().unwrap().len(), 2);
}

#[test]
fn unwritable_output_directory_exits_two() {
    let dir = TempDir::new("blocked-out");
    let config = dir.write("config.json", SMALL);
    // A regular file where the output directory should go.
    let blocker = dir.write("out", "");
    let out = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        blocker.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("error:"));
}

#[test]
fn failed_success_rate_assertion_exits_three() {
    let dir = TempDir::new("assert-rate");
    // Heavy noise: delta 0.45 drives detection failures at this scale.
    let config = dir.write(
        "config.json",
        r#"{"ambient_dims":[8],"num_subspaces":2,"dims":[2],"kappa":4.0,
            "deltas":[0.45],"trials":4,"seed":5}"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--assert-success-rate",
        "1.0",
    ]);
    assert_eq!(exit_code(&out), 3);
    assert!(stderr_text(&out).contains("assertion failed"));
}

#[test]
fn certify_reports_every_column() {
    let dir = TempDir::new("certify");
    let config = dir.write("config.json", SMALL);
    let out = run(&["certify", "--config", config.to_str().unwrap(), "--assert"]);
    assert_eq!(exit_code(&out), 0);
    let value = stdout_json(&out);
    let columns = value["columns"].as_u64().unwrap();
    assert_eq!(value["certified"].as_u64().unwrap(), columns);
    assert_eq!(value["detection"], Value::Bool(true));
    assert_eq!(value["nontrivial"], Value::Bool(true));
    assert_eq!(value["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn geometry_reports_the_measured_quantities() {
    let dir = TempDir::new("geometry");
    let config = dir.write("config.json", SMALL);
    let out = run(&["geometry", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0);
    let value = stdout_json(&out);
    assert_eq!(value["r_per_subspace"].as_array().unwrap().len(), 2);
    assert_eq!(value["mu_per_subspace"].as_array().unwrap().len(), 2);
    assert!(value["summary"]["r"].as_f64().unwrap() > 0.0);
    assert!(value["summary"]["delta"].as_f64().unwrap() >= 0.0);
}
