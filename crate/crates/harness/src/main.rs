//! Command-line experiment driver.
//!
//! Subcommands: `sweep` runs the configured grid (and m* bisection) into an
//! output directory; `trial` runs one trial of the first grid cell and prints
//! it as JSON; `geometry` measures r/mu for one generated dataset; `certify`
//! solves one dataset and verifies every column's optimality certificate.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime failure, 3 a requested
//! assertion did not hold.

use std::fs;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use lsssc::certificates::{
    check_nontrivial, check_optimality_certificate, check_subspace_detection, geometry_summary,
};
use lsssc::generator::generate;
use lsssc::geometry::{compute_incoherence, compute_r};
use lsssc::solver::{solve_lsssc, SolverOptions};
use lsssc::{tol, Col};
use lsssc_harness::config::ExperimentConfig;
use lsssc_harness::sweep::{results_path, run_sweep, summary_path};
use lsssc_harness::trial::{generator_for, inradius_mode, run_trial};
use lsssc_harness::trial_seed;

#[derive(Parser)]
#[command(
    name = "lsssc",
    version,
    about = "Subspace clustering experiment driver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial of the first grid cell; print the result as JSON.
    Trial(CommonArgs),
    /// Run the configured sweep grid into --out.
    Sweep(SweepArgs),
    /// Generate the first grid cell's dataset and measure its geometry.
    Geometry(CommonArgs),
    /// Solve the first grid cell and verify per-column certificates.
    Certify(CertifyArgs),
}

#[derive(Clone, Copy, Debug)]
enum LambdaArg {
    Auto,
    Fixed(f64),
}

fn parse_lambda(text: &str) -> Result<LambdaArg, String> {
    if text == "auto" {
        return Ok(LambdaArg::Auto);
    }
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(LambdaArg::Fixed(v)),
        _ => Err(String::from("expected a positive number or \"auto\"")),
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the parallel stages (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Measure r and mu for every trial (leave-one-out solves; slow).
    #[arg(long)]
    measure_geometry: bool,
    /// Replace the lambda axis with one value, or "auto" for the default
    /// policy 2 sqrt(n / (6 ln N)).
    #[arg(long, value_parser = parse_lambda)]
    lambda: Option<LambdaArg>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output directory for results.csv and summary.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Exit 3 unless the overall success rate reaches this value.
    #[arg(long)]
    assert_success_rate: Option<f64>,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Exit 3 unless every column certifies and detection/nontriviality hold.
    #[arg(long)]
    assert: bool,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let is_help = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if is_help { 0 } else { 1 };
        }
    };
    match cli.command {
        Command::Trial(args) => with_config(&args, trial_cmd),
        Command::Sweep(args) => match load_config(&args.common) {
            Ok(config) => sweep_cmd(&config, &args),
            Err(msg) => config_error(&msg),
        },
        Command::Geometry(args) => with_config(&args, geometry_cmd),
        Command::Certify(args) => match load_config(&args.common) {
            Ok(config) => certify_cmd(&config, &args),
            Err(msg) => config_error(&msg),
        },
    }
}

fn config_error(msg: &str) -> i32 {
    eprintln!("error: {msg}");
    1
}

fn with_config(args: &CommonArgs, body: fn(&ExperimentConfig) -> i32) -> i32 {
    match load_config(args) {
        Ok(config) => body(&config),
        Err(msg) => config_error(&msg),
    }
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, String> {
    let text =
        fs::read_to_string(&args.config).map_err(|e| format!("{}: {e}", args.config.display()))?;
    let mut config = ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.measure_geometry {
        config.measure_geometry = true;
    }
    match args.lambda {
        Some(LambdaArg::Auto) => config.lambdas = Vec::new(),
        Some(LambdaArg::Fixed(v)) => config.lambdas = vec![v],
        None => {}
    }
    config.validate().map_err(|e| e.to_string())?;
    if let Some(threads) = args.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Ok(config)
}

fn trial_cmd(config: &ExperimentConfig) -> i32 {
    let cell = &config.cells()[0];
    let outcome = run_trial(config, cell, 0);
    println!("{}", serde_json::to_string_pretty(&outcome).unwrap());
    0
}

fn sweep_cmd(config: &ExperimentConfig, args: &SweepArgs) -> i32 {
    let summary = match run_sweep(config, &args.out) {
        Ok(summary) => summary,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let successes: usize = summary.cells.iter().map(|c| c.successes).sum();
    let trials: usize = summary.cells.iter().map(|c| c.trials).sum();
    println!(
        "wrote {} rows to {} ({} grid trials, {} successes); summary in {}",
        summary.rows,
        results_path(&args.out).display(),
        trials,
        successes,
        summary_path(&args.out).display(),
    );
    for est in &summary.m_star {
        println!(
            "m*(n={}, d={}) = {} (target {} over {} trials/probe)",
            est.n, est.d, est.m_star, est.target, est.trials_per_probe,
        );
    }
    if let Some(min_rate) = args.assert_success_rate {
        let rate = if trials > 0 {
            successes as f64 / trials as f64
        } else {
            0.0
        };
        if rate < min_rate {
            eprintln!("assertion failed: success rate {rate:.3} below {min_rate:.3}");
            return 3;
        }
    }
    0
}

fn geometry_cmd(config: &ExperimentConfig) -> i32 {
    let cell = &config.cells()[0];
    let seed = trial_seed(config.seed, cell.id, 0);
    let report = (|| -> Result<serde_json::Value, lsssc::Error> {
        let dataset = generate(&generator_for(config, cell, seed))?;
        let radii = compute_r(&dataset.clean, &dataset.truth, inradius_mode(cell.d, seed))?;
        let incoherence = compute_incoherence(
            &dataset.observed,
            &dataset.clean,
            &dataset.truth,
            cell.lambda,
            &SolverOptions::default(),
        )?;
        let measured_delta = dataset.max_corruption_norm();
        let summary = geometry_summary(&radii, &incoherence, measured_delta);
        Ok(json!({
            "cell": cell,
            "seed": seed,
            "r_per_subspace": radii.per_subspace,
            "degenerate_columns": radii.degenerate_columns,
            "mu_per_subspace": incoherence.per_subspace,
            "skipped_duals": incoherence.skipped,
            "single_subspace": incoherence.single_subspace,
            "measured_delta": measured_delta,
            "summary": summary,
        }))
    })();
    match report {
        Ok(value) => {
            println!("{}", serde_json::to_string_pretty(&value).unwrap());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn certify_cmd(config: &ExperimentConfig, args: &CertifyArgs) -> i32 {
    let cell = &config.cells()[0];
    let seed = trial_seed(config.seed, cell.id, 0);
    let dataset = match generate(&generator_for(config, cell, seed)) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let solution = match solve_lsssc(&dataset.observed, cell.lambda, &SolverOptions::default()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let labels = &dataset.truth.labels;
    let tau = tol::SUPPORT_REL_TOL;
    let detection = match check_subspace_detection(&solution.coefficients, labels, tau) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let nontrivial = check_nontrivial(&solution.coefficients, tau);

    let total = dataset.observed.num_points();
    let mut certified = 0usize;
    let mut failures = Vec::new();
    for i in 0..total {
        let dictionary = dataset.observed.leave_one_out(i);
        let x = Col::<f64>::from(dataset.observed.values.column(i));
        // Same-subspace column indices, shifted into dictionary coordinates.
        let same: Vec<usize> = dataset
            .truth
            .members(labels[i])
            .into_iter()
            .filter(|&j| j != i)
            .map(|j| if j > i { j - 1 } else { j })
            .collect();
        let column = &solution.columns[i];
        match check_optimality_certificate(
            &dictionary,
            &x,
            cell.lambda,
            &column.coefficients,
            &column.residual,
            &column.dual,
            &column.support,
            &same,
        ) {
            Ok(check) if check.passed() => certified += 1,
            Ok(check) => failures.push(json!({
                "column": i + 1,
                "sign_condition": check.sign_condition,
                "residual_condition": check.residual_condition,
                "same_subspace_condition": check.same_subspace_condition,
                "foreign_condition": check.foreign_condition,
                "foreign_margin": check.foreign_margin,
                "near_boundary": check.near_boundary,
            })),
            Err(e) => failures.push(json!({ "column": i + 1, "error": e.to_string() })),
        }
    }

    let all_hold = failures.is_empty() && detection.holds && nontrivial.holds;
    let value = json!({
        "cell": cell,
        "seed": seed,
        "lambda": cell.lambda,
        "columns": total,
        "certified": certified,
        "detection": detection.holds,
        "false_positives": detection.false_positives.len(),
        "nontrivial": nontrivial.holds,
        "failures": failures,
    });
    println!("{}", serde_json::to_string_pretty(&value).unwrap());
    if args.assert && !all_hold {
        eprintln!(
            "assertion failed: {} of {} columns certified, detection {}, nontrivial {}",
            certified, total, detection.holds, nontrivial.holds,
        );
        return 3;
    }
    0
}
