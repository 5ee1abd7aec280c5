//! Command line front end: single runs, seed sweeps, the certification
//! suites, and the reference-value oracle. Exit codes: 0 on success, 1 when
//! a certification check fails, 2 on configuration or usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use prefwatch::harness::config::{
    resolve_out_dir, ExperimentConfig, ResolvedExperiment, DEFAULT_OUT_DIR, OUT_DIR_ENV,
};
use prefwatch::harness::verify::{available_suites, run_suite, CheckStatus, VerifyOptions};
use prefwatch::harness::{oracle, run_and_write, sweep_to_dir};

#[derive(Parser)]
#[command(
    name = "prefwatch",
    version,
    about = "Watch a learning agent act, infer what it values, and certify the guarantees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one seeded interaction and write steps.csv and summary.json.
    Run {
        /// Path to an experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Output root; defaults to $PREFWATCH_OUT, then ./prefwatch-out.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every seed of a config, in parallel, each to its own directory.
    Sweep {
        /// Path to an experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed list with 0..count.
        #[arg(long)]
        seeds: Option<usize>,
        /// Worker threads; defaults to one per core.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output root; defaults to $PREFWATCH_OUT, then ./prefwatch-out.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-certify the shipped guarantees and write verify_report.json.
    Verify {
        /// Suite name; see the error message for the catalog.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Failure probability the coverage checks certify against.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Seed or trial count override for the sampled checks.
        #[arg(long)]
        seeds: Option<usize>,
        /// Output root for the report; same defaults as run and sweep.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print reference values recomputed from first principles.
    Oracle {
        /// One value's name; omit to print the whole catalog.
        name: Option<String>,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, seed, out } => run_cmd(&config, seed, out),
        Command::Sweep {
            config,
            seeds,
            jobs,
            out,
        } => sweep_cmd(&config, seeds, jobs, out),
        Command::Verify {
            suite,
            epsilon,
            seeds,
            out,
        } => verify_cmd(&suite, epsilon, seeds, out),
        Command::Oracle { name } => oracle_cmd(name.as_deref()),
    }
}

fn usage_error(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(2)
}

fn load(config_path: &Path) -> Result<(ExperimentConfig, ResolvedExperiment), ExitCode> {
    let config = ExperimentConfig::from_path(config_path).map_err(usage_error)?;
    let base_dir = config_path.parent().unwrap_or_else(|| Path::new("."));
    let resolved = config.resolve(base_dir).map_err(usage_error)?;
    Ok((config, resolved))
}

fn run_cmd(config_path: &Path, seed: u64, out: Option<PathBuf>) -> ExitCode {
    let (config, resolved) = match load(config_path) {
        Ok(pair) => pair,
        Err(code) => return code,
    };
    let out_root = resolve_out_dir(out, &config);
    match run_and_write(&resolved, seed, &out_root) {
        Ok((output, dir)) => {
            let summary = &output.record.summary;
            let measures: Vec<String> = summary
                .final_measures
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            println!(
                "seed {seed} horizon {} regret {} {}",
                summary.horizon,
                summary.measured_regret,
                measures.join(" ")
            );
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => usage_error(e),
    }
}

fn sweep_cmd(
    config_path: &Path,
    seeds: Option<usize>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
) -> ExitCode {
    let (config, resolved) = match load(config_path) {
        Ok(pair) => pair,
        Err(code) => return code,
    };
    let seed_list: Vec<u64> = match seeds {
        Some(count) => (0..count as u64).collect(),
        None => config.seeds.expand(),
    };
    if seed_list.is_empty() {
        return usage_error("sweep needs at least one seed");
    }
    let out_root = resolve_out_dir(out, &config);
    let entries = sweep_to_dir(&resolved, &seed_list, jobs, &out_root);
    let mut failures = 0usize;
    for entry in &entries {
        if let Err(message) = &entry.outcome {
            eprintln!("seed {} failed: {message}", entry.seed);
            failures += 1;
        }
    }
    println!(
        "swept {} seeds of condition {} into {} ({} failed)",
        entries.len(),
        resolved.hash,
        out_root.join(&resolved.hash).display(),
        failures
    );
    if failures > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn verify_out_root(out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn verify_cmd(
    suite: &str,
    epsilon: Option<f64>,
    seeds: Option<usize>,
    out: Option<PathBuf>,
) -> ExitCode {
    let opts = VerifyOptions { epsilon, seeds };
    let Some(report) = run_suite(suite, &opts) else {
        return usage_error(format!(
            "unknown suite `{suite}`; available: {}",
            available_suites().join(", ")
        ));
    };
    for check in &report.checks {
        let status = match check.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::NotApplicable => "N/A ",
        };
        let measured = check
            .measured
            .map_or_else(|| "-".to_string(), |v| v.to_string());
        let bound = check
            .bound
            .map_or_else(|| "-".to_string(), |v| v.to_string());
        let epsilon = check
            .epsilon
            .map_or_else(String::new, |e| format!(" epsilon={e}"));
        println!(
            "{status} {} measured={measured} bound={bound} seeds={}{epsilon}",
            check.name, check.seeds
        );
    }
    let out_root = verify_out_root(out);
    let report_path = out_root.join("verify_report.json");
    let write = std::fs::create_dir_all(&out_root).and_then(|()| {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(&report_path, text)
    });
    if let Err(e) = write {
        return usage_error(format!("cannot write {}: {e}", report_path.display()));
    }
    println!(
        "suite {} finished in {:.2}s, report at {}",
        report.suite,
        report.wall_time_s,
        report_path.display()
    );
    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn print_value(value: &oracle::OracleValue) {
    let joined: Vec<String> = value.values.iter().map(f64::to_string).collect();
    println!("{}: {}", value.name, joined.join(" "));
    println!("    {}", value.description);
}

fn oracle_cmd(name: Option<&str>) -> ExitCode {
    match name {
        None => {
            for value in oracle::all_values() {
                print_value(&value);
            }
            ExitCode::SUCCESS
        }
        Some(name) => match oracle::value(name) {
            Some(value) => {
                print_value(&value);
                ExitCode::SUCCESS
            }
            None => {
                let names: Vec<&str> = oracle::all_values()
                    .iter()
                    .map(|v| v.name)
                    .collect::<Vec<_>>();
                usage_error(format!(
                    "unknown oracle value `{name}`; available: {}",
                    names.join(", ")
                ))
            }
        },
    }
}
