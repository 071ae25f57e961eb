//! Command-line entry points: `run`, `compare`, `replay`, `validate`.
//!
//! Exit codes are part of the contract: 0 success, 1 usage error (bad
//! flags), 2 configuration error (unreadable, malformed or invalid
//! settings), 3 run failure (simulation, trace or output problems).
//!
//! Output files land in the directory named by `--out`, falling back to
//! the `MANET_COMPOSE_OUT` environment variable and then to the current
//! directory. `run` writes `config.resolved`, `trace.log` and
//! `metrics.csv`; `compare` writes `config.resolved` and `summary.csv`;
//! `replay` writes `metrics.csv`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::batch::run_batch;
use crate::error::Error;
use crate::metrics::{compute_metrics, MetricsReport};
use crate::scenario::ScenarioConfig;
use crate::sim::run_scenario;
use crate::trace::read_trace;
use crate::types::Method;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUN: i32 = 3;

#[derive(Parser)]
#[command(
    name = "manet-compose",
    version,
    about = "QoS-aware service composition over a simulated mobile ad hoc network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario; write its trace and metrics
    Run(RunArgs),
    /// Sweep seeds with both selection methods and compare them
    Compare(CompareArgs),
    /// Recompute metrics from a stored trace
    Replay(ReplayArgs),
    /// Check a configuration file and print the resolved settings
    Validate(ValidateArgs),
}

/// Flags that override fields of the loaded (or default) configuration.
#[derive(Args)]
struct ConfigFlags {
    /// Configuration file (TOML); built-in defaults apply when omitted
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Number of nodes
    #[arg(long)]
    nodes: Option<u32>,
    /// Simulated seconds
    #[arg(long)]
    duration: Option<f64>,
    /// Radio range in meters
    #[arg(long)]
    range: Option<f64>,
    /// Provider selection method
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Discovery hop budget
    #[arg(long)]
    ttl: Option<u32>,
    /// Number of services in the composite request
    #[arg(long)]
    plan_size: Option<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Proposed,
    Baseline,
}

impl From<MethodArg> for Method {
    fn from(arg: MethodArg) -> Method {
        match arg {
            MethodArg::Proposed => Method::Proposed,
            MethodArg::Baseline => Method::Baseline,
        }
    }
}

#[derive(Args)]
struct OutFlag {
    /// Output directory (also settable via MANET_COMPOSE_OUT)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigFlags,
    #[command(flatten)]
    out: OutFlag,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    config: ConfigFlags,
    #[command(flatten)]
    out: OutFlag,
    /// How many seeds to sweep, starting at the configured seed
    #[arg(long, default_value_t = 20)]
    seeds: u64,
}

#[derive(Args)]
struct ReplayArgs {
    /// Trace file written by a previous run
    #[arg(long, value_name = "FILE")]
    trace: PathBuf,
    #[command(flatten)]
    out: OutFlag,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    config: ConfigFlags,
}

/// Parse arguments and execute; returns the process exit code.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Replay(args) => cmd_replay(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(err)) => {
            eprintln!("configuration error: {err}");
            EXIT_CONFIG
        }
        Err(Failure::Run(err)) => {
            eprintln!("error: {err}");
            EXIT_RUN
        }
    }
}

/// A failed command, classified by exit code.
enum Failure {
    Config(Error),
    Run(Error),
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Failure {
        Failure::Run(Error::Io(err))
    }
}

fn resolve_config(flags: &ConfigFlags) -> std::result::Result<ScenarioConfig, Failure> {
    let mut config = match &flags.config {
        Some(path) => ScenarioConfig::load(path).map_err(Failure::Config)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    if let Some(nodes) = flags.nodes {
        config.nodes = nodes;
    }
    if let Some(duration) = flags.duration {
        config.duration = duration;
    }
    if let Some(range) = flags.range {
        config.radio.range = range;
    }
    if let Some(method) = flags.method {
        config.method = method.into();
    }
    if let Some(ttl) = flags.ttl {
        config.discovery.ttl = ttl;
    }
    if let Some(plan_size) = flags.plan_size {
        config.workload.plan_size = plan_size;
    }
    config.validate().map_err(Failure::Config)?;
    Ok(config)
}

fn output_dir(flag: &OutFlag) -> PathBuf {
    flag.out
        .clone()
        .or_else(|| std::env::var_os("MANET_COMPOSE_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn prepare_dir(dir: &Path) -> std::result::Result<(), Failure> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn print_report(report: &MetricsReport) {
    println!(
        "seed {}, method {}, {:.0} s simulated",
        report.seed, report.method, report.duration
    );
    println!(
        "  compositions: {} attempted, {} succeeded, {} failed, {} unresolved",
        report.attempts,
        report.successes,
        report.terminal_failures,
        report.unresolved()
    );
    match report.efficiency() {
        Some(e) => println!("  composition efficiency: {e:.3}"),
        None => println!("  composition efficiency: undefined (no attempts)"),
    }
    println!("  path failures: {}", report.total_path_failures());
    println!(
        "  delivered payload: {} bits ({:.1} bits/s)",
        report.total_delivered_bits(),
        report.mean_throughput()
    );
}

fn cmd_run(args: RunArgs) -> std::result::Result<(), Failure> {
    let config = resolve_config(&args.config)?;
    let dir = output_dir(&args.out);
    prepare_dir(&dir)?;
    fs::write(dir.join("config.resolved"), config.to_toml_string())?;

    let output = run_scenario(&config).map_err(Failure::Run)?;
    let trace_path = dir.join("trace.log");
    output.write_trace(&trace_path).map_err(Failure::Run)?;

    // metrics come from re-reading the file just written, so a stored
    // trace and a fresh run can never disagree
    let records = read_trace(&trace_path).map_err(Failure::Run)?;
    let report = compute_metrics(&records).map_err(Failure::Run)?;
    fs::write(dir.join("metrics.csv"), report.to_csv())?;

    print_report(&report);
    println!(
        "  wrote {}, {}, {}",
        dir.join("config.resolved").display(),
        trace_path.display(),
        dir.join("metrics.csv").display()
    );
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> std::result::Result<(), Failure> {
    if args.seeds == 0 {
        return Err(Failure::Config(Error::invalid(
            "--seeds must be at least 1",
        )));
    }
    let config = resolve_config(&args.config)?;
    let dir = output_dir(&args.out);
    prepare_dir(&dir)?;
    fs::write(dir.join("config.resolved"), config.to_toml_string())?;

    let seeds: Vec<u64> = (0..args.seeds).map(|i| config.seed + i).collect();
    let result = run_batch(&config, &seeds, (Method::Proposed, Method::Baseline))
        .map_err(Failure::Run)?;
    fs::write(dir.join("summary.csv"), result.summary.to_csv())?;

    print!("{}", result.summary.to_table());
    println!("  wrote {}", dir.join("summary.csv").display());
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> std::result::Result<(), Failure> {
    let records = read_trace(&args.trace).map_err(Failure::Run)?;
    let report = compute_metrics(&records).map_err(Failure::Run)?;
    let dir = output_dir(&args.out);
    prepare_dir(&dir)?;
    fs::write(dir.join("metrics.csv"), report.to_csv())?;
    print_report(&report);
    println!("  wrote {}", dir.join("metrics.csv").display());
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> std::result::Result<(), Failure> {
    let config = resolve_config(&args.config)?;
    println!("# configuration valid, hash {}", config.hash());
    print!("{}", config.to_toml_string());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(line: &str) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(line.split_whitespace())
    }

    #[test]
    fn subcommands_and_flags_parse() {
        assert!(parse("manet-compose run --seed 3 --nodes 50 --duration 60").is_ok());
        assert!(parse("manet-compose run --range 30 --ttl 4 --plan-size 3").is_ok());
        assert!(parse("manet-compose compare --seeds 5 --out /tmp/x").is_ok());
        assert!(parse("manet-compose replay --trace t.log").is_ok());
        assert!(parse("manet-compose validate").is_ok());
        assert!(parse("manet-compose run --method proposed").is_ok());
        assert!(parse("manet-compose run --method baseline").is_ok());
    }

    #[test]
    fn bad_usage_is_a_parse_error() {
        assert!(parse("manet-compose").is_err());
        assert!(parse("manet-compose frobnicate").is_err());
        assert!(parse("manet-compose run --no-such-flag").is_err());
        assert!(parse("manet-compose run --method teleport").is_err());
        assert!(parse("manet-compose replay").is_err());
    }

    #[test]
    fn usage_errors_exit_one_and_help_exits_zero() {
        assert_eq!(main_entry(["manet-compose", "frobnicate"]), EXIT_USAGE);
        assert_eq!(main_entry(["manet-compose", "--help"]), EXIT_OK);
        assert_eq!(main_entry(["manet-compose", "--version"]), EXIT_OK);
    }

    #[test]
    fn flags_override_config_fields() {
        let flags = ConfigFlags {
            config: None,
            seed: Some(9),
            nodes: Some(25),
            duration: Some(30.0),
            range: Some(20.0),
            method: Some(MethodArg::Baseline),
            ttl: Some(2),
            plan_size: Some(3),
        };
        let config = resolve_config(&flags).map_err(|_| ()).unwrap();
        assert_eq!(config.seed, 9);
        assert_eq!(config.nodes, 25);
        assert_eq!(config.duration, 30.0);
        assert_eq!(config.radio.range, 20.0);
        assert_eq!(config.method, Method::Baseline);
        assert_eq!(config.discovery.ttl, 2);
        assert_eq!(config.workload.plan_size, 3);
    }

    #[test]
    fn invalid_override_is_a_config_failure() {
        let flags = ConfigFlags {
            config: None,
            seed: None,
            nodes: Some(0),
            duration: None,
            range: None,
            method: None,
            ttl: None,
            plan_size: None,
        };
        match resolve_config(&flags) {
            Err(Failure::Config(_)) => {}
            _ => panic!("expected a config failure"),
        }
    }

    #[test]
    fn end_to_end_run_writes_the_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap().to_owned();
        let code = main_entry([
            "manet-compose",
            "run",
            "--nodes",
            "10",
            "--duration",
            "10",
            "--seed",
            "1",
            "--out",
            &out,
        ]);
        assert_eq!(code, EXIT_OK);
        assert!(dir.path().join("config.resolved").exists());
        assert!(dir.path().join("trace.log").exists());
        assert!(dir.path().join("metrics.csv").exists());
    }

    #[test]
    fn replay_reproduces_the_run_metrics_file() {
        let run_dir = tempfile::tempdir().unwrap();
        let out = run_dir.path().to_str().unwrap().to_owned();
        assert_eq!(
            main_entry([
                "manet-compose",
                "run",
                "--nodes",
                "10",
                "--duration",
                "10",
                "--out",
                &out,
            ]),
            EXIT_OK
        );
        let replay_dir = tempfile::tempdir().unwrap();
        let trace = run_dir.path().join("trace.log");
        assert_eq!(
            main_entry([
                "manet-compose",
                "replay",
                "--trace",
                trace.to_str().unwrap(),
                "--out",
                replay_dir.path().to_str().unwrap(),
            ]),
            EXIT_OK
        );
        let first = fs::read_to_string(run_dir.path().join("metrics.csv")).unwrap();
        let second = fs::read_to_string(replay_dir.path().join("metrics.csv")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn replay_of_garbage_fails_with_run_code() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.log");
        fs::write(&path, "not a trace\n").unwrap();
        let code = main_entry([
            "manet-compose",
            "replay",
            "--trace",
            path.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_RUN);
    }

    #[test]
    fn validate_rejects_bad_config_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        fs::write(&path, "nodes = 0\n").unwrap();
        let code = main_entry([
            "manet-compose",
            "validate",
            "--config",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_CONFIG);
    }
}
