use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use catforge_cli::artifact::{self, RunInfo};
use catforge_cli::config::{self, ExperimentConfig, PRESETS};
use catforge_cli::{execute, Report};

const EXIT_CHECKS: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Kerr parametric oscillator experiments: Bell cats, Berry phases, switch-offs.
#[derive(Parser)]
#[command(name = "catforge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunOpts {
    /// Artifact directory (default: the config's output_dir, else runs/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores; CATFORGE_DETERMINISTIC=1 forces 1).
    #[arg(long)]
    workers: Option<usize>,
    /// Extra Fock levels per mode, on top of the config.
    #[arg(long, default_value_t = 0)]
    dims_bump: usize,
    /// Accepted for interface compatibility; every run is deterministic.
    #[arg(long)]
    seedless: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a JSON config file.
    Run {
        config: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Check a config against the schema and semantic rules.
    Validate { config: String },
    /// Run the invariant suite and print a pass/fail table.
    Props {
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Print the config JSON schema.
    Schema,
    /// List the built-in presets.
    Presets,
}

fn workers(requested: Option<usize>) -> usize {
    if std::env::var("CATFORGE_DETERMINISTIC").is_ok_and(|v| v == "1") {
        return 1;
    }
    requested
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn print_report(cfg: &ExperimentConfig, report: &Report) {
    for w in &report.outcome.warnings {
        eprintln!("warning: {w}");
    }
    if cfg.checks.is_empty() {
        for (k, v) in &report.outcome.scalars {
            println!("{k} = {v:?}");
        }
    }
    for c in &report.checks {
        let bound = match (c.check.min, c.check.max) {
            (Some(a), Some(b)) => format!("in [{a:?}, {b:?}]"),
            (Some(a), None) => format!(">= {a:?}"),
            (None, Some(b)) => format!("<= {b:?}"),
            (None, None) => String::new(),
        };
        let value = c.value.map_or("missing".to_string(), |v| format!("{v:?}"));
        println!("{} {} = {value} ({bound})", if c.pass { "PASS" } else { "FAIL" }, c.check.scalar);
    }
    println!(
        "{}: {} in {:.1} s",
        cfg.name,
        if report.pass() { "pass" } else { "FAIL" },
        report.wall_time_s
    );
}

fn run(cfg: ExperimentConfig, source: String, opts: RunOpts, default_out: bool) -> ExitCode {
    let _ = opts.seedless;
    let n = workers(opts.workers);
    log::info!("running {} ({source}) on {n} worker(s)", cfg.name);
    let result = catforge::par::with_workers(n, || execute(&cfg, opts.dims_bump));
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    print_report(&cfg, &report);
    let out = opts.out.or_else(|| {
        default_out.then(|| cfg.output_dir.as_ref().map_or_else(|| PathBuf::from("runs").join(&cfg.name), PathBuf::from))
    });
    if let Some(dir) = out {
        let info = RunInfo {
            config: &cfg,
            source: &source,
            dims_bump: report.dims_bump,
            workers: n,
            wall_time_s: report.wall_time_s,
        };
        if let Err(e) = artifact::write(&dir, &info, &report.outcome, &report.checks) {
            eprintln!("error: writing artifacts: {e:#}");
            return ExitCode::from(EXIT_RUNTIME);
        }
        println!("artifacts in {}", dir.display());
    }
    if report.pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECKS)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, opts } => match config::load(&config) {
            Ok((cfg, source)) => run(cfg, source, opts, true),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Props { opts } => match config::load("props") {
            Ok((cfg, source)) => run(cfg, source, opts, false),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Validate { config } => match config::load(&config) {
            Ok((cfg, source)) => {
                println!("{source}: valid {} experiment {:?}", cfg.experiment.kind(), cfg.name);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Schema => {
            print!("{}", config::schema_json());
            ExitCode::SUCCESS
        }
        Command::Presets => {
            for (name, text) in PRESETS {
                let desc = serde_json::from_str::<ExperimentConfig>(text)
                    .ok()
                    .and_then(|c| c.description)
                    .unwrap_or_default();
                println!("{name:<12} {desc}");
            }
            ExitCode::SUCCESS
        }
    }
}
