//! `traversal`: run the figure sweeps or a single traversal-time scenario.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use traversal_core::experiments::{run_figure1, run_figure2, run_single, write_figure1, write_figure2, write_single};
use traversal_core::Error;

use config::{keys_help, ConfigError, RunConfig};

const EXIT_FLAGGED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "traversal", version, about = "Two-detector barrier traversal-time simulator")]
#[command(after_long_help = keys_help())]
#[command(after_help = keys_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Momentum spread after detection versus detector width (figure1.csv)
    #[command(after_help = keys_help())]
    Figure1(Common),
    /// Mean traversal times versus barrier width (figure2.csv)
    #[command(after_help = keys_help())]
    Figure2(Common),
    /// Traversal-time density for one width and one detector (single.csv)
    #[command(after_help = keys_help())]
    Single(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key = value configuration file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Create the output directory if it does not exist
    #[arg(long)]
    create: bool,
    /// Override a configuration key (repeatable, applied after the file)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads for the sweep
    #[arg(long, value_name = "N", default_value_t = 1)]
    workers: usize,
    /// More log output; twice for per-branch lines
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Io(String),
    Science(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Io(_) => EXIT_IO,
            Failure::Science(_) => EXIT_FLAGGED,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Io(m) | Failure::Science(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn classify(e: Error) -> Failure {
    match e {
        Error::Io(_) => Failure::Io(e.to_string()),
        Error::InvalidExtent { .. }
        | Error::InvalidParameter { .. }
        | Error::SupportViolation(_)
        | Error::Resolution(_) => Failure::Config(e.to_string()),
        other => {
            let text = other.to_string();
            if text.starts_with(other.code()) {
                Failure::Science(text)
            } else {
                Failure::Science(format!("{}: {text}", other.code()))
            }
        }
    }
}

fn prepare_out(dir: &Path, create: bool) -> Result<(), Failure> {
    if dir.is_dir() {
        return Ok(());
    }
    if create {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))
    } else {
        Err(Failure::Io(format!(
            "output directory {} does not exist (pass --create to make it)",
            dir.display()
        )))
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn flagged(statuses: impl Iterator<Item = String>) -> usize {
    statuses.filter(|s| s != "ok").count()
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let (Command::Figure1(c) | Command::Figure2(c) | Command::Single(c)) = &cli.command;
    init_logging(c.verbose);
    let cfg = RunConfig::load(c.config.as_deref(), &c.set)?;
    cfg.scenario.validate().map_err(classify)?;
    match &cli.command {
        Command::Figure1(_) => {
            let (s, sigma) = cfg.figure1_lists();
            prepare_out(&c.out, c.create)?;
            let result = run_figure1(&cfg.scenario, &s, &sigma, c.workers).map_err(classify)?;
            write_figure1(&result, &c.out).map_err(classify)?;
            println!(
                "wrote {} rows to {}",
                result.rows.len(),
                c.out.join("figure1.csv").display()
            );
            let bad = flagged(result.rows.iter().map(|r| r.status.clone()));
            if bad > 0 {
                return Err(Failure::Science(format!("{bad} of {} rows flagged", result.rows.len())));
            }
        }
        Command::Figure2(_) => {
            let d = cfg.figure2_widths();
            prepare_out(&c.out, c.create)?;
            let result =
                run_figure2(&cfg.scenario, &d, [cfg.detector_1, cfg.detector_2], c.workers).map_err(classify)?;
            write_figure2(&result, &c.out).map_err(classify)?;
            println!(
                "wrote {} rows to {}",
                result.rows.len(),
                c.out.join("figure2.csv").display()
            );
            let bad = flagged(result.rows.iter().map(|r| r.status.clone()));
            if bad > 0 {
                return Err(Failure::Science(format!("{bad} of {} rows flagged", result.rows.len())));
            }
        }
        Command::Single(_) => {
            let (d, s, sigma) = cfg.single()?;
            prepare_out(&c.out, c.create)?;
            let result = run_single(&cfg.scenario, d, s, sigma).map_err(classify)?;
            write_single(&result, &c.out).map_err(classify)?;
            let sum = &result.summary;
            println!("mean_tau = {:.10}", sum.traversal.mean_tau);
            match result.tau_t {
                Some(t) => println!("tau_T = {t:.10}"),
                None => println!("tau_T = unavailable"),
            }
            println!("p_b_given_a = {:.10e}", sum.p_b_given_a);
            println!("efficiency = {:.10}", sum.efficiency);
            println!("clip_frac = {:.3e}", sum.clip_frac);
            println!("flux_norm_gap = {:.3e}", sum.flux_norm_gap);
            println!("wrote {}", c.out.join("single.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
