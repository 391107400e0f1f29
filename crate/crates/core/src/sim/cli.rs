//! Command-line front end of the `qident` binary.
//!
//! Exit codes: 0 on success, 1 on validation errors (bad arguments, invalid
//! config), 2 on runtime errors. Failures print one line on stderr.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::quantizer::QuantizerSpec;
use crate::sim::config::{SimConfig, System};
use crate::sim::export;
use crate::sim::runner::{self, monte_carlo, monte_carlo_with_threads, run_identification};
use crate::sim::simulate::{simulate_oe, simulate_static};
use crate::variance::cr_lower_bound;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "qident",
    version,
    about = "Identification from quantized observations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Emit the raw (phi, s) stream as CSV.
    Simulate(RunArgs),
    /// Run one identification and write its checkpoint record as CSV.
    Identify(RunArgs),
    /// Run the Monte Carlo experiment and write the summary as CSV.
    Montecarlo(RunArgs),
    /// Print k * sigma_CR(k) for a quantizer over a grid of deviations.
    Crbound(CrArgs),
    /// Validate a config file.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CrArgs {
    /// Take the thresholds from this config instead of `--thresholds`.
    #[arg(long, conflicts_with = "thresholds")]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    thresholds: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
    delta: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(args: &RunArgs) -> Result<SimConfig> {
    let mut cfg = SimConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(steps) = args.steps {
        if steps == 0 {
            return Err(Error::Config("--steps must be positive".into()));
        }
        cfg.run.steps = steps;
    }
    if let Some(replicas) = args.replicas {
        cfg.run.replicas = replicas;
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => export::write_file(path, contents),
        None => std::io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => {
            let cfg = load(&args)?;
            let steps = cfg.run.steps as usize;
            let samples = match &cfg.system {
                System::Static(s) => simulate_static(s, &cfg.quantizer, cfg.run.seed, steps)?,
                System::Oe { system, .. } => {
                    simulate_oe(system, &cfg.quantizer, cfg.run.seed, steps)?
                }
            };
            emit(
                args.out.as_deref(),
                &export::stream_to_csv(&samples, cfg.input_dim()),
            )
        }
        Command::Identify(args) => {
            let cfg = load(&args)?;
            let record = run_identification(&cfg, cfg.run.seed)?;
            emit(args.out.as_deref(), &export::runs_to_csv(&[record]))
        }
        Command::Montecarlo(args) => {
            let cfg = load(&args)?;
            let summary = match runner::threads_from_env() {
                0 => monte_carlo(&cfg)?,
                t => monte_carlo_with_threads(&cfg, t)?,
            };
            emit(args.out.as_deref(), &export::summary_to_csv(&summary))
        }
        Command::Crbound(args) => {
            let spec = match (&args.config, args.thresholds) {
                (Some(path), _) => SimConfig::from_path(path)?.quantizer,
                (None, Some(t)) => QuantizerSpec::new(t)?,
                (None, None) => {
                    return Err(Error::Config(
                        "crbound needs --thresholds or --config".into(),
                    ))
                }
            };
            let mut table = String::from("delta,k_sigma_cr\n");
            for &delta in &args.delta {
                if !(delta > 0.0) || !delta.is_finite() {
                    return Err(Error::Config(format!(
                        "--delta values must be positive, got {delta}"
                    )));
                }
                let k_sigma = cr_lower_bound(&spec, delta, 1)?;
                table.push_str(&format!("{delta},{k_sigma}\n"));
            }
            emit(args.out.as_deref(), &table)
        }
        Command::Check { config } => {
            let cfg = SimConfig::from_path(&config)?;
            let kind = match cfg.system {
                System::Static(_) => "static",
                System::Oe { .. } => "oe",
            };
            println!(
                "ok: {kind} config, {} thresholds, parameter dimension {}",
                cfg.quantizer.m(),
                cfg.true_parameter().len()
            );
            Ok(())
        }
    }
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    EXIT_OK
                }
                _ => {
                    eprintln!("qident: {}", one_line(&e.render().to_string()));
                    EXIT_VALIDATION
                }
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("qident: {}", one_line(&e.to_string()));
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}
