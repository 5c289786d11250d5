//! `sfs-bench`: experiment runner and artifact writer.
//!
//! Exit codes: 0 ok, 1 I/O failure, 2 configuration error, 3 numerical
//! divergence, 4 acceptance gate (convergence slope outside its band).

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::Outcome;
pub use error::{CliError, CliResult};

use config::{Experiment, Overrides};

#[derive(Debug, Parser)]
#[command(name = "sfs-bench", version, about = "Tempered Schrödinger–Föllmer sampling experiments")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "N")]
    chains: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; affects speed only.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw one ensemble and write samples, histograms and metadata.
    Sample(RunArgs),
    /// Coupled strong-error study over dyadic step sizes.
    Convergence(RunArgs),
    /// Several samplers or temperatures on one target.
    Compare(RunArgs),
    /// Empirical W2 between two sample CSV files.
    W2(W2Cli),
    /// Evaluate one drift at a point given as JSON (`-` reads stdin).
    DriftCheck { input: PathBuf },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Named target preset (replaces the config's target).
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    /// Temperature sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    #[arg(long, conflicts_with = "steps")]
    h: Option<f64>,
    /// Steps on [0, 1]; sets h = 1/steps.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    pool_size: Option<usize>,
    /// SFS drift: exact, stein_mc, grad_mc or quadrature.
    #[arg(long)]
    drift: Option<String>,
    /// Full dimension (30) for the high-dimensional presets.
    #[arg(long)]
    full: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Sliced,
    #[value(name = "1d")]
    OneD,
}

#[derive(Debug, Args)]
struct W2Cli {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, default_value_t = sfs_core::metrics::DEFAULT_PROJECTIONS)]
    projections: usize,
    /// Print a JSON object instead of the bare number.
    #[arg(long)]
    json: bool,
}

/// Parses `args` (including the program name) and runs the verb.
pub fn run_cli<I, T>(args: I) -> CliResult<Outcome>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    Ok(Outcome {
                        stdout: e.render().to_string(),
                        files: Vec::new(),
                    })
                }
                _ => {
                    let text = e.render().to_string();
                    Err(CliError::Config(text.trim_start_matches("error: ").to_string()))
                }
            };
        }
    };
    let g = cli.global;
    let seed = g.seed.unwrap_or(config::DEFAULT_SEED);
    match cli.command {
        Command::W2(w) => commands::cmd_w2(&commands::W2Args {
            a: w.a,
            b: w.b,
            method: w.method.map(|m| match m {
                MethodArg::Exact => commands::W2Method::Exact,
                MethodArg::Sliced => commands::W2Method::Sliced,
                MethodArg::OneD => commands::W2Method::OneD,
            }),
            projections: w.projections,
            seed,
            json: w.json,
            out: g.out,
        }),
        Command::DriftCheck { input } => commands::cmd_drift_check(&input, seed),
        Command::Sample(r) => run(Experiment::Sample, &g, r),
        Command::Convergence(r) => run(Experiment::Convergence, &g, r),
        Command::Compare(r) => run(Experiment::Compare, &g, r),
    }
}

fn run(kind: Experiment, g: &GlobalArgs, r: RunArgs) -> CliResult<Outcome> {
    let overrides = Overrides {
        target_preset: r.target,
        seed: g.seed,
        chains: g.chains,
        out: g.out.clone(),
        threads: g.threads,
        beta: r.beta,
        betas: r.betas,
        h: r.h,
        steps: r.steps,
        pool_size: r.pool_size,
        drift: r.drift,
        full: r.full,
    };
    let cfg = config::load_config(g.config.as_deref(), &overrides, kind)?;
    commands::run_experiment(&cfg)
}
