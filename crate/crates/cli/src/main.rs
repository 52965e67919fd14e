//! `landtree`: sample, build, verify and export trees of sublevel sets.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid input or config,
//! 3 `verify` fell below its threshold.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Input the user got wrong: bad config, bad flags, mismatched files.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

/// `verify` ran but the verdicts missed the threshold.
#[derive(Debug)]
pub struct BelowThreshold(pub String);

impl std::fmt::Display for BelowThreshold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for BelowThreshold {}

#[derive(Parser)]
#[command(name = "landtree", version, about = "Energy landscapes as trees of sublevel sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct RunArgs {
    /// Run configuration (JSON).
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration: t-sym, t-asym, layered4d, seven2d, dnaseg.
    #[arg(long)]
    pub preset: Option<String>,
    /// Master seed, applied to every chain and to subsampling.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sampler and write samples as JSON lines.
    Sample {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the tree from a sample file.
    Tree {
        #[command(flatten)]
        run: RunArgs,
        /// Sample file written by `sample`.
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write Graphviz DOT here.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Temperatures for branch masses, comma separated.
        #[arg(long, value_delimiter = ',')]
        mass_at: Option<Vec<f64>>,
        #[arg(long)]
        subsample: Option<f64>,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Check every leaf of a tree against the testbed energy.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        tree: PathBuf,
        /// Fraction of leaves that must verify.
        #[arg(long, default_value_t = 0.95)]
        threshold: f64,
        /// Largest energy drop under re-minimization that still counts as
        /// verified (continuous testbeds).
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
        /// Write the machine-readable report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force reference tree: exhaustive for dna, a raster flood fill
    /// for 2-D testbeds.
    Oracle {
        #[command(flatten)]
        run: RunArgs,
        /// Take the energy grid from this sample file instead of the
        /// enumerated states.
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        levels: Option<usize>,
        /// Raster side length for 2-D testbeds.
        #[arg(long, default_value_t = 800)]
        resolution: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Annotate an existing tree with branch masses.
    Mass {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        mass_at: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a tree as Graphviz DOT.
    ExportDot {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a preset's configuration.
    Config {
        #[arg(long)]
        preset: String,
    },
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("LANDSCAPE_THREADS") {
        let n: usize =
            v.parse().map_err(|_| Invalid(format!("LANDSCAPE_THREADS must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(Invalid("LANDSCAPE_THREADS must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Sample { run, out } => commands::sample(&run, &out),
        Command::Tree { run, samples, out, dot, mass_at, subsample, levels } => {
            commands::tree(&run, &samples, &out, dot.as_deref(), mass_at, subsample, levels)
        }
        Command::Verify { run, tree, threshold, tolerance, out } => {
            commands::verify(&run, &tree, threshold, tolerance, out.as_deref())
        }
        Command::Oracle { run, samples, levels, resolution, out } => {
            commands::oracle(&run, samples.as_deref(), levels, resolution, &out)
        }
        Command::Mass { tree, mass_at, out } => commands::mass(&tree, &mass_at, out.as_deref()),
        Command::ExportDot { tree, out } => commands::export_dot(&tree, &out),
        Command::Config { preset } => {
            let cfg = config::RunConfig::preset(&preset)?;
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<BelowThreshold>().is_some() {
                ExitCode::from(3)
            } else if e.downcast_ref::<Invalid>().is_some() || e.downcast_ref::<landtree::Error>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
