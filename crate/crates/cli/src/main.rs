//! `tameproj` experiment driver.
//!
//! Exit codes: 0 ok, 2 usage, 3 experiment-negative, 4 I/O.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tameproj::generators::DEFAULT_POINT_BUDGET;
use tameproj::{Error, FieldTag};

mod commands;
mod run;

#[derive(Parser)]
#[command(name = "tameproj", version, about = "Random projections of discrete point sets")]
struct Cli {
    /// Seed for every random draw in the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a point set: lattice, perturbed lattice, power sequence or padded embedding.
    Generate(GenerateArgs),
    /// Search Haar projections for one whose image looks discrete.
    Project(ProjectArgs),
    /// Partial sums of the growth series at one or more exponents.
    Series(SeriesArgs),
    /// Monte Carlo cap measures against the exact incomplete-beta values.
    Capmeasure(CapArgs),
    /// Apply the coordinate-splitting map and verify its displacement bounds.
    Split(SplitArgs),
    /// Haar sampler statistics: entry moment, unitarity, left invariance.
    Haartest(HaarArgs),
    /// Probability that a projected point lands in the ball of radius r.
    Skr(SkrArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Lattice,
    Perturbed,
    Power,
    Embed,
}

#[derive(Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long, default_value = "real")]
    pub field: FieldTag,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Lattice basis tokens: `e<k>` is the k-th unit vector, `ie<k>` is `i` times it.
    #[arg(long, value_delimiter = ',')]
    pub basis: Vec<String>,
    /// JSON file holding a list of basis vectors as real coordinate arrays.
    #[arg(long)]
    pub basis_json: Option<PathBuf>,
    /// Rank of the standard basis used when no basis is given.
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_POINT_BUDGET)]
    pub budget: u64,
    /// Input point set (perturbed, embed).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub k_const: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Args, Serialize)]
pub struct ProjectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 16)]
    pub trials: usize,
    /// Truncation radii; defaults to R/8, R/4, R/2, R for the largest norm R.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Vec<f64>,
    /// Window radius; defaults to the median projected norm of the first truncation.
    #[arg(long)]
    pub window: Option<f64>,
}

#[derive(Args, Serialize)]
pub struct SeriesArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub s: Vec<f64>,
    /// Checkpoints K; defaults to the point count halved repeatedly.
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Vec<usize>,
}

#[derive(Args, Serialize)]
pub struct CapArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.02,0.05,0.1,0.2,0.5,1.0")]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
}

#[derive(Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub schedule: Vec<f64>,
    #[arg(long)]
    pub window: Option<f64>,
}

#[derive(Args, Serialize)]
pub struct HaarArgs {
    #[arg(long, default_value = "complex")]
    pub field: FieldTag,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 10_000)]
    pub ks_samples: usize,
}

#[derive(Args, Serialize)]
pub struct SkrArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub r: f64,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    /// Also check the counting inequality at this threshold N.
    #[arg(long)]
    pub threshold: Option<usize>,
}

/// Outcome of a command that ran to completion.
pub enum Outcome {
    Positive,
    Negative(String),
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) | Error::BudgetExceeded { .. } => 2,
        Error::Io(_) | Error::Format(_) | Error::Json(_) => 4,
        _ => 3,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("TAMEPROJ_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("TAMEPROJ_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a, cli.seed, &cli.out),
        Command::Project(a) => commands::project(a, cli.seed, &cli.out),
        Command::Series(a) => commands::series(a, cli.seed, &cli.out),
        Command::Capmeasure(a) => commands::capmeasure(a, cli.seed, &cli.out),
        Command::Split(a) => commands::split(a, cli.seed, &cli.out),
        Command::Haartest(a) => commands::haartest(a, cli.seed, &cli.out),
        Command::Skr(a) => commands::skr(a, cli.seed, &cli.out),
    };
    match result {
        Ok(Outcome::Positive) => ExitCode::SUCCESS,
        Ok(Outcome::Negative(msg)) => {
            eprintln!("negative result: {msg}");
            ExitCode::from(3)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
