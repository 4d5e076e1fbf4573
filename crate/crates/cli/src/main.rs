//! Command-line front end for the `treeconc` library.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use treeconc::format::BValue;
use treeconc::GeneratorSpec;

#[derive(Debug, Parser)]
#[command(
    name = "treeconc",
    version,
    about = "Concentration parameters of broadcast models on rooted trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a tree in the canonical text format.
    GenTree(Common),
    /// Per-vertex δ and Δ for one b.
    Delta(Common),
    /// Δ_k over the truncations k = 0..=kmax.
    DeltaSeries(Common),
    /// Exact and power-iteration values of ‖Q^j‖.
    Spectral(SpectralArgs),
    /// Norms of the mixing matrix Σ b^r Q^r in a breadth-first order.
    Mixing(Common),
    /// Draw configurations from a broadcast model.
    Sample(SampleArgs),
    /// Exact law of a broadcast model as a rank,probability CSV.
    Exact(ModelArgs),
    /// Run inequality checks; exits nonzero when any fails.
    Verify(VerifyArgs),
    /// Δ_k²/|V_k| series for the 3-1 tree or the binary tree.
    Figure1(Figure1Args),
    /// Exact transportation distance between two measure files.
    Wasserstein(WassersteinArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Tree file in the canonical text format.
    #[arg(long, conflicts_with = "generator")]
    pub tree: Option<PathBuf>,
    /// Tree generator: dary:D:DEPTH, threeone:DEPTH, path:LEN or gw:P0,P1,..:DEPTH:SEED.
    #[arg(long = "gen")]
    pub generator: Option<GeneratorSpec>,
    /// Kernel Lipschitz constant b in [0, 1); accepts isqrt2 and isqrt3.
    #[arg(long, conflicts_with = "p")]
    pub b: Option<BValue>,
    /// Flip probability p in (0, 1/2]; implies b = 1 - 2p.
    #[arg(long)]
    pub p: Option<f64>,
    /// Largest truncation depth.
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[command(flatten)]
    pub common: Common,
    /// Power of Q.
    #[arg(long, default_value_t = 1)]
    pub j: usize,
    /// Power-iteration budget.
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub common: Common,
    /// Model file (tree reference plus p=, or kernel tables).
    #[arg(long, conflicts_with_all = ["tree", "generator", "p", "b"])]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyTarget {
    /// Every check on the built-in corpus.
    All,
    /// Every applicable check on the given tree and p.
    Model,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub target: VerifyTarget,
    #[command(flatten)]
    pub common: Common,
    /// Monte Carlo samples for the advisory empirical tail (model target).
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Threeone,
    Dary2,
}

#[derive(Debug, Args)]
pub struct Figure1Args {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Comma-separated b values.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.5,isqrt3,0.6,isqrt2,0.75"
    )]
    pub b: Vec<BValue>,
    #[arg(long)]
    pub kmax: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WassersteinArgs {
    /// First measure (rank,probability CSV).
    pub mu: PathBuf,
    /// Second measure (rank,probability CSV).
    pub nu: PathBuf,
    /// Number of coordinates.
    #[arg(long)]
    pub coords: usize,
    /// States per coordinate (discrete metric).
    #[arg(long, default_value_t = 2)]
    pub states: usize,
    /// Comma-separated positive coordinate weights; 1/coords each when absent.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = io::init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match commands::run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
