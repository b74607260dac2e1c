use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Positivity, separability and dilation tools for block-Toeplitz matrices
/// and matrix-valued trigonometric polynomials.
#[derive(Debug, Parser)]
#[command(name = "tsep", version, about)]
pub struct Cli {
    /// Write the result JSON here (atomically) instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Write a run manifest (inputs, seed, tolerances, digests) here.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify positivity of a Toeplitz element or trigonometric polynomial.
    Check(CheckArgs),
    /// Separable decomposition of a positive block-Toeplitz matrix.
    Decompose(DecomposeArgs),
    /// Finite-spectrum dilation of a positive block-Toeplitz matrix.
    Factorize(DecomposeArgs),
    /// Entanglement witness for a positive trigonometric polynomial.
    Witness(WitnessArgs),
    /// Generate a reproducible instance.
    Gen(GenArgs),
    /// Duality pairing of a Toeplitz element with a trigonometric polynomial.
    Pair(PairArgs),
    /// Probe a linear map for Toeplitz complete positivity.
    CpProbe(CpProbeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Toeplitz,
    Trigpoly,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub path: PathBuf,
    /// Input kind; read from the file's "kind" field when omitted.
    #[arg(long, value_enum)]
    pub kind: Option<Kind>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Initial sample grid for trigonometric polynomials.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Auto,
    Caratheodory,
    Greedy,
    Grid2d,
    Shift,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Auto => "auto",
            Engine::Caratheodory => "caratheodory",
            Engine::Greedy => "greedy",
            Engine::Grid2d => "grid2d",
            Engine::Shift => "shift",
        }
    }

    /// Residual tolerance used when `--tol` is not given.
    pub fn default_tol(self) -> f64 {
        match self {
            Engine::Caratheodory => 1e-10,
            Engine::Shift => 1e-9,
            Engine::Grid2d => 1e-7,
            Engine::Auto | Engine::Greedy => 1e-6,
        }
    }
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    pub path: PathBuf,
    /// Residual tolerance; the default depends on the engine.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 60)]
    pub max_atoms: usize,
    #[arg(long, value_enum, default_value_t = Engine::Auto)]
    pub engine: Engine,
}

#[derive(Debug, Args)]
pub struct WitnessArgs {
    pub path: PathBuf,
    /// Sample points for the range scan.
    #[arg(long, default_value_t = tsep_core::entanglement::DEFAULT_SAMPLES)]
    pub samples: usize,
    /// Rounds of the separable search when the scan is inconclusive (0 skips it).
    #[arg(long, default_value_t = 40)]
    pub search_budget: usize,
    /// Angles per root in the search dictionary.
    #[arg(long, default_value_t = 32)]
    pub root_angles: usize,
    /// Residual grid of the search.
    #[arg(long, default_value_t = 256)]
    pub search_grid: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Atoms,
    Density,
    Pure,
    Universal,
    Dualpure,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Number of atoms in atoms mode.
    #[arg(long, default_value_t = 3)]
    pub atoms: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Angle of lambda in universal mode, in radians.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta: f64,
    /// Emit the universal (n x n valued) element of the dual system instead.
    #[arg(long)]
    pub trigpoly: bool,
    /// Ground-truth sidecar for atoms mode (default: next to --out).
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    pub toeplitz: PathBuf,
    pub trigpoly: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BuiltinMap {
    Identity,
    Transpose,
    Depolarizing,
}

#[derive(Debug, Args)]
pub struct CpProbeArgs {
    /// Map JSON (`{"p", "q", "images"}`); omit when using --builtin.
    #[arg(required_unless_present = "builtin", conflicts_with = "builtin")]
    pub map: Option<PathBuf>,
    #[arg(long, value_enum, requires = "dim")]
    pub builtin: Option<BuiltinMap>,
    /// Matrix size for --builtin.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub nmax: usize,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = tsep_core::DEFAULT_PROBE_SEED)]
    pub seed: u64,
}
