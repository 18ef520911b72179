use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use subdiff::harness::{MeshFamily, SpaceConfig};

#[derive(Debug, Parser)]
#[command(name = "subdiff", version, about = "L2-1σ subdiffusion solver and experiment harness")]
pub struct Cli {
    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = "subdiff-out")]
    pub out: PathBuf,

    /// TOML file of `flag = value` pairs; its values override command-line flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a time mesh file.
    MeshGenerate(GenerateArgs),
    /// Check the step-ratio admissibility conditions of a mesh.
    MeshCertify(CertifyArgs),
    /// PSD certificate, property suites and complementary kernel of the operator.
    Analyze(AnalyzeArgs),
    /// One solve of the manufactured problem.
    Solve(SolveArgs),
    /// Convergence tables over α, graded families and K.
    ReproduceTables(TablesArgs),
    /// Long-time H¹ stability soak.
    Soak(SoakArgs),
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    /// Mesh descriptor: uniform, graded:r=R, graded:r=M/alpha, r-variable,
    /// graded-uniform:r=R,t=T0,k=K0 or file:PATH.
    #[arg(long, default_value = "uniform")]
    pub mesh: MeshFamily,

    /// Number of time steps.
    #[arg(long = "K")]
    pub k: Option<usize>,

    /// Final time.
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,

    /// Fractional order, needed by r-variable and `/alpha` descriptors.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// File name inside the output directory.
    #[arg(long, default_value = "mesh.txt")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Mesh file to certify; otherwise the mesh is built from the descriptor.
    #[arg(long)]
    pub file: Option<PathBuf>,

    #[command(flatten)]
    pub mesh: MeshArgs,

    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Backend {
    Quadrature,
    ClosedForm,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,

    #[arg(long)]
    pub alpha: f64,

    /// Number of levels to analyze (default: all).
    #[arg(long)]
    pub levels: Option<usize>,

    #[arg(long, value_enum, default_value = "quadrature")]
    pub backend: Backend,

    /// Also write the kernel rows to kernel.csv.
    #[arg(long)]
    pub dump_kernel: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,

    #[arg(long)]
    pub alpha: f64,

    /// Spatial grid: d1:N (1D Dirichlet, N intervals) or p2:N (2D periodic, N x N modes).
    #[arg(long)]
    pub space: Option<SpaceConfig>,

    /// Published grid: d1:10000 by default, p2:256 for periodic runs.
    #[arg(long)]
    pub paper_exact: bool,

    #[arg(long, value_enum, default_value = "quadrature")]
    pub backend: Backend,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    /// Fractional orders (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.5,0.7")]
    pub alpha: Vec<f64>,

    /// h = 2π/10000, K up to 640 and the tolerance ladder against the published cells.
    #[arg(long)]
    pub paper_exact: bool,

    /// Step counts (comma separated), overriding the preset.
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,

    /// Spatial grid, overriding the preset.
    #[arg(long)]
    pub space: Option<SpaceConfig>,

    /// Experiment spec file; replaces every other experiment flag.
    #[arg(long)]
    pub spec: Option<PathBuf>,

    /// Also compare graded 2/α, graded 3/α and r-variable meshes level by level
    /// at the largest K.
    #[arg(long)]
    pub pointwise: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Forcing {
    RampedSine,
    FreeDecay,
}

#[derive(Debug, Args)]
pub struct SoakArgs {
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,

    #[arg(long = "T", default_value_t = 50.0)]
    pub horizon: f64,

    #[arg(long = "K", default_value_t = 500)]
    pub k: usize,

    /// Spatial intervals on [0, 2π].
    #[arg(long, default_value_t = 256)]
    pub intervals: usize,

    #[arg(long, value_enum, default_value = "ramped-sine")]
    pub forcing: Forcing,

    /// Mesh descriptor (default: graded on [0,1] with K/5 steps and r = 2/α, uniform after).
    #[arg(long)]
    pub mesh: Option<MeshFamily>,
}
