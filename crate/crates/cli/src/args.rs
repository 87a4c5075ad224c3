use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "egw", version, about = "Entropic Gromov-Wasserstein solver")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Seed for every random choice (instance generation, fallback starts).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for benchmark cells (0 = all cores).
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Suppress the human-readable summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Print errors as a JSON object on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute S_eps between two measures.
    Solve(SolveArgs),
    /// Run the certified Sinkhorn oracle at a fixed auxiliary matrix.
    Sinkhorn(SinkhornArgs),
    /// Debiased value S(mu0, mu1) - (S(mu0, mu0) + S(mu1, mu1)) / 2.
    Debias(DebiasArgs),
    /// Time solves on random Gaussian instances.
    Benchmark(BenchmarkArgs),
    /// Continuation along a decreasing eps schedule.
    Sweep(SweepArgs),
    /// Check measure files and print their moments.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct InputOpts {
    /// First measure (.json or .csv).
    pub mu0: PathBuf,
    /// Second measure (.json or .csv).
    pub mu1: PathBuf,
    /// Use the measures as given instead of centering them.
    #[arg(long)]
    pub no_center: bool,
    /// Drop zero-weight atoms instead of rejecting them.
    #[arg(long)]
    pub drop_zero_mass: bool,
    /// Treat weights as raw intensities and renormalize them.
    #[arg(long)]
    pub raw_weights: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Fgm,
    Adaptive,
    Auto,
}

#[derive(Debug, Args)]
pub struct SolverOpts {
    /// Solver; `auto` picks fgm when the problem is certified convex.
    #[arg(long, value_enum, default_value_t = AlgoArg::Auto)]
    pub algo: AlgoArg,
    /// Stop once the gradient norm falls below this.
    #[arg(long, default_value_t = 5e-8)]
    pub grad_tol: f64,
    /// Oracle radius; by default chosen so that delta' = grad_tol / 10.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Outer iteration limit.
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// `theoretical`, `search`, or a positive number.
    #[arg(long = "L", default_value = "theoretical")]
    pub l: String,
    /// Diameter bound M (at least sqrt(M2 M2)).
    #[arg(long = "M")]
    pub m: Option<f64>,
    /// Reuse Sinkhorn scalings across outer iterations (default).
    #[arg(long, overrides_with = "no_warm_start")]
    pub warm_start: bool,
    /// Restart Sinkhorn from unit scalings every outer iteration.
    #[arg(long, overrides_with = "warm_start")]
    pub no_warm_start: bool,
    /// Project onto the box [-M/2, M/2] instead of the Frobenius ball.
    #[arg(long)]
    pub box_projection: bool,
    /// Target gap for the fgm iteration cap.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Lower limit on the Sinkhorn stopping threshold.
    #[arg(long, default_value_t = 0.0)]
    pub sinkhorn_min_tol: f64,
    /// Sinkhorn iteration limit per oracle call.
    #[arg(long, default_value_t = 1_000_000)]
    pub sinkhorn_max_iters: usize,
    /// Skip evaluating Phi(B_k) each iteration.
    #[arg(long)]
    pub no_objective: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputOpts,
    /// Entropic regularization, > 0.
    #[arg(long)]
    pub eps: f64,
    #[command(flatten)]
    pub solver: SolverOpts,
    /// Also run the other algorithm and report the relative difference of
    /// the objectives (certified-convex problems only).
    #[arg(long)]
    pub compare: bool,
    /// Per-iteration CSV trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Final coupling as `i,j,mass` CSV.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Full solve report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SinkhornArgs {
    #[command(flatten)]
    pub input: InputOpts,
    /// Entropic regularization, > 0.
    #[arg(long)]
    pub eps: f64,
    /// Auxiliary matrix as JSON rows, e.g. `[[0.1, 0.0]]`; zero by default.
    #[arg(long)]
    pub aux: Option<String>,
    /// Stop once the column violation is below this value.
    #[arg(long, conflicts_with = "delta")]
    pub gamma: Option<f64>,
    /// Certified Hilbert radius; converted to a stopping threshold.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Sinkhorn iteration limit.
    #[arg(long, default_value_t = 1_000_000)]
    pub kmax: usize,
    /// Stabilized log-domain updates (uncertified).
    #[arg(long)]
    pub log_domain: bool,
    /// Coupling as `i,j,mass` CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Oracle certificate as JSON.
    #[arg(long)]
    pub cert: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DebiasArgs {
    #[command(flatten)]
    pub input: InputOpts,
    /// Entropic regularization, > 0.
    #[arg(long)]
    pub eps: f64,
    #[command(flatten)]
    pub solver: SolverOpts,
    /// Rotate the second measure by this many degrees (counterclockwise).
    #[arg(long)]
    pub rotate: Option<f64>,
    /// Read both inputs as grayscale images (also implied by image extensions).
    #[arg(long)]
    pub image: bool,
    /// Spacing of pixel centers; defaults to 1 / (longest image side).
    #[arg(long)]
    pub pixel_size: Option<f64>,
    /// Downsample images whose longest side exceeds this.
    #[arg(long, default_value_t = 32)]
    pub max_side: u32,
    /// Zero border added around images before rotation.
    #[arg(long, default_value_t = 0)]
    pub pad: usize,
    /// Write the four values as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Comma-separated dimensions (both measures share it).
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub dims: Vec<usize>,
    /// Comma-separated atom counts.
    #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
    pub sizes: Vec<usize>,
    /// Random instances per (d, N) cell.
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    /// Seconds per (d, N) cell.
    #[arg(long, default_value_t = 3600.0)]
    pub time_budget: f64,
    /// `convex-margin` or a fixed positive value.
    #[arg(long, default_value = "convex-margin")]
    pub eps_rule: String,
    /// Standard deviation of the first Gaussian.
    #[arg(long, default_value_t = 0.05)]
    pub sigma0: f64,
    /// Standard deviation of the second Gaussian.
    #[arg(long, default_value_t = 0.1)]
    pub sigma1: f64,
    #[command(flatten)]
    pub solver: SolverOpts,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputOpts,
    /// Comma-separated, strictly decreasing eps values.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["eps_start", "eps_factor", "eps_count"])]
    pub eps_list: Option<Vec<f64>>,
    /// First eps of a geometric schedule.
    #[arg(long, requires_all = ["eps_factor", "eps_count"])]
    pub eps_start: Option<f64>,
    /// Ratio between consecutive eps values, in (0, 1).
    #[arg(long)]
    pub eps_factor: Option<f64>,
    /// Number of eps values in the schedule.
    #[arg(long)]
    pub eps_count: Option<usize>,
    #[command(flatten)]
    pub solver: SolverOpts,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Measure files (.json or .csv).
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Drop zero-weight atoms instead of rejecting them.
    #[arg(long)]
    pub drop_zero_mass: bool,
    /// Treat weights as raw intensities and renormalize them.
    #[arg(long)]
    pub raw_weights: bool,
}
