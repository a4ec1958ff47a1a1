//! `rankone`: graph Laplacians, rank-one eigenpair updates, out-of-sample
//! extension and the experiment suite from the command line.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rankone::graph::NeighborRule;
use rankone::{Error, MuPolicy};

#[derive(Parser)]
#[command(
    name = "rankone",
    version,
    about = "Rank-one eigenpair updates with partially known spectra"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the normalized graph Laplacian of a point cloud.
    Laplacian(LaplacianArgs),
    /// Update known leading eigenpairs for a rank-one change.
    Update(UpdateArgs),
    /// Extend Laplacian eigenpairs to a newly inserted point.
    Extend(ExtendArgs),
    /// Run one of the experiments and write its CSV.
    Experiment(ExperimentArgs),
}

fn parse_rule(s: &str) -> Result<NeighborRule, String> {
    let (kind, val) = s
        .split_once(':')
        .ok_or_else(|| format!("expected knn:K or delta:D, got `{s}`"))?;
    match kind {
        "knn" => val
            .parse()
            .map(NeighborRule::Knn)
            .map_err(|_| format!("invalid k `{val}`")),
        "delta" => val
            .parse()
            .map(NeighborRule::Delta)
            .map_err(|_| format!("invalid delta `{val}`")),
        _ => Err(format!("unknown rule `{kind}`")),
    }
}

fn parse_mu(s: &str) -> Result<MuPolicy, String> {
    match s {
        "zero" => Ok(MuPolicy::Zero),
        "mean" => Ok(MuPolicy::Mean),
        "star" => Ok(MuPolicy::Star),
        _ => s
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(MuPolicy::Explicit)
            .ok_or_else(|| format!("expected zero, mean, star or a number, got `{s}`")),
    }
}

fn parse_order(s: &str) -> Result<rankone::Order, String> {
    match s {
        "1" => Ok(rankone::Order::First),
        "2" => Ok(rankone::Order::Second),
        _ => Err(format!("order must be 1 or 2, got `{s}`")),
    }
}

#[derive(Args, Clone)]
pub struct GraphArgs {
    /// Neighbour rule: knn:K or delta:D.
    #[arg(long, value_parser = parse_rule)]
    pub rule: NeighborRule,
    /// Gaussian kernel width.
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub self_loops: bool,
}

#[derive(Args, Clone)]
pub struct TruncArgs {
    /// Truncation order, 1 or 2.
    #[arg(long, default_value = "2", value_parser = parse_order)]
    pub order: rankone::Order,
    /// Tail surrogate: zero, mean, star or a number.
    #[arg(long, default_value = "star", value_parser = parse_mu)]
    pub mu: MuPolicy,
    #[arg(long, default_value_t = 1e-12)]
    pub root_tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
}

#[derive(Args)]
pub struct LaplacianArgs {
    /// Point cloud CSV, one point per line.
    pub points: PathBuf,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct UpdateArgs {
    /// The matrix `A` (needed for order 2, mu star and diagnostics).
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub eigs: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: f64,
    #[arg(long)]
    pub v: PathBuf,
    #[command(flatten)]
    pub trunc: TruncArgs,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub orthogonalize: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ExtendArgs {
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub new_point: PathBuf,
    /// Leading eigenpairs of the Laplacian of `--points`.
    #[arg(long)]
    pub eigs: PathBuf,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub trunc: TruncArgs,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub correct: bool,
    /// Lifted pairs passed to the update (default: stored pairs plus one).
    #[arg(long)]
    pub keep: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ExperimentArgs {
    /// synthetic, graph-sigma, extension or scaling.
    #[arg(long)]
    pub kind: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub mu_hats: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub ms: Option<Vec<usize>>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

/// 2 input, 3 construction, 4 numeric invariant, 5 non-convergence.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::DimensionMismatch { .. }
        | Error::IndexOutOfBounds { .. }
        | Error::NonFinite(_)
        | Error::Asymmetric { .. }
        | Error::InvalidParameter(_)
        | Error::MissingTrace
        | Error::MissingS
        | Error::MissingMatrix => 2,
        Error::ZeroDegree(_) | Error::IsolatedVertexWithoutSelfLoop(_) => 3,
        Error::MaxIterations { .. } | Error::NonConvergence { .. } => 5,
        _ => 4,
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match cli.command {
        Command::Laplacian(a) => commands::laplacian(&a),
        Command::Update(a) => commands::update(&a),
        Command::Extend(a) => commands::extend(&a),
        Command::Experiment(a) => commands::experiment(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
