use std::path::PathBuf;

use bernoulli_rdp::solver::DEFAULT_TOL;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::Format;

/// Rate-distortion-perception functions of Bernoulli vector sources.
#[derive(Debug, Parser)]
#[command(name = "bernoulli-rdp", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Relative tolerance on the budget residuals.
    #[arg(long, global = true, env = "BERNOULLI_RDP_TOL", default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Re-check certificates, budgets and monotonicity of the output.
    #[arg(long, global = true)]
    pub self_check: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// Comma-separated probabilities, or a path to a {"q": [...]} or matrix document.
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<String>,
    /// Edge-probability matrix document; its vertex pairs form the source.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct BudgetArgs {
    /// Distortion budget (expected Hamming distortion, summed over components).
    #[arg(short = 'D', long = "distortion", allow_negative_numbers = true)]
    pub distortion: f64,
    /// Perception budget (summed total-variation distance).
    #[arg(short = 'P', long = "perception", allow_negative_numbers = true)]
    pub perception: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    D,
    P,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate R(D, P) at one budget pair.
    Eval {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Sweep one budget with the other fixed.
    Curve {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, allow_negative_numbers = true)]
        start: f64,
        #[arg(long, allow_negative_numbers = true)]
        stop: f64,
        #[arg(long)]
        count: usize,
        /// Value of the budget that is not swept.
        #[arg(long, allow_negative_numbers = true)]
        fixed: f64,
    },
    /// Label a grid of budget pairs with A/B/C and sample the T(D), S(D) boundaries.
    Region {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 0.0)]
        d_min: f64,
        /// Defaults to 1.1 · Σ 2q(1-q).
        #[arg(long)]
        d_max: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        p_min: f64,
        /// Defaults to 1.1 · Σ q.
        #[arg(long)]
        p_max: Option<f64>,
        #[arg(long, default_value_t = 21)]
        d_count: usize,
        #[arg(long, default_value_t = 21)]
        p_count: usize,
    },
    /// Evaluate an inhomogeneous Erdős–Rényi graph source with per-edge output.
    Graph {
        #[arg(long)]
        matrix: PathBuf,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Bounds in bits on the optimal one-shot code length.
    Bounds {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Compare the closed form with the brute-force oracles on a budget grid.
    Verify {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 4)]
        d_count: usize,
        #[arg(long, default_value_t = 4)]
        p_count: usize,
        #[arg(long, default_value_t = 200)]
        grid_resolution: usize,
        #[arg(long, default_value_t = 3)]
        refine_rounds: usize,
        /// Only run the per-component scalar oracle (any number of components).
        #[arg(long)]
        scalar_only: bool,
    },
}
