//! Command-line front end.
//!
//! Every subcommand reads a game spec (`--config`), runs one library
//! operation and writes CSV tables plus a `manifest.json` into `--out`.
//!
//! Exit codes: 0 success, 1 config or parse error, 2 model validation
//! failure, 3 solver failure, 4 non-convergence.

mod commands;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::covariance::{Solver, DEFAULT_TP};
use crate::error::{CovarianceError, Error, ModelError, SchedulerError, SimulationError};

pub use output::{parse_axis, write_manifest, Manifest};

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "NETGAME_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "netgame",
    version,
    about = "Nash control and Bernoulli communication scheduling for two-player LQ games"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check dimensions, weights, stabilizability and observability.
    Validate(Common),
    /// Solve the game Riccati equation and report the equilibrium controls.
    Solve(Common),
    /// Steady-state error covariance and costs at a fixed policy.
    SteadyState(SteadyStateArgs),
    /// Best-response curves of both players on a grid.
    BestResponse(BestResponseArgs),
    /// Nash equilibrium of the scheduling game.
    Nash(NashArgs),
    /// Closed-loop Monte-Carlo simulation.
    Simulate(SimulateArgs),
    /// Equilibrium over a grid of own communication costs.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverArg {
    Neumann,
    Direct,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Game spec (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Covariance fixed-point solver.
    #[arg(long, value_enum, default_value_t = SolverArg::Neumann)]
    pub solver: SolverArg,
    /// Neumann truncation length.
    #[arg(long, default_value_t = DEFAULT_TP)]
    pub tp: usize,
}

impl Common {
    pub fn solver(&self) -> Solver {
        match self.solver {
            SolverArg::Neumann => Solver::Neumann { tp: self.tp },
            SolverArg::Direct => Solver::Direct,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SearchArgs {
    /// Step size of player 1's projected gradient.
    #[arg(long, default_value_t = 1e-4)]
    pub eta1: f64,
    /// Step size of player 2's projected gradient.
    #[arg(long, default_value_t = 1e-4)]
    pub eta2: f64,
    /// Outer tolerance of the alternating best responses.
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    /// Inner tolerance of a single best response.
    #[arg(long, default_value_t = 1e-6)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_br_iters: usize,
    #[arg(long, default_value_t = 10_000)]
    pub max_outer: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SteadyStateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Player 1's withholding probability.
    #[arg(long)]
    pub p: f64,
    /// Player 2's withholding probability.
    #[arg(long)]
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlayerArg {
    P1,
    P2,
    Both,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BestResponseArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Spacing of the opponent grid on [0, 1].
    #[arg(long, default_value_t = 0.01)]
    pub grid: f64,
    /// Starting value of every best response.
    #[arg(long, default_value_t = 0.5)]
    pub init: f64,
    #[arg(long, value_enum, default_value_t = PlayerArg::Both)]
    pub player: PlayerArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Iterative,
    Exhaustive,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NashArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Iterative)]
    pub method: MethodArg,
    /// Random starting pairs for the iterative method.
    #[arg(long, default_value_t = 10)]
    pub starts: usize,
    /// Grid spacing of the exhaustive method.
    #[arg(long, default_value_t = 0.01)]
    pub grid: f64,
    /// Curve pairing tolerance of the exhaustive method (defaults to the grid).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Also scan unilateral deviations at each equilibrium on this grid.
    #[arg(long)]
    pub check_grid: Option<f64>,
    /// Cost tolerance of the deviation scan.
    #[arg(long, default_value_t = 1e-3)]
    pub check_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    EulerMaruyama,
    Exact,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Player 1's withholding probability (default: the equilibrium).
    #[arg(long, requires = "q")]
    pub p: Option<f64>,
    /// Player 2's withholding probability (default: the equilibrium).
    #[arg(long, requires = "p")]
    pub q: Option<f64>,
    /// Simulated seconds of the single trajectory; a multiple of h.
    #[arg(long, default_value_t = 500.0)]
    pub horizon: f64,
    #[arg(long, value_enum, default_value_t = SchemeArg::EulerMaruyama)]
    pub scheme: SchemeArg,
    /// Run an ensemble of this many members instead of one trajectory.
    #[arg(long)]
    pub ensemble: Option<usize>,
    /// Ticks per ensemble member.
    #[arg(long, default_value_t = 50_000)]
    pub ticks: usize,
    /// Fraction of each member discarded before averaging.
    #[arg(long, default_value_t = crate::simulate::DEFAULT_BURN_IN)]
    pub burn_in: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub search: SearchArgs,
    /// λ11 values as `start:stop:step` or a comma list (default 5:50:5).
    #[arg(long)]
    pub l11: Option<String>,
    /// λ22 values as `start:stop:step` or a comma list (default 3:30:3).
    #[arg(long)]
    pub l22: Option<String>,
    /// Decreases smaller than this still count as nondecreasing.
    #[arg(long, default_value_t = 0.0)]
    pub slack: f64,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }
}

fn from_model(e: ModelError) -> CliError {
    match e {
        ModelError::Parse(_) => CliError::Config(e.to_string()),
        ModelError::SingularGain { .. } => CliError::Solver(e.to_string()),
        ModelError::Dimension { .. } | ModelError::NonFinite(_) | ModelError::Domain(_) => {
            CliError::Validation(e.to_string())
        }
    }
}

fn from_covariance(e: CovarianceError) -> CliError {
    match e {
        CovarianceError::Policy { .. } => CliError::Config(e.to_string()),
        CovarianceError::Divergent { .. } | CovarianceError::Singular => CliError::Solver(e.to_string()),
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Model(m) => from_model(m),
            Error::Riccati(r) => CliError::Solver(r.to_string()),
            Error::Covariance(c) => from_covariance(c),
            Error::Scheduler(SchedulerError::Covariance(c)) => from_covariance(c),
            Error::Scheduler(s @ SchedulerError::Parameter(_)) => CliError::Config(s.to_string()),
            Error::Simulation(SimulationError::Model(m)) => from_model(m),
            Error::Simulation(s @ SimulationError::Domain(_)) => CliError::Config(s.to_string()),
        }
    }
}

macro_rules! lift {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        }
    )*};
}
lift!(
    ModelError,
    crate::error::RiccatiError,
    CovarianceError,
    SchedulerError,
    SimulationError
);

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // the global pool can be built once per process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Runs a parsed command.
pub fn execute(command: &Command) -> Result<(), CliError> {
    configure_threads()?;
    commands::dispatch(command)
}

/// Parses `args` (including the program name), runs the command and maps the
/// outcome to an exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
