use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised while ingesting or discretizing a game.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch between {first} and {second}: {detail}")]
    Dimension {
        first: &'static str,
        second: &'static str,
        detail: String,
    },
    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("controller gain undefined: P is singular (condition number {cond:.3e})")]
    SingularGain { cond: f64 },
    #[error("invalid game spec: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiccatiError {
    #[error(
        "game not well posed / no stabilizing solution: Hamiltonian eigenvalue with |Re| = {margin:.3e} on the imaginary axis"
    )]
    IllPosed { margin: f64 },
    #[error("minimal PSD solution not found: min eigenvalue {min_eig:.3e}, residual {residual:.3e}")]
    NotPsd { min_eig: f64, residual: f64 },
    #[error("no stabilizing solution: {0}")]
    NoStabilizingSolution(String),
    #[error("well-posedness hypothesis fails: maximizer can drive cost unbounded ({detail})")]
    WellPosedness { detail: String, real_roots: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CovarianceError {
    #[error(
        "unbounded steady-state covariance: scheduling too infrequent for error dynamics (spectral radius {rho:.6})"
    )]
    Divergent { rho: f64 },
    #[error("no unique bounded solution: fixed-point system is singular")]
    Singular,
    #[error("scheduling probabilities must lie in [0, 1], got p = {p}, q = {q}")]
    Policy { p: f64, q: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchedulerError {
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error("invalid search parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Crate-level error.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
}
