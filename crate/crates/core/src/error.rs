//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fields live on different grids: [{0}] vs [{1}]")]
    GridMismatch(String, String),

    #[error("field contains a non-finite value at node {node}")]
    NonFiniteValue { node: usize },

    #[error("tridiagonal solve hit a near-zero pivot at row {row} (|pivot| = {pivot:.3e})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} iterations (best residual {residual:.3e})")]
    EigenNoConvergence { iterations: usize, residual: f64 },

    #[error("fixed-point iteration failed after {iterations} iterations with delta = {delta:.3e}: {reason}")]
    FixedPointFailed {
        iterations: usize,
        delta: f64,
        reason: String,
    },

    #[error("time step rejected {halvings} times in a row; a density went negative even at dt = {dt:.3e}")]
    StepRejected { halvings: u32, dt: f64 },

    #[error("mass trajectory blew up at t = {t:.3}: rho = ({rho1:.3e}, {rho2:.3e})")]
    MassBlowUp { t: f64, rho1: f64, rho2: f64 },

    #[error("interaction matrix is degenerate: |det| = {det:.3e} below tolerance")]
    DegenerateInteraction { det: f64 },

    #[error("competition kernel effectively vanishes near the diagonal at node {node}; a positive lower bound on I(x,x) is required")]
    KernelVanishesNearDiagonal { node: usize },

    #[error("competition coefficient mu = {mu:.3e} is not positive; the kernel must have positive mass against the principal eigenfunction")]
    NonPositiveMu { mu: f64 },

    #[error("hypothesis not satisfied: {0}")]
    HypothesisViolated(String),

    #[error("requested steady state is absent from the computed set: {0}")]
    MissingSteadyState(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("refusing to emit non-finite value in {context}")]
    NonFiniteOutput { context: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
