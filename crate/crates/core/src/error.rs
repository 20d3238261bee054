use thiserror::Error;

use crate::sup_solver::{Certificate, SolveStats};

pub type Result<T, E = HjbError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HjbError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative correlation rho = {rho} is not supported by the 7-point stencil")]
    UnsupportedCorrelation { rho: f64 },

    #[error("non-finite coefficient sample at t = {t}, x = {x}, control #{control}")]
    NonFiniteCoefficient { t: f64, x: f64, control: usize },

    #[error(
        "row {row} of control #{control} is not diagonally dominant (denominator {denominator})"
    )]
    NotDiagonallyDominant {
        row: usize,
        control: usize,
        denominator: f64,
    },

    #[error("diagonal-dominance certificate violated: ratio {} >= 1", .0.ratio)]
    InfeasibleCertificate(Certificate),

    #[error("fixed-point iteration did not converge after {} iterations (last change {last_change:e})", .stats.iterations)]
    NonConvergence { stats: SolveStats, last_change: f64 },

    #[error("matrix is numerically singular at pivot {row}")]
    Singular { row: usize },

    #[error("CFL condition violated at step {step}: b_sup*tau/h = {ratio} (bound {bound}, margin {margin})")]
    CflViolation {
        step: usize,
        ratio: f64,
        bound: f64,
        margin: f64,
    },

    #[error("time step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<HjbError>,
    },

    #[error("problem has no exact solution")]
    MissingExact,

    #[error("grids are not nested: {0}")]
    NonNestedGrids(String),

    #[error("run N = {n}, I+1 = {i_plus_1} failed: {source}")]
    RowFailed {
        n: usize,
        i_plus_1: usize,
        #[source]
        source: Box<HjbError>,
    },
}

impl HjbError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        HjbError::InvalidArgument(msg.into())
    }
}
