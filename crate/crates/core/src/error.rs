use thiserror::Error;

/// Failure modes of the analysis, continuation, and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("evaluation on the square-root branch cut at {0}")]
    BranchCut(String),

    #[error("no Hopf point: {0}")]
    NoHopf(String),

    #[error("spectrum is not Hermitian (mismatch {0:e})")]
    NonHermitian(f64),

    #[error("first Fourier mode vanishes (|u_1| = {0:e}); the phase condition cannot pin the orbit")]
    DegeneratePhase(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("Floquet spectrum unresolved: doubling the truncation changed exponents by {0:e}")]
    Unresolved(f64),

    #[error("simulation diverged at t = {t} (|u-| = {value:e})")]
    Diverged { t: f64, value: f64 },

    #[error("no oscillation detected: trajectory settles to a steady state")]
    SteadyState,

    #[error("inconsistent far-field fit: residual does not decay (eta = {0})")]
    NonDecaying(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
