use thiserror::Error;

use crate::sdp::SolverStatus;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes that do not fit together.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// An input violates a documented precondition (not PSD, not trace
    /// preserving, ...).
    #[error("contract violated: {0}")]
    Contract(String),
    /// An argument outside the supported domain (e.g. `d < 2`).
    #[error("domain error: {0}")]
    Domain(String),
    /// The SDP solver did not reach an optimal solution.
    #[error("solver finished with status {status:?}: {detail}")]
    Solver { status: SolverStatus, detail: String },
    /// A witness with no usable component cannot define a game.
    #[error("degenerate witness: {0}")]
    DegenerateWitness(String),
}

pub type Result<T> = std::result::Result<T, Error>;
