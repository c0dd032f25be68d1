use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    /// The delayed matrix is exactly zero; the LMI blocks need at least one
    /// delayed channel, so the caller should fall back to a delay-free analysis.
    #[error("delay matrix is zero (rank 0); use a delay-free analysis instead")]
    ZeroDelayMatrix,

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    /// Raised when the boundary-value matrix of the delay Lyapunov equation is
    /// singular or too badly conditioned. This happens when the spectrum holds a
    /// pair of roots symmetric with respect to the origin (typically when roots
    /// cross the imaginary axis).
    #[error("Lyapunov matrix ill-posed: condition estimate {cond:e} (characteristic roots s and -s both present?)")]
    IllPosed { cond: f64 },

    #[error("semidefinite backend failure: {0}")]
    Backend(String),

    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    #[error("no feasible point at the lower end of the bracket (h = {h})")]
    InfeasibleAtLowerBound { h: f64 },

    #[error("order estimate overflow: N* is not representable ({0})")]
    Overflow(String),

    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
