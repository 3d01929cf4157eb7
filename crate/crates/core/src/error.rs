use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors reported by the solvers in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("format error at row {row}: {msg}")]
    Format { row: usize, msg: String },

    #[error(
        "Goursat series did not converge: bound {achieved:.3e} after {iterations} iterations \
         (tolerance {tol:.3e})"
    )]
    GoursatConvergence {
        achieved: f64,
        iterations: usize,
        tol: f64,
    },

    #[error("singular discrete system: {0}")]
    SingularSystem(String),

    #[error("eigenvalue bracketing failed at index {0}")]
    EigenBracket(usize),

    #[error("m-function pole proximity at k = {0}")]
    PoleProximity(f64),

    #[error("A-amplitude flow blew up at x = {0}")]
    FlowBlowUp(f64),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
