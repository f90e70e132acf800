use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (index out of range, wrong sizes, non-Hermitian data).
    #[error("input error: {0}")]
    Input(String),

    /// Argument outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// An instance constructor could not produce the requested object.
    #[error("construction error: {0}")]
    Construction(String),

    /// Newton iteration stopped before reaching the residual tolerance.
    #[error("no convergence after {iterations} Newton steps (residual {residual:.3e}): {reason}")]
    NonConvergence { iterations: usize, residual: f64, reason: String },

    /// Admissibility was lost and could not be restored by damping.
    #[error("left the admissible cone at {} grid points (first: {:?})", points.len(), points.first())]
    ConeExit { points: Vec<usize> },

    /// A failure inside a multi-step pipeline, tagged with the stage and parameter.
    #[error("{stage} failed at t = {t}: {source}")]
    Stage {
        stage: String,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
