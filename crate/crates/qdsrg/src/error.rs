use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the downfolding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed FCIDUMP or JSON input.
    #[error("parse error: {0}")]
    Parse(String),

    /// An orbital or determinant index outside its valid range.
    #[error("bounds error: {0}")]
    Bounds(String),

    /// Duplicate input entries that disagree beyond tolerance.
    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    /// An orbital-space partition that violates its invariants.
    #[error("configuration error: {0}")]
    Config(String),

    /// A determinant space or tensor too large for the dense algorithms.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// An operation called with inputs that break its contract
    /// (wrong normal-ordering vacuum, missing densities, rank too high).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A parameter outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Commutator series kept growing past the term cap.
    #[error("series divergence: last term norm {last_norm:.3e} after {terms} terms")]
    Divergence { terms: usize, last_norm: f64 },

    /// Amplitude iteration hit the cycle cap; the log holds the trace.
    #[error("no convergence after {iterations} iterations (dE={de:.3e}, rms={rms:.3e})")]
    NonConvergence {
        iterations: usize,
        de: f64,
        rms: f64,
        log: Vec<String>,
    },

    /// Tomography system too ill-conditioned to invert.
    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
