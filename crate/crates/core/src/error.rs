use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChernoffError {
    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("precision failure in {context}: estimated error {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    Precision {
        context: &'static str,
        estimate: f64,
        tolerance: f64,
    },

    /// An argument outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative method ran out of iterations.
    #[error("{context} did not converge after {iterations} iterations")]
    Convergence {
        context: &'static str,
        iterations: usize,
    },

    /// Rates too close together for the closed-form hypoexponential density.
    #[error("ill-conditioned rates: minimum gap {gap:.3e} below guard {guard:.3e}")]
    IllConditioned { gap: f64, guard: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ChernoffError>;
