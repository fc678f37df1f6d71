use thiserror::Error;

/// Errors raised by the game model, solvers and the validation lab.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A numeric input lies outside the function's domain (non-finite,
    /// negative noise, a logarithm that would be nonpositive, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Index out of range or mismatched dimensions.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The configuration violates a parameter invariant.
    #[error("invalid config: {0}")]
    Config(String),

    /// Zero accuracy weight with a positive privacy loss: the user would
    /// perturb without bound.
    #[error("no finite optimum: {0}")]
    NoFiniteOptimum(String),

    /// An iterative optimizer ran out of iterations.
    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:e})")]
    Convergence { iterations: usize, grad_norm: f64 },

    /// A requested computation is too large to run.
    #[error("resource limit: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {value}")))
    }
}

pub(crate) fn ensure_noise(name: &str, value: f64) -> Result<()> {
    ensure_finite(name, value)?;
    if value < 0.0 {
        return Err(Error::Domain(format!("{name} must be nonnegative, got {value}")));
    }
    Ok(())
}
