use thiserror::Error;

/// Errors raised by the geometry, geodesic and complexity routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain of the model (non-positive σ, r outside its
    /// interval, non-positive integration constants, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed arguments: wrong lengths, mismatched charts, empty inputs.
    #[error("argument error: {0}")]
    Argument(String),

    /// A coordinate map produced a point outside the manifold.
    #[error("range error: {0}")]
    Range(String),

    /// The integrator hit the σ floor. Carries the last accepted state.
    #[error("singularity at tau = {tau}: {message}")]
    Singularity {
        tau: f64,
        message: String,
        last_position: Vec<f64>,
        last_velocity: Vec<f64>,
    },

    /// Step size fell below the underflow threshold.
    #[error("step size underflow at tau = {tau} (h = {step:e})")]
    StepUnderflow {
        tau: f64,
        step: f64,
        last_position: Vec<f64>,
        last_velocity: Vec<f64>,
    },

    /// A numerical routine could not reach its accuracy target.
    #[error("accuracy not achieved: estimate {estimate} with error {error_estimate:e} (target {target:e})")]
    Accuracy {
        estimate: f64,
        error_estimate: f64,
        target: f64,
    },

    /// Input data violate a precondition of a fit or report.
    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;
