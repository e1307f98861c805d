use thiserror::Error;

/// Failures raised by the numerical kernels and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid does not resolve the initial data: spacing {spacing:e} exceeds {required:e}")]
    Resolution { spacing: f64, required: f64 },

    #[error("non-finite values after step at t = {time}")]
    Instability { time: f64 },

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },

    #[error("characteristic map is not monotone on [{lo}, {hi}]; the shock has already formed")]
    RootNotUnique { lo: f64, hi: f64 },

    #[error("degenerate profile: |d^3 W(0)| = {value} is below the floor {floor}")]
    DegenerateProfile { value: f64, floor: f64 },

    #[error("renormalization failed: {0}")]
    Renormalization(String),

    #[error("trajectory left the stored window at s = {s} (|y| = {y})")]
    OutOfWindow { s: f64, y: f64 },

    #[error("blowup fit failed: {0}")]
    FitFailure(String),

}

pub type Result<T> = std::result::Result<T, Error>;
