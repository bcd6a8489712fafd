use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two objects that must live on the same lattice do not.
    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    /// The initial datum cannot be represented on the requested grid.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// A point lies outside the interpolation box.
    #[error("point {point:?} lies outside the box [-{half_width}, {upper})")]
    OutOfDomain {
        point: Vec<f64>,
        half_width: f64,
        upper: f64,
    },

    /// Configuration validation failed; every violated invariant is listed.
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    /// The time integrator could not continue.
    #[error("numerical abort at t = {time}: {reason}")]
    Abort { time: f64, reason: String },

    /// Picard iteration stopped contracting.
    #[error("Picard iteration does not contract on [0, {t_end}] (distance grew for {streak} consecutive iterations); shorten the horizon")]
    HorizonTooLong { t_end: f64, streak: usize },

    /// A quadrature failed to converge or an integral is degenerate.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// A check cannot be evaluated on the supplied data.
    #[error("check precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
