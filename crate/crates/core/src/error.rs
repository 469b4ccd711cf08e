use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible domain. `constraint` names the
    /// violated condition, e.g. `"beta > 0"`.
    #[error("invalid parameter `{name}` = {value}: requires {constraint}")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("degenerate: zero production (gamma = 0)")]
    ZeroProduction,

    #[error("quadrature did not converge: estimate {value}, error estimate {error:.3e} > tolerance {tol:.3e}")]
    Quadrature { value: f64, error: f64, tol: f64 },

    #[error("root bracketing failed: {0}")]
    Bracketing(String),

    #[error("position {x} outside the computational domain [-{half_width}, {half_width}]")]
    OutsideDomain { x: f64, half_width: f64 },

    #[error("fixed-point iteration did not converge in {iters} iterations (last change {change:.3e}); reduce dt")]
    StepRejected { iters: usize, change: f64 },

    #[error("time step too large: contraction estimate {estimate:.3e} must stay below 0.5")]
    StepTooLarge { estimate: f64 },

    #[error("grid: {0}")]
    Grid(String),

    #[error("fit: {0}")]
    Fit(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks `value > 0` and finite.
pub(crate) fn require_positive(name: &'static str, value: f64, constraint: &'static str) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain { name, value, constraint })
    }
}

/// Checks `value >= 0` and finite.
pub(crate) fn require_non_negative(name: &'static str, value: f64, constraint: &'static str) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain { name, value, constraint })
    }
}
