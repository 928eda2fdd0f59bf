use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge ({context}): estimate {value:.6e}, error estimate {abs_error:.3e}")]
    NonConvergence {
        context: String,
        value: f64,
        abs_error: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Rejects NaN and infinities, and values below `min`.
pub(crate) fn check_at_least(name: &'static str, value: f64, min: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(invalid(name, format!("must be finite, got {value}")));
    }
    if value < min {
        return Err(invalid(name, format!("must be >= {min}, got {value}")));
    }
    Ok(())
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() || value <= 0.0 {
        return Err(invalid(name, format!("must be finite and > 0, got {value}")));
    }
    Ok(())
}
