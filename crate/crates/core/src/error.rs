use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A value violates a documented precondition or type invariant.
    #[error("invalid {name}: {reason}")]
    InvalidInput { name: &'static str, reason: String },

    #[error("lens position {position} mm outside (0, {detector_plane}) mm")]
    GeometryViolation { position: f64, detector_plane: f64 },

    #[error("peak not interior: maximum sample at index {index} of {len}")]
    PeakNotInterior { index: usize, len: usize },

    #[error("quadrature did not converge: estimated error {error_estimate:e} above tolerance {tolerance:e}")]
    QuadratureNonConvergence { error_estimate: f64, tolerance: f64 },

    #[error("coupling efficiency {value} exceeds 1 beyond quadrature tolerance")]
    EfficiencyOutOfRange { value: f64 },

    #[error("no interior maximum in [{lower}, {upper}] mm")]
    NoInteriorMaximum { lower: f64, upper: f64 },

    #[error("levenberg-marquardt exceeded {iterations} iterations")]
    MaxIterations { iterations: usize },

    #[error("singular normal equations (condition estimate {condition:e})")]
    SingularNormalEquations { condition: f64 },

    #[error("damping exceeded {limit:e} while searching for an in-domain step")]
    DampingOverflow { limit: f64 },

    #[error("lens inversion residual {residual:e} above tolerance")]
    InversionResidual { residual: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of an iterative or numerical procedure, as opposed to
    /// rejected inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNonConvergence { .. }
                | Error::EfficiencyOutOfRange { .. }
                | Error::NoInteriorMaximum { .. }
                | Error::MaxIterations { .. }
                | Error::SingularNormalEquations { .. }
                | Error::DampingOverflow { .. }
                | Error::InversionResidual { .. }
        )
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be finite and > 0, got {value}"),
        ))
    }
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite, got {value}")))
    }
}
