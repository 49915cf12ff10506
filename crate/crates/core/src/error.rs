use num_complex::Complex64;
use thiserror::Error;

use crate::spectra::{ExceptionalPoint, FixedPointResult};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("internal coupling is not symmetric (max |u_ij - u_ji| = {max_deviation:e})")]
    AsymmetryError { max_deviation: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("eigensolver failed to converge after {iterations} QR sweeps")]
    EigenNoConvergence { iterations: usize },
    #[error("eigenvector self-orthogonal at an exceptional point (z = {z}, partner {partner})")]
    EPDegenerate { z: Complex64, partner: Complex64 },
    #[error("fixed-point iteration did not converge ({})", .0.iterations)]
    NotConverged(Box<FixedPointResult>),
    #[error("branch tracking lost (max overlap {overlap:.3} < 0.5)")]
    BranchLost { overlap: f64 },
    #[error("no exceptional point inside the search box (residual {:e})", .0.residual)]
    NotFound(Box<ExceptionalPoint>),
    #[error("resolvent (E - H_eff) is singular at E = {energy}")]
    SingularResolvent { energy: f64 },
    #[error("excitation has zero weight on every resonance state")]
    AllZero,
    #[error("time {t} lies before the excitation time t0 = 0")]
    DomainError { t: f64 },
    #[error("population underflow at t = {t} (norm {norm:e} < 1e-300)")]
    Underflow { t: f64, norm: f64 },
    #[error("integration step {step:e} exceeds the stability bound {bound:e}")]
    StepTooLarge { step: f64, bound: f64 },
    #[error("wideband channel {channel} needs a finite energy window for discretization")]
    WindowRequired { channel: usize },
    #[error("time {t} exceeds the recurrence horizon {horizon}")]
    HorizonExceeded { t: f64, horizon: f64 },
    #[error("fit window contains fewer than two usable samples")]
    WindowEmpty,
    #[error("{channels} open channels for {states} states: no trapped subset exists")]
    NoBifurcationPartition { states: usize, channels: usize },
}

impl Error {
    /// Stable identifier used on the diagnostic stream of the command line tool.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::AsymmetryError { .. } => "AsymmetryError",
            Error::InvalidInput(_) => "InvalidInput",
            Error::EigenNoConvergence { .. } => "EigenNoConvergence",
            Error::EPDegenerate { .. } => "EPDegenerate",
            Error::NotConverged(_) => "NotConverged",
            Error::BranchLost { .. } => "BranchLost",
            Error::NotFound(_) => "NotFound",
            Error::SingularResolvent { .. } => "SingularResolvent",
            Error::AllZero => "AllZero",
            Error::DomainError { .. } => "DomainError",
            Error::Underflow { .. } => "Underflow",
            Error::StepTooLarge { .. } => "StepTooLarge",
            Error::WindowRequired { .. } => "WindowRequired",
            Error::HorizonExceeded { .. } => "HorizonExceeded",
            Error::WindowEmpty => "WindowEmpty",
            Error::NoBifurcationPartition { .. } => "NoBifurcationPartition",
        }
    }

    /// Errors caused by the input description rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::AsymmetryError { .. }
                | Error::InvalidInput(_)
                | Error::WindowRequired { .. }
                | Error::NoBifurcationPartition { .. }
        )
    }
}
