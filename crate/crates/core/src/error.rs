use thiserror::Error;

/// Errors raised by the spectral routines. Variants map onto the CLI exit
/// codes: configuration problems versus numerical failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("range error: {0}")]
    Range(String),
    #[error("singular matrix")]
    Singular,
    #[error("contour passes through a zero (min modulus {min:.3e}, max {max:.3e})")]
    ContourThroughZero { min: f64, max: f64 },
    #[error("contour undersampled (phase jump {jump:.3} rad)")]
    Undersampled { jump: f64 },
    #[error("winding residual {0:.3} is not close to an integer")]
    WindingResidual(f64),
    #[error("label-ambiguous: dominant multiplier within {0:.1e} of another")]
    LabelAmbiguous(f64),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("zero-at-origin: |D(0)| = {0:.3e}")]
    ZeroAtOrigin(f64),
    #[error("conflicting sheet evidence: {0}")]
    ConflictingEvidence(String),
    #[error("window-too-small: outermost gap carries {fraction:.2e} of the integral")]
    WindowTooSmall { fraction: f64 },
    #[error("branch-tracking failure at nu = {nu}: {reason}")]
    BranchTracking { nu: f64, reason: String },
    #[error("potential is not rank-one (smallest Gram eigenvalue {0:.3e})")]
    NotRankOne(f64),
    #[error("eigenvalue search failed near {center}: {reason}")]
    EigenSearch { center: f64, reason: String },
}

impl Error {
    /// True for errors caused by bad input rather than by a numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidPotential(_) | Error::InvalidArgument(_))
    }
}
