//! Floquet spectral analysis of the periodic Manakov Lax operator
//! `L = iJ d/dx + V` on the unit circle, `J = diag(1, -1, -1)`.

pub mod algebra;
pub mod eigen;
mod error;
pub mod io;
pub mod monodromy;
pub mod multipliers;
pub mod potential;
pub mod quasimomentum;
pub mod spectrum;
pub mod verify;
pub mod zs;

pub use num_complex::Complex64 as C64;

pub use algebra::{cubic_roots, expm3, winding_count, CMat2, CMat3, Contour};
pub use error::Error;
pub use monodromy::{propagate, MonodromyResult};
pub use multipliers::{DerivedScalars, Labeling, MultiplierTriple};
pub use potential::{Potential, PotentialMoments, StepPotential};
pub use spectrum::{SheetVerdict, SpectralScan};

/// Non-fatal event attached to a result (resolution warnings,
/// classification conflicts, per-disk failures, ...).
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Diagnostic {
    pub kind: String,
    pub lambda: Option<f64>,
    pub message: String,
}

impl Diagnostic {
    pub fn new(kind: &str, lambda: Option<f64>, message: impl Into<String>) -> Self {
        Diagnostic { kind: kind.to_string(), lambda, message: message.into() }
    }
}
