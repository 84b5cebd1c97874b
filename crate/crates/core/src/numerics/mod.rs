//! Self-contained dense linear-algebra and integration kernel for the
//! fixed sizes this crate needs: 4x4 / 2x2 real matrices, eigenvalues,
//! linear solves, pole placement and a classical RK4 step.

mod eig;
mod mat;
mod place;
mod rk4;

pub use eig::{eig4, eig_sym2};
pub use mat::{inv4, solve4, Complex, ComplexSpectrum, Mat2, Mat4};
pub use place::{controllability_rank, place_poles, INPUT_MAP_B};
pub use rk4::rk4_step;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("eigenvalue iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("matrix is near-singular (|det| = {det:.3e}, threshold {threshold:.3e})")]
    NearSingular { det: f64, threshold: f64 },
    #[error("(A, B) pair is uncontrollable (controllability rank {0} < 4)")]
    Uncontrollable(usize),
    #[error("desired spectrum is not closed under complex conjugation")]
    SpectrumNotConjugateClosed,
    #[error("desired spectrum unreachable: achieved eigenvalues miss target by {0:.3e}")]
    SpectrumUnreachable(f64),
    #[error("input map must have a zero top block and invertible bottom block")]
    UnsupportedInputMap,
    #[error("non-finite value produced at t = {t}: {context}")]
    NonFinite { t: f64, context: String },
}
