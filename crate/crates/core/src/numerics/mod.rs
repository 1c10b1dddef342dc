//! Dense linear algebra, spectral routines, seeded randomness and the
//! finite-difference gradient used as a test oracle throughout the crate.

mod fd;
mod matrix;
mod rng;
mod svd;

pub use fd::{finite_difference_gradient, max_relative_error};
pub use matrix::{dot, norm, Matrix};
pub use rng::{Rng, RngState, RNG_ALGORITHM};
pub use svd::{spectral_norm, stable_rank, svd, SpectralNorm, SvdResult, POWER_ITERATION_CAP};
