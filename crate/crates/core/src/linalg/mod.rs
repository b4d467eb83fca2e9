//! Dense matrices, exact and randomized truncated SVD, and spectral profiles.

mod eigen;
mod matrix;
mod randomized;
mod spectral;
mod svd;

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use matrix::{Matrix, MAX_DIM};
pub use randomized::{default_oversample, orthonormalize, svd_randomized, DEFAULT_POWER_ITERS};
pub use spectral::{rho, spectral_profile, SpectralProfile};
pub use svd::{singular_values, svd_thin, svd_truncated, SvdFactors};
