use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::svd::singular_values;
use crate::error::{Result, SrrError};

/// Descending singular values of a matrix together with its total energy.
///
/// A profile is *complete* when it lists all `min(rows, cols)` values; the
/// randomized path produces partial profiles whose `total_energy` is taken
/// from the entries directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralProfile {
    pub singular_values: Vec<f64>,
    pub total_energy: f64,
    /// Shape of the source matrix.
    pub shape: (usize, usize),
}

impl SpectralProfile {
    /// Profile from a complete list of singular values.
    pub fn from_singular_values(mut values: Vec<f64>, shape: (usize, usize)) -> Result<Self> {
        if values.len() != shape.0.min(shape.1) {
            return Err(SrrError::domain(format!(
                "{} singular values for a {}x{} matrix",
                values.len(),
                shape.0,
                shape.1
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SrrError::input("singular values must be finite and non-negative"));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        let total_energy = values.iter().map(|s| s * s).sum();
        Ok(SpectralProfile { singular_values: values, total_energy, shape })
    }

    /// Profile holding only the leading values; `total_energy` supplied externally.
    pub fn partial(values: Vec<f64>, total_energy: f64, shape: (usize, usize)) -> Self {
        SpectralProfile { singular_values: values, total_energy, shape }
    }

    pub fn is_complete(&self) -> bool {
        self.singular_values.len() == self.shape.0.min(self.shape.1)
    }

    pub fn len(&self) -> usize {
        self.singular_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }

    /// Fraction of energy outside the best rank-`p` approximation.
    pub fn rho(&self, p: usize) -> Result<f64> {
        if p > self.singular_values.len() {
            return Err(SrrError::domain(format!(
                "rank {p} exceeds profile length {}",
                self.singular_values.len()
            )));
        }
        if self.total_energy == 0.0 {
            return Ok(0.0);
        }
        let ratio = if self.is_complete() {
            // Summing the tail avoids cancellation when nearly all energy is captured.
            let tail: f64 = self.singular_values[p..].iter().map(|s| s * s).sum();
            tail / self.total_energy
        } else {
            let head: f64 = self.singular_values[..p].iter().map(|s| s * s).sum();
            1.0 - head / self.total_energy
        };
        Ok(ratio.clamp(0.0, 1.0))
    }

    /// `[ρ_0, ..., ρ_p]`.
    pub fn rho_curve(&self, p: usize) -> Result<Vec<f64>> {
        (0..=p).map(|k| self.rho(k)).collect()
    }
}

/// Full singular-value profile of `a`.
pub fn spectral_profile(a: &Matrix) -> Result<SpectralProfile> {
    let values = singular_values(a)?;
    SpectralProfile::from_singular_values(values, a.shape())
}

/// `ρ_p` of a profile; see [`SpectralProfile::rho`].
pub fn rho(profile: &SpectralProfile, p: usize) -> Result<f64> {
    profile.rho(p)
}
