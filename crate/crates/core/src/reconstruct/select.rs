use serde::{Deserialize, Serialize};

use crate::error::{Result, SrrError};
use crate::linalg::SpectralProfile;

/// Outcome of the split selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSelection {
    pub k_star: usize,
    /// `ρ_k(SW) · ρ_{r-k}(SE)` for `k = 0..=r`.
    pub objective_curve: Vec<f64>,
    pub probe_seed: Option<u64>,
    pub rank_budget: usize,
}

/// `k* = argmin_k ρ_k(SW) ρ_{r-k}(SE)` over `k ∈ {0, ..., r}`.
///
/// The comparison runs in log space so steep spectra do not underflow;
/// exact zeros are `-∞` there. Ties go to the smallest `k`.
pub fn select_k(
    weight_profile: &SpectralProfile,
    probe: &SpectralProfile,
    r: usize,
) -> Result<SplitSelection> {
    if weight_profile.shape != probe.shape {
        return Err(SrrError::domain(format!(
            "weight profile is {:?} but probe profile is {:?}",
            weight_profile.shape, probe.shape
        )));
    }
    let limit = weight_profile.len().min(probe.len());
    if r > limit {
        return Err(SrrError::domain(format!(
            "rank budget {r} exceeds available profile length {limit}"
        )));
    }
    let mut curve = Vec::with_capacity(r + 1);
    let mut best = (0usize, f64::INFINITY);
    for k in 0..=r {
        let a = weight_profile.rho(k)?;
        let b = probe.rho(r - k)?;
        curve.push(a * b);
        let score = ln_or_neg_inf(a) + ln_or_neg_inf(b);
        if k == 0 || score < best.1 {
            best = (k, score);
        }
    }
    Ok(SplitSelection { k_star: best.0, objective_curve: curve, probe_seed: None, rank_budget: r })
}

fn ln_or_neg_inf(x: f64) -> f64 {
    if x == 0.0 {
        f64::NEG_INFINITY
    } else {
        x.ln()
    }
}
