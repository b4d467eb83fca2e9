use serde::{Deserialize, Serialize};

use crate::error::{Result, SrrError};
use crate::quant::Quantizer;
use crate::rng::{derive_seed, gaussian_matrix, seeded_rng};
use crate::scaling::ScalingOperator;

/// Empirical relative error scale `‖S E_𝒬(A)‖_F / ‖S A‖_F` over Gaussian draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaEstimate {
    pub eta_hat: f64,
    pub samples: usize,
    pub std_dev: f64,
    /// `std_dev / eta_hat`.
    pub coefficient_of_variation: f64,
    pub ratios: Vec<f64>,
}

/// Estimates the relative error scale of a quantizer under scaling `s`.
///
/// Trial `t` draws `A` with i.i.d. standard normal entries from
/// `derive_seed(seed, t)`, so individual trials can be replayed.
pub fn estimate_eta(
    quantizer: &dyn Quantizer,
    s: &ScalingOperator,
    trials: usize,
    dims: (usize, usize),
    seed: u64,
) -> Result<EtaEstimate> {
    if trials == 0 {
        return Err(SrrError::domain("estimate_eta needs at least one trial"));
    }
    let (m, n) = dims;
    if m != s.dim() || n == 0 {
        return Err(SrrError::domain(format!(
            "dims {m}x{n} incompatible with scaling of dimension {}",
            s.dim()
        )));
    }
    let mut ratios = Vec::with_capacity(trials);
    for t in 0..trials {
        let a = gaussian_matrix(m, n, &mut seeded_rng(derive_seed(seed, t as u64)));
        ratios.push(eta_ratio(quantizer, s, &a)?);
    }
    let mean = ratios.iter().sum::<f64>() / trials as f64;
    let var = if trials > 1 {
        ratios.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
    } else {
        0.0
    };
    let std_dev = var.sqrt();
    Ok(EtaEstimate {
        eta_hat: mean,
        samples: trials,
        std_dev,
        coefficient_of_variation: if mean > 0.0 { std_dev / mean } else { 0.0 },
        ratios,
    })
}

/// One draw of `‖S E_𝒬(A)‖_F / ‖S A‖_F`.
pub(crate) fn eta_ratio(quantizer: &dyn Quantizer, s: &ScalingOperator, a: &crate::linalg::Matrix) -> Result<f64> {
    let sa = s.forward(a)?.frobenius_norm();
    if sa == 0.0 {
        return Err(SrrError::domain("degenerate (zero) draw in eta estimate"));
    }
    let e = a.sub(&quantizer.quantize_values(a)?);
    Ok(s.forward(&e)?.frobenius_norm() / sa)
}
