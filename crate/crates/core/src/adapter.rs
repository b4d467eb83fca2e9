//! Two-component low-rank adapter for quantized fine-tuning.
//!
//! The adapter keeps the preserved factors `(L1, R1)` and the residual
//! factors `(L2, R2)` separate so their gradients can be treated
//! differently: the preserved directions are attenuated, either uniformly by
//! `γ` or per singular direction (SGP), while the residual factors train
//! unscaled.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrrError};
use crate::linalg::{svd_truncated, Matrix};
use crate::reconstruct::SrrDecomposition;

/// Default uniform attenuation of preserved-factor gradients.
pub const DEFAULT_GAMMA: f64 = 0.1;
/// Default SGP strength.
pub const DEFAULT_SGP_ALPHA: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradScaling {
    None,
    /// Multiply preserved-factor gradients by `γ ∈ [0, 1]`.
    Fixed { gamma: f64 },
    /// Rank-wise attenuation `λ_i = (α+1)σ_i / (ασ_i + σ_1)` along the left
    /// singular vectors of `L1 R1`.
    Sgp { alpha: f64 },
}

impl GradScaling {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GradScaling::Fixed { gamma } if !(0.0..=1.0).contains(&gamma) => {
                Err(SrrError::domain(format!("gamma must lie in [0, 1], got {gamma}")))
            }
            GradScaling::Sgp { alpha } if !(alpha >= 0.0 && alpha.is_finite()) => {
                Err(SrrError::domain(format!("alpha must be non-negative, got {alpha}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAdapter {
    pub l1: Matrix,
    pub r1: Matrix,
    pub l2: Matrix,
    pub r2: Matrix,
    pub k: usize,
    pub scaling: GradScaling,
}

/// Gradients of the loss with respect to each adapter factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBundle {
    pub g_l1: Matrix,
    pub g_r1: Matrix,
    pub g_l2: Matrix,
    pub g_r2: Matrix,
}

impl GradientBundle {
    pub fn add(&self, other: &GradientBundle) -> GradientBundle {
        GradientBundle {
            g_l1: self.g_l1.add(&other.g_l1),
            g_r1: self.g_r1.add(&other.g_r1),
            g_l2: self.g_l2.add(&other.g_l2),
            g_r2: self.g_r2.add(&other.g_r2),
        }
    }

    fn check_shapes(&self, a: &SplitAdapter) -> Result<()> {
        let pairs = [
            (&self.g_l1, &a.l1),
            (&self.g_r1, &a.r1),
            (&self.g_l2, &a.l2),
            (&self.g_r2, &a.r2),
        ];
        for (g, f) in pairs {
            g.ensure_same_shape(f, "gradient bundle")?;
        }
        Ok(())
    }
}

/// Splits a decomposition's factors into preserved and residual parts.
pub fn adapter_init(dec: &SrrDecomposition, scaling: GradScaling) -> Result<SplitAdapter> {
    scaling.validate()?;
    let (l1, r1) = dec.preserved_factors();
    let (l2, r2) = dec.residual_factors();
    Ok(SplitAdapter { l1, r1, l2, r2, k: dec.k, scaling })
}

impl SplitAdapter {
    pub fn rank(&self) -> usize {
        self.l1.cols() + self.l2.cols()
    }

    /// `[L1, L2] [R1; R2]`.
    pub fn low_rank_product(&self) -> Matrix {
        self.l1.hstack(&self.l2).matmul(&self.r1.vstack(&self.r2))
    }

    pub fn preserved_product(&self) -> Matrix {
        self.l1.matmul(&self.r1)
    }

    pub fn residual_product(&self) -> Matrix {
        self.l2.matmul(&self.r2)
    }

    /// `Q + L R`.
    pub fn effective_weight(&self, q: &Matrix) -> Result<Matrix> {
        let lr = self.low_rank_product();
        q.ensure_same_shape(&lr, "adapter base weight")?;
        Ok(q.add(&lr))
    }

    /// `x (Q + L R)` for inputs `x` of shape `s x m`.
    pub fn forward(&self, x: &Matrix, q: &Matrix) -> Result<Matrix> {
        let w = self.effective_weight(q)?;
        if x.cols() != w.rows() {
            return Err(SrrError::domain(format!(
                "input has {} features, weight expects {}",
                x.cols(),
                w.rows()
            )));
        }
        Ok(x.matmul(&w))
    }
}

/// Leading left singular vectors and attenuation factors of `L1 R1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgpBasis {
    /// `m x k'` orthonormal columns.
    pub u: Matrix,
    pub lambdas: Vec<f64>,
}

/// `λ_i = (α+1)σ_i / (ασ_i + σ_1)`; empty when `σ_1 = 0`.
pub fn sgp_lambdas(singular_values: &[f64], alpha: f64) -> Vec<f64> {
    let s1 = singular_values.first().copied().unwrap_or(0.0);
    if s1 == 0.0 {
        return Vec::new();
    }
    singular_values
        .iter()
        .map(|&s| ((alpha + 1.0) * s / (alpha * s + s1)).clamp(0.0, 1.0))
        .collect()
}

pub fn sgp_basis(adapter: &SplitAdapter, alpha: f64) -> Result<SgpBasis> {
    let k = adapter.k;
    if k == 0 {
        return Ok(SgpBasis { u: Matrix::zeros(adapter.l1.rows(), 0), lambdas: vec![] });
    }
    let f = svd_truncated(&adapter.preserved_product(), k)?;
    let lambdas = sgp_lambdas(&f.s, alpha);
    let u = f.u.columns(0, lambdas.len());
    Ok(SgpBasis { u, lambdas })
}

/// Applies `gL1 ← (I - Σ_i λ_i u_i u_iᵀ) gL1`.
pub fn apply_sgp(basis: &SgpBasis, g_l1: &Matrix) -> Matrix {
    if basis.lambdas.is_empty() {
        return g_l1.clone();
    }
    // coefficients along each u_i: (k' x k)
    let coeff = basis.u.t_matmul(g_l1).scale_rows(&basis.lambdas);
    g_l1.sub(&basis.u.matmul(&coeff))
}

/// Attenuates preserved-factor gradients according to the adapter's rule.
/// Residual-factor gradients pass through unchanged.
pub fn scale_gradients(adapter: &SplitAdapter, grads: &GradientBundle) -> Result<GradientBundle> {
    grads.check_shapes(adapter)?;
    match adapter.scaling {
        GradScaling::None => Ok(grads.clone()),
        GradScaling::Fixed { gamma } => Ok(GradientBundle {
            g_l1: grads.g_l1.scale(gamma),
            g_r1: grads.g_r1.scale(gamma),
            ..grads.clone()
        }),
        GradScaling::Sgp { alpha } => {
            let basis = sgp_basis(adapter, alpha)?;
            Ok(GradientBundle { g_l1: apply_sgp(&basis, &grads.g_l1), ..grads.clone() })
        }
    }
}

/// Mean squared error `‖X(Q + LR) - Y‖_F² / s` and its factor gradients.
pub fn loss_and_gradients(
    adapter: &SplitAdapter,
    q: &Matrix,
    x: &Matrix,
    y: &Matrix,
) -> Result<(f64, GradientBundle)> {
    let pred = adapter.forward(x, q)?;
    pred.ensure_same_shape(y, "targets")?;
    let samples = x.rows() as f64;
    let resid = pred.sub(y);
    let loss = resid.frobenius_norm_sq() / samples;
    // dLoss/d(LR) = (2/s) Xᵀ (X W - Y)
    let g = x.t_matmul(&resid).scale(2.0 / samples);
    Ok((
        loss,
        GradientBundle {
            g_l1: g.matmul_t(&adapter.r1),
            g_r1: adapter.l1.t_matmul(&g),
            g_l2: g.matmul_t(&adapter.r2),
            g_r2: adapter.l2.t_matmul(&g),
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    /// Recompute the SGP basis every this many steps (>= 1).
    pub sgp_refresh: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { steps: 100, lr: 1e-2, sgp_refresh: 1 }
    }
}

/// Full-batch gradient descent on the adapter factors with `Q` frozen.
///
/// Returns `steps + 1` losses: the initial loss and the loss after each update.
pub fn toy_finetune(
    adapter: &mut SplitAdapter,
    q: &Matrix,
    x: &Matrix,
    y: &Matrix,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    if !(config.lr.is_finite() && config.lr > 0.0) {
        return Err(SrrError::domain(format!("learning rate must be positive, got {}", config.lr)));
    }
    if config.steps == 0 {
        return Err(SrrError::domain("steps must be at least 1"));
    }
    if config.sgp_refresh == 0 {
        return Err(SrrError::domain("sgp_refresh must be at least 1"));
    }
    adapter.scaling.validate()?;
    let mut losses = Vec::with_capacity(config.steps + 1);
    let mut basis: Option<SgpBasis> = None;
    for step in 0..config.steps {
        let (loss, grads) = loss_and_gradients(adapter, q, x, y)?;
        losses.push(loss);
        let scaled = match adapter.scaling {
            GradScaling::Sgp { alpha } => {
                if step % config.sgp_refresh == 0 || basis.is_none() {
                    basis = Some(sgp_basis(adapter, alpha)?);
                }
                let b = basis.as_ref().expect("basis computed above");
                GradientBundle { g_l1: apply_sgp(b, &grads.g_l1), ..grads }
            }
            _ => scale_gradients(adapter, &grads)?,
        };
        step_factors(adapter, &scaled, config.lr);
        if !adapter.l1.is_finite() || !adapter.l2.is_finite() || !adapter.r1.is_finite() || !adapter.r2.is_finite() {
            return Err(SrrError::Numeric(format!("training diverged at step {step}")));
        }
    }
    losses.push(loss_and_gradients(adapter, q, x, y)?.0);
    Ok(losses)
}

fn step_factors(a: &mut SplitAdapter, g: &GradientBundle, lr: f64) {
    a.l1 = a.l1.sub(&g.g_l1.scale(lr));
    a.r1 = a.r1.sub(&g.g_r1.scale(lr));
    a.l2 = a.l2.sub(&g.g_l2.scale(lr));
    a.r2 = a.r2.sub(&g.g_r2.scale(lr));
}
