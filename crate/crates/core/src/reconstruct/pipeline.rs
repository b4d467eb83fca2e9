use serde::{Deserialize, Serialize};

use super::probe::{global_probe_cache, partial_profile, ProbeCache};
use super::select::{select_k, SplitSelection};
use crate::error::{Result, SrrError};
use crate::linalg::{singular_values, svd_thin, svd_truncated, Matrix, SpectralProfile, SvdFactors};
use crate::quant::Quantizer;
use crate::rng::derive_seed;
use crate::scaling::{ScalingKind, ScalingOperator};

/// Matrices up to this size use an exact SVD for the scaled-weight profile;
/// larger ones use a randomized top-`r` profile with the energy taken from
/// the entries.
pub const EXACT_PROFILE_LIMIT: usize = 2048;

/// How the preserved rank `k` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitChoice {
    Manual(usize),
    /// Select `k*` with one random probe drawn from this seed.
    Auto { probe_seed: u64 },
}

/// How the error-correcting factors are computed after preservation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Rank `r - k` reconstruction of the post-quantization error.
    Split,
    /// One rank-`r` reconstruction of `W - Q`.
    Global,
}

/// `Ŵ = Q + L R` with `L = [L1, L2]`, `R = [R1; R2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrrDecomposition {
    /// Dequantized `Q`.
    pub q: Matrix,
    /// `m x r`.
    pub l: Matrix,
    /// `r x n`.
    pub r: Matrix,
    /// Preserved rank.
    pub k: usize,
    /// Rank budget.
    pub rank: usize,
    pub variant: Variant,
    pub selection: Option<SplitSelection>,
    /// `‖S(W - Q - LR)‖_F`.
    pub scaled_error: f64,
    pub quantizer: String,
    pub scaling: ScalingKind,
}

impl SrrDecomposition {
    /// `(L1, R1)`: the first `k` columns of `L` and rows of `R`.
    pub fn preserved_factors(&self) -> (Matrix, Matrix) {
        (self.l.columns(0, self.k), self.r.row_range(0, self.k))
    }

    /// `(L2, R2)`.
    pub fn residual_factors(&self) -> (Matrix, Matrix) {
        (self.l.columns(self.k, self.rank), self.r.row_range(self.k, self.rank))
    }

    pub fn low_rank_product(&self) -> Matrix {
        self.l.matmul(&self.r)
    }

    /// `Q + L R`.
    pub fn reconstruction(&self) -> Matrix {
        self.q.add(&self.low_rank_product())
    }
}

fn check_rank(w: &Matrix, r: usize) -> Result<()> {
    if r > w.min_dim() {
        return Err(SrrError::domain(format!(
            "rank budget {r} exceeds min dimension {} of a {}x{} weight",
            w.min_dim(),
            w.rows(),
            w.cols()
        )));
    }
    Ok(())
}

fn check_inputs(w: &Matrix, s: &ScalingOperator) -> Result<()> {
    w.ensure_finite("weight")?;
    w.ensure_desk_scale("weight")?;
    if s.dim() != w.rows() {
        return Err(SrrError::domain(format!(
            "scaling of dimension {} for a weight with {} rows",
            s.dim(),
            w.rows()
        )));
    }
    Ok(())
}

/// `(L, R)` with `L R = S⁻¹ SVD_p(S A)`, `L = S⁻¹ U_p`, `R = Σ_p V_pᵀ`.
fn scaled_low_rank(a: &Matrix, s: &ScalingOperator, p: usize) -> Result<(Matrix, Matrix)> {
    let f = svd_truncated(&s.forward(a)?, p)?;
    pull_back(&f, s)
}

fn pull_back(f: &SvdFactors, s: &ScalingOperator) -> Result<(Matrix, Matrix)> {
    Ok((s.inverse(&f.u)?, f.sigma_vt()))
}

fn scaled_error_of(w: &Matrix, q: &Matrix, l: &Matrix, r: &Matrix, s: &ScalingOperator) -> Result<f64> {
    let resid = w.sub(q).sub(&l.matmul(r));
    Ok(s.forward(&resid)?.frobenius_norm())
}

/// Low-rank correction of the scaled quantization error:
/// `L R = S⁻¹ SVD_r(S(W - Q))`.
pub fn qer_reconstruct(w: &Matrix, q: &Matrix, s: &ScalingOperator, r: usize) -> Result<(Matrix, Matrix)> {
    check_inputs(w, s)?;
    w.ensure_same_shape(q, "qer_reconstruct")?;
    check_rank(w, r)?;
    scaled_low_rank(&w.sub(q), s, r)
}

/// The plain QER pipeline: `Q = 𝒬(W)` followed by [`qer_reconstruct`].
pub fn qer_decompose(
    w: &Matrix,
    s: &ScalingOperator,
    quantizer: &dyn Quantizer,
    r: usize,
) -> Result<SrrDecomposition> {
    check_inputs(w, s)?;
    check_rank(w, r)?;
    let q = quantizer.quantize_values(w)?;
    let (l, rr) = qer_reconstruct(w, &q, s, r)?;
    let scaled_error = scaled_error_of(w, &q, &l, &rr, s)?;
    Ok(SrrDecomposition {
        q,
        l,
        r: rr,
        k: 0,
        rank: r,
        variant: Variant::Split,
        selection: None,
        scaled_error,
        quantizer: quantizer.describe(),
        scaling: s.kind(),
    })
}

/// SVD of `S W` shared by every split evaluated on the same weight.
pub(crate) struct ScaledWeight {
    factors: SvdFactors,
    profile: SpectralProfile,
}

impl ScaledWeight {
    /// `top` bounds the number of triplets needed when the randomized path is taken.
    pub(crate) fn analyze(w: &Matrix, s: &ScalingOperator, top: usize, limit: usize, seed: u64) -> Result<Self> {
        let sw = s.forward(w)?;
        if sw.rows().max(sw.cols()) <= limit {
            let factors = svd_thin(&sw)?;
            let profile = SpectralProfile::from_singular_values(factors.s.clone(), sw.shape())?;
            Ok(ScaledWeight { factors, profile })
        } else {
            let profile = partial_profile(&sw, top, seed)?;
            let top = profile.len();
            let oversample = (2 * top).min(sw.min_dim() - top);
            let factors = crate::linalg::svd_randomized(
                &sw,
                top,
                oversample,
                crate::linalg::DEFAULT_POWER_ITERS,
                seed,
            )?;
            Ok(ScaledWeight { factors, profile })
        }
    }

    fn preserved(&self, k: usize, s: &ScalingOperator) -> Result<(Matrix, Matrix)> {
        if k > self.factors.rank() {
            return Err(SrrError::domain(format!(
                "preserved rank {k} exceeds the {} available triplets",
                self.factors.rank()
            )));
        }
        pull_back(&self.factors.truncate(k), s)
    }
}

/// One split evaluation given the pre-computed SVD of `S W`.
fn split_pipeline(
    w: &Matrix,
    s: &ScalingOperator,
    quantizer: &dyn Quantizer,
    sw: &ScaledWeight,
    r: usize,
    k: usize,
    variant: Variant,
) -> Result<SrrDecomposition> {
    if k > r {
        return Err(SrrError::domain(format!("preserved rank {k} exceeds rank budget {r}")));
    }
    // preserve
    let (l1, r1) = sw.preserved(k, s)?;
    let remainder = w.sub(&l1.matmul(&r1));
    // quantize
    let q = quantizer.quantize_values(&remainder)?;
    // reconstruct
    let (l, rr) = match variant {
        Variant::Split => {
            let e = remainder.sub(&q);
            let (l2, r2) = scaled_low_rank(&e, s, r - k)?;
            (l1.hstack(&l2), r1.vstack(&r2))
        }
        Variant::Global => scaled_low_rank(&w.sub(&q), s, r)?,
    };
    let scaled_error = scaled_error_of(w, &q, &l, &rr, s)?;
    Ok(SrrDecomposition {
        q,
        l,
        r: rr,
        k,
        rank: r,
        variant,
        selection: None,
        scaled_error,
        quantizer: quantizer.describe(),
        scaling: s.kind(),
    })
}

fn decompose(
    w: &Matrix,
    s: &ScalingOperator,
    quantizer: &dyn Quantizer,
    r: usize,
    choice: SplitChoice,
    variant: Variant,
    cache: &ProbeCache,
) -> Result<SrrDecomposition> {
    check_inputs(w, s)?;
    check_rank(w, r)?;
    let svd_seed = match choice {
        SplitChoice::Auto { probe_seed } => derive_seed(probe_seed, 1),
        SplitChoice::Manual(_) => 0,
    };
    let sw = ScaledWeight::analyze(w, s, r, EXACT_PROFILE_LIMIT, svd_seed)?;
    let (k, selection) = match choice {
        SplitChoice::Manual(k) => (k, None),
        SplitChoice::Auto { probe_seed } => {
            let (m, n) = w.shape();
            let probe = if m.max(n) <= EXACT_PROFILE_LIMIT {
                cache.get_or_compute(s, m, n, probe_seed)?
            } else {
                cache.get_or_compute_partial(s, m, n, probe_seed, r)?
            };
            let mut sel = select_k(&sw.profile, &probe, r)?;
            sel.probe_seed = Some(probe_seed);
            (sel.k_star, Some(sel))
        }
    };
    let mut dec = split_pipeline(w, s, quantizer, &sw, r, k, variant)?;
    dec.selection = selection;
    Ok(dec)
}

/// Preserve the top-`k` scaled subspace, quantize the remainder, and spend
/// the remaining `r - k` ranks reconstructing the scaled quantization error.
///
/// With `SplitChoice::Auto` the split is chosen by [`select_k`] against a
/// probe from the process-wide [`ProbeCache`].
pub fn srr_decompose(
    w: &Matrix,
    s: &ScalingOperator,
    quantizer: &dyn Quantizer,
    r: usize,
    choice: SplitChoice,
) -> Result<SrrDecomposition> {
    decompose(w, s, quantizer, r, choice, Variant::Split, global_probe_cache())
}

/// [`srr_decompose`] with an explicit probe cache and variant.
pub fn srr_decompose_with_cache(
    w: &Matrix,
    s: &ScalingOperator,
    quantizer: &dyn Quantizer,
    r: usize,
    choice: SplitChoice,
    variant: Variant,
    cache: &ProbeCache,
) -> Result<SrrDecomposition> {
    decompose(w, s, quantizer, r, choice, variant, cache)
}

/// Same preserve and quantize steps, then one rank-`r` correction
/// `S⁻¹ SVD_r(S(W - Q))` of the whole residual.
pub fn srr_global_recon(
    w: &Matrix,
    s: &ScalingOperator,
    quantizer: &dyn Quantizer,
    r: usize,
    choice: SplitChoice,
) -> Result<SrrDecomposition> {
    decompose(w, s, quantizer, r, choice, Variant::Global, global_probe_cache())
}

/// True loss `‖S(W - Ŵ(k))‖_F` for every split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub k_opt: usize,
    /// Scaled error of the full pipeline at `k_opt`.
    pub loss: f64,
    pub loss_curve: Vec<f64>,
}

/// Exhaustive search over `k ∈ {0, ..., r}`. Ties go to the smallest `k`.
///
/// Each candidate's loss is the tail energy of the singular values of
/// `S E_k` beyond `r - k`, which is what the rank-`(r-k)` reconstruction
/// leaves behind; no factors are formed. The entries for `k = 0` and the
/// winner are then replaced by full-pipeline errors, so `loss_curve[0]` is
/// exactly the QER error and `loss ≤ loss_curve[0]` holds without rounding
/// slack.
pub fn oracle_best_split(
    w: &Matrix,
    s: &ScalingOperator,
    quantizer: &dyn Quantizer,
    r: usize,
) -> Result<OracleResult> {
    check_inputs(w, s)?;
    check_rank(w, r)?;
    let sw = ScaledWeight::analyze(w, s, r, EXACT_PROFILE_LIMIT, 0)?;
    let mut loss_curve = Vec::with_capacity(r + 1);
    for k in 0..=r {
        loss_curve.push(split_tail_loss(w, s, quantizer, &sw, r, k)?);
    }
    let mut k_opt = 0;
    for (k, &loss) in loss_curve.iter().enumerate() {
        if loss < loss_curve[k_opt] {
            k_opt = k;
        }
    }
    let base = split_pipeline(w, s, quantizer, &sw, r, 0, Variant::Split)?.scaled_error;
    loss_curve[0] = base;
    if k_opt != 0 {
        let best = split_pipeline(w, s, quantizer, &sw, r, k_opt, Variant::Split)?.scaled_error;
        loss_curve[k_opt] = best;
        if best >= base {
            k_opt = 0;
        }
    }
    Ok(OracleResult { k_opt, loss: loss_curve[k_opt], loss_curve })
}

/// `‖S(W - Ŵ(k))‖_F` from the spectrum of `S E_k`.
fn split_tail_loss(
    w: &Matrix,
    s: &ScalingOperator,
    quantizer: &dyn Quantizer,
    sw: &ScaledWeight,
    r: usize,
    k: usize,
) -> Result<f64> {
    let (l1, r1) = sw.preserved(k, s)?;
    let remainder = w.sub(&l1.matmul(&r1));
    let q = quantizer.quantize_values(&remainder)?;
    let se = s.forward(&remainder.sub(&q))?;
    let sv = singular_values(&se)?;
    let tail: f64 = sv.iter().skip(r - k).rev().map(|x| x * x).sum();
    Ok(tail.sqrt())
}

/// `‖S(W - Q - LR)‖_F` of a decomposition.
pub fn scaled_recon_error(w: &Matrix, dec: &SrrDecomposition, s: &ScalingOperator) -> Result<f64> {
    w.ensure_same_shape(&dec.q, "scaled_recon_error")?;
    if dec.l.rows() != w.rows() || dec.r.cols() != w.cols() || dec.l.cols() != dec.r.rows() {
        return Err(SrrError::domain("decomposition factors do not match the weight shape"));
    }
    scaled_error_of(w, &dec.q, &dec.l, &dec.r, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_profile;
    use crate::quant::{QuantFamily, QuantizerConfig};
    use crate::rng::{gaussian_matrix, seeded_rng};

    fn uniform3() -> QuantizerConfig {
        QuantizerConfig::new(QuantFamily::Uniform, 3, 16).unwrap()
    }

    #[test]
    fn qer_zero_residual_for_representable_weight() {
        let cfg = QuantizerConfig::mxint(3).unwrap();
        let w = Matrix::from_fn(6, 16, |i, j| ((i + j) % 7) as f64 * 0.5 - 1.5);
        let q = cfg.quantize_values(&w).unwrap();
        assert_eq!(q, w);
        let (l, r) = qer_reconstruct(&w, &q, &ScalingOperator::identity(6), 3).unwrap();
        assert_eq!(l.matmul(&r).max_abs(), 0.0);
    }

    #[test]
    fn qer_scaled_residual_matches_spectral_tail() {
        let mut rng = seeded_rng(21);
        let w = gaussian_matrix(32, 24, &mut rng);
        let s = ScalingOperator::diagonal((0..32).map(|i| 0.5 + 0.05 * i as f64).collect()).unwrap();
        let dec = qer_decompose(&w, &s, &uniform3(), 4).unwrap();
        let se = s.forward(&w.sub(&dec.q)).unwrap();
        let prof = spectral_profile(&se).unwrap();
        let tail: f64 = prof.singular_values[4..].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((dec.scaled_error - tail).abs() <= 1e-8 * tail);
    }

    #[test]
    fn k_zero_equals_qer_bitwise() {
        let mut rng = seeded_rng(5);
        let w = gaussian_matrix(20, 18, &mut rng);
        let s = ScalingOperator::diagonal((0..20).map(|i| 1.0 + i as f64 / 10.0).collect()).unwrap();
        let cfg = QuantizerConfig::mxint(3).unwrap();
        let a = srr_decompose(&w, &s, &cfg, 5, SplitChoice::Manual(0)).unwrap();
        let b = qer_decompose(&w, &s, &cfg, 5).unwrap();
        assert_eq!(a, b);
        let g = srr_global_recon(&w, &s, &cfg, 5, SplitChoice::Manual(0)).unwrap();
        assert_eq!((g.q, g.l, g.r, g.scaled_error), (b.q, b.l, b.r, b.scaled_error));
    }

    #[test]
    fn exact_low_rank_weight_is_recovered_at_its_rank() {
        let mut rng = seeded_rng(8);
        let w = gaussian_matrix(16, 3, &mut rng).matmul(&gaussian_matrix(3, 12, &mut rng));
        let s = ScalingOperator::identity(16);
        let dec = srr_decompose(&w, &s, &uniform3(), 6, SplitChoice::Manual(3)).unwrap();
        assert!(dec.scaled_error < 1e-10 * w.frobenius_norm());
    }

    #[test]
    fn factor_shapes() {
        let mut rng = seeded_rng(1);
        let w = gaussian_matrix(12, 10, &mut rng);
        let s = ScalingOperator::identity(12);
        let dec = srr_decompose(&w, &s, &uniform3(), 5, SplitChoice::Manual(2)).unwrap();
        assert_eq!(dec.l.shape(), (12, 5));
        assert_eq!(dec.r.shape(), (5, 10));
        let (l1, r1) = dec.preserved_factors();
        let (l2, r2) = dec.residual_factors();
        assert_eq!((l1.cols(), r1.rows(), l2.cols(), r2.rows()), (2, 2, 3, 3));
        assert_eq!(scaled_recon_error(&w, &dec, &s).unwrap(), dec.scaled_error);
    }

    #[test]
    fn invalid_ranks() {
        let w = Matrix::zeros(6, 4);
        let s = ScalingOperator::identity(6);
        let cfg = uniform3();
        assert!(matches!(srr_decompose(&w, &s, &cfg, 5, SplitChoice::Manual(0)), Err(SrrError::Domain(_))));
        assert!(matches!(srr_decompose(&w, &s, &cfg, 3, SplitChoice::Manual(4)), Err(SrrError::Domain(_))));
        assert!(matches!(
            srr_decompose(&w, &ScalingOperator::identity(5), &cfg, 2, SplitChoice::Manual(0)),
            Err(SrrError::Domain(_))
        ));
    }

    #[test]
    fn auto_is_deterministic_and_records_selection() {
        let mut rng = seeded_rng(3);
        let w = gaussian_matrix(24, 20, &mut rng);
        let s = ScalingOperator::identity(24);
        let cache = ProbeCache::new();
        let run = || {
            srr_decompose_with_cache(&w, &s, &uniform3(), 6, SplitChoice::Auto { probe_seed: 4 }, Variant::Split, &cache)
                .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        let sel = a.selection.as_ref().unwrap();
        assert_eq!(sel.k_star, a.k);
        assert_eq!(sel.probe_seed, Some(4));
        assert_eq!(sel.objective_curve.len(), 7);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn randomized_profile_path_for_large_inputs() {
        let mut rng = seeded_rng(12);
        let w = gaussian_matrix(40, 5, &mut rng).matmul(&gaussian_matrix(5, 36, &mut rng));
        let s = ScalingOperator::identity(40);
        let exact = ScaledWeight::analyze(&w, &s, 4, usize::MAX, 0).unwrap();
        let approx = ScaledWeight::analyze(&w, &s, 4, 10, 0).unwrap();
        assert!(!approx.profile.is_complete());
        for k in 0..=4 {
            let a = exact.profile.rho(k).unwrap();
            let b = approx.profile.rho(k).unwrap();
            assert!((a - b).abs() < 1e-8, "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn oracle_contains_qer() {
        let mut rng = seeded_rng(30);
        let w = gaussian_matrix(16, 16, &mut rng);
        let s = ScalingOperator::identity(16);
        let cfg = uniform3();
        let o = oracle_best_split(&w, &s, &cfg, 4).unwrap();
        assert_eq!(o.loss_curve.len(), 5);
        assert!(o.loss_curve.iter().all(|&l| l >= 0.0));
        assert!(o.loss <= o.loss_curve[0]);
        let qer = qer_decompose(&w, &s, &cfg, 4).unwrap();
        assert_eq!(o.loss_curve[0], qer.scaled_error);
        for k in 1..=4 {
            let full = srr_decompose(&w, &s, &cfg, 4, SplitChoice::Manual(k)).unwrap().scaled_error;
            assert!((o.loss_curve[k] - full).abs() <= 1e-10 * full, "k={k}");
        }
    }
}
