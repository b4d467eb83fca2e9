//! Randomized truncated SVD with Gaussian sketching and subspace power
//! iterations.

use super::matrix::{dot, Matrix};
use super::svd::{svd_thin, SvdFactors};
use crate::error::{Result, SrrError};
use crate::rng::{gaussian_matrix, seeded_rng};

/// Power iterations used when the caller has no preference.
pub const DEFAULT_POWER_ITERS: usize = 4;

/// Oversampling used when the caller has no preference: twice the target rank.
pub fn default_oversample(p: usize) -> usize {
    2 * p
}

/// Approximate top-`p` singular triplets.
///
/// The sketch has `p + oversample` columns and is refined with `n_iter`
/// re-orthonormalized power iterations. Deterministic for a fixed seed.
pub fn svd_randomized(
    a: &Matrix,
    p: usize,
    oversample: usize,
    n_iter: usize,
    seed: u64,
) -> Result<SvdFactors> {
    a.ensure_finite("randomized svd input")?;
    a.ensure_desk_scale("randomized svd input")?;
    if p == 0 {
        return Err(SrrError::domain("randomized svd needs rank >= 1"));
    }
    let width = p + oversample;
    if width > a.min_dim() {
        return Err(SrrError::domain(format!(
            "sketch width {width} (rank {p} + oversample {oversample}) exceeds min dimension {}",
            a.min_dim()
        )));
    }
    let mut rng = seeded_rng(seed);
    let omega = gaussian_matrix(a.cols(), width, &mut rng);
    let mut q = orthonormalize(&a.matmul(&omega));
    for _ in 0..n_iter {
        let z = orthonormalize(&a.t_matmul(&q));
        q = orthonormalize(&a.matmul(&z));
    }
    // B = Qᵀ A is width x n.
    let b = q.t_matmul(a);
    let small = svd_thin(&b)?;
    Ok(SvdFactors {
        u: q.matmul(&small.u.columns(0, p)),
        s: small.s[..p].to_vec(),
        v: small.v.columns(0, p),
    })
}

/// Orthonormal basis for the column space of `y` (same shape), by modified
/// Gram–Schmidt applied twice. Columns that vanish are replaced by the first
/// standard basis vector that survives orthogonalization.
pub fn orthonormalize(y: &Matrix) -> Matrix {
    let (m, k) = y.shape();
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| (0..m).map(|i| y.get(i, j)).collect()).collect();
    let scale = y.max_abs();
    let mut next_basis = 0usize;
    for j in 0..k {
        let original = norm(&cols[j]);
        let (done, rest) = cols.split_at_mut(j);
        let c = &mut rest[0];
        for _ in 0..2 {
            for q in done.iter() {
                let t = dot(q, c);
                c.iter_mut().zip(q).for_each(|(x, qi)| *x -= t * qi);
            }
        }
        let mut nrm = norm(c);
        if original == 0.0 || nrm <= 1e-10 * original.max(scale * f64::EPSILON) || nrm == 0.0 {
            // Degenerate direction: fall back to a standard basis vector.
            loop {
                assert!(next_basis < m, "cannot complete orthonormal basis");
                c.iter_mut().for_each(|x| *x = 0.0);
                c[next_basis] = 1.0;
                next_basis += 1;
                for _ in 0..2 {
                    for q in done.iter() {
                        let t = dot(q, c);
                        c.iter_mut().zip(q).for_each(|(x, qi)| *x -= t * qi);
                    }
                }
                nrm = norm(c);
                if nrm > 1e-8 {
                    break;
                }
            }
        }
        c.iter_mut().for_each(|x| *x /= nrm);
    }
    Matrix::from_fn(m, k, |i, j| cols[j][i])
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}
