#![allow(dead_code)]

use srr_core::linalg::Matrix;
use srr_core::rng::{gaussian_matrix, seeded_rng};

/// Singular values by one-sided (Hestenes) Jacobi, sorted non-increasing.
///
/// Written independently of the library kernel: it orthogonalizes column
/// pairs of a copy of `A` with plane rotations until every pair is
/// orthogonal to working precision; the column norms are then the singular
/// values.
pub fn jacobi_singular_values(a: &Matrix) -> Vec<f64> {
    let a = if a.rows() < a.cols() { a.transpose() } else { a.clone() };
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    gaussian_matrix(rows, cols, &mut seeded_rng(seed))
}

/// `U diag(σ) Vᵀ` with Haar-like orthonormal factors drawn from `seed`.
pub fn with_spectrum(rows: usize, cols: usize, sigma: &[f64], seed: u64) -> Matrix {
    let p = sigma.len();
    let u = srr_core::linalg::orthonormalize(&random_matrix(rows, p, seed));
    let v = srr_core::linalg::orthonormalize(&random_matrix(cols, p, seed ^ 0x5eed));
    u.scale_cols(sigma).matmul_t(&v)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).max_abs()
}

use srr_core::quant::{QuantFamily, QuantizerConfig};
use srr_core::scaling::{accumulate_calibration, build_scaling, ScalingKind, ScalingOperator};

pub struct Case {
    pub w: Matrix,
    pub s: ScalingOperator,
    pub quant: QuantizerConfig,
    pub r: usize,
    pub k: usize,
}

/// Split-decomposition cases cycling through both quantizer families and
/// all three scaling kinds, with decaying spectra and varied shapes.
pub fn split_cases(n: usize, seed: u64) -> Vec<Case> {
    (0..n)
        .map(|i| {
            let s_seed = seed.wrapping_mul(1000).wrapping_add(i as u64);
            let (m, cols) = [(24, 20), (32, 40), (40, 24)][i % 3];
            let p = m.min(cols);
            let sigma: Vec<f64> = (0..p).map(|j| 10.0 * 0.8f64.powi(j as i32) + 0.05).collect();
            let w = with_spectrum(m, cols, &sigma, s_seed);
            let family = if i % 2 == 0 { QuantFamily::Mxint } else { QuantFamily::Uniform };
            let quant = QuantizerConfig::new(family, 2 + (i % 3) as u32, 16).unwrap();
            let kind = [ScalingKind::Identity, ScalingKind::Diagonal, ScalingKind::Dense][(i / 2) % 3];
            let x = random_matrix(3 * m, m, s_seed ^ 0xabc).matmul(&Matrix::from_diag(
                &random_matrix(1, m, s_seed ^ 0xdef).data().iter().map(|v| (0.7 * v).exp()).collect::<Vec<_>>(),
            ));
            let stats = accumulate_calibration(&x).unwrap();
            let s = build_scaling(&stats, kind, stats.default_ridge()).unwrap();
            let r = 4 + i % 5;
            let k = i % (r + 1);
            Case { w, s, quant, r, k }
        })
        .collect()
}
