//! Dense singular value decomposition.
//!
//! Householder bidiagonalization followed by implicitly shifted QR on the
//! bidiagonal (Golub–Kahan–Reinsch). Storage is column-major internally so
//! every inner loop walks contiguous memory.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Result, SrrError};

/// Top-`p` singular triplets `A ≈ U diag(S) Vᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdFactors {
    /// `m x p`, orthonormal columns.
    pub u: Matrix,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// `n x p`, orthonormal columns.
    pub v: Matrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `U diag(S) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        self.u.scale_cols(&self.s).matmul_t(&self.v)
    }

    /// Leading `p` triplets.
    pub fn truncate(&self, p: usize) -> SvdFactors {
        assert!(p <= self.rank());
        SvdFactors {
            u: self.u.columns(0, p),
            s: self.s[..p].to_vec(),
            v: self.v.columns(0, p),
        }
    }

    /// `diag(S) Vᵀ`, the right factor in the `L = U, R = ΣVᵀ` convention.
    pub fn sigma_vt(&self) -> Matrix {
        self.v.transpose().scale_rows(&self.s)
    }
}

impl Matrix {
    /// Multiplies column `j` by `d[j]`.
    pub fn scale_cols(&self, d: &[f64]) -> Matrix {
        assert_eq!(d.len(), self.cols());
        let mut out = self.clone();
        for i in 0..self.rows() {
            for (v, &dj) in out.row_mut(i).iter_mut().zip(d) {
                *v *= dj;
            }
        }
        out
    }
}

/// Best rank-`p` approximation factors of `a` from an exact full SVD.
///
/// `p = 0` yields empty factors whose product is the zero matrix.
pub fn svd_truncated(a: &Matrix, p: usize) -> Result<SvdFactors> {
    if p > a.min_dim() {
        return Err(SrrError::domain(format!(
            "rank {p} exceeds min dimension {} of a {}x{} matrix",
            a.min_dim(),
            a.rows(),
            a.cols()
        )));
    }
    Ok(svd_thin(a)?.truncate(p))
}

/// Thin SVD with `min(m, n)` triplets.
pub fn svd_thin(a: &Matrix) -> Result<SvdFactors> {
    a.ensure_finite("svd input")?;
    a.ensure_desk_scale("svd input")?;
    let (m, n) = a.shape();
    if m >= n {
        let raw = golub_kahan(&to_col_major(a), m, n, true)?;
        Ok(raw.into_factors(m, n))
    } else {
        let raw = golub_kahan(&to_col_major(&a.transpose()), n, m, true)?;
        let f = raw.into_factors(n, m);
        Ok(SvdFactors { u: f.v, s: f.s, v: f.u })
    }
}

/// All `min(m, n)` singular values in non-increasing order, without vectors.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    a.ensure_finite("svd input")?;
    a.ensure_desk_scale("svd input")?;
    let (m, n) = a.shape();
    let raw = if m >= n {
        golub_kahan(&to_col_major(a), m, n, false)?
    } else {
        golub_kahan(&to_col_major(&a.transpose()), n, m, false)?
    };
    Ok(raw.s)
}

fn to_col_major(a: &Matrix) -> Vec<f64> {
    a.transpose().into_data()
}

struct RawSvd {
    s: Vec<f64>,
    /// column-major m x n
    u: Vec<f64>,
    /// column-major n x n
    v: Vec<f64>,
}

impl RawSvd {
    fn into_factors(self, m: usize, n: usize) -> SvdFactors {
        // Column-major m x n is the row-major data of the n x m transpose.
        let u = Matrix::from_raw(n, m, self.u).transpose();
        let v = Matrix::from_raw(n, n, self.v).transpose();
        SvdFactors { u, s: self.s, v }
    }
}

/// SVD of an `m x n` column-major matrix with `m >= n`.
fn golub_kahan(a_in: &[f64], m: usize, n: usize, want_vectors: bool) -> Result<RawSvd> {
    debug_assert!(m >= n);
    if n == 0 {
        return Ok(RawSvd { s: vec![], u: vec![], v: vec![] });
    }
    let mut a = a_in.to_vec();
    let idx = |i: usize, j: usize, ld: usize| j * ld + i;
    let nu = n;
    let mut s = vec![0.0; n.min(m + 1)];
    let mut u = if want_vectors { vec![0.0; m * nu] } else { vec![] };
    let mut v = if want_vectors { vec![0.0; n * n] } else { vec![] };
    let mut e = vec![0.0; n];
    let mut work = vec![0.0; m];

    let nct = (m - 1).min(n);
    let nrt = n.saturating_sub(2).min(m);
    for k in 0..nct.max(nrt) {
        if k < nct {
            // Householder vector for column k.
            let col = &mut a[idx(k, k, m)..idx(0, k + 1, m)];
            let mut norm = 0.0f64;
            for &x in col.iter() {
                norm = norm.hypot(x);
            }
            if norm != 0.0 {
                if col[0] < 0.0 {
                    norm = -norm;
                }
                col.iter_mut().for_each(|x| *x /= norm);
                col[0] += 1.0;
            }
            s[k] = -norm;
        }
        for j in k + 1..n {
            if k < nct && s[k] != 0.0 {
                let (left, right) = a.split_at_mut(idx(0, j, m));
                let hk = &left[idx(k, k, m)..idx(0, k + 1, m)];
                let cj = &mut right[k..m];
                let t = -super::matrix::dot(hk, cj) / hk[0];
                cj.iter_mut().zip(hk).for_each(|(x, h)| *x += t * h);
            }
            e[j] = a[idx(k, j, m)];
        }
        if want_vectors && k < nct {
            u[idx(k, k, m)..idx(0, k + 1, m)].copy_from_slice(&a[idx(k, k, m)..idx(0, k + 1, m)]);
        }
        if k < nrt {
            let mut norm = 0.0f64;
            for &x in &e[k + 1..n] {
                norm = norm.hypot(x);
            }
            if norm != 0.0 {
                if e[k + 1] < 0.0 {
                    norm = -norm;
                }
                e[k + 1..n].iter_mut().for_each(|x| *x /= norm);
                e[k + 1] += 1.0;
            }
            e[k] = -norm;
            if k + 1 < m && e[k] != 0.0 {
                work[k + 1..m].iter_mut().for_each(|w| *w = 0.0);
                for j in k + 1..n {
                    let ej = e[j];
                    let cj = &a[idx(k + 1, j, m)..idx(0, j + 1, m)];
                    work[k + 1..m].iter_mut().zip(cj).for_each(|(w, x)| *w += ej * x);
                }
                for j in k + 1..n {
                    let t = -e[j] / e[k + 1];
                    let cj = &mut a[idx(k + 1, j, m)..idx(0, j + 1, m)];
                    cj.iter_mut().zip(&work[k + 1..m]).for_each(|(x, w)| *x += t * w);
                }
            }
            if want_vectors {
                v[idx(k + 1, k, n)..idx(0, k + 1, n)].copy_from_slice(&e[k + 1..n]);
            }
        }
    }

    // Final bidiagonal of order p.
    let mut p = n.min(m + 1);
    if nct < n {
        s[nct] = a[idx(nct, nct, m)];
    }
    if m < p {
        s[p - 1] = 0.0;
    }
    if nrt + 1 < p {
        e[nrt] = a[idx(nrt, p - 1, m)];
    }
    e[p - 1] = 0.0;

    if want_vectors {
        for j in nct..nu {
            u[idx(0, j, m)..idx(0, j + 1, m)].iter_mut().for_each(|x| *x = 0.0);
            u[idx(j, j, m)] = 1.0;
        }
        for k in (0..nct).rev() {
            if s[k] != 0.0 {
                for j in k + 1..nu {
                    let (left, right) = u.split_at_mut(idx(0, j, m));
                    let hk = &left[idx(k, k, m)..idx(0, k + 1, m)];
                    let cj = &mut right[k..m];
                    let t = -super::matrix::dot(hk, cj) / hk[0];
                    cj.iter_mut().zip(hk).for_each(|(x, h)| *x += t * h);
                }
                let col = &mut u[idx(0, k, m)..idx(0, k + 1, m)];
                col[k..].iter_mut().for_each(|x| *x = -*x);
                col[k] += 1.0;
                col[..k].iter_mut().for_each(|x| *x = 0.0);
            } else {
                let col = &mut u[idx(0, k, m)..idx(0, k + 1, m)];
                col.iter_mut().for_each(|x| *x = 0.0);
                col[k] = 1.0;
            }
        }
        for k in (0..n).rev() {
            if k < nrt && e[k] != 0.0 {
                for j in k + 1..nu {
                    let (left, right) = v.split_at_mut(idx(0, j, n));
                    let hk = &left[idx(k + 1, k, n)..idx(0, k + 1, n)];
                    let cj = &mut right[k + 1..n];
                    let t = -super::matrix::dot(hk, cj) / hk[0];
                    cj.iter_mut().zip(hk).for_each(|(x, h)| *x += t * h);
                }
            }
            let col = &mut v[idx(0, k, n)..idx(0, k + 1, n)];
            col.iter_mut().for_each(|x| *x = 0.0);
            col[k] = 1.0;
        }
    }

    // Rotate columns c1, c2 of a column-major buffer: (c1, c2) <- (cs*c1 + sn*c2, -sn*c1 + cs*c2).
    fn rotate(buf: &mut [f64], ld: usize, c1: usize, c2: usize, cs: f64, sn: f64) {
        debug_assert!(c1 != c2);
        let (lo, hi) = (c1.min(c2), c1.max(c2));
        let (left, right) = buf.split_at_mut(hi * ld);
        let a = &mut left[lo * ld..(lo + 1) * ld];
        let b = &mut right[..ld];
        let (x, y) = if c1 < c2 { (a, b) } else { (b, a) };
        for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
            let t = cs * *xi + sn * *yi;
            *yi = -sn * *xi + cs * *yi;
            *xi = t;
        }
    }

    let pp = p - 1;
    let eps = f64::EPSILON;
    let tiny = 2f64.powi(-966);
    let max_iter = 75 * n.max(10);
    let mut total_iter = 0usize;
    while p > 0 {
        // Find the largest k with negligible e[k] (k = -1 encoded as None).
        let mut k_opt: Option<usize> = None;
        for k in (0..p - 1).rev() {
            if e[k].abs() <= tiny + eps * (s[k].abs() + s[k + 1].abs()) {
                e[k] = 0.0;
                k_opt = Some(k);
                break;
            }
        }
        let kase;
        let k_start: usize; // index where the active block starts
        if p == 1 || k_opt == Some(p - 2) {
            kase = 4;
            k_start = p - 1;
        } else {
            let lower = k_opt; // block lies in (lower, p-1]
            let mut ks_found: Option<usize> = None;
            let lower_i = lower.map_or(-1isize, |k| k as isize);
            let mut ks = p as isize - 1;
            while ks > lower_i {
                let ksu = ks as usize;
                let t = (if ksu != p { e[ksu].abs() } else { 0.0 })
                    + (if ks != lower_i + 1 { e[ksu - 1].abs() } else { 0.0 });
                if s[ksu].abs() <= tiny + eps * t {
                    s[ksu] = 0.0;
                    ks_found = Some(ksu);
                    break;
                }
                ks -= 1;
            }
            let base = (lower_i + 1) as usize;
            match ks_found {
                None => {
                    kase = 3;
                    k_start = base;
                }
                Some(ks) if ks == p - 1 => {
                    kase = 1;
                    k_start = base;
                }
                Some(ks) => {
                    kase = 2;
                    k_start = ks + 1;
                }
            }
        }

        match kase {
            // Deflate negligible s[p-1].
            1 => {
                let mut f = e[p - 2];
                e[p - 2] = 0.0;
                for j in (k_start..=p - 2).rev() {
                    let t = s[j].hypot(f);
                    let cs = s[j] / t;
                    let sn = f / t;
                    s[j] = t;
                    if j != k_start {
                        f = -sn * e[j - 1];
                        e[j - 1] *= cs;
                    }
                    if want_vectors {
                        rotate(&mut v, n, j, p - 1, cs, sn);
                    }
                }
            }
            // Split at negligible s[k_start - 1].
            2 => {
                let km1 = k_start - 1;
                let mut f = e[km1];
                e[km1] = 0.0;
                for j in k_start..p {
                    let t = s[j].hypot(f);
                    let cs = s[j] / t;
                    let sn = f / t;
                    s[j] = t;
                    f = -sn * e[j];
                    e[j] *= cs;
                    if want_vectors {
                        rotate(&mut u, m, j, km1, cs, sn);
                    }
                }
            }
            // One implicit QR step.
            3 => {
                let k = k_start;
                let scale = s[p - 1]
                    .abs()
                    .max(s[p - 2].abs())
                    .max(e[p - 2].abs())
                    .max(s[k].abs())
                    .max(e[k].abs());
                let sp = s[p - 1] / scale;
                let spm1 = s[p - 2] / scale;
                let epm1 = e[p - 2] / scale;
                let sk = s[k] / scale;
                let ek = e[k] / scale;
                let b = ((spm1 + sp) * (spm1 - sp) + epm1 * epm1) / 2.0;
                let c = (sp * epm1) * (sp * epm1);
                let mut shift = 0.0;
                if b != 0.0 || c != 0.0 {
                    shift = (b * b + c).sqrt();
                    if b < 0.0 {
                        shift = -shift;
                    }
                    shift = c / (b + shift);
                }
                let mut f = (sk + sp) * (sk - sp) + shift;
                let mut g = sk * ek;
                for j in k..p - 1 {
                    let mut t = f.hypot(g);
                    let mut cs = f / t;
                    let mut sn = g / t;
                    if j != k {
                        e[j - 1] = t;
                    }
                    f = cs * s[j] + sn * e[j];
                    e[j] = cs * e[j] - sn * s[j];
                    g = sn * s[j + 1];
                    s[j + 1] *= cs;
                    if want_vectors {
                        rotate(&mut v, n, j, j + 1, cs, sn);
                    }
                    t = f.hypot(g);
                    cs = f / t;
                    sn = g / t;
                    s[j] = t;
                    f = cs * e[j] + sn * s[j + 1];
                    s[j + 1] = -sn * e[j] + cs * s[j + 1];
                    g = sn * e[j + 1];
                    e[j + 1] *= cs;
                    if want_vectors && j < m - 1 {
                        rotate(&mut u, m, j, j + 1, cs, sn);
                    }
                }
                e[p - 2] = f;
                total_iter += 1;
                if total_iter > max_iter {
                    return Err(SrrError::Numeric(
                        "SVD did not converge within the iteration limit".into(),
                    ));
                }
            }
            // Convergence of s[k_start].
            _ => {
                let mut k = k_start;
                if s[k] <= 0.0 {
                    s[k] = if s[k] < 0.0 { -s[k] } else { 0.0 };
                    if want_vectors {
                        v[idx(0, k, n)..=idx(pp, k, n)].iter_mut().for_each(|x| *x = -*x);
                    }
                }
                while k < pp {
                    if s[k] >= s[k + 1] {
                        break;
                    }
                    s.swap(k, k + 1);
                    if want_vectors {
                        swap_cols(&mut v, n, k, k + 1);
                        swap_cols(&mut u, m, k, k + 1);
                    }
                    k += 1;
                }
                p -= 1;
            }
        }
    }
    s.truncate(n);
    Ok(RawSvd { s, u, v })
}

fn swap_cols(buf: &mut [f64], ld: usize, c1: usize, c2: usize) {
    let (left, right) = buf.split_at_mut(c2 * ld);
    left[c1 * ld..(c1 + 1) * ld].swap_with_slice(&mut right[..ld]);
}
