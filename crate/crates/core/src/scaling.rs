//! Activation-aware scaling operators built from calibration statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrrError};
use crate::linalg::{symmetric_eigen, Matrix};

/// Streaming accumulator for `Σ x xᵀ` over calibration activations.
///
/// Samples are accumulated in arrival order in 64-bit arithmetic.
#[derive(Debug, Clone)]
pub struct CalibrationAccumulator {
    dim: usize,
    count: usize,
    second_moment: Matrix,
}

impl CalibrationAccumulator {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(SrrError::domain("calibration dimension must be positive"));
        }
        Ok(CalibrationAccumulator { dim, count: 0, second_moment: Matrix::zeros(dim, dim) })
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(SrrError::input(format!(
                "activation of length {} for dimension {}",
                x.len(),
                self.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SrrError::input("non-finite activation"));
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (m, &xj) in self.second_moment.row_mut(i).iter_mut().zip(x) {
                *m += xi * xj;
            }
        }
        self.count += 1;
        Ok(())
    }

    /// Adds every row of `x` (samples x dim).
    pub fn push_rows(&mut self, x: &Matrix) -> Result<()> {
        (0..x.rows()).try_for_each(|i| self.push(x.row(i)))
    }

    pub fn finalize(self) -> Result<CalibrationStats> {
        if self.count == 0 {
            return Err(SrrError::domain("no calibration samples"));
        }
        let n = self.count as f64;
        let diag_rms = (0..self.dim).map(|i| (self.second_moment.get(i, i) / n).sqrt()).collect();
        Ok(CalibrationStats {
            dim: self.dim,
            sample_count: self.count,
            second_moment: self.second_moment,
            diag_rms,
        })
    }
}

/// Finalized calibration statistics.
///
/// `second_moment` is the raw sum `Σ x xᵀ`; `diag_rms[i]² = second_moment[i][i] / sample_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStats {
    pub dim: usize,
    pub sample_count: usize,
    pub second_moment: Matrix,
    pub diag_rms: Vec<f64>,
}

impl CalibrationStats {
    /// Rebuilds stats from a stored second moment.
    pub fn from_second_moment(second_moment: Matrix, sample_count: usize) -> Result<Self> {
        if second_moment.rows() != second_moment.cols() || second_moment.rows() == 0 {
            return Err(SrrError::input("second moment must be square and non-empty"));
        }
        if sample_count == 0 {
            return Err(SrrError::domain("no calibration samples"));
        }
        second_moment.ensure_finite("second moment")?;
        let dim = second_moment.rows();
        let n = sample_count as f64;
        let diag_rms = (0..dim).map(|i| (second_moment.get(i, i).max(0.0) / n).sqrt()).collect();
        Ok(CalibrationStats { dim, sample_count, second_moment, diag_rms })
    }

    /// `E[x xᵀ] = second_moment / sample_count`.
    pub fn covariance(&self) -> Matrix {
        self.second_moment.scale(1.0 / self.sample_count as f64)
    }

    /// Ridge `1e-6 · trace(C) / m`.
    pub fn default_ridge(&self) -> f64 {
        let c = self.covariance();
        let trace: f64 = (0..self.dim).map(|i| c.get(i, i)).sum();
        1e-6 * trace / self.dim as f64
    }
}

/// Accumulates every row of `activations` (samples x dim).
pub fn accumulate_calibration(activations: &Matrix) -> Result<CalibrationStats> {
    let mut acc = CalibrationAccumulator::new(activations.cols())?;
    acc.push_rows(activations)?;
    acc.finalize()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingKind {
    Identity,
    Diagonal,
    Dense,
}

impl std::str::FromStr for ScalingKind {
    type Err = SrrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(ScalingKind::Identity),
            "diagonal" => Ok(ScalingKind::Diagonal),
            "dense" => Ok(ScalingKind::Dense),
            other => Err(SrrError::input(format!("unknown scaling kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for ScalingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScalingKind::Identity => "identity",
            ScalingKind::Diagonal => "diagonal",
            ScalingKind::Dense => "dense",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Operator {
    Identity,
    Diagonal(Vec<f64>),
    Dense { factor: Matrix, inverse: Matrix },
}

/// Invertible `m x m` scaling `S` applied on the left of weight matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingOperator {
    dim: usize,
    op: Operator,
}

impl ScalingOperator {
    pub fn identity(dim: usize) -> Self {
        ScalingOperator { dim, op: Operator::Identity }
    }

    /// Diagonal scaling; every entry must be positive and finite.
    pub fn diagonal(diag: Vec<f64>) -> Result<Self> {
        if diag.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(SrrError::domain("diagonal scaling entries must be positive and finite"));
        }
        Ok(ScalingOperator { dim: diag.len(), op: Operator::Diagonal(diag) })
    }

    /// Dense scaling from a symmetric positive-definite matrix.
    pub fn dense(factor: Matrix) -> Result<Self> {
        let n = factor.rows();
        if factor.cols() != n {
            return Err(SrrError::domain("dense scaling must be square"));
        }
        let eig = symmetric_eigen(&factor)?;
        let min = eig.values.last().copied().unwrap_or(1.0);
        if min <= 0.0 || min <= f64::EPSILON * eig.values[0] * n as f64 {
            return Err(SrrError::domain(format!(
                "dense scaling is not positive definite (min eigenvalue {min:e})"
            )));
        }
        let inv: Vec<f64> = eig.values.iter().map(|l| 1.0 / l).collect();
        let inverse = symmetrize(&eig.vectors.scale_cols(&inv).matmul_t(&eig.vectors));
        Ok(ScalingOperator { dim: n, op: Operator::Dense { factor: symmetrize(&factor), inverse } })
    }

    pub fn kind(&self) -> ScalingKind {
        match self.op {
            Operator::Identity => ScalingKind::Identity,
            Operator::Diagonal(_) => ScalingKind::Diagonal,
            Operator::Dense { .. } => ScalingKind::Dense,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diag(&self) -> Option<&[f64]> {
        match &self.op {
            Operator::Diagonal(d) => Some(d),
            _ => None,
        }
    }

    /// `S` as an explicit matrix.
    pub fn to_matrix(&self) -> Matrix {
        match &self.op {
            Operator::Identity => Matrix::identity(self.dim),
            Operator::Diagonal(d) => Matrix::from_diag(d),
            Operator::Dense { factor, .. } => factor.clone(),
        }
    }

    /// `S⁻¹` as an explicit matrix.
    pub fn inverse_matrix(&self) -> Matrix {
        match &self.op {
            Operator::Identity => Matrix::identity(self.dim),
            Operator::Diagonal(d) => Matrix::from_diag(&d.iter().map(|x| 1.0 / x).collect::<Vec<_>>()),
            Operator::Dense { inverse, .. } => inverse.clone(),
        }
    }

    /// `S·A` or `S⁻¹·A`.
    pub fn apply(&self, a: &Matrix, direction: Direction) -> Result<Matrix> {
        if a.rows() != self.dim {
            return Err(SrrError::domain(format!(
                "scaling of dimension {} applied to a matrix with {} rows",
                self.dim,
                a.rows()
            )));
        }
        Ok(match (&self.op, direction) {
            (Operator::Identity, _) => a.clone(),
            (Operator::Diagonal(d), Direction::Forward) => a.scale_rows(d),
            (Operator::Diagonal(d), Direction::Inverse) => {
                let inv: Vec<f64> = d.iter().map(|x| 1.0 / x).collect();
                a.scale_rows(&inv)
            }
            (Operator::Dense { factor, .. }, Direction::Forward) => factor.matmul(a),
            (Operator::Dense { inverse, .. }, Direction::Inverse) => inverse.matmul(a),
        })
    }

    pub fn forward(&self, a: &Matrix) -> Result<Matrix> {
        self.apply(a, Direction::Forward)
    }

    pub fn inverse(&self, a: &Matrix) -> Result<Matrix> {
        self.apply(a, Direction::Inverse)
    }

    /// Stable 64-bit fingerprint of the operator contents.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over the kind tag and the f64 bit patterns.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        feed(self.dim as u64);
        match &self.op {
            Operator::Identity => feed(1),
            Operator::Diagonal(d) => {
                feed(2);
                d.iter().for_each(|x| feed(x.to_bits()));
            }
            Operator::Dense { factor, .. } => {
                feed(3);
                factor.data().iter().for_each(|x| feed(x.to_bits()));
            }
        }
        h
    }
}

fn symmetrize(a: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| 0.5 * (a.get(i, j) + a.get(j, i)))
}

/// Builds `S` from calibration statistics.
///
/// * identity: `I`
/// * diagonal: `diag(max(rms_i, eps))`
/// * dense: `(E[x xᵀ] + eps·I)^{1/2}` via the symmetric eigendecomposition
///
/// `eps` must be non-negative; with `eps = 0` the result must still be invertible.
pub fn build_scaling(stats: &CalibrationStats, kind: ScalingKind, eps: f64) -> Result<ScalingOperator> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(SrrError::domain(format!("eps must be a finite non-negative number, got {eps}")));
    }
    match kind {
        ScalingKind::Identity => Ok(ScalingOperator::identity(stats.dim)),
        ScalingKind::Diagonal => {
            let diag: Vec<f64> = stats.diag_rms.iter().map(|&r| r.max(eps)).collect();
            if diag.iter().any(|&d| d <= 0.0) {
                return Err(SrrError::domain(
                    "diagonal scaling is singular: a feature has zero RMS and eps = 0",
                ));
            }
            ScalingOperator::diagonal(diag)
        }
        ScalingKind::Dense => {
            let mut c = stats.covariance();
            for i in 0..stats.dim {
                c.set(i, i, c.get(i, i) + eps);
            }
            let eig = symmetric_eigen(&c)?;
            let min = *eig.values.last().expect("dim > 0");
            let tol = f64::EPSILON * eig.values[0].abs() * stats.dim as f64;
            if min <= tol {
                return Err(SrrError::domain(format!(
                    "ridged second moment is not positive definite (min eigenvalue {min:e}); increase eps"
                )));
            }
            let roots: Vec<f64> = eig.values.iter().map(|l| l.sqrt()).collect();
            let inv_roots: Vec<f64> = roots.iter().map(|r| 1.0 / r).collect();
            let factor = symmetrize(&eig.vectors.scale_cols(&roots).matmul_t(&eig.vectors));
            let inverse = symmetrize(&eig.vectors.scale_cols(&inv_roots).matmul_t(&eig.vectors));
            Ok(ScalingOperator { dim: stats.dim, op: Operator::Dense { factor, inverse } })
        }
    }
}

/// `S·A` or `S⁻¹·A`; see [`ScalingOperator::apply`].
pub fn apply_scaling(s: &ScalingOperator, a: &Matrix, direction: Direction) -> Result<Matrix> {
    s.apply(a, direction)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_from_cov(diag: &[f64]) -> CalibrationStats {
        CalibrationStats::from_second_moment(Matrix::from_diag(diag), 1).unwrap()
    }

    #[test]
    fn single_basis_sample() {
        let mut acc = CalibrationAccumulator::new(3).unwrap();
        acc.push(&[1.0, 0.0, 0.0]).unwrap();
        let s = acc.finalize().unwrap();
        assert_eq!(s.second_moment, Matrix::from_diag(&[1.0, 0.0, 0.0]));
        assert_eq!(s.diag_rms, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn sign_invariance() {
        let x = [0.3, -1.2, 2.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let mut a = CalibrationAccumulator::new(3).unwrap();
        a.push(&x).unwrap();
        a.push(&neg).unwrap();
        let mut b = CalibrationAccumulator::new(3).unwrap();
        b.push(&x).unwrap();
        b.push(&x).unwrap();
        assert_eq!(a.finalize().unwrap().second_moment, b.finalize().unwrap().second_moment);
    }

    #[test]
    fn accumulate_errors() {
        let mut acc = CalibrationAccumulator::new(2).unwrap();
        assert!(matches!(acc.push(&[1.0]), Err(SrrError::Input(_))));
        assert!(matches!(acc.push(&[1.0, f64::NAN]), Err(SrrError::Input(_))));
        assert!(matches!(acc.finalize(), Err(SrrError::Domain(_))));
    }

    #[test]
    fn diagonal_floor() {
        let stats = stats_from_cov(&[4.0, 0.0]);
        let s = build_scaling(&stats, ScalingKind::Diagonal, 1e-3).unwrap();
        assert_eq!(s.diag().unwrap(), &[2.0, 1e-3]);
        assert!(build_scaling(&stats, ScalingKind::Diagonal, 0.0).is_err());
        assert!(build_scaling(&stats, ScalingKind::Diagonal, -1.0).is_err());
    }

    #[test]
    fn dense_square_root_of_diagonal() {
        let stats = stats_from_cov(&[4.0, 9.0]);
        let s = build_scaling(&stats, ScalingKind::Dense, 0.0).unwrap();
        let m = s.to_matrix();
        assert!(m.sub(&Matrix::from_diag(&[2.0, 3.0])).max_abs() < 1e-12);
        let ones = Matrix::from_vec(2, 2, vec![1.0; 4]).unwrap();
        let out = s.forward(&ones).unwrap();
        let want = Matrix::from_vec(2, 2, vec![2.0, 2.0, 3.0, 3.0]).unwrap();
        assert!(out.sub(&want).max_abs() < 1e-12);
    }

    #[test]
    fn dense_rejects_singular_without_ridge() {
        let stats = stats_from_cov(&[1.0, 0.0]);
        assert!(matches!(build_scaling(&stats, ScalingKind::Dense, 0.0), Err(SrrError::Domain(_))));
        assert!(build_scaling(&stats, ScalingKind::Dense, 1e-6).is_ok());
    }

    #[test]
    fn identity_and_diagonal_apply() {
        let a = Matrix::identity(2);
        let id = ScalingOperator::identity(2);
        assert_eq!(id.forward(&a).unwrap(), a);
        let d = ScalingOperator::diagonal(vec![2.0, 3.0]).unwrap();
        assert_eq!(d.forward(&a).unwrap(), Matrix::from_diag(&[2.0, 3.0]));
        assert!(matches!(d.forward(&Matrix::identity(3)), Err(SrrError::Domain(_))));
    }

    #[test]
    fn fingerprints_differ() {
        let a = ScalingOperator::identity(4).fingerprint();
        let b = ScalingOperator::diagonal(vec![1.0; 4]).unwrap().fingerprint();
        let c = ScalingOperator::identity(5).fingerprint();
        assert!(a != b && a != c);
    }
}
