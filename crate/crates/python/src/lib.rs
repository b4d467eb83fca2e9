//! Python bindings. Matrices cross the boundary as lists of row lists.

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

use srr_core::harness::{spectrum_from_name, SynthSpec};
use srr_core::linalg::{self, Matrix};
use srr_core::quant::{self, QuantizerConfig};
use srr_core::reconstruct::{self, SplitChoice, SrrDecomposition, Variant};
use srr_core::scaling::{self, ScalingKind};
use srr_core::SrrError;

fn err(e: SrrError) -> PyErr {
    match e {
        SrrError::Numeric(_) => PyArithmeticError::new_err(e.to_string()),
        SrrError::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(err)
}

type Rows = Vec<Vec<f64>>;

/// Block quantizer configuration (`"mxint"` or `"uniform"`).
#[pyclass(name = "Quantizer", frozen, from_py_object)]
#[derive(Clone)]
struct PyQuantizer(QuantizerConfig);

#[pymethods]
impl PyQuantizer {
    #[new]
    #[pyo3(signature = (family="mxint", bits=3, block_size=32))]
    fn new(family: &str, bits: u32, block_size: usize) -> PyResult<Self> {
        let family = family.parse().map_err(err)?;
        QuantizerConfig::new(family, bits, block_size).map(PyQuantizer).map_err(err)
    }

    #[getter]
    fn family(&self) -> String {
        self.0.family.to_string()
    }

    #[getter]
    fn bits(&self) -> u32 {
        self.0.bits
    }

    #[getter]
    fn block_size(&self) -> usize {
        self.0.block_size
    }

    fn quantize(&self, w: Rows) -> PyResult<Rows> {
        Ok(quant::quantize(&to_matrix(w)?, &self.0).map_err(err)?.values.to_rows())
    }

    fn effective_bitwidth(&self) -> PyResult<f64> {
        quant::effective_bitwidth(&self.0).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Quantizer(family='{}', bits={}, block_size={})", self.0.family, self.0.bits, self.0.block_size)
    }
}

/// Activation-aware scaling `S` (identity, diagonal or dense).
#[pyclass(name = "ScalingOperator", frozen, from_py_object)]
#[derive(Clone)]
struct PyScaling(scaling::ScalingOperator);

#[pymethods]
impl PyScaling {
    #[staticmethod]
    fn identity(dim: usize) -> Self {
        PyScaling(scaling::ScalingOperator::identity(dim))
    }

    #[staticmethod]
    fn diagonal(diag: Vec<f64>) -> PyResult<Self> {
        scaling::ScalingOperator::diagonal(diag).map(PyScaling).map_err(err)
    }

    #[staticmethod]
    fn dense(factor: Rows) -> PyResult<Self> {
        scaling::ScalingOperator::dense(to_matrix(factor)?).map(PyScaling).map_err(err)
    }

    /// Builds `S` from calibration activations (one sample per row).
    #[staticmethod]
    #[pyo3(signature = (activations, kind="diagonal", eps=None))]
    fn from_activations(activations: Rows, kind: &str, eps: Option<f64>) -> PyResult<Self> {
        let kind: ScalingKind = kind.parse().map_err(err)?;
        let stats = scaling::accumulate_calibration(&to_matrix(activations)?).map_err(err)?;
        let eps = eps.unwrap_or_else(|| stats.default_ridge());
        scaling::build_scaling(&stats, kind, eps).map(PyScaling).map_err(err)
    }

    #[getter]
    fn kind(&self) -> String {
        self.0.kind().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn forward(&self, a: Rows) -> PyResult<Rows> {
        Ok(self.0.forward(&to_matrix(a)?).map_err(err)?.to_rows())
    }

    fn inverse(&self, a: Rows) -> PyResult<Rows> {
        Ok(self.0.inverse(&to_matrix(a)?).map_err(err)?.to_rows())
    }

    fn to_matrix(&self) -> Rows {
        self.0.to_matrix().to_rows()
    }
}

/// Result of a decomposition, `W ≈ Q + L R`.
#[pyclass(name = "Decomposition", frozen)]
struct PyDecomposition(SrrDecomposition);

#[pymethods]
impl PyDecomposition {
    #[getter]
    fn q(&self) -> Rows {
        self.0.q.to_rows()
    }

    #[getter]
    fn l(&self) -> Rows {
        self.0.l.to_rows()
    }

    #[getter]
    fn r(&self) -> Rows {
        self.0.r.to_rows()
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k
    }

    #[getter]
    fn rank(&self) -> usize {
        self.0.rank
    }

    #[getter]
    fn variant(&self) -> &'static str {
        match self.0.variant {
            Variant::Split => "split",
            Variant::Global => "global",
        }
    }

    #[getter]
    fn scaled_error(&self) -> f64 {
        self.0.scaled_error
    }

    /// Selector objective over `k = 0..=rank`, when `k` was chosen automatically.
    #[getter]
    fn objective_curve(&self) -> Option<Vec<f64>> {
        self.0.selection.as_ref().map(|s| s.objective_curve.clone())
    }

    fn reconstruction(&self) -> Rows {
        self.0.reconstruction().to_rows()
    }

    fn __repr__(&self) -> String {
        format!(
            "Decomposition(rank={}, k={}, variant='{}', scaled_error={:.6e})",
            self.0.rank,
            self.0.k,
            self.variant(),
            self.0.scaled_error
        )
    }
}

/// Truncated SVD: returns `(U, s, V)` with `A ≈ U diag(s) Vᵀ`.
#[pyfunction]
#[pyo3(signature = (a, p, randomized=false, seed=0))]
fn svd(a: Rows, p: usize, randomized: bool, seed: u64) -> PyResult<(Rows, Vec<f64>, Rows)> {
    let a = to_matrix(a)?;
    let f = if randomized {
        linalg::svd_randomized(&a, p, linalg::default_oversample(p), linalg::DEFAULT_POWER_ITERS, seed)
    } else {
        linalg::svd_truncated(&a, p)
    }
    .map_err(err)?;
    Ok((f.u.to_rows(), f.s, f.v.to_rows()))
}

#[pyfunction]
fn singular_values(a: Rows) -> PyResult<Vec<f64>> {
    linalg::singular_values(&to_matrix(a)?).map_err(err)
}

/// Fraction of energy beyond the leading `p` singular values.
#[pyfunction]
fn rho(a: Rows, p: usize) -> PyResult<f64> {
    linalg::spectral_profile(&to_matrix(a)?).and_then(|prof| prof.rho(p)).map_err(err)
}

/// `[rho(a, 0), ..., rho(a, p)]`.
#[pyfunction]
fn rho_curve(a: Rows, p: usize) -> PyResult<Vec<f64>> {
    linalg::spectral_profile(&to_matrix(a)?).and_then(|prof| prof.rho_curve(p)).map_err(err)
}

fn split_choice(k: Option<usize>, probe_seed: u64) -> SplitChoice {
    match k {
        Some(k) => SplitChoice::Manual(k),
        None => SplitChoice::Auto { probe_seed },
    }
}

/// Preserve, quantize, reconstruct. `k=None` selects the split automatically.
#[pyfunction]
#[pyo3(signature = (w, s, quantizer, rank, k=None, probe_seed=0, variant="split"))]
#[allow(clippy::too_many_arguments)]
fn srr_decompose(
    py: Python<'_>,
    w: Rows,
    s: PyScaling,
    quantizer: PyQuantizer,
    rank: usize,
    k: Option<usize>,
    probe_seed: u64,
    variant: &str,
) -> PyResult<PyDecomposition> {
    let w = to_matrix(w)?;
    let choice = split_choice(k, probe_seed);
    let dec = py.detach(|| match variant {
        "split" => reconstruct::srr_decompose(&w, &s.0, &quantizer.0, rank, choice),
        "global" => reconstruct::srr_global_recon(&w, &s.0, &quantizer.0, rank, choice),
        other => Err(SrrError::Input(format!("unknown variant '{other}'"))),
    });
    dec.map(PyDecomposition).map_err(err)
}

/// Quantize then reconstruct the whole error with rank `rank` (the `k = 0` split).
#[pyfunction]
fn qer_decompose(py: Python<'_>, w: Rows, s: PyScaling, quantizer: PyQuantizer, rank: usize) -> PyResult<PyDecomposition> {
    let w = to_matrix(w)?;
    py.detach(|| reconstruct::qer_decompose(&w, &s.0, &quantizer.0, rank)).map(PyDecomposition).map_err(err)
}

/// Split selection alone: returns `(k_star, objective_curve)`.
#[pyfunction]
#[pyo3(signature = (w, s, rank, probe_seed=0))]
fn select_k(w: Rows, s: PyScaling, rank: usize, probe_seed: u64) -> PyResult<(usize, Vec<f64>)> {
    let w = to_matrix(w)?;
    let run = || -> srr_core::Result<_> {
        let wp = linalg::spectral_profile(&s.0.forward(&w)?)?;
        let pp = reconstruct::probe_profile(&s.0, w.rows(), w.cols(), probe_seed)?;
        reconstruct::select_k(&wp, &pp, rank)
    };
    let sel = run().map_err(err)?;
    Ok((sel.k_star, sel.objective_curve))
}

/// The random probe matrix for a seed.
#[pyfunction]
fn probe_matrix(rows: usize, cols: usize, seed: u64) -> Rows {
    reconstruct::probe_matrix(rows, cols, seed).to_rows()
}

/// Exhaustive search over splits: returns `(k_opt, loss, loss_curve)`.
#[pyfunction]
fn oracle_best_split(
    py: Python<'_>,
    w: Rows,
    s: PyScaling,
    quantizer: PyQuantizer,
    rank: usize,
) -> PyResult<(usize, f64, Vec<f64>)> {
    let w = to_matrix(w)?;
    let res = py.detach(|| reconstruct::oracle_best_split(&w, &s.0, &quantizer.0, rank)).map_err(err)?;
    Ok((res.k_opt, res.loss, res.loss_curve))
}

/// Synthetic weight with a prescribed singular spectrum.
#[pyfunction]
#[pyo3(signature = (rows, cols, spectrum="geometric", param=None, spikes=None, noise_floor=0.0, seed=0))]
fn synth_weight(
    rows: usize,
    cols: usize,
    spectrum: &str,
    param: Option<f64>,
    spikes: Option<usize>,
    noise_floor: f64,
    seed: u64,
) -> PyResult<Rows> {
    let spectrum = spectrum_from_name(spectrum, param, spikes).map_err(err)?;
    let spec = SynthSpec { rows, cols, spectrum, noise_floor, seed };
    Ok(srr_core::harness::synth_weight(&spec).map_err(err)?.to_rows())
}

#[pymodule]
fn srr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuantizer>()?;
    m.add_class::<PyScaling>()?;
    m.add_class::<PyDecomposition>()?;
    m.add_function(wrap_pyfunction!(svd, m)?)?;
    m.add_function(wrap_pyfunction!(singular_values, m)?)?;
    m.add_function(wrap_pyfunction!(rho, m)?)?;
    m.add_function(wrap_pyfunction!(rho_curve, m)?)?;
    m.add_function(wrap_pyfunction!(srr_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(qer_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(select_k, m)?)?;
    m.add_function(wrap_pyfunction!(probe_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_best_split, m)?)?;
    m.add_function(wrap_pyfunction!(synth_weight, m)?)?;
    Ok(())
}
