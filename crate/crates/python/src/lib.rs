//! Python bindings. Matrices cross the boundary as lists of points (one inner
//! list per point), which is the transpose of the library's D×N layout.

use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use odcsr_core as core;
use odcsr_core::{DataMatrix, Fusion, GammaMode, Label, LabelVector, Polarity};

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Builds the D×N matrix from N points of equal length D.
fn points_to_matrix(points: &[Vec<f64>]) -> core::Result<DataMatrix> {
    let n = points.len();
    let d = points.first().map_or(0, Vec::len);
    if let Some((j, p)) = points.iter().enumerate().find(|(_, p)| p.len() != d) {
        return Err(core::Error::Dimension(format!(
            "point {j} has {} coordinates, expected {d}",
            p.len()
        )));
    }
    DataMatrix::new(Array2::from_shape_fn((d, n), |(i, j)| points[j][i]))
}

fn matrix_to_points(x: &DataMatrix) -> Vec<Vec<f64>> {
    (0..x.num_points()).map(|j| x.column(j).to_vec()).collect()
}

fn to_labels(labels: &[i64]) -> PyResult<LabelVector> {
    labels
        .iter()
        .map(|&l| match l {
            0 => Ok(Label::Inlier),
            1 => Ok(Label::Outlier),
            v => Err(PyValueError::new_err(format!("labels must be 0 or 1, got {v}"))),
        })
        .collect()
}

fn parse_polarity(s: &str) -> PyResult<Polarity> {
    s.parse().map_err(to_py)
}

fn gamma_mode(alpha: f64, gamma: Option<f64>) -> GammaMode {
    match gamma {
        Some(g) => GammaMode::Fixed(g),
        None => GammaMode::Relative(alpha),
    }
}

/// Elastic-net settings. Pass `gamma` for a fixed data weight, otherwise
/// each point gets γ = α·λ/μ.
#[pyclass(name = "ElasticNetConfig", from_py_object)]
#[derive(Clone)]
pub struct PyElasticNetConfig {
    inner: core::ElasticNetConfig,
}

#[pymethods]
impl PyElasticNetConfig {
    #[new]
    #[pyo3(signature = (lambda_ = 0.9, alpha = 5.0, gamma = None, max_iters = 2000, tol = 1e-6))]
    fn new(lambda_: f64, alpha: f64, gamma: Option<f64>, max_iters: usize, tol: f64) -> PyResult<Self> {
        let inner = core::ElasticNetConfig {
            lambda: lambda_,
            gamma_mode: gamma_mode(alpha, gamma),
            max_iters,
            tol,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn max_iters(&self) -> usize {
        self.inner.max_iters
    }

    #[getter]
    fn tol(&self) -> f64 {
        self.inner.tol
    }

    /// `("fixed", γ)` or `("relative", α)`.
    #[getter]
    fn gamma_mode(&self) -> (&'static str, f64) {
        match self.inner.gamma_mode {
            GammaMode::Fixed(g) => ("fixed", g),
            GammaMode::Relative(a) => ("relative", a),
        }
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "CascadeConfig", from_py_object)]
#[derive(Clone)]
pub struct PyCascadeConfig {
    inner: core::CascadeConfig,
}

#[pymethods]
impl PyCascadeConfig {
    #[new]
    #[pyo3(signature = (
        stages = 3,
        walk_steps = 1000,
        elastic_net = None,
        fusion_weights = None,
        renormalize_residuals = true,
    ))]
    fn new(
        stages: usize,
        walk_steps: usize,
        elastic_net: Option<PyElasticNetConfig>,
        fusion_weights: Option<Vec<f64>>,
        renormalize_residuals: bool,
    ) -> PyResult<Self> {
        let inner = core::CascadeConfig {
            num_stages: stages,
            walk_steps,
            en_config: elastic_net.map(|c| c.inner).unwrap_or_default(),
            fusion: fusion_weights.map_or(Fusion::UniformMean, Fusion::Weighted),
            renormalize_residuals,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Single-stage detector settings.
    #[staticmethod]
    fn rgraph() -> Self {
        Self {
            inner: core::rgraph_preset(),
        }
    }

    #[staticmethod]
    fn from_manifest(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: core::CascadeConfig::from_manifest(text).map_err(to_py)?,
        })
    }

    fn to_manifest(&self) -> String {
        self.inner.to_manifest()
    }

    #[getter]
    fn stages(&self) -> usize {
        self.inner.num_stages
    }

    #[getter]
    fn walk_steps(&self) -> usize {
        self.inner.walk_steps
    }

    #[getter]
    fn elastic_net(&self) -> PyElasticNetConfig {
        PyElasticNetConfig {
            inner: self.inner.en_config,
        }
    }

    #[getter]
    fn fusion_weights(&self) -> Option<Vec<f64>> {
        match &self.inner.fusion {
            Fusion::UniformMean => None,
            Fusion::Weighted(w) => Some(w.clone()),
        }
    }

    #[getter]
    fn renormalize_residuals(&self) -> bool {
        self.inner.renormalize_residuals
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Coefficients of every point in terms of the others.
#[pyclass(name = "SelfRepresentation", frozen)]
pub struct PySelfRepresentation {
    inner: core::SelfRepresentation,
}

#[pymethods]
impl PySelfRepresentation {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    /// `(row, col, value)` entries sorted by column, then row.
    fn triplets(&self) -> Vec<(usize, usize, f64)> {
        self.inner.triplets()
    }

    /// Dense N×N coefficients; column `j` expresses point `j`.
    fn to_dense(&self) -> Vec<Vec<f64>> {
        self.inner.to_dense().outer_iter().map(|r| r.to_vec()).collect()
    }

    /// Points whose problem stopped short of the tolerance.
    fn non_converged(&self) -> Vec<usize> {
        self.inner.non_converged()
    }

    #[getter]
    fn gamma(&self) -> Vec<f64> {
        self.inner.per_column_gamma.clone()
    }

    #[getter]
    fn objective(&self) -> Vec<f64> {
        self.inner.per_column_objective.clone()
    }
}

#[pyclass(name = "CascadeResult", frozen)]
pub struct PyCascadeResult {
    inner: core::CascadeResult,
}

#[pymethods]
impl PyCascadeResult {
    /// Fused probabilities; low means outlier.
    #[getter]
    fn scores(&self) -> Vec<f64> {
        self.inner.fused_scores.as_slice().to_vec()
    }

    #[getter]
    fn stage_scores(&self) -> Vec<Vec<f64>> {
        self.inner.stages.iter().map(|s| s.scores.as_slice().to_vec()).collect()
    }

    #[getter]
    fn residual_norms(&self) -> Vec<f64> {
        self.inner.stages.iter().map(|s| s.residual_norm).collect()
    }

    #[getter]
    fn skipped(&self) -> Vec<bool> {
        self.inner.stages.iter().map(|s| s.skipped).collect()
    }

    fn coefficients(&self, stage: usize) -> PyResult<PySelfRepresentation> {
        let s = self
            .inner
            .stages
            .get(stage)
            .ok_or_else(|| PyValueError::new_err(format!("no stage {stage}")))?;
        Ok(PySelfRepresentation {
            inner: s.coeffs.clone(),
        })
    }

    /// `(stage, point)` pairs that missed the solver tolerance.
    fn non_converged(&self) -> Vec<(usize, usize)> {
        self.inner.non_converged()
    }

    #[getter]
    fn config(&self) -> PyCascadeConfig {
        PyCascadeConfig {
            inner: self.inner.config.clone(),
        }
    }

    fn manifest(&self) -> String {
        core::io::manifest_text(&self.inner, &core::io::RunInfo::default())
    }

    /// Points scoring at or below `epsilon`.
    fn outliers(&self, epsilon: f64) -> Vec<usize> {
        self.inner
            .fused_scores
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= epsilon)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Returns `(points, labels)`: inliers grouped by subspace, outliers last.
#[pyfunction]
#[pyo3(signature = (dim, subspaces, subdim, inliers, outliers, noise = 0.0, seed = 0))]
fn generate_synthetic(
    dim: usize,
    subspaces: usize,
    subdim: usize,
    inliers: usize,
    outliers: usize,
    noise: f64,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<i64>)> {
    let s = core::generate_synthetic(&core::SyntheticSpec {
        ambient_dim: dim,
        num_subspaces: subspaces,
        subspace_dim: subdim,
        inliers_per_subspace: inliers,
        num_outliers: outliers,
        noise_sigma: noise,
        rng_seed: seed,
    })
    .map_err(to_py)?;
    let labels = s.labels.0.iter().map(|l| i64::from(*l == Label::Outlier)).collect();
    Ok((matrix_to_points(&s.data), labels))
}

/// Scales every nonzero point to unit length.
#[pyfunction]
fn normalize(points: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let x = points_to_matrix(&points).map_err(to_py)?;
    Ok(matrix_to_points(&core::normalize_columns(&x).data))
}

#[pyfunction]
#[pyo3(signature = (points, config = None))]
fn solve_all(
    py: Python<'_>,
    points: Vec<Vec<f64>>,
    config: Option<PyElasticNetConfig>,
) -> PyResult<PySelfRepresentation> {
    let x = points_to_matrix(&points).map_err(to_py)?;
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let inner = py.detach(|| core::solve_all(&x, &cfg)).map_err(to_py)?;
    Ok(PySelfRepresentation { inner })
}

#[pyfunction]
#[pyo3(signature = (points, config = None))]
fn run_cascade(py: Python<'_>, points: Vec<Vec<f64>>, config: Option<PyCascadeConfig>) -> PyResult<PyCascadeResult> {
    let x = points_to_matrix(&points).map_err(to_py)?;
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let inner = py.detach(|| core::run_cascade(&x, &cfg)).map_err(to_py)?;
    Ok(PyCascadeResult { inner })
}

/// Average of the first `steps` distributions of the walk whose row `i`
/// moves from state `i` in proportion to `weights[i]`.
#[pyfunction]
#[pyo3(signature = (weights, steps, start = None))]
fn averaged_walk(weights: Vec<Vec<f64>>, steps: usize, start: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    let p = core::TransitionMatrix::from_weights(&weights).map_err(to_py)?;
    let pi0 = match start {
        Some(v) => core::ScoreVector::new(v).map_err(to_py)?,
        None => core::ScoreVector::uniform(p.n()),
    };
    Ok(core::averaged_walk(&p, &pi0, steps).map_err(to_py)?.into_vec())
}

/// ℓ1 norm of every point's coefficients; high means outlier.
#[pyfunction]
#[pyo3(signature = (points, config = None))]
fn l1_thresholding_scores(
    py: Python<'_>,
    points: Vec<Vec<f64>>,
    config: Option<PyElasticNetConfig>,
) -> PyResult<Vec<f64>> {
    let x = points_to_matrix(&points).map_err(to_py)?;
    let cfg = config.map_or_else(core::l1_preset, |c| c.inner);
    Ok(py
        .detach(|| core::l1_thresholding_scores(&x, &cfg))
        .map_err(to_py)?
        .scores)
}

#[pyfunction]
#[pyo3(signature = (scores, labels, polarity = "low_is_outlier"))]
fn auc(scores: Vec<f64>, labels: Vec<i64>, polarity: &str) -> PyResult<f64> {
    core::auc(&scores, &to_labels(&labels)?, parse_polarity(polarity)?).map_err(to_py)
}

/// F1 with as many predicted outliers as there are true ones. Returns a dict
/// with `auc`, `f1`, `threshold`, `tp`, `fp`, `fn`, `tn`.
#[pyfunction]
#[pyo3(signature = (scores, labels, polarity = "low_is_outlier"))]
fn f1<'py>(
    py: Python<'py>,
    scores: Vec<f64>,
    labels: Vec<i64>,
    polarity: &str,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let r = core::f1_at_count(&scores, &to_labels(&labels)?, parse_polarity(polarity)?).map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("auc", r.auc)?;
    d.set_item("f1", r.f1)?;
    d.set_item("threshold", r.threshold_used)?;
    d.set_item("tp", r.counts.tp)?;
    d.set_item("fp", r.counts.fp)?;
    d.set_item("fn", r.counts.fn_)?;
    d.set_item("tn", r.counts.tn)?;
    d.set_item("polarity", r.polarity.to_string())?;
    Ok(d)
}

#[pymodule]
fn odcsr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyElasticNetConfig>()?;
    m.add_class::<PyCascadeConfig>()?;
    m.add_class::<PySelfRepresentation>()?;
    m.add_class::<PyCascadeResult>()?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(solve_all, m)?)?;
    m.add_function(wrap_pyfunction!(run_cascade, m)?)?;
    m.add_function(wrap_pyfunction!(averaged_walk, m)?)?;
    m.add_function(wrap_pyfunction!(l1_thresholding_scores, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(f1, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_are_columns() {
        let x = points_to_matrix(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(x.dim(), 3);
        assert_eq!(x.num_points(), 2);
        assert_eq!(x.column(1).to_vec(), vec![4.0, 5.0, 6.0]);
        assert_eq!(matrix_to_points(&x), vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
    }

    #[test]
    fn ragged_points_rejected() {
        assert!(points_to_matrix(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }
}
