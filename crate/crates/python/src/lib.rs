//! Python module `wlerg`.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use wlerg_core::basis::{forward_haar_2d, inverse_haar_2d, CoefficientGrid2D, WaveletIndex};
use wlerg_core::detection::{default_scan_scales, hierarchical_sbm_kernel, wavelet_scan, SCAN_C1};
use wlerg_core::estimator::{fit_pipeline, FitReport, SeriationMethod};
use wlerg_core::evaluation::{holdout_split, score_predictions, wavelet_predictions};
use wlerg_core::expfamily::{limiting_logmgf, TiltVector};
use wlerg_core::kernel::{from_erdos_renyi, from_two_block, BandCoefficients};
use wlerg_core::sampler::{Adjacency, LatentGraph};

fn py_err(e: wlerg_core::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn adjacency(n: usize, edges: Vec<(usize, usize)>) -> wlerg_core::Result<Adjacency> {
    Adjacency::from_edges(n, edges)
}

fn coefficient_triples(coefs: Vec<(i64, u64, i64, u64, f64)>) -> wlerg_core::Result<Vec<(WaveletIndex, WaveletIndex, f64)>> {
    coefs
        .into_iter()
        .map(|(j1, l1, j2, l2, v)| Ok((WaveletIndex::from_pair(j1, l1)?, WaveletIndex::from_pair(j2, l2)?, v)))
        .collect()
}

/// Logistic graphon with Haar-expanded logit.
#[pyclass(module = "wlerg", frozen)]
pub struct Graphon {
    inner: wlerg_core::kernel::Graphon,
}

impl Graphon {
    fn wrap(coeffs: BandCoefficients) -> Self {
        Graphon { inner: wlerg_core::kernel::Graphon::new(coeffs) }
    }
}

#[pymethods]
impl Graphon {
    #[staticmethod]
    fn erdos_renyi(p: f64) -> PyResult<Self> {
        from_erdos_renyi(p).map(Self::wrap).map_err(py_err)
    }

    #[staticmethod]
    fn two_block(p_in: f64, p_out: f64) -> PyResult<Self> {
        from_two_block(p_in, p_out).map(Self::wrap).map_err(py_err)
    }

    /// `q[s]`: probability for pairs first separated at scale `s`.
    #[staticmethod]
    fn hierarchical(q: Vec<f64>) -> PyResult<Self> {
        hierarchical_sbm_kernel(&q).map(Self::wrap).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        BandCoefficients::from_json(text).map(Self::wrap).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.coeffs().to_json().map_err(py_err)
    }

    #[getter]
    fn c(&self) -> f64 {
        self.inner.coeffs().c()
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        self.inner.eval(x, y)
    }

    /// Row-major `k x k` cell-centre values.
    fn surface(&self, k: usize) -> Vec<f64> {
        self.inner.surface(k)
    }

    /// Positions and edge list of one draw.
    fn sample(&self, n: usize, seed: u64) -> PyResult<(Vec<f64>, Vec<(usize, usize)>)> {
        let lg = wlerg_core::sampler::sample_graph(&self.inner, n, seed).map_err(py_err)?;
        Ok((lg.positions, lg.adj.edges()))
    }

    /// Limiting log-MGF and its gradient at the tilt `lambda0 * edges + sum v * (r, s)`.
    #[pyo3(signature = (lambda0, coefs=Vec::new(), gridsize=256))]
    fn log_mgf(&self, lambda0: f64, coefs: Vec<(i64, u64, i64, u64, f64)>, gridsize: usize) -> PyResult<(f64, Vec<f64>)> {
        let entries = coefficient_triples(coefs).map_err(py_err)?;
        let tilt = TiltVector::from_canonical(lambda0, &entries).map_err(py_err)?;
        let r = limiting_logmgf(&self.inner, &tilt, gridsize).map_err(py_err)?;
        Ok((r.value, r.gradient))
    }

    fn __repr__(&self) -> String {
        format!("Graphon(c={}, terms={})", self.inner.coeffs().c(), self.inner.coeffs().len())
    }
}

/// Fitted wavelet surface.
#[pyclass(module = "wlerg", frozen)]
pub struct Fit {
    inner: FitReport,
}

#[pymethods]
impl Fit {
    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn ordering(&self) -> Vec<usize> {
        self.inner.ordering.clone()
    }

    #[getter]
    fn surface(&self) -> Vec<f64> {
        self.inner.surface.clone()
    }

    #[getter]
    fn survivors(&self) -> usize {
        self.inner.survivors.len()
    }

    fn predict(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.inner.n || j >= self.inner.n {
            return Err(PyValueError::new_err(format!("vertex out of range for n = {}", self.inner.n)));
        }
        Ok(self.inner.predict(i, j))
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    fn surface_csv(&self) -> String {
        self.inner.surface_csv()
    }
}

fn parse_method(method: &str) -> PyResult<SeriationMethod> {
    method.parse().map_err(py_err)
}

/// Eight-step wavelet fit of an undirected graph on `n` vertices.
#[pyfunction]
#[pyo3(signature = (n, edges, k=64, kappa=1.0, method="degree"))]
fn fit(n: usize, edges: Vec<(usize, usize)>, k: usize, kappa: f64, method: &str) -> PyResult<Fit> {
    let adj = adjacency(n, edges).map_err(py_err)?;
    let inner = fit_pipeline(&adj, parse_method(method)?, k, kappa, None).map_err(py_err)?;
    Ok(Fit { inner })
}

/// Held-out metrics of the wavelet fit on one dyad split.
#[pyfunction]
#[pyo3(signature = (n, edges, k=64, kappa=1.0, fraction=0.1, seed=0, method="degree"))]
fn evaluate(
    n: usize,
    edges: Vec<(usize, usize)>,
    k: usize,
    kappa: f64,
    fraction: f64,
    seed: u64,
    method: &str,
) -> PyResult<BTreeMap<String, f64>> {
    let adj = adjacency(n, edges).map_err(py_err)?;
    let split = holdout_split(n, fraction, seed).map_err(py_err)?;
    let preds = wavelet_predictions(&adj, parse_method(method)?, k, kappa, &split).map_err(py_err)?;
    let r = score_predictions(&preds, &split.labels(&adj), seed).map_err(py_err)?;
    Ok(BTreeMap::from([
        ("auc".to_string(), r.auc),
        ("logloss".to_string(), r.logloss),
        ("brier".to_string(), r.brier),
        ("ece".to_string(), r.ece),
        ("ap".to_string(), r.ap),
    ]))
}

/// Standardised block scan against a known null; returns `(z_max, threshold, [(j, l, z)])` for detected blocks.
#[pyfunction]
#[pyo3(signature = (positions, edges, null, c1=SCAN_C1))]
fn scan(
    positions: Vec<f64>,
    edges: Vec<(usize, usize)>,
    null: &Graphon,
    c1: f64,
) -> PyResult<(f64, f64, Vec<(u32, u32, f64)>)> {
    let n = positions.len();
    let adj = adjacency(n, edges).map_err(py_err)?;
    let lg = LatentGraph::new(positions, adj).map_err(py_err)?;
    let report = wavelet_scan(&lg, &null.inner, default_scan_scales(n), c1);
    let hits = report.detections().map(|b| (b.j, b.l, b.z)).collect();
    Ok((report.z_max, report.threshold, hits))
}

/// Orthonormal 2D Haar coefficients of a row-major `k x k` grid.
#[pyfunction]
fn haar_forward(grid: Vec<f64>, k: usize) -> PyResult<Vec<f64>> {
    forward_haar_2d(&grid, k).map(|c| c.values).map_err(py_err)
}

#[pyfunction]
fn haar_inverse(coeffs: Vec<f64>, k: usize) -> PyResult<Vec<f64>> {
    let grid = CoefficientGrid2D::from_values(k, coeffs).map_err(py_err)?;
    Ok(inverse_haar_2d(&grid))
}

#[pymodule]
fn wlerg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graphon>()?;
    m.add_class::<Fit>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(scan, m)?)?;
    m.add_function(wrap_pyfunction!(haar_forward, m)?)?;
    m.add_function(wrap_pyfunction!(haar_inverse, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
