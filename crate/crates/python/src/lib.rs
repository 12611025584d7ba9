use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use logo::conditional::{self, BlockSplit};
use logo::harness::{fit_model, ModelKind};
use logo::ifn::{self, Separator};
use logo::risk::{self, LinearConstraint};
use logo::{baselines, datagen, precision, CovariancePair, ObservationMatrix, SymMatrix};

fn err(e: logo::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn observations(rows: Vec<Vec<f64>>) -> PyResult<ObservationMatrix> {
    ObservationMatrix::from_rows(&rows).map_err(err)
}

fn covariance(rows: Vec<Vec<f64>>) -> PyResult<CovariancePair> {
    logo::estimate(&observations(rows)?).map_err(err)
}

fn sym(rows: &[Vec<f64>]) -> PyResult<SymMatrix> {
    SymMatrix::from_rows(rows).map_err(err)
}

/// Decomposable graph given by its cliques and separators.
#[pyclass(name = "CliqueTree", module = "logo_py", from_py_object)]
#[derive(Clone)]
struct PyCliqueTree(ifn::CliqueTree);

#[pymethods]
impl PyCliqueTree {
    #[new]
    fn new(p: usize, cliques: Vec<Vec<usize>>, separators: Vec<(Vec<usize>, usize)>) -> PyResult<Self> {
        let seps = separators.into_iter().map(|(vertices, k)| Separator { vertices, k }).collect();
        ifn::CliqueTree::new(p, cliques, seps).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        ifn::CliqueTree::from_json(s).map(Self).map_err(err)
    }

    #[getter]
    fn p(&self) -> usize {
        self.0.p()
    }

    #[getter]
    fn cliques(&self) -> Vec<Vec<usize>> {
        self.0.cliques().to_vec()
    }

    #[getter]
    fn separators(&self) -> Vec<(Vec<usize>, usize)> {
        self.0.separators().iter().map(|s| (s.vertices.clone(), s.k)).collect()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges().to_vec()
    }

    fn is_chordal(&self) -> bool {
        ifn::validate_chordal(&self.0).is_chordal
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn to_edge_list(&self) -> String {
        self.0.to_edge_list()
    }

    fn __len__(&self) -> usize {
        self.0.n_edges()
    }

    fn __repr__(&self) -> String {
        format!(
            "CliqueTree(p={}, cliques={}, separators={}, edges={})",
            self.0.p(),
            self.0.cliques().len(),
            self.0.separators().len(),
            self.0.n_edges()
        )
    }
}

/// Sparse precision matrix with its mean vector.
#[pyclass(name = "Precision", module = "logo_py", from_py_object)]
#[derive(Clone)]
struct PyPrecision(precision::SparsePrecision);

#[pymethods]
impl PyPrecision {
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        precision::SparsePrecision::from_json(s).map(Self).map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn p(&self) -> usize {
        self.0.p()
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.0.mean().to_vec()
    }

    #[getter]
    fn entries(&self) -> Vec<(usize, usize, f64)> {
        self.0.entries().to_vec()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.0.nnz_offdiag()
    }

    fn dense(&self) -> Vec<Vec<f64>> {
        self.0.to_dense().to_rows()
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    fn __repr__(&self) -> String {
        format!("Precision(p={}, nnz={})", self.0.p(), self.0.nnz_offdiag())
    }
}

/// Covariance, correlation, variances and means of a `q × p` panel.
#[pyfunction]
fn estimate<'py>(py: Python<'py>, rows: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let c = covariance(rows)?;
    let d = PyDict::new(py);
    d.set_item("cov", c.cov.to_rows())?;
    d.set_item("corr", c.corr.to_rows())?;
    d.set_item("variances", c.variances)?;
    d.set_item("means", c.means)?;
    Ok(d)
}

#[pyfunction]
fn build_tmfg(corr: Vec<Vec<f64>>) -> PyResult<PyCliqueTree> {
    ifn::build_tmfg(&sym(&corr)?).map(PyCliqueTree).map_err(err)
}

#[pyfunction]
fn build_mst(corr: Vec<Vec<f64>>) -> PyResult<PyCliqueTree> {
    ifn::build_mst(&sym(&corr)?).map(PyCliqueTree).map_err(err)
}

/// Local-inversion precision of a panel on a given graph.
#[pyfunction]
fn assemble(tree: &PyCliqueTree, rows: Vec<Vec<f64>>) -> PyResult<PyPrecision> {
    precision::assemble_precision(&tree.0, &covariance(rows)?).map(PyPrecision).map_err(err)
}

#[pyfunction]
fn logdet_decomposed(tree: &PyCliqueTree, rows: Vec<Vec<f64>>) -> PyResult<f64> {
    precision::logdet_decomposed(&tree.0, &covariance(rows)?).map_err(err)
}

/// Fits `method` (tmfg, mst, dense, null or ridge) to a panel.
#[pyfunction]
#[pyo3(signature = (rows, method = "tmfg", seed = 0))]
fn fit(rows: Vec<Vec<f64>>, method: &str, seed: u64) -> PyResult<PyPrecision> {
    let kind: ModelKind = method.parse().map_err(err)?;
    let obs = observations(rows)?;
    let cov = logo::estimate(&obs).map_err(err)?;
    let ridge = baselines::RidgeConfig {
        seed,
        ..Default::default()
    };
    fit_model(&kind, &obs, &cov, &ridge).map(PyPrecision).map_err(err)
}

/// Per-observation and total log-likelihood of a test panel.
#[pyfunction]
fn log_likelihood<'py>(py: Python<'py>, model: &PyPrecision, rows: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let q = rows.len();
    let r = precision::log_likelihood(&model.0, &covariance(rows)?, q).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("per_obs_loglik", r.per_obs_loglik)?;
    d.set_item("total_loglik", r.total_loglik)?;
    d.set_item("logdet", r.logdet)?;
    d.set_item("trace_term", r.trace_term)?;
    d.set_item("n_params", r.n_params)?;
    Ok(d)
}

/// Regression coefficients `β` (one row per future variable).
#[pyfunction]
fn regression(model: &PyPrecision, past: Vec<usize>, future: Vec<usize>) -> PyResult<Vec<Vec<f64>>> {
    let split = BlockSplit::new(past, future, model.0.p()).map_err(err)?;
    let reg = conditional::fit_regression(&model.0, &split).map_err(err)?;
    Ok(reg.beta.rows().into_iter().map(|r| r.to_vec()).collect())
}

#[pyfunction]
fn predict(model: &PyPrecision, past: Vec<usize>, future: Vec<usize>, x: Vec<f64>) -> PyResult<Vec<f64>> {
    let split = BlockSplit::new(past, future, model.0.p()).map_err(err)?;
    let reg = conditional::fit_regression(&model.0, &split).map_err(err)?;
    conditional::predict(&reg, &x, model.0.mean()).map_err(err)
}

#[pyfunction]
fn conditional_covariance(model: &PyPrecision, past: Vec<usize>, future: Vec<usize>) -> PyResult<Vec<Vec<f64>>> {
    let split = BlockSplit::new(past, future, model.0.p()).map_err(err)?;
    conditional::conditional_covariance(&model.0, &split).map(|m| m.to_rows()).map_err(err)
}

fn scenario(model: &PyPrecision, c: &LinearConstraint) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let r = risk::condition(&model.0, c).map_err(err)?;
    Ok((r.cond_mean, r.cond_cov))
}

/// Conditional mean and covariance given `A x = z`.
#[pyfunction]
fn condition(model: &PyPrecision, a: Vec<Vec<f64>>, z: Vec<f64>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let c = LinearConstraint::from_rows(&a, z).map_err(err)?;
    scenario(model, &c)
}

/// Conditional mean and covariance given a portfolio loss `w·x = loss`.
#[pyfunction]
fn allocate(model: &PyPrecision, weights: Vec<f64>, loss: f64) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let c = LinearConstraint::portfolio(&weights, loss).map_err(err)?;
    scenario(model, &c)
}

#[pyfunction]
#[pyo3(signature = (model, n, seed = 0))]
fn sample(model: &PyPrecision, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let data = datagen::sample_gmrf(&model.0, n, seed).map_err(err)?;
    Ok(data.rows().into_iter().map(|r| r.to_vec()).collect())
}

#[pymodule]
fn logo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCliqueTree>()?;
    m.add_class::<PyPrecision>()?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(build_tmfg, m)?)?;
    m.add_function(wrap_pyfunction!(build_mst, m)?)?;
    m.add_function(wrap_pyfunction!(assemble, m)?)?;
    m.add_function(wrap_pyfunction!(logdet_decomposed, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(log_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(regression, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(condition, m)?)?;
    m.add_function(wrap_pyfunction!(allocate, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    Ok(())
}
