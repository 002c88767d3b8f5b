//! Python bindings. Matrices cross the boundary as lists of rows; time series
//! are `T` rows by `N` columns, matching the CSV layout.

use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use svardag::benchmark::Method;
use svardag::metrics::MetricsReport;
use svardag::simulate::{simulate_svarm, SvarmSpec};

type Rows = Vec<Vec<f64>>;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: &Rows, cols: Option<usize>) -> PyResult<DMatrix<f64>> {
    let width = match (rows.first(), cols) {
        (Some(r), _) => r.len(),
        (None, Some(c)) => c,
        (None, None) => 0,
    };
    if let Some(c) = cols {
        if width != c {
            return Err(err(format!("expected {c} columns, got {width}")));
        }
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(err(format!("row {i} has {} entries, expected {width}", r.len())));
    }
    Ok(DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[pyclass(name = "SolverConfig", from_py_object)]
#[derive(Clone)]
struct PySolverConfig {
    inner: svardag::SolverConfig,
}

#[pymethods]
impl PySolverConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut cfg = svardag::SolverConfig::default();
        if let Some(kw) = kwargs {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                match key.as_str() {
                    "s" => cfg.s = v.extract()?,
                    "lambda_w" => cfg.lambda_w = v.extract()?,
                    "lambda_a" => cfg.lambda_a = v.extract()?,
                    "alpha0" => cfg.alpha0 = v.extract()?,
                    "c0" => cfg.c0 = v.extract()?,
                    "beta" => cfg.beta = v.extract()?,
                    "gamma" => cfg.gamma = v.extract()?,
                    "max_outer" => cfg.max_outer = v.extract()?,
                    "h_tol" => cfg.h_tol = v.extract()?,
                    "inner_tol" => cfg.inner_tol = v.extract()?,
                    "max_inner" => cfg.max_inner = v.extract()?,
                    "tau" => cfg.tau = v.extract()?,
                    "signed_a" => cfg.signed_a = v.extract()?,
                    "accelerate" => cfg.accelerate = v.extract()?,
                    "seed" => cfg.seed = v.extract()?,
                    _ => return Err(err(format!("unknown setting {key:?}"))),
                }
            }
        }
        cfg.validate().map_err(err)?;
        Ok(Self { inner: cfg })
    }

    #[getter]
    fn lambda_w(&self) -> f64 {
        self.inner.lambda_w
    }

    #[getter]
    fn lambda_a(&self) -> f64 {
        self.inner.lambda_a
    }

    #[getter]
    fn s(&self) -> f64 {
        self.inner.s
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }

    #[getter]
    fn max_outer(&self) -> usize {
        self.inner.max_outer
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(get_all)]
struct GroundTruth {
    /// `T x N`.
    x: Rows,
    w_true: Rows,
    /// Stacked lags, `N*P x N`.
    a_true: Rows,
    companion_radius: f64,
}

#[pyclass(get_all)]
struct LearnResult {
    w_hat: Rows,
    a_hat: Rows,
    w_raw: Rows,
    h_final: f64,
    termination: String,
    outer_iterations: usize,
    removed_edges: Vec<(usize, usize)>,
    /// `(score, h, lagrangian, alpha, c, inner_iterations)` per outer iteration.
    trace: Vec<(f64, f64, f64, f64, f64, usize)>,
}

#[pyfunction]
#[pyo3(signature = (n, p, t, seed=0, avg_degree_w=4.0, avg_degree_a=1.0, noise_sigma=1.0))]
fn simulate(
    n: usize,
    p: usize,
    t: usize,
    seed: u64,
    avg_degree_w: f64,
    avg_degree_a: f64,
    noise_sigma: f64,
) -> PyResult<GroundTruth> {
    let spec = SvarmSpec { avg_degree_w, avg_degree_a, noise_sigma, ..SvarmSpec::new(n, p, t, seed) };
    let gt = simulate_svarm(&spec).map_err(err)?;
    Ok(GroundTruth {
        x: to_rows(&gt.x.matrix().transpose()),
        w_true: to_rows(gt.w_true.matrix()),
        a_true: to_rows(&gt.a_true.stacked()),
        companion_radius: gt.companion_radius,
    })
}

#[pyfunction]
#[pyo3(signature = (x, lags, config=None, method="cvx"))]
fn learn(x: Rows, lags: usize, config: Option<PySolverConfig>, method: &str) -> PyResult<LearnResult> {
    let method = Method::parse(method).ok_or_else(|| err(format!("unknown method {method:?}")))?;
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let series = svardag::TimeSeries::new(to_matrix(&x, None)?.transpose()).map_err(err)?;
    let design = svardag::build_lagged_design(&series, lags).map_err(err)?;
    let res = method.run(&design, &cfg).map_err(err)?;
    Ok(LearnResult {
        w_hat: to_rows(&res.w_hat),
        a_hat: to_rows(&res.a_hat.stacked()),
        w_raw: to_rows(&res.w_raw),
        h_final: res.h_final,
        termination: res.termination.as_str().to_string(),
        outer_iterations: res.outer_iterations(),
        removed_edges: res.removed_edges.clone(),
        trace: res
            .objective_trace
            .iter()
            .map(|r| (r.score, r.h, r.lagrangian, r.alpha, r.c, r.inner_iterations))
            .collect(),
    })
}

#[pyfunction]
#[pyo3(signature = (w, s=1.0))]
fn h_value(w: Rows, s: f64) -> PyResult<f64> {
    svardag::acyclicity::h_value(&to_matrix(&w, Some(w.len()))?, s).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (w, s=1.0))]
fn h_gradient(w: Rows, s: f64) -> PyResult<Rows> {
    let g = svardag::acyclicity::h_gradient(&to_matrix(&w, Some(w.len()))?, s).map_err(err)?;
    Ok(to_rows(&g))
}

#[pyfunction]
fn h_notears(w: Rows) -> PyResult<f64> {
    Ok(svardag::baseline::h_notears(&to_matrix(&w, Some(w.len()))?))
}

/// Acyclicity of the support `|w_ij| > tau`.
#[pyfunction]
#[pyo3(signature = (w, tau=0.0))]
fn is_dag(w: Rows, tau: f64) -> PyResult<bool> {
    let m = to_matrix(&w, Some(w.len()))?;
    Ok(svardag::is_dag(&svardag::threshold_support(&m, tau)))
}

#[pyfunction]
#[pyo3(signature = (w_hat, a_hat, w_true, a_true, tau=0.05))]
fn metrics<'py>(
    py: Python<'py>,
    w_hat: Rows,
    a_hat: Rows,
    w_true: Rows,
    a_true: Rows,
    tau: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let n = w_true.len();
    let report = MetricsReport::compute(
        &to_matrix(&w_hat, Some(n))?,
        &to_matrix(&a_hat, Some(n))?,
        &to_matrix(&w_true, Some(n))?,
        &to_matrix(&a_true, Some(n))?,
        tau,
    )
    .map_err(err)?;
    let out = PyDict::new(py);
    for (name, value) in report.named_values() {
        out.set_item(name, value)?;
    }
    Ok(out)
}

#[pymodule]
fn pysvardag(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySolverConfig>()?;
    m.add_class::<GroundTruth>()?;
    m.add_class::<LearnResult>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(learn, m)?)?;
    m.add_function(wrap_pyfunction!(h_value, m)?)?;
    m.add_function(wrap_pyfunction!(h_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(h_notears, m)?)?;
    m.add_function(wrap_pyfunction!(is_dag, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    Ok(())
}
