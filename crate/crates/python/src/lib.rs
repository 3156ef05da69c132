//! Python bindings for `sampmodel`.
//!
//! Models and configs cross the boundary as JSON strings with the same layout
//! as the CLI config files; results come back as plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::de::DeserializeOwned;

use sampmodel::design::draw_respondents as draw;
use sampmodel::sample_model::{
    estimate_esw, identity_residuals, nonsample_level_counts, predict_total as predict, TotalMode,
};
use sampmodel::{
    DiscreteJointDist, EmptyCellPolicy, EstimatorResult, ExperimentConfig, InclusionModel, PiFunction,
    PopulationModel, WeightMode,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py(py: Python<'_>, text: String) -> PyResult<Bound<'_, PyAny>> {
    PyModule::import(py, "json")?.call_method1("loads", (text,))
}

fn result_to_py(py: Python<'_>, r: sampmodel::Result<EstimatorResult>) -> PyResult<Bound<'_, PyAny>> {
    let r = r.map_err(value_err)?;
    json_to_py(py, serde_json::to_string(&r).map_err(value_err)?)
}

fn parse<T: DeserializeOwned>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(value_err)
}

#[pyclass(name = "Population", frozen)]
struct PyPopulation {
    inner: sampmodel::Population,
}

#[pymethods]
impl PyPopulation {
    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y.clone()
    }

    /// Covariates as a list of rows.
    #[getter]
    fn z(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|i| self.inner.z_row(i).to_vec()).collect()
    }

    #[getter]
    fn cell_id(&self) -> Vec<usize> {
        self.inner.cell_id.clone()
    }

    #[getter]
    fn cell_sizes(&self) -> Vec<usize> {
        self.inner.cell_sizes.clone()
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn total(&self) -> f64 {
        self.inner.total()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "Sample", frozen)]
struct PySample {
    inner: sampmodel::Sample,
}

#[pymethods]
impl PySample {
    #[new]
    #[pyo3(signature = (y, z, w, cell_id=None))]
    fn new(y: Vec<f64>, z: Vec<Vec<f64>>, w: Vec<f64>, cell_id: Option<Vec<usize>>) -> PyResult<Self> {
        let p = z.first().map_or(0, Vec::len);
        if z.iter().any(|row| row.len() != p) {
            return Err(PyValueError::new_err("z rows have different lengths"));
        }
        let n = y.len();
        let inner = sampmodel::Sample::from_columns(y, z.concat(), p, w, cell_id.unwrap_or_else(|| vec![0; n]))
            .map_err(value_err)?;
        Ok(PySample { inner })
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y.clone()
    }

    #[getter]
    fn z(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|i| self.inner.z_row(i).to_vec()).collect()
    }

    #[getter]
    fn w(&self) -> Vec<f64> {
        self.inner.w.clone()
    }

    #[getter]
    fn unit_ids(&self) -> Vec<usize> {
        self.inner.unit_ids.clone()
    }

    fn rescaled(&self, c: f64) -> PySample {
        PySample { inner: self.inner.rescaled(c) }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
fn generate_population(model_json: &str, n: usize, seed: u64) -> PyResult<PyPopulation> {
    let model: PopulationModel = parse(model_json)?;
    let inner = sampmodel::generate_population(&model, n, seed).map_err(value_err)?;
    Ok(PyPopulation { inner })
}

#[pyfunction]
#[pyo3(signature = (population, design_json, selection_seed, response_seed=0, weight_mode="true-combined"))]
fn draw_respondents(
    population: &PyPopulation,
    design_json: &str,
    selection_seed: u64,
    response_seed: u64,
    weight_mode: &str,
) -> PyResult<PySample> {
    let design: InclusionModel = parse(design_json)?;
    let mode: WeightMode = weight_mode.parse().map_err(value_err)?;
    let inner = draw(&population.inner, &design, mode, selection_seed, response_seed).map_err(value_err)?;
    Ok(PySample { inner })
}

#[pyfunction]
fn hajek_mean<'py>(py: Python<'py>, sample: &PySample) -> PyResult<Bound<'py, PyAny>> {
    result_to_py(py, sampmodel::hajek_mean(&sample.inner))
}

#[pyfunction]
fn sample_mean<'py>(py: Python<'py>, sample: &PySample) -> PyResult<Bound<'py, PyAny>> {
    result_to_py(py, sampmodel::sample_mean(&sample.inner))
}

#[pyfunction]
#[pyo3(signature = (sample, cell_sizes, drop_empty_cells=false))]
fn poststratified_mean<'py>(
    py: Python<'py>,
    sample: &PySample,
    cell_sizes: Vec<f64>,
    drop_empty_cells: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let policy = if drop_empty_cells { EmptyCellPolicy::Drop } else { EmptyCellPolicy::Error };
    result_to_py(py, sampmodel::poststratified_mean_with(&sample.inner, &cell_sizes, policy))
}

#[pyfunction]
fn weighted_domain_difference<'py>(py: Python<'py>, sample: &PySample, domain: Vec<bool>) -> PyResult<Bound<'py, PyAny>> {
    result_to_py(py, sampmodel::weighted_domain_difference(&sample.inner, &domain))
}

#[pyfunction]
fn ols_fit<'py>(py: Python<'py>, sample: &PySample) -> PyResult<Bound<'py, PyAny>> {
    result_to_py(py, sampmodel::ols_fit(&sample.inner))
}

#[pyfunction]
fn weighted_regression_bw<'py>(py: Python<'py>, sample: &PySample) -> PyResult<Bound<'py, PyAny>> {
    result_to_py(py, sampmodel::weighted_regression_bw(&sample.inner))
}

#[pyfunction]
#[pyo3(signature = (sample, form="log-linear", z_fit="regression"))]
fn q_weighted_regression_bq<'py>(
    py: Python<'py>,
    sample: &PySample,
    form: &str,
    z_fit: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let form = parse(&format!("\"{form}\""))?;
    let z_fit = parse(&format!("\"{z_fit}\""))?;
    let s = &sample.inner;
    result_to_py(py, estimate_esw(s, form, z_fit).and_then(|m| sampmodel::q_weighted_regression_bq(s, &m)))
}

/// Method-of-moments total, with nonsample counts taken from the population.
#[pyfunction]
fn predict_total<'py>(py: Python<'py>, population: &PyPopulation, sample: &PySample) -> PyResult<Bound<'py, PyAny>> {
    let counts = nonsample_level_counts(&population.inner, &sample.inner);
    result_to_py(py, predict(&sample.inner, &counts, TotalMode::MethodOfMoments))
}

/// Residuals of the exact identities plus the sample and complement tables.
#[pyfunction]
#[pyo3(signature = (y_support, z_support, p, pi, tolerance=1e-12))]
fn exact_identities<'py>(
    py: Python<'py>,
    y_support: Vec<f64>,
    z_support: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
    pi: Vec<Vec<f64>>,
    tolerance: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let fp = DiscreteJointDist::new(y_support, z_support, p).map_err(value_err)?;
    let pi = PiFunction::new(pi).map_err(value_err)?;
    let report = identity_residuals(&fp, &pi, tolerance).map_err(value_err)?;
    json_to_py(py, serde_json::to_string(&report).map_err(value_err)?)
}

/// Runs a replicated experiment and returns its summary rows.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg: ExperimentConfig = parse(config_json)?;
    let report = py.detach(|| sampmodel::run_replications(&cfg)).map_err(value_err)?;
    json_to_py(py, serde_json::to_string(&report.summary).map_err(value_err)?)
}

#[pymodule]
fn pysampmodel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPopulation>()?;
    m.add_class::<PySample>()?;
    m.add_function(wrap_pyfunction!(generate_population, m)?)?;
    m.add_function(wrap_pyfunction!(draw_respondents, m)?)?;
    m.add_function(wrap_pyfunction!(sample_mean, m)?)?;
    m.add_function(wrap_pyfunction!(hajek_mean, m)?)?;
    m.add_function(wrap_pyfunction!(poststratified_mean, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_domain_difference, m)?)?;
    m.add_function(wrap_pyfunction!(ols_fit, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_regression_bw, m)?)?;
    m.add_function(wrap_pyfunction!(q_weighted_regression_bq, m)?)?;
    m.add_function(wrap_pyfunction!(predict_total, m)?)?;
    m.add_function(wrap_pyfunction!(exact_identities, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
