//! Python bindings. Data matrices are passed as lists of rows.

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use detcons::app::pipeline::{self, Method, PipelineConfig, Prepared};
use detcons::app::preprocess::Preprocessing;
use detcons::app::simulate as sim;
use detcons::consensus::ConsensusConfig;
use detcons::data::DataMatrix;
use detcons::error::Error;
use detcons::partition::Partition;
use detcons::rng::RngStream;
use detcons::{kernel, metrics, sampling, simgen};

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 | 3 if matches!(e, Error::Io(_)) => PyOSError::new_err(e.to_string()),
        2 | 3 => PyValueError::new_err(e.to_string()),
        _ => PyArithmeticError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DataMatrix> {
    DataMatrix::from_rows(&rows).map_err(to_py)
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> PyResult<T> {
    s.parse().map_err(PyValueError::new_err)
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Mean pairwise squared Euclidean distance.
#[pyfunction]
fn estimate_bandwidth(data: Vec<Vec<f64>>) -> PyResult<f64> {
    kernel::estimate_bandwidth(&matrix(data)?).map_err(to_py)
}

/// RBF kernel matrix with bandwidth `s` times the estimated one.
#[pyfunction]
#[pyo3(signature = (data, s = 1.0))]
fn rbf_kernel(data: Vec<Vec<f64>>, s: f64) -> PyResult<Vec<Vec<f64>>> {
    let data = matrix(data)?;
    let cfg = kernel::BandwidthConfig::estimate(&data, s).map_err(to_py)?;
    let k = kernel::build_rbf_kernel(&data, &cfg).map_err(to_py)?;
    Ok((0..k.n())
        .map(|i| (0..k.n()).map(|j| k.get(i, j)).collect())
        .collect())
}

#[pyfunction]
fn ari(a: Vec<i64>, b: Vec<i64>) -> PyResult<f64> {
    metrics::ari(&a, &b).map_err(to_py)
}

#[pyfunction]
fn rn(k_hat: usize, k_true: usize) -> f64 {
    metrics::rn(k_hat, k_true)
}

/// Kernel, spectrum and sampler for one dataset.
#[pyclass(frozen)]
struct Dpp {
    prep: Prepared,
}

#[pymethods]
impl Dpp {
    #[new]
    #[pyo3(signature = (data, s = 1.0, preprocess = "none"))]
    fn new(data: Vec<Vec<f64>>, s: f64, preprocess: &str) -> PyResult<Self> {
        let data = matrix(data)?;
        let how: Preprocessing = parse(preprocess)?;
        Ok(Self {
            prep: Prepared::new(&data, how, s).map_err(to_py)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.prep.n()
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.prep.bandwidth.sigma2_hat
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.prep.spectral.eigenvalues().to_vec()
    }

    #[getter]
    fn expected_size(&self) -> f64 {
        self.prep.spectral.expected_dpp_size()
    }

    /// Generator indices of one draw with at least two elements.
    #[pyo3(signature = (seed, stream = 0))]
    fn sample(&self, seed: u64, stream: u64) -> PyResult<Vec<usize>> {
        let g = sampling::sample_dpp(&self.prep.spectral, RngStream::new(seed, stream))
            .map_err(to_py)?;
        Ok(g.indices().to_vec())
    }

    /// `log det(L_Y) - log det(L + I)`; `None` when `L_Y` is singular.
    fn log_likelihood(&self, indices: Vec<usize>) -> PyResult<Option<f64>> {
        let ll = sampling::dpp_log_likelihood(&self.prep.kernel, &self.prep.spectral, &indices)
            .map_err(to_py)?;
        Ok(ll.is_finite().then_some(ll))
    }

    /// Voronoi labels of every point for the given generators.
    fn assign(&self, generators: Vec<usize>) -> PyResult<Vec<usize>> {
        let g =
            sampling::GeneratorSet::new(generators, self.prep.n(), sampling::SamplingMethod::Dpp)
                .map_err(to_py)?;
        Ok(detcons::partition::voronoi_assign(&self.prep.data, &g)
            .map_err(to_py)?
            .labels()
            .to_vec())
    }
}

/// Full consensus clustering. Returns the report as a dict; the consensus
/// matrix is added under `"consensus"` when requested.
#[pyfunction]
#[pyo3(signature = (
    data, labels = None, method = "dpp", runs = 200, tau = 0.6, min_size_exp = 0.5, s = 1.0,
    kmax = None, seed = 0, preprocess = "none", threads = None, return_consensus = false
))]
#[allow(clippy::too_many_arguments)]
fn cluster<'py>(
    py: Python<'py>,
    data: Vec<Vec<f64>>,
    labels: Option<Vec<i64>>,
    method: &str,
    runs: usize,
    tau: f64,
    min_size_exp: f64,
    s: f64,
    kmax: Option<usize>,
    seed: u64,
    preprocess: &str,
    threads: Option<usize>,
    return_consensus: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let data = matrix(data)?;
    let cfg = PipelineConfig {
        method: parse::<Method>(method)?,
        consensus: ConsensusConfig::new(runs, tau, min_size_exp),
        s,
        k_max: kmax,
        seed,
        preprocessing: parse(preprocess)?,
        threads,
        ..Default::default()
    };
    let truth = labels.map(|l| Partition::from_labels(&l).labels().to_vec());
    let report = py
        .detach(|| pipeline::run_pipeline(&data, &cfg, truth.as_deref()))
        .map_err(to_py)?;
    let out = json_to_py(py, &report.to_json().map_err(to_py)?)?;
    if return_consensus {
        if let Some(c) = &report.consensus {
            let m: Vec<Vec<f64>> = (0..c.n())
                .map(|i| (0..c.n()).map(|j| c.get(i, j)).collect())
                .collect();
            out.set_item("consensus", m)?;
        }
    }
    Ok(out)
}

/// Names of the simulation scenarios, in grid order.
#[pyfunction]
fn scenarios() -> Vec<String> {
    simgen::scenario_grid().iter().map(|s| s.name()).collect()
}

/// One simulated replica: `(rows, labels, metadata)`.
#[pyfunction]
#[pyo3(signature = (scenario, replica = 0, seed = 0))]
fn simulate<'py>(
    py: Python<'py>,
    scenario: &str,
    replica: usize,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<usize>, Bound<'py, PyAny>)> {
    let (id, spec) = sim::scenario_by_id(scenario).map_err(to_py)?;
    let (ds, meta) = py
        .detach(|| sim::generate_replica(&spec, id, replica, seed))
        .map_err(to_py)?;
    let rows = ds.data.rows().map(<[f64]>::to_vec).collect();
    let meta = json_to_py(
        py,
        &serde_json::to_string(&meta).map_err(|e| to_py(e.into()))?,
    )?;
    Ok((rows, ds.true_labels, meta))
}

#[pymodule]
fn pydetcons(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dpp>()?;
    m.add_function(wrap_pyfunction!(estimate_bandwidth, m)?)?;
    m.add_function(wrap_pyfunction!(rbf_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(ari, m)?)?;
    m.add_function(wrap_pyfunction!(rn, m)?)?;
    m.add_function(wrap_pyfunction!(cluster, m)?)?;
    m.add_function(wrap_pyfunction!(scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
