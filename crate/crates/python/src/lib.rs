//! Python bindings: scenarios, the simulator, the analytic model and the
//! two-class chain.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fogsim::analytic::{self, AnalyticOptions, FlowOptions, FogDelayTerm};
use fogsim::model::{presets, validate_config, CloudSpec, FogDiscipline, PolicyMode, RequestType, ScenarioConfig};
use fogsim::sim::{self, SimOptions};
use fogsim::Error;

create_exception!(fogsim, UnstableError, PyRuntimeError, "A node saturates under the offered load.");
create_exception!(fogsim, ConvergenceError, PyRuntimeError, "The analytic fixed point or a chain solve did not converge.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Unstable { .. } | Error::Overload { .. } => UnstableError::new_err(e.to_string()),
        Error::NoConvergence { .. } | Error::Numeric { .. } => ConvergenceError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> PyResult<T> {
    s.parse().map_err(PyValueError::new_err)
}

fn request_type(t: Option<&str>) -> PyResult<Option<RequestType>> {
    t.map(parse).transpose()
}

/// A scenario configuration.
#[pyclass(module = "fogsim", skip_from_py_object)]
#[derive(Clone)]
struct Scenario {
    cfg: ScenarioConfig,
}

#[pymethods]
impl Scenario {
    /// Built-in full-scale preset, e.g. `"setting2"`.
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        presets::preset(name)
            .map(|cfg| Self { cfg })
            .ok_or_else(|| PyValueError::new_err(format!("no preset `{name}`")))
    }

    #[staticmethod]
    fn presets() -> Vec<&'static str> {
        presets::PRESET_NAMES.to_vec()
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ScenarioConfig::from_toml_str(text).map(|cfg| Self { cfg }).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        ScenarioConfig::load(&path).map(|cfg| Self { cfg }).map_err(to_py)
    }

    fn to_toml(&self) -> String {
        self.cfg.to_toml_string()
    }

    #[getter]
    fn name(&self) -> &str {
        &self.cfg.name
    }

    /// Returns a copy with one numeric field changed; `key` is a dotted path
    /// such as `"domain.q"`.
    fn with_param(&self, key: &str, value: f64) -> PyResult<Self> {
        let mut cfg = self.cfg.clone();
        cfg.set_param(key, value).map_err(to_py)?;
        Ok(Self { cfg })
    }

    /// Shrinks the network, e.g. to 40 IoT, 5 fog and 1 cloud node.
    #[pyo3(signature = (n_iot, n_fog, n_cloud, avg_degree=None))]
    fn resized(&self, n_iot: usize, n_fog: usize, n_cloud: usize, avg_degree: Option<f64>) -> Self {
        let mut cfg = self.cfg.clone();
        cfg.network.n_iot = n_iot;
        cfg.network.n_fog = n_fog;
        cfg.network.n_cloud = n_cloud;
        if let Some(d) = avg_degree {
            cfg.network.avg_degree = d;
        }
        Self { cfg }
    }

    /// Every invariant violation as `"path: message"`; empty when valid.
    fn violations(&self) -> Vec<String> {
        validate_config(&self.cfg).iter().map(|v| v.to_string()).collect()
    }

    fn __repr__(&self) -> String {
        let n = &self.cfg.network;
        format!("Scenario({:?}, iot={}, fog={}, cloud={})", self.cfg.name, n.n_iot, n.n_fog, n.n_cloud)
    }
}

/// Summary of one simulation run.
#[pyclass(module = "fogsim", frozen)]
struct SimResult {
    m: sim::Metrics,
}

#[pymethods]
impl SimResult {
    #[getter]
    fn mode(&self) -> &'static str {
        self.m.mode.as_str()
    }

    #[getter]
    fn generated(&self) -> u64 {
        self.m.generated
    }

    #[getter]
    fn completed(&self) -> u64 {
        self.m.completed
    }

    #[getter]
    fn max_n_fwd(&self) -> u32 {
        self.m.max_n_fwd()
    }

    /// Mean service delay (ms); `rtype` is `"light"`, `"heavy"` or None.
    #[pyo3(signature = (rtype=None))]
    fn mean_delay(&self, rtype: Option<&str>) -> PyResult<f64> {
        Ok(self.m.delay_stats(request_type(rtype)?).mean)
    }

    /// Half-width of the 95% confidence interval of the mean delay.
    #[pyo3(signature = (rtype=None))]
    fn ci95(&self, rtype: Option<&str>) -> PyResult<f64> {
        Ok(self.m.delay_stats(request_type(rtype)?).ci95)
    }

    #[pyo3(signature = (rtype=None))]
    fn acceptance_rate(&self, rtype: Option<&str>) -> PyResult<f64> {
        Ok(self.m.acceptance_rate(request_type(rtype)?))
    }

    #[pyo3(signature = (rtype=None))]
    fn offload_rate(&self, rtype: Option<&str>) -> PyResult<f64> {
        Ok(self.m.offload_rate(request_type(rtype)?))
    }

    #[pyo3(signature = (rtype=None))]
    fn cloud_spill_rate(&self, rtype: Option<&str>) -> PyResult<f64> {
        Ok(self.m.cloud_spill_rate(request_type(rtype)?))
    }

    /// Per-request delays after warm-up, in completion order.
    #[pyo3(signature = (rtype=None))]
    fn delays(&self, rtype: Option<&str>) -> PyResult<Vec<f64>> {
        Ok(self.m.delay_stats(request_type(rtype)?).samples.clone())
    }
}

/// Analytic flows and delays of one mode.
#[pyclass(module = "fogsim", frozen)]
struct Analysis {
    a: analytic::Analysis,
}

#[pymethods]
impl Analysis {
    #[pyo3(signature = (rtype=None))]
    fn mean_delay(&self, rtype: Option<&str>) -> PyResult<f64> {
        Ok(self.a.mean_delay(request_type(rtype)?))
    }

    /// Mean time from first fog arrival to response receipt.
    #[pyo3(signature = (rtype=None))]
    fn mean_fog_layer(&self, rtype: Option<&str>) -> PyResult<f64> {
        Ok(self.a.delays.mean_fog_layer(request_type(rtype)?))
    }

    #[pyo3(signature = (rtype=None))]
    fn acceptance_rate(&self, rtype: Option<&str>) -> PyResult<f64> {
        Ok(self.a.acceptance_rate(request_type(rtype)?))
    }

    #[pyo3(signature = (rtype=None))]
    fn offload_rate(&self, rtype: Option<&str>) -> PyResult<f64> {
        Ok(self.a.offload_rate(request_type(rtype)?))
    }

    #[pyo3(signature = (rtype=None))]
    fn cloud_spill_rate(&self, rtype: Option<&str>) -> PyResult<f64> {
        Ok(self.a.cloud_spill_rate(request_type(rtype)?))
    }

    /// Acceptance probability of each fog node.
    fn accept_probs(&self) -> Vec<f64> {
        self.a.flows.fogs.iter().map(|f| f.accept_prob).collect()
    }

    /// Mean delay of each IoT node (ms).
    fn iot_delays(&self) -> Vec<f64> {
        self.a.delays.entries.iter().map(|e| e.total).collect()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.a.flows.iterations
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.a.flows.residual
    }
}

/// Stationary distribution of the two-class fog queue.
#[pyclass(module = "fogsim", frozen)]
struct SteadyState {
    ss: analytic::SteadyState,
}

#[pymethods]
impl SteadyState {
    fn get(&self, n: usize, n2: usize) -> f64 {
        self.ss.get(n, n2)
    }

    /// Largest (Light, Heavy) counts kept by the truncation.
    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.ss.n_max_light, self.ss.n_max_heavy)
    }

    fn total(&self) -> f64 {
        self.ss.total()
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.ss.residual
    }

    fn mean_wait(&self, mu_light: f64, mu_heavy: f64) -> f64 {
        analytic::mean_wait(&self.ss, mu_light, mu_heavy)
    }

    fn acceptance_prob(&self, mu_light: f64, mu_heavy: f64, theta: f64) -> f64 {
        analytic::acceptance_prob(&self.ss, mu_light, mu_heavy, theta)
    }
}

/// Runs the simulator for one mode.
#[pyfunction]
#[pyo3(signature = (scenario, mode="afp", requests=100_000, seed=1, discipline=None))]
fn simulate(
    py: Python<'_>,
    scenario: &Scenario,
    mode: &str,
    requests: u64,
    seed: u64,
    discipline: Option<&str>,
) -> PyResult<SimResult> {
    let mode: PolicyMode = parse(mode)?;
    let mut o = SimOptions::from_config(&scenario.cfg, mode, requests, seed);
    if let Some(d) = discipline {
        o.discipline = parse::<FogDiscipline>(d)?;
    }
    let cfg = scenario.cfg.clone();
    let m = py
        .detach(move || fogsim::topology::build(&cfg).and_then(|t| sim::run(&t, &o)))
        .map_err(to_py)?;
    Ok(SimResult { m })
}

/// Solves the analytic model for one mode. `fog_term` is `"class-sojourn"`
/// or `"mean-wait"`.
#[pyfunction]
#[pyo3(signature = (scenario, mode="afp", fog_term="class-sojourn", damped=false, max_iter=500))]
fn analyze(
    py: Python<'_>,
    scenario: &Scenario,
    mode: &str,
    fog_term: &str,
    damped: bool,
    max_iter: usize,
) -> PyResult<Analysis> {
    let mode: PolicyMode = parse(mode)?;
    let fog_term = match fog_term {
        "class-sojourn" => FogDelayTerm::ClassSojourn,
        "mean-wait" => FogDelayTerm::MeanWait,
        other => return Err(PyValueError::new_err(format!("unknown fog term `{other}`"))),
    };
    let opts = AnalyticOptions {
        flow: FlowOptions {
            accelerate: !damped,
            max_iter,
            ..FlowOptions::default()
        },
        fog_term,
    };
    let cfg = scenario.cfg.clone();
    let a = py
        .detach(move || fogsim::topology::build(&cfg).and_then(|t| analytic::analyze(&t, mode, &opts)))
        .map_err(to_py)?;
    Ok(Analysis { a })
}

#[pyfunction]
#[pyo3(signature = (lambda_light, lambda_heavy, mu_light, mu_heavy, q=0.5, tol=1e-8))]
fn solve_chain(
    lambda_light: f64,
    lambda_heavy: f64,
    mu_light: f64,
    mu_heavy: f64,
    q: f64,
    tol: f64,
) -> PyResult<SteadyState> {
    analytic::solve_chain(lambda_light, lambda_heavy, mu_light, mu_heavy, q, tol)
        .map(|ss| SteadyState { ss })
        .map_err(to_py)
}

/// Mean sojourn at a cloud server with `m` units.
#[pyfunction]
fn cloud_wait(lambda_light: f64, lambda_heavy: f64, m: usize, z_light: f64, z_heavy: f64) -> PyResult<f64> {
    let c = CloudSpec { id: 0, m, z_light, z_heavy };
    analytic::cloud_wait(lambda_light, lambda_heavy, &c).map_err(to_py)
}

/// Probability that the next job served is Light.
#[pyfunction]
fn light_share(n: u64, n2: u64, q: f64) -> f64 {
    fogsim::policy::light_share(n, n2, q)
}

#[pymodule]
#[pyo3(name = "fogsim")]
fn fogsim_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<SimResult>()?;
    m.add_class::<Analysis>()?;
    m.add_class::<SteadyState>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(solve_chain, m)?)?;
    m.add_function(wrap_pyfunction!(cloud_wait, m)?)?;
    m.add_function(wrap_pyfunction!(light_share, m)?)?;
    m.add("UnstableError", m.py().get_type::<UnstableError>())?;
    m.add("ConvergenceError", m.py().get_type::<ConvergenceError>())?;
    Ok(())
}
