//! Python bindings: kernels, merits, fair distributions and seeded
//! experiment runs.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use fair_rmab::estimation::diagnostics::{g_upper_bound as core_g_upper_bound, inclusion_ceiling};
use fair_rmab::mdp::{self, MeritValue, PullProbability};
use fair_rmab::policy::{self, ExponentialMerit, PullDistribution};
use fair_rmab::sim::{self, Algorithm, Domain};
use fair_rmab::Error;

create_exception!(fairrmab, FairRmabError, PyException);
create_exception!(fairrmab, ConfigError, FairRmabError);
create_exception!(fairrmab, InvariantError, FairRmabError);

fn to_py(err: Error) -> PyErr {
    match err {
        Error::InvariantViolation(_) => InvariantError::new_err(err.to_string()),
        Error::InvalidConfig(_) | Error::ConfigParse(_) | Error::InvalidBudget { .. } | Error::MismatchedConfig(_) => {
            ConfigError::new_err(err.to_string())
        }
        _ => FairRmabError::new_err(err.to_string()),
    }
}

/// Two-state, two-action transition kernel given by `good[s][a]`, the
/// probability of moving to the good state from `s` under action `a`.
#[pyclass(name = "TransitionKernel", module = "fairrmab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyKernel(mdp::TransitionKernel);

#[pymethods]
impl PyKernel {
    #[new]
    #[pyo3(signature = (good, epsilon=None))]
    fn new(good: [[f64; 2]; 2], epsilon: Option<f64>) -> PyResult<Self> {
        let k = match epsilon {
            Some(eps) => mdp::TransitionKernel::non_degenerate(good, eps),
            None => mdp::TransitionKernel::from_good_probs(good),
        };
        k.map(Self).map_err(to_py)
    }

    #[getter]
    fn good(&self) -> [[f64; 2]; 2] {
        self.0.good_probs()
    }

    #[getter]
    fn epsilon(&self) -> Option<f64> {
        self.0.epsilon()
    }

    /// Long-run probability of the good state when pulled with probability `p`.
    fn steady_state(&self, p: f64) -> PyResult<f64> {
        let p = PullProbability::new(p).map_err(to_py)?;
        mdp::steady_state(&self.0, p).map_err(to_py)
    }

    fn merit(&self) -> PyResult<f64> {
        mdp::arm_reward(&self.0).map(MeritValue::value).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("TransitionKernel(good={:?})", self.0.good_probs())
    }
}

#[pyfunction]
#[pyo3(signature = (merits, c=3.0))]
fn fair_distribution(merits: Vec<f64>, c: f64) -> PyResult<Vec<f64>> {
    let g = ExponentialMerit::new(c).map_err(to_py)?;
    let merits = merits
        .into_iter()
        .map(MeritValue::new)
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    Ok(policy::fair_distribution(&merits, &g).probs().to_vec())
}

/// Exact per-arm inclusion probabilities of drawing `k` arms successively
/// from `pi` without replacement.
#[pyfunction]
fn inclusion_probabilities(pi: Vec<f64>, k: usize) -> PyResult<Vec<f64>> {
    let dist = PullDistribution::new(pi).map_err(to_py)?;
    policy::successive_sampling_inclusion(&dist, k).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (epsilon, horizon, num_arms, budget, c=3.0))]
fn g_upper_bound(epsilon: f64, horizon: u32, num_arms: usize, budget: usize, c: f64) -> PyResult<f64> {
    let (lo, hi) = ((-c).exp(), c.exp());
    let lambda = inclusion_ceiling(num_arms, budget, lo, hi);
    core_g_upper_bound(epsilon, horizon, num_arms, lo, hi, lambda).map_err(to_py)
}

/// Experiment configuration. Keyword arguments override the defaults.
#[pyclass(name = "ExperimentConfig", module = "fairrmab", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig(sim::ExperimentConfig);

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (*, num_arms=None, budget=None, episodes=None, horizon=None, delta=None, c=None,
                        epsilon=None, domain=None, algorithm=None, seeds=None, carry_over_state=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        num_arms: Option<usize>,
        budget: Option<usize>,
        episodes: Option<u64>,
        horizon: Option<u32>,
        delta: Option<f64>,
        c: Option<f64>,
        epsilon: Option<f64>,
        domain: Option<&str>,
        algorithm: Option<&str>,
        seeds: Option<Vec<u64>>,
        carry_over_state: Option<bool>,
    ) -> PyResult<Self> {
        let mut cfg = sim::ExperimentConfig::default();
        cfg.num_arms = num_arms.unwrap_or(cfg.num_arms);
        cfg.budget = budget.unwrap_or(cfg.budget);
        cfg.episodes = episodes.unwrap_or(cfg.episodes);
        cfg.horizon = horizon.unwrap_or(cfg.horizon);
        cfg.delta = delta.unwrap_or(cfg.delta);
        cfg.c = c.unwrap_or(cfg.c);
        cfg.epsilon = epsilon.unwrap_or(cfg.epsilon);
        if let Some(d) = domain {
            cfg.domain = d.parse::<Domain>().map_err(to_py)?;
        }
        if let Some(a) = algorithm {
            cfg.algorithm = a.parse::<Algorithm>().map_err(to_py)?;
        }
        cfg.seeds = seeds.unwrap_or(cfg.seeds);
        cfg.carry_over_state = carry_over_state.unwrap_or(cfg.carry_over_state);
        cfg.validate().map_err(to_py)?;
        Ok(Self(cfg))
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let cfg: sim::ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::new_err(e.to_string()))?;
        cfg.validate().map_err(to_py)?;
        Ok(Self(cfg))
    }

    fn to_toml(&self) -> String {
        fair_rmab::cli::config_to_toml(&self.0)
    }

    #[getter]
    fn config_hash(&self) -> String {
        self.0.config_hash()
    }

    #[getter]
    fn num_arms(&self) -> usize {
        self.0.num_arms
    }

    #[getter]
    fn budget(&self) -> usize {
        self.0.budget
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.0.seeds.clone()
    }

    /// True kernels of the population drawn for `seed`.
    fn population(&self, seed: u64) -> PyResult<Vec<PyKernel>> {
        Ok(self.0.population(seed).map_err(to_py)?.into_iter().map(PyKernel).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "ExperimentConfig(num_arms={}, budget={}, episodes={}, horizon={}, domain={:?}, algorithm={})",
            self.0.num_arms,
            self.0.budget,
            self.0.episodes,
            self.0.horizon,
            self.0.domain,
            self.0.algorithm.name()
        )
    }
}

/// Outcome of one seeded run.
#[pyclass(name = "RunRecord", module = "fairrmab", frozen)]
struct PyRunRecord(sim::RunRecord);

#[pymethods]
impl PyRunRecord {
    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    #[getter]
    fn config_hash(&self) -> String {
        self.0.config_hash.clone()
    }

    #[getter]
    fn mu_star(&self) -> Vec<f64> {
        self.0.mu_star.clone()
    }

    #[getter]
    fn pi_star(&self) -> Vec<f64> {
        self.0.pi_star.clone()
    }

    #[getter]
    fn regret(&self) -> Vec<f64> {
        self.0.regret.per_episode.clone()
    }

    #[getter]
    fn cumulative_regret(&self) -> Vec<f64> {
        self.0.regret.cumulative.clone()
    }

    #[getter]
    fn exposure(&self) -> Vec<u64> {
        self.0.exposure.clone()
    }

    #[getter]
    fn t0(&self) -> u64 {
        self.0.t0
    }

    #[getter]
    fn g_max(&self) -> Option<u64> {
        self.0.g_max
    }

    #[getter]
    fn eta(&self) -> Option<f64> {
        self.0.eta
    }

    #[getter]
    fn omega(&self) -> Option<f64> {
        self.0.omega
    }

    fn coverage_failures(&self) -> usize {
        self.0.coverage_failures()
    }

    #[pyo3(signature = (fraction=0.1))]
    fn late_pull_frequency(&self, fraction: f64) -> Vec<f64> {
        self.0.late_pull_frequency(fraction)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| FairRmabError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "RunRecord(seed={}, episodes={}, fr={:.3}, t0={})",
            self.0.seed,
            self.0.episodes(),
            self.0.regret.total(),
            self.0.t0
        )
    }
}

#[pyfunction]
fn run_experiment(py: Python<'_>, config: &PyConfig, seed: u64) -> PyResult<PyRunRecord> {
    let cfg = config.0.clone();
    py.detach(move || sim::run_experiment(&cfg, seed))
        .map(PyRunRecord)
        .map_err(to_py)
}

/// Runs every seed of `config` in parallel.
#[pyfunction]
#[pyo3(signature = (config, workers=None))]
fn run_seeds(py: Python<'_>, config: &PyConfig, workers: Option<usize>) -> PyResult<Vec<PyRunRecord>> {
    let cfg = config.0.clone();
    let records = py.detach(move || sim::run_seeds(&cfg, workers)).map_err(to_py)?;
    Ok(records.into_iter().map(PyRunRecord).collect())
}

#[pymodule]
fn fairrmab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyRunRecord>()?;
    m.add_function(wrap_pyfunction!(fair_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(inclusion_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(g_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_seeds, m)?)?;
    m.add("FairRmabError", m.py().get_type::<FairRmabError>())?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("InvariantError", m.py().get_type::<InvariantError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
