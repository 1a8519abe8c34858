use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid transition kernel: {0}")]
    InvalidKernel(String),

    #[error("degenerate kernel: steady-state denominator {denominator:e} is below tolerance")]
    DegenerateKernel { denominator: f64 },

    #[error("power iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("invalid probability {value} for {what}")]
    InvalidProbability { what: &'static str, value: f64 },

    #[error("gap assumption violated (eta = {eta}, omega = {omega}); both must be < 1")]
    AssumptionViolated { eta: f64, omega: f64 },

    #[error("visitation bound is vacuous (psi = {psi})")]
    VacuousBound { psi: f64 },

    #[error("invalid budget: k = {k} with {n} arms")]
    InvalidBudget { k: usize, n: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("scaled regret infeasible: pi*[{arm}] = {pi} exceeds 1/{k}")]
    InfeasibleScaling { arm: usize, pi: f64, k: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("records do not share one configuration: {0}")]
    MismatchedConfig(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    ConfigParse(String),
}
