//! Environment and experiment loops.
//!
//! An experiment draws a population of arms, then for each episode rebuilds
//! every arm's confidence model from its counts, freezes a pull distribution,
//! and runs `H` steps in which `K` arms are drawn afresh and every arm
//! transitions. Regret is measured against the fair distribution of the true
//! kernels, which the learner never sees.

use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::{CpapParams, DomainSpec, NoiseSemantics};
use crate::error::{Error, Result};
use crate::estimation::diagnostics::VisitFlags;
use crate::estimation::{
    contains_truth, gap_bounds, reward_error_bound, AssumptionTracker, ConfidenceModel, ConfidenceParams,
    GapBounds, Radii, TransitionCounts, VisitationTracker,
};
use crate::mdp::{arm_reward, Action, State, Transition, TransitionKernel};
use crate::policy::{
    fair_distribution, fairness_regret_increment, optimal_baseline, sample_into,
    scaled_fairness_regret_increment, true_merits, ExponentialMerit, PullDistribution, RegretLedger,
};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "mf-rmab")]
    MfRmab,
    #[serde(rename = "optimal")]
    Optimal,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::MfRmab => "mf-rmab",
            Algorithm::Optimal => "optimal",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mf-rmab" => Ok(Algorithm::MfRmab),
            "optimal" => Ok(Algorithm::Optimal),
            other => Err(Error::InvalidConfig(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Synthetic,
    SyntheticAlternate,
    Cpap,
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(Domain::Synthetic),
            "synthetic-alternate" => Ok(Domain::SyntheticAlternate),
            "cpap" => Ok(Domain::Cpap),
            other => Err(Error::InvalidConfig(format!("unknown domain '{other}'"))),
        }
    }
}

/// Flat experiment configuration; field names double as config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub num_arms: usize,
    pub budget: usize,
    pub episodes: u64,
    pub horizon: u32,
    pub delta: f64,
    pub c: f64,
    pub epsilon: f64,
    pub domain: Domain,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    /// Keep each arm's state across episode boundaries instead of drawing a
    /// fresh uniform initial state.
    pub carry_over_state: bool,
    pub cpap_alpha_h: f64,
    pub cpap_non_adherer_fraction: f64,
    pub cpap_noise: f64,
    pub cpap_noise_semantics: NoiseSemantics,
    pub cpap_exact_non_adherer_count: bool,
    pub cpap_adherent_idle: [f64; 2],
    pub cpap_non_adherent_idle: [f64; 2],
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let cpap = CpapParams::default();
        Self {
            num_arms: 5,
            budget: 1,
            episodes: 2000,
            horizon: 100,
            delta: 0.01,
            c: 3.0,
            epsilon: 0.01,
            domain: Domain::Synthetic,
            algorithm: Algorithm::MfRmab,
            seeds: (0..30).collect(),
            carry_over_state: false,
            cpap_alpha_h: cpap.alpha_h,
            cpap_non_adherer_fraction: cpap.non_adherer_fraction,
            cpap_noise: cpap.noise,
            cpap_noise_semantics: cpap.noise_semantics,
            cpap_exact_non_adherer_count: cpap.exact_non_adherer_count,
            cpap_adherent_idle: cpap.adherent_idle,
            cpap_non_adherent_idle: cpap.non_adherent_idle,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_arms < 2 {
            return fail(format!("num_arms must be >= 2, got {}", self.num_arms));
        }
        if self.budget < 1 || self.budget > self.num_arms {
            return Err(Error::InvalidBudget {
                k: self.budget,
                n: self.num_arms,
            });
        }
        if self.episodes < 1 || self.horizon < 1 {
            return fail("episodes and horizon must be >= 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail(format!("delta must be in (0, 1), got {}", self.delta));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return fail(format!("epsilon must be in (0, 0.5), got {}", self.epsilon));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return fail(format!("c must be >= 0, got {}", self.c));
        }
        if self.seeds.is_empty() {
            return fail("seed list is empty".into());
        }
        if let DomainSpec::Cpap(p) = self.domain_spec() {
            p.validate()?;
        }
        Ok(())
    }

    pub fn cpap_params(&self) -> CpapParams {
        CpapParams {
            alpha_h: self.cpap_alpha_h,
            non_adherer_fraction: self.cpap_non_adherer_fraction,
            noise: self.cpap_noise,
            noise_semantics: self.cpap_noise_semantics,
            exact_non_adherer_count: self.cpap_exact_non_adherer_count,
            adherent_idle: self.cpap_adherent_idle,
            non_adherent_idle: self.cpap_non_adherent_idle,
        }
    }

    pub fn domain_spec(&self) -> DomainSpec {
        match self.domain {
            Domain::Synthetic => DomainSpec::Synthetic,
            Domain::SyntheticAlternate => DomainSpec::SyntheticAlternate,
            Domain::Cpap => DomainSpec::Cpap(self.cpap_params()),
        }
    }

    /// Short hash of every field except the seed list.
    pub fn config_hash(&self) -> String {
        let mut keyed = self.clone();
        keyed.seeds.clear();
        let bytes = serde_json::to_vec(&keyed).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        hex::encode(&digest[..8])
    }

    /// The true arm population for `seed`.
    pub fn population(&self, seed: u64) -> Result<Vec<TransitionKernel>> {
        self.domain_spec()
            .generate(self.num_arms, self.epsilon, &mut stream(seed, Stream::Dataset))
    }
}

/// True arm dynamics plus each arm's current state. The kernels are private:
/// the learner only ever sees the transitions returned by [`step`](Self::step).
#[derive(Debug, Clone)]
pub struct Environment {
    kernels: Vec<TransitionKernel>,
    states: Vec<State>,
    budget: usize,
    rng: ChaCha8Rng,
    pulled: Vec<bool>,
}

impl Environment {
    pub fn new(kernels: Vec<TransitionKernel>, budget: usize, rng: ChaCha8Rng) -> Result<Self> {
        let n = kernels.len();
        if budget < 1 || budget > n {
            return Err(Error::InvalidBudget { k: budget, n });
        }
        Ok(Self {
            states: vec![State::Bad; n],
            pulled: vec![false; n],
            kernels,
            budget,
            rng,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.kernels.len()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn set_states(&mut self, states: &[State]) {
        self.states.copy_from_slice(states);
    }

    /// Draws every arm's state uniformly from `{Bad, Good}`.
    pub fn reset_uniform(&mut self) {
        for s in self.states.iter_mut() {
            *s = State::from_good(self.rng.random::<bool>());
        }
    }

    /// Pulls `pulled` (exactly `budget` distinct arms) and advances every arm
    /// one step.
    pub fn step(&mut self, pulled: &[usize]) -> Result<Vec<Transition>> {
        let mut out = Vec::with_capacity(self.num_arms());
        self.step_into(pulled, &mut out)?;
        Ok(out)
    }

    pub fn step_into(&mut self, pulled: &[usize], out: &mut Vec<Transition>) -> Result<()> {
        let n = self.num_arms();
        if pulled.len() != self.budget {
            return Err(Error::InvalidBudget { k: pulled.len(), n });
        }
        self.pulled.iter_mut().for_each(|p| *p = false);
        for &i in pulled {
            if i >= n || self.pulled[i] {
                return Err(Error::InvariantViolation(format!(
                    "pulled set {pulled:?} must hold distinct arms below {n}"
                )));
            }
            self.pulled[i] = true;
        }
        out.clear();
        for i in 0..n {
            let from = self.states[i];
            let action = Action::from_pulled(self.pulled[i]);
            let to = State::from_good(self.rng.random::<f64>() < self.kernels[i].to_good(from, action));
            self.states[i] = to;
            out.push(Transition::new(from, action, to));
        }
        Ok(())
    }
}

/// Everything observed during one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    /// Arms pulled at each step, in draw order.
    pub pulls: Vec<Vec<usize>>,
    /// Observed transitions per arm.
    pub transitions: Vec<Vec<Transition>>,
    pub visited: Vec<VisitFlags>,
    pub pull_counts: Vec<u64>,
}

/// Runs `horizon` steps with `dist` frozen, drawing `env.budget()` arms
/// without replacement at every step.
pub fn run_episode<R: Rng + ?Sized>(
    dist: &PullDistribution,
    env: &mut Environment,
    horizon: u32,
    sampler: &mut R,
) -> Result<EpisodeTrace> {
    let n = env.num_arms();
    if dist.len() != n {
        return Err(Error::LengthMismatch { left: dist.len(), right: n });
    }
    let mut trace = EpisodeTrace {
        pulls: Vec::with_capacity(horizon as usize),
        transitions: vec![Vec::with_capacity(horizon as usize); n],
        visited: vec![[[false; 2]; 2]; n],
        pull_counts: vec![0; n],
    };
    let mut scratch = Vec::with_capacity(n);
    let mut chosen = Vec::with_capacity(env.budget());
    let mut step = Vec::with_capacity(n);
    for _ in 0..horizon {
        sample_into(dist.probs(), env.budget(), sampler, &mut scratch, &mut chosen)?;
        env.step_into(&chosen, &mut step)?;
        for &i in &chosen {
            trace.pull_counts[i] += 1;
        }
        for (i, t) in step.iter().enumerate() {
            trace.visited[i][t.from.index()][t.action.index()] = true;
            trace.transitions[i].push(*t);
        }
        trace.pulls.push(chosen.clone());
    }
    Ok(trace)
}

/// Per-arm snapshot of one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmEpisodeStats {
    pub radii: Radii,
    pub gaps: GapBounds,
    pub contains_truth: bool,
    /// Merit estimated from the optimistic kernel (what the learner uses).
    pub mu_estimate: f64,
    pub mu_pessimistic: Option<f64>,
    pub mu_empirical: Option<f64>,
    pub pi: f64,
    pub pulls: u64,
}

/// Outcome of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub num_arms: usize,
    pub budget: usize,
    pub horizon: u32,
    pub mu_star: Vec<f64>,
    pub pi_star: Vec<f64>,
    pub regret: RegretLedger,
    /// Cumulative pulls per arm.
    pub exposure: Vec<u64>,
    /// `arm_stats[t - 1][i]` for episode `t`, arm `i`.
    pub arm_stats: Vec<Vec<ArmEpisodeStats>>,
    pub t0: u64,
    pub assumption_verified: bool,
    pub eta: Option<f64>,
    pub omega: Option<f64>,
    pub g_per_arm: Vec<Option<u64>>,
    pub g_max: Option<u64>,
    pub wall_time_secs: f64,
}

/// Result of checking the reward-error envelope over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnvelopeReport {
    pub checked: u64,
    pub violations: u64,
    /// Largest `|mu^t - mu*| / bound` seen.
    pub worst_ratio: f64,
}

impl RunRecord {
    pub fn episodes(&self) -> usize {
        self.arm_stats.len()
    }

    /// Pull frequency of each arm over the trailing `fraction` of episodes.
    pub fn late_pull_frequency(&self, fraction: f64) -> Vec<f64> {
        let total = self.episodes();
        let window = ((total as f64 * fraction).ceil() as usize).clamp(1, total);
        let mut pulls = vec![0u64; self.num_arms];
        for ep in &self.arm_stats[total - window..] {
            for (p, s) in pulls.iter_mut().zip(ep) {
                *p += s.pulls;
            }
        }
        let steps = (window as u64 * self.horizon as u64 * self.budget as u64) as f64;
        pulls.into_iter().map(|p| p as f64 / steps).collect()
    }

    /// Episodes in which some arm's true kernel fell outside its ball.
    pub fn coverage_failures(&self) -> usize {
        self.arm_stats
            .iter()
            .filter(|ep| ep.iter().any(|s| !s.contains_truth))
            .count()
    }

    /// Checks `|mu^t - mu*| <= bound` for every arm on every episode after
    /// `t0` whose ball holds the truth, for the optimistic, pessimistic and
    /// empirical merit estimates.
    pub fn reward_envelope(&self) -> EnvelopeReport {
        let mut report = EnvelopeReport::default();
        let (Some(eta), Some(omega)) = (self.eta, self.omega) else {
            return report;
        };
        for ep in self.arm_stats.iter().skip(self.t0 as usize) {
            for (arm, s) in ep.iter().enumerate() {
                if !s.contains_truth {
                    continue;
                }
                let bound = reward_error_bound(&s.radii, eta, omega).expect("eta, omega < 1 after t0");
                for mu in [Some(s.mu_estimate), s.mu_pessimistic, s.mu_empirical].into_iter().flatten() {
                    let err = (mu - self.mu_star[arm]).abs();
                    report.checked += 1;
                    if err > bound {
                        report.violations += 1;
                    }
                    if bound > 0.0 {
                        report.worst_ratio = report.worst_ratio.max(err / bound);
                    }
                }
            }
        }
        report
    }
}

/// Runs one seed of `config`.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    config.validate()?;
    let started = Instant::now();
    let n = config.num_arms;
    let k = config.budget;
    let g = ExponentialMerit::new(config.c)?;
    let params = ConfidenceParams::new(config.delta, n)?;

    let kernels = config.population(seed)?;
    let mu_star = true_merits(&kernels)?;
    let pi_star = fair_distribution(&mu_star, &g);
    let scalable = scaled_fairness_regret_increment(&pi_star, &pi_star, k).is_ok();

    let mut env = Environment::new(kernels.clone(), k, stream(seed, Stream::Environment))?;
    let mut sampler = stream(seed, Stream::Sampler);

    let mut counts = vec![TransitionCounts::new(); n];
    let mut visits = VisitationTracker::new(n);
    let mut assumption = AssumptionTracker::new();
    let mut regret = RegretLedger::new(scalable);
    let mut exposure = vec![0u64; n];
    let mut arm_stats = Vec::with_capacity(config.episodes as usize);

    for t in 1..=config.episodes {
        let models: Vec<ConfidenceModel> = counts
            .iter()
            .map(|c| ConfidenceModel::build(c, &params, t))
            .collect();
        let mu_t = models
            .iter()
            .map(|m| arm_reward(&m.optimistic))
            .collect::<Result<Vec<_>>>()?;
        let pi_t = match config.algorithm {
            Algorithm::MfRmab => fair_distribution(&mu_t, &g),
            Algorithm::Optimal => {
                let estimates: Vec<f64> = mu_t.iter().map(|m| m.value()).collect();
                optimal_baseline(&estimates, k)?.1
            }
        };

        if !config.carry_over_state || t == 1 {
            env.reset_uniform();
        }
        let trace = run_episode(&pi_t, &mut env, config.horizon, &mut sampler)?;
        check_trace(&trace, config)?;

        let gaps: Vec<GapBounds> = models.iter().map(gap_bounds).collect();
        let mut stats = Vec::with_capacity(n);
        for i in 0..n {
            let m = &models[i];
            stats.push(ArmEpisodeStats {
                radii: m.radii,
                gaps: gaps[i],
                contains_truth: contains_truth(m, &kernels[i]),
                mu_estimate: mu_t[i].value(),
                mu_pessimistic: arm_reward(&m.pessimistic).ok().map(|v| v.value()),
                mu_empirical: arm_reward(&m.empirical).ok().map(|v| v.value()),
                pi: pi_t.probs()[i],
                pulls: trace.pull_counts[i],
            });
            counts[i].extend(trace.transitions[i].iter().copied());
            exposure[i] += trace.pull_counts[i];
        }
        arm_stats.push(stats);
        visits.record_episode(&trace.visited);
        assumption.record_episode(&gaps);

        let fr = fairness_regret_increment(&pi_star, &pi_t)?;
        let scaled = scalable
            .then(|| scaled_fairness_regret_increment(&pi_star, &pi_t, k))
            .transpose()?;
        regret.push(fr, scaled);
    }

    let expected = k as u64 * config.horizon as u64 * config.episodes;
    if exposure.iter().sum::<u64>() != expected {
        return Err(Error::InvariantViolation(format!(
            "exposure sums to {} instead of K*H*T = {expected}",
            exposure.iter().sum::<u64>()
        )));
    }
    if regret.cumulative.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvariantViolation("cumulative regret decreased".into()));
    }

    Ok(RunRecord {
        config_hash: config.config_hash(),
        seed,
        algorithm: config.algorithm,
        num_arms: n,
        budget: k,
        horizon: config.horizon,
        mu_star: mu_star.iter().map(|m| m.value()).collect(),
        pi_star: pi_star.probs().to_vec(),
        regret,
        exposure,
        arm_stats,
        t0: assumption.t0(),
        assumption_verified: assumption.verified(),
        eta: assumption.eta(),
        omega: assumption.omega(),
        g_per_arm: visits.g_per_arm(),
        g_max: visits.g_max(),
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

fn check_trace(trace: &EpisodeTrace, config: &ExperimentConfig) -> Result<()> {
    if let Some(step) = trace.pulls.iter().position(|p| p.len() != config.budget) {
        return Err(Error::InvariantViolation(format!(
            "step {step} pulled {} arms instead of {}",
            trace.pulls[step].len(),
            config.budget
        )));
    }
    if let Some(arm) = trace
        .transitions
        .iter()
        .position(|t| t.len() != config.horizon as usize)
    {
        return Err(Error::InvariantViolation(format!(
            "arm {arm} produced {} transitions instead of {}",
            trace.transitions[arm].len(),
            config.horizon
        )));
    }
    Ok(())
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))
}

/// Runs every seed in `config.seeds`, in parallel across seeds. Records come
/// back in seed-list order.
pub fn run_seeds(config: &ExperimentConfig, workers: Option<usize>) -> Result<Vec<RunRecord>> {
    config.validate()?;
    pool(workers)?.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| {
                let record = run_experiment(config, seed);
                if let Ok(r) = &record {
                    log::info!(
                        "seed {seed}: FR^T = {:.3}, t0 = {}, G = {:?} ({:.2}s)",
                        r.regret.total(),
                        r.t0,
                        r.g_max,
                        r.wall_time_secs
                    );
                }
                record
            })
            .collect()
    })
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Pointwise mean and (population) standard deviation across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub fr_mean: Vec<f64>,
    pub fr_std: Vec<f64>,
    pub exposure_mean: Vec<f64>,
    pub exposure_std: Vec<f64>,
    pub final_fr_mean: f64,
    pub final_fr_std: f64,
    pub t0_mean: f64,
    pub t0_std: f64,
    /// Over runs where every arm's interval is defined.
    pub g_mean: Option<f64>,
    pub g_std: Option<f64>,
    pub eta_max: Option<f64>,
    pub omega_max: Option<f64>,
}

pub fn aggregate_runs(records: &[RunRecord]) -> Result<Aggregate> {
    let first = records
        .first()
        .ok_or_else(|| Error::MismatchedConfig("no records to aggregate".into()))?;
    if let Some(r) = records.iter().find(|r| r.config_hash != first.config_hash) {
        return Err(Error::MismatchedConfig(format!(
            "{} vs {}",
            first.config_hash, r.config_hash
        )));
    }
    let pointwise = |len: usize, get: &dyn Fn(&RunRecord, usize) -> f64| -> (Vec<f64>, Vec<f64>) {
        (0..len)
            .map(|i| mean_std(&records.iter().map(|r| get(r, i)).collect::<Vec<_>>()))
            .unzip()
    };
    let episodes = first.regret.cumulative.len();
    if records.iter().any(|r| r.regret.cumulative.len() != episodes) {
        return Err(Error::MismatchedConfig("runs have different lengths".into()));
    }
    let (fr_mean, fr_std) = pointwise(episodes, &|r, i| r.regret.cumulative[i]);
    let (exposure_mean, exposure_std) = pointwise(first.num_arms, &|r, i| r.exposure[i] as f64);
    let (final_fr_mean, final_fr_std) = mean_std(&records.iter().map(|r| r.regret.total()).collect::<Vec<_>>());
    let (t0_mean, t0_std) = mean_std(&records.iter().map(|r| r.t0 as f64).collect::<Vec<_>>());
    let gs: Vec<f64> = records.iter().filter_map(|r| r.g_max.map(|g| g as f64)).collect();
    let (g_mean, g_std) = if gs.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&gs);
        (Some(m), Some(s))
    };
    let fold_max = |xs: Vec<Option<f64>>| xs.into_iter().flatten().reduce(f64::max);
    Ok(Aggregate {
        config_hash: first.config_hash.clone(),
        seeds: records.iter().map(|r| r.seed).collect(),
        fr_mean,
        fr_std,
        exposure_mean,
        exposure_std,
        final_fr_mean,
        final_fr_std,
        t0_mean,
        t0_std,
        g_mean,
        g_std,
        eta_max: fold_max(records.iter().map(|r| r.eta).collect()),
        omega_max: fold_max(records.iter().map(|r| r.omega).collect()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub ratio: f64,
    pub k: usize,
    pub n: usize,
    pub config_hash: String,
    pub fr_final_mean: f64,
    pub fr_final_std: f64,
}

/// Budget for `ratio` of `n` arms; the product must be a whole number >= 1.
pub fn budget_for_ratio(ratio: f64, n: usize) -> Result<usize> {
    let exact = ratio * n as f64;
    let k = exact.round();
    if (exact - k).abs() > 1e-9 || k < 1.0 || k > n as f64 {
        return Err(Error::InvalidConfig(format!(
            "ratio {ratio} of {n} arms is not a whole budget in 1..={n}"
        )));
    }
    Ok(k as usize)
}

/// Final regret for each `K/N` ratio at fixed `T` and `H`.
pub fn kn_sweep(config: &ExperimentConfig, ratios: &[f64], workers: Option<usize>) -> Result<Vec<SweepPoint>> {
    ratios
        .iter()
        .map(|&ratio| {
            let k = budget_for_ratio(ratio, config.num_arms)?;
            let cfg = ExperimentConfig {
                budget: k,
                ..config.clone()
            };
            let records = run_seeds(&cfg, workers)?;
            let agg = aggregate_runs(&records)?;
            Ok(SweepPoint {
                ratio,
                k,
                n: cfg.num_arms,
                config_hash: cfg.config_hash(),
                fr_final_mean: agg.final_fr_mean,
                fr_final_std: agg.final_fr_std,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::steady_state_oracle;
    use crate::mdp::PullProbability;
    use crate::policy::successive_sampling_inclusion;
    use rand::SeedableRng;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            num_arms: 4,
            budget: 1,
            episodes: 30,
            horizon: 20,
            seeds: vec![1, 2],
            ..Default::default()
        }
    }

    fn env(kernels: Vec<TransitionKernel>, k: usize, seed: u64) -> Environment {
        Environment::new(kernels, k, ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn sticky_good_arm_occupancy() {
        let eps = 0.01;
        let k = TransitionKernel::non_degenerate([[1.0 - eps; 2]; 2], eps).unwrap();
        let mut e = env(vec![k, k], 1, 4);
        let mut good = 0;
        let steps = 10_000;
        for _ in 0..steps {
            let t = e.step(&[0]).unwrap();
            good += (t[0].to == State::Good) as usize;
        }
        let expected = steady_state_oracle(&k, PullProbability::ALWAYS).unwrap();
        assert!((good as f64 / steps as f64 - expected).abs() < 0.01);
    }

    #[test]
    fn step_preconditions() {
        let k = TransitionKernel::from_good_probs([[0.5; 2]; 2]).unwrap();
        let mut e = env(vec![k; 3], 1, 0);
        assert!(matches!(e.step(&[]), Err(Error::InvalidBudget { .. })));
        assert!(e.step(&[0, 1]).is_err());
        assert!(e.step(&[3]).is_err());
        let mut e2 = env(vec![k; 3], 2, 0);
        assert!(e2.step(&[1, 1]).is_err());
        let t = e.step(&[2]).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[2].action, Action::Pull);
        assert_eq!(t[0].action, Action::Idle);
    }

    #[test]
    fn episode_shapes() {
        let k = TransitionKernel::from_good_probs([[0.3, 0.6], [0.5, 0.9]]).unwrap();
        let mut e = env(vec![k; 4], 4, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tr = run_episode(&PullDistribution::uniform(4), &mut e, 1, &mut rng).unwrap();
        assert_eq!(tr.pull_counts, vec![1; 4]);
        assert!(tr.transitions.iter().all(|t| t.len() == 1));

        let mut e = env(vec![k; 5], 1, 0);
        let tr = run_episode(&PullDistribution::point_mass(5, 3), &mut e, 50, &mut rng).unwrap();
        assert_eq!(tr.pull_counts, vec![0, 0, 0, 50, 0]);
        assert!(tr.pulls.iter().all(|p| p == &vec![3]));
    }

    #[test]
    fn long_episode_matches_inclusion() {
        let k = TransitionKernel::from_good_probs([[0.3, 0.6], [0.5, 0.9]]).unwrap();
        let d = PullDistribution::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let incl = successive_sampling_inclusion(&d, 2).unwrap();
        let mut e = env(vec![k; 4], 2, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = 100_000u32;
        let tr = run_episode(&d, &mut e, h, &mut rng).unwrap();
        for (i, &p) in incl.iter().enumerate() {
            let f = tr.pull_counts[i] as f64 / h as f64;
            let sigma = (p * (1.0 - p) / h as f64).sqrt();
            assert!((f - p).abs() <= 3.0 * sigma, "arm {i}: {f} vs {p}");
        }
    }

    #[test]
    fn cold_start_is_uniform() {
        let cfg = ExperimentConfig {
            episodes: 1,
            ..small_config()
        };
        let r = run_experiment(&cfg, 3).unwrap();
        let first = &r.arm_stats[0];
        assert!(first.iter().all(|s| (s.pi - 0.25).abs() < 1e-15));
        assert!(first.iter().all(|s| s.mu_estimate == first[0].mu_estimate));
    }

    #[test]
    fn run_invariants_and_determinism() {
        for algorithm in [Algorithm::MfRmab, Algorithm::Optimal] {
            let cfg = ExperimentConfig {
                algorithm,
                budget: 2,
                ..small_config()
            };
            let a = run_experiment(&cfg, 7).unwrap();
            let b = run_experiment(&cfg, 7).unwrap();
            assert_eq!(
                RunRecord { wall_time_secs: 0.0, ..a.clone() },
                RunRecord { wall_time_secs: 0.0, ..b }
            );
            assert_eq!(a.exposure.iter().sum::<u64>(), 2 * 20 * 30);
            assert!(a.regret.cumulative.windows(2).all(|w| w[1] >= w[0]));
            assert!(a.regret.per_episode.iter().all(|&x| (0.0..=2.0).contains(&x)));
            assert!(a.t0 >= 1);
        }
    }

    #[test]
    fn algorithm_does_not_change_population() {
        let cfg = small_config();
        let opt = ExperimentConfig {
            algorithm: Algorithm::Optimal,
            ..cfg.clone()
        };
        let a = run_experiment(&cfg, 5).unwrap();
        let b = run_experiment(&opt, 5).unwrap();
        assert_eq!(a.mu_star, b.mu_star);
        assert_ne!(a.config_hash, b.config_hash);
    }

    #[test]
    fn optimal_baseline_pulls_a_fixed_set_per_episode() {
        let cfg = ExperimentConfig {
            algorithm: Algorithm::Optimal,
            budget: 2,
            ..small_config()
        };
        let r = run_experiment(&cfg, 2).unwrap();
        for ep in &r.arm_stats {
            let pulled: Vec<u64> = ep.iter().map(|s| s.pulls).filter(|&p| p > 0).collect();
            assert_eq!(pulled, vec![20, 20]);
        }
    }

    #[test]
    fn carry_over_toggle_changes_trajectory() {
        let cfg = small_config();
        let carry = ExperimentConfig {
            carry_over_state: true,
            ..cfg.clone()
        };
        let a = run_experiment(&cfg, 1).unwrap();
        let b = run_experiment(&carry, 1).unwrap();
        assert_eq!(a.mu_star, b.mu_star);
        assert_ne!(a.regret.cumulative, b.regret.cumulative);
    }

    #[test]
    fn config_validation() {
        let ok = small_config();
        assert!(ok.validate().is_ok());
        for bad in [
            ExperimentConfig { num_arms: 1, budget: 1, ..ok.clone() },
            ExperimentConfig { budget: 0, ..ok.clone() },
            ExperimentConfig { budget: 5, ..ok.clone() },
            ExperimentConfig { episodes: 0, ..ok.clone() },
            ExperimentConfig { delta: 1.0, ..ok.clone() },
            ExperimentConfig { epsilon: 0.5, ..ok.clone() },
            ExperimentConfig { seeds: vec![], ..ok.clone() },
            ExperimentConfig { domain: Domain::Cpap, cpap_alpha_h: 0.5, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn config_hash_ignores_seeds() {
        let a = small_config();
        let b = ExperimentConfig { seeds: vec![9], ..a.clone() };
        let c = ExperimentConfig { c: 1.0, ..a.clone() };
        assert_eq!(a.config_hash(), b.config_hash());
        assert_ne!(a.config_hash(), c.config_hash());
        assert_eq!(a.config_hash().len(), 16);
    }

    #[test]
    fn aggregation() {
        let cfg = small_config();
        let r = run_experiment(&cfg, 1).unwrap();
        let one = aggregate_runs(std::slice::from_ref(&r)).unwrap();
        assert_eq!(one.fr_mean, r.regret.cumulative);
        assert!(one.fr_std.iter().all(|&s| s == 0.0));

        let many = vec![r.clone(); 30];
        let agg = aggregate_runs(&many).unwrap();
        assert!(agg.fr_std.iter().all(|&s| s < 1e-9));
        assert!(agg.exposure_std.iter().all(|&s| s < 1e-9));

        let other = run_experiment(&ExperimentConfig { c: 1.0, ..cfg }, 1).unwrap();
        assert!(matches!(
            aggregate_runs(&[r, other]),
            Err(Error::MismatchedConfig(_))
        ));
        assert!(aggregate_runs(&[]).is_err());
    }

    #[test]
    fn ratio_budgets() {
        assert_eq!(budget_for_ratio(0.3, 10).unwrap(), 3);
        assert_eq!(budget_for_ratio(1.0, 10).unwrap(), 10);
        assert!(budget_for_ratio(0.25, 10).is_err());
        assert!(budget_for_ratio(0.05, 10).is_err());
    }
}
