//! Merit-proportional pull distributions, the top-K baseline, sampling of
//! `K` arms per step, and fairness-regret accounting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{arm_reward, MeritValue, TransitionKernel};

const SUM_TOLERANCE: f64 = 1e-12;

/// A nondecreasing, strictly positive map from merit to weight.
///
/// `gamma` is a floor on `weight` over `[-1, 1]` and `lipschitz` a Lipschitz
/// constant there.
pub trait MeritFunction {
    fn weight(&self, merit: f64) -> f64;
    fn gamma(&self) -> f64;
    fn lipschitz(&self) -> f64;
}

/// `g(mu) = exp(c * mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialMerit {
    c: f64,
}

impl ExponentialMerit {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidConfig(format!("merit exponent c must be >= 0, got {c}")));
        }
        Ok(Self { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

impl MeritFunction for ExponentialMerit {
    #[inline]
    fn weight(&self, merit: f64) -> f64 {
        (self.c * merit).exp()
    }

    fn gamma(&self) -> f64 {
        (-self.c).exp()
    }

    fn lipschitz(&self) -> f64 {
        self.c * self.c.exp()
    }
}

/// Probability of each arm being chosen by a single draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullDistribution {
    pi: Vec<f64>,
}

impl PullDistribution {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.is_empty() {
            return Err(Error::InvalidConfig("empty pull distribution".into()));
        }
        if let Some(&bad) = pi.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidProbability {
                what: "pull distribution entry",
                value: bad,
            });
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidProbability {
                what: "pull distribution total",
                value: total,
            });
        }
        Ok(Self { pi })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            pi: vec![1.0 / n as f64; n],
        }
    }

    /// All mass on `arm`.
    pub fn point_mass(n: usize, arm: usize) -> Self {
        let mut pi = vec![0.0; n];
        pi[arm] = 1.0;
        Self { pi }
    }

    pub fn probs(&self) -> &[f64] {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

/// `pi_i = g(mu_i) / sum_j g(mu_j)`.
pub fn fair_distribution<G: MeritFunction + ?Sized>(merits: &[MeritValue], g: &G) -> PullDistribution {
    let weights: Vec<f64> = merits.iter().map(|m| g.weight(m.value())).collect();
    let total: f64 = weights.iter().sum();
    PullDistribution {
        pi: weights.into_iter().map(|w| w / total).collect(),
    }
}

pub fn true_merits(kernels: &[TransitionKernel]) -> Result<Vec<MeritValue>> {
    kernels.iter().map(arm_reward).collect()
}

/// The benchmark distribution built from the true kernels.
pub fn optimal_fair_oracle<G: MeritFunction + ?Sized>(
    kernels: &[TransitionKernel],
    g: &G,
) -> Result<PullDistribution> {
    Ok(fair_distribution(&true_merits(kernels)?, g))
}

/// Draws `k` distinct arms by successive proportional draws, renormalizing
/// over the arms not yet chosen. Arms are returned in draw order.
pub fn sample_k_without_replacement<R: Rng + ?Sized>(
    dist: &PullDistribution,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(k);
    let mut scratch = Vec::new();
    sample_into(dist.probs(), k, rng, &mut scratch, &mut out)?;
    Ok(out)
}

pub(crate) fn sample_into<R: Rng + ?Sized>(
    pi: &[f64],
    k: usize,
    rng: &mut R,
    weights: &mut Vec<f64>,
    out: &mut Vec<usize>,
) -> Result<()> {
    let n = pi.len();
    if k == 0 || k > n {
        return Err(Error::InvalidBudget { k, n });
    }
    out.clear();
    if k == n {
        out.extend(0..n);
        return Ok(());
    }
    weights.clear();
    weights.extend_from_slice(pi);
    for _ in 0..k {
        let remaining: f64 = weights.iter().sum();
        let chosen = if remaining > 0.0 {
            let target = rng.random::<f64>() * remaining;
            let mut acc = 0.0;
            let mut pick = 0;
            for (i, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    acc += w;
                    pick = i;
                    if target < acc {
                        break;
                    }
                }
            }
            pick
        } else {
            // Only zero-weight arms are left: pick uniformly among them.
            let free: Vec<usize> = (0..n).filter(|i| !out.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        weights[chosen] = 0.0;
        out.push(chosen);
    }
    Ok(())
}

/// Exact probability that each arm is among the `k` arms drawn by
/// [`sample_k_without_replacement`], by enumerating every ordered draw
/// sequence. Exponential in `k`; intended for small `n`.
pub fn successive_sampling_inclusion(dist: &PullDistribution, k: usize) -> Result<Vec<f64>> {
    let n = dist.len();
    if k == 0 || k > n {
        return Err(Error::InvalidBudget { k, n });
    }
    fn walk(pi: &[f64], k: usize, taken: &mut Vec<usize>, prob: f64, incl: &mut [f64]) {
        if taken.len() == k || prob == 0.0 {
            if prob > 0.0 {
                for &i in taken.iter() {
                    incl[i] += prob;
                }
            }
            return;
        }
        let remaining: f64 = (0..pi.len()).filter(|i| !taken.contains(i)).map(|i| pi[i]).sum();
        let free: Vec<usize> = (0..pi.len()).filter(|i| !taken.contains(i)).collect();
        for &i in &free {
            let p = if remaining > 0.0 {
                pi[i] / remaining
            } else {
                1.0 / free.len() as f64
            };
            taken.push(i);
            walk(pi, k, taken, prob * p, incl);
            taken.pop();
        }
    }
    let mut incl = vec![0.0; n];
    walk(dist.probs(), k, &mut Vec::with_capacity(k), 1.0, &mut incl);
    Ok(incl)
}

/// Top-`k` arms by estimated merit (ties to the lower index) and the
/// distribution that spreads `1/k` over them, used for regret accounting.
pub fn optimal_baseline(merit_estimates: &[f64], k: usize) -> Result<(Vec<usize>, PullDistribution)> {
    let n = merit_estimates.len();
    if k == 0 || k > n {
        return Err(Error::InvalidBudget { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| merit_estimates[b].total_cmp(&merit_estimates[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    let mut pi = vec![0.0; n];
    for &i in &order {
        pi[i] = 1.0 / k as f64;
    }
    Ok((order, PullDistribution { pi }))
}

/// `sum_i |pi*_i - pi_i|`.
pub fn fairness_regret_increment(pi_star: &PullDistribution, pi_t: &PullDistribution) -> Result<f64> {
    if pi_star.len() != pi_t.len() {
        return Err(Error::LengthMismatch {
            left: pi_star.len(),
            right: pi_t.len(),
        });
    }
    Ok(pi_star
        .probs()
        .iter()
        .zip(pi_t.probs())
        .map(|(a, b)| (a - b).abs())
        .sum())
}

/// Regret with both distributions scaled by `k`; only meaningful when no
/// arm's benchmark share exceeds `1/k`.
pub fn scaled_fairness_regret_increment(
    pi_star: &PullDistribution,
    pi_t: &PullDistribution,
    k: usize,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidBudget { k, n: pi_star.len() });
    }
    let cap = 1.0 / k as f64;
    if let Some((arm, &pi)) = pi_star
        .probs()
        .iter()
        .enumerate()
        .find(|(_, &p)| p > cap + SUM_TOLERANCE)
    {
        return Err(Error::InfeasibleScaling { arm, pi, k });
    }
    Ok(k as f64 * fairness_regret_increment(pi_star, pi_t)?)
}

/// Per-episode and cumulative fairness regret.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub per_episode: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// `k`-scaled cumulative regret, absent when scaling is infeasible.
    pub scaled_cumulative: Option<Vec<f64>>,
}

impl RegretLedger {
    pub fn new(scaled: bool) -> Self {
        Self {
            scaled_cumulative: scaled.then(Vec::new),
            ..Default::default()
        }
    }

    pub fn push(&mut self, fr: f64, scaled: Option<f64>) {
        let total = self.total() + fr;
        self.per_episode.push(fr);
        self.cumulative.push(total);
        if let (Some(cum), Some(x)) = (self.scaled_cumulative.as_mut(), scaled) {
            let prev = cum.last().copied().unwrap_or(0.0);
            cum.push(prev + x);
        }
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Cumulative regret after episode `t` (1-based).
    pub fn at(&self, t: usize) -> Option<f64> {
        t.checked_sub(1).and_then(|i| self.cumulative.get(i).copied())
    }
}
