//! Optimistic model learning for two-state arms.
//!
//! Transition counts feed an empirical kernel and a per-`(s, a)` L1
//! confidence radius. Shifting the empirical good-state probability up or
//! down by half the radius (and clipping) gives the optimistic and
//! pessimistic kernels, whose differences bound the good-state persistence
//! gap of each action.

pub mod diagnostics;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, State, Transition, TransitionKernel};

pub use diagnostics::{g_upper_bound, AssumptionTracker, VisitationTracker};

/// Slack allowed on the L1 ball boundary.
pub const BALL_SLACK: f64 = 1e-12;

/// Entry used for `(s, a)` pairs that have never been observed.
pub const UNVISITED_PRIOR: f64 = 0.5;

const STATE_COUNT: f64 = 2.0;
const ACTION_COUNT: f64 = 2.0;

/// Per-arm transition counts `N(s, a, s')`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCounts {
    n: [[[u64; 2]; 2]; 2],
}

impl TransitionCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, t: Transition) {
        self.n[t.from.index()][t.action.index()][t.to.index()] += 1;
    }

    pub fn extend<I: IntoIterator<Item = Transition>>(&mut self, observed: I) {
        for t in observed {
            self.record(t);
        }
    }

    #[inline]
    pub fn get(&self, from: State, action: Action, to: State) -> u64 {
        self.n[from.index()][action.index()][to.index()]
    }

    /// `N(s, a) = N(s, a, 0) + N(s, a, 1)`.
    #[inline]
    pub fn visits(&self, from: State, action: Action) -> u64 {
        let row = self.n[from.index()][action.index()];
        row[0] + row[1]
    }

    pub fn total(&self) -> u64 {
        self.n.iter().flatten().flatten().sum()
    }
}

/// Returns `counts` incremented by every triple in `observed`.
pub fn update_counts<I>(counts: &TransitionCounts, observed: I) -> TransitionCounts
where
    I: IntoIterator<Item = Transition>,
{
    let mut out = *counts;
    out.extend(observed);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceParams {
    pub delta: f64,
    pub num_arms: usize,
}

impl ConfidenceParams {
    pub fn new(delta: f64, num_arms: usize) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta must be in (0, 1), got {delta}")));
        }
        if num_arms < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least two arms, got {num_arms}"
            )));
        }
        Ok(Self { delta, num_arms })
    }
}

/// Confidence radii `d[s][a]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Radii(pub [[f64; 2]; 2]);

impl Radii {
    pub const ZERO: Radii = Radii([[0.0; 2]; 2]);

    #[inline]
    pub fn get(&self, from: State, action: Action) -> f64 {
        self.0[from.index()][action.index()]
    }
}

/// L1 confidence radius for every `(s, a)` at episode `episode` (1-based):
/// `sqrt(2|S| ln(2|S||A| N t^4 / delta) / max(1, N(s, a)))`.
pub fn confidence_radius(counts: &TransitionCounts, params: &ConfidenceParams, episode: u64) -> Radii {
    let t = episode.max(1) as f64;
    let log_term =
        (2.0 * STATE_COUNT * ACTION_COUNT * params.num_arms as f64 * t.powi(4) / params.delta).ln();
    let mut d = [[0.0; 2]; 2];
    for s in State::ALL {
        for a in Action::ALL {
            let n = counts.visits(s, a).max(1) as f64;
            d[s.index()][a.index()] = (2.0 * STATE_COUNT * log_term / n).sqrt();
        }
    }
    Radii(d)
}

/// Empirical kernel `N(s, a, s') / N(s, a)`; unvisited pairs get
/// [`UNVISITED_PRIOR`].
pub fn empirical_kernel(counts: &TransitionCounts) -> TransitionKernel {
    let mut good = [[UNVISITED_PRIOR; 2]; 2];
    for s in State::ALL {
        for a in Action::ALL {
            let n = counts.visits(s, a);
            if n > 0 {
                good[s.index()][a.index()] = counts.get(s, a, State::Good) as f64 / n as f64;
            }
        }
    }
    TransitionKernel::from_good_probs(good).expect("empirical frequencies are probabilities")
}

fn shifted_kernel(empirical: &TransitionKernel, radii: &Radii, sign: f64) -> TransitionKernel {
    let mut good = empirical.good_probs();
    for s in 0..2 {
        for a in 0..2 {
            good[s][a] = (good[s][a] + sign * radii.0[s][a] / 2.0).clamp(0.0, 1.0);
        }
    }
    TransitionKernel::from_good_probs(good).expect("clamped entries are probabilities")
}

/// `P+(s, a, 1) = min(1, P^(s, a, 1) + d/2)`, complement recomputed.
pub fn optimistic_kernel(empirical: &TransitionKernel, radii: &Radii) -> TransitionKernel {
    shifted_kernel(empirical, radii, 1.0)
}

/// `P-(s, a, 1) = max(0, P^(s, a, 1) - d/2)`, complement recomputed.
pub fn pessimistic_kernel(empirical: &TransitionKernel, radii: &Radii) -> TransitionKernel {
    shifted_kernel(empirical, radii, -1.0)
}

/// Snapshot of an arm's model at the start of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceModel {
    pub empirical: TransitionKernel,
    pub radii: Radii,
    pub optimistic: TransitionKernel,
    pub pessimistic: TransitionKernel,
    pub delta: f64,
    pub episode: u64,
}

impl ConfidenceModel {
    pub fn build(counts: &TransitionCounts, params: &ConfidenceParams, episode: u64) -> Self {
        let empirical = empirical_kernel(counts);
        let radii = confidence_radius(counts, params, episode);
        Self::from_parts(empirical, radii, params.delta, episode)
    }

    pub fn from_parts(empirical: TransitionKernel, radii: Radii, delta: f64, episode: u64) -> Self {
        Self {
            optimistic: optimistic_kernel(&empirical, &radii),
            pessimistic: pessimistic_kernel(&empirical, &radii),
            empirical,
            radii,
            delta,
            episode,
        }
    }
}

/// Bounds on `P(1, a, 1) - P(0, a, 1)` over the confidence ball; index 1 is
/// the pull action and index 2 the idle action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapBounds {
    pub omega1: f64,
    pub omega2: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl GapBounds {
    pub fn max_eta(&self) -> f64 {
        self.eta1.max(self.eta2)
    }

    pub fn max_omega(&self) -> f64 {
        self.omega1.max(self.omega2)
    }
}

pub fn gap_bounds(model: &ConfidenceModel) -> GapBounds {
    let (plus, minus) = (&model.optimistic, &model.pessimistic);
    let gap = |hi: &TransitionKernel, lo: &TransitionKernel, a: Action| {
        hi.to_good(State::Good, a) - lo.to_good(State::Bad, a)
    };
    GapBounds {
        omega1: gap(minus, plus, Action::Pull),
        omega2: gap(minus, plus, Action::Idle),
        eta1: gap(plus, minus, Action::Pull),
        eta2: gap(plus, minus, Action::Idle),
    }
}

/// Whether `truth` lies in the L1 ball around the empirical kernel.
pub fn contains_truth(model: &ConfidenceModel, truth: &TransitionKernel) -> bool {
    State::ALL.iter().all(|&s| {
        Action::ALL.iter().all(|&a| {
            let l1: f64 = State::ALL
                .iter()
                .map(|&n| (truth.prob(s, a, n) - model.empirical.prob(s, a, n)).abs())
                .sum();
            l1 <= model.radii.get(s, a) + BALL_SLACK
        })
    })
}

/// Upper bound on `|mu^t - mu*|` for any kernel in the ball, given global
/// gap maxima `eta` and `omega` (both < 1):
/// `(d(1,1) + 2 d(0,1) + d(1,0) + 2 d(0,0)) / ((1 - eta)(1 - omega))`.
pub fn reward_error_bound(radii: &Radii, eta: f64, omega: f64) -> Result<f64> {
    if !(eta < 1.0 && omega < 1.0) {
        return Err(Error::AssumptionViolated { eta, omega });
    }
    let d = |s, a| radii.get(s, a);
    let numerator = d(State::Good, Action::Pull)
        + 2.0 * d(State::Bad, Action::Pull)
        + d(State::Good, Action::Idle)
        + 2.0 * d(State::Bad, Action::Idle);
    Ok(numerator / ((1.0 - eta) * (1.0 - omega)))
}
