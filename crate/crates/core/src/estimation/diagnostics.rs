//! Run-level measurements of the learning assumptions: how quickly every
//! `(s, a)` pair of each arm is revisited, and from which episode the
//! confidence gaps stay strictly below one.

use serde::{Deserialize, Serialize};

use super::GapBounds;
use crate::error::{Error, Result};

/// Per-arm flags `visited[s][a]` for one episode.
pub type VisitFlags = [[bool; 2]; 2];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
struct PairGap {
    last_visit: Option<u64>,
    max_gap: u64,
}

/// Tracks, for every arm, the longest stretch of episodes needed before
/// each of the four `(s, a)` pairs is seen again.
///
/// The window starting right after a pair's previous visit is the longest
/// one that pair can force, so the per-arm value is the largest inter-visit
/// distance over all pairs. The first window starts at episode 1 and an
/// unfinished trailing window counts with its current length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitationTracker {
    pairs: Vec<[[PairGap; 2]; 2]>,
    episodes: u64,
}

impl VisitationTracker {
    pub fn new(num_arms: usize) -> Self {
        Self {
            pairs: vec![Default::default(); num_arms],
            episodes: 0,
        }
    }

    /// Records one episode; `flags[i]` are the pairs arm `i` visited.
    pub fn record_episode(&mut self, flags: &[VisitFlags]) {
        assert_eq!(flags.len(), self.pairs.len(), "one flag set per arm");
        self.episodes += 1;
        let t = self.episodes;
        for (arm, visited) in self.pairs.iter_mut().zip(flags) {
            for s in 0..2 {
                for a in 0..2 {
                    if visited[s][a] {
                        let pair = &mut arm[s][a];
                        let gap = t - pair.last_visit.unwrap_or(0);
                        pair.max_gap = pair.max_gap.max(gap);
                        pair.last_visit = Some(t);
                    }
                }
            }
        }
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// `None` for arms with a pair that was never visited.
    pub fn g_per_arm(&self) -> Vec<Option<u64>> {
        self.pairs
            .iter()
            .map(|arm| {
                arm.iter().flatten().try_fold(0u64, |acc, pair| {
                    let last = pair.last_visit?;
                    let tail = self.episodes - last;
                    Some(acc.max(pair.max_gap).max(tail))
                })
            })
            .collect()
    }

    /// Maximum over arms; `None` when any arm is undefined.
    pub fn g_max(&self) -> Option<u64> {
        self.g_per_arm()
            .into_iter()
            .try_fold(0u64, |acc, g| g.map(|g| acc.max(g)))
    }
}

/// Measures the first episode from which every arm's `eta1, eta2` stayed
/// below one, and the `eta`/`omega` maxima over the episodes after it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssumptionTracker {
    /// Per-episode `(max eta, max omega)` over arms.
    history: Vec<(f64, f64)>,
    last_violation: u64,
    eta_max: f64,
    omega_max: f64,
}

impl AssumptionTracker {
    pub fn new() -> Self {
        Self {
            history: Vec::new(),
            last_violation: 0,
            eta_max: f64::NEG_INFINITY,
            omega_max: f64::NEG_INFINITY,
        }
    }

    pub fn record_episode(&mut self, gaps: &[GapBounds]) {
        let eta = gaps.iter().map(GapBounds::max_eta).fold(f64::NEG_INFINITY, f64::max);
        let omega = gaps.iter().map(GapBounds::max_omega).fold(f64::NEG_INFINITY, f64::max);
        self.history.push((eta, omega));
        let t = self.history.len() as u64;
        if eta >= 1.0 {
            self.last_violation = t;
            self.recompute();
        } else if t > self.t0() {
            self.eta_max = self.eta_max.max(eta);
            self.omega_max = self.omega_max.max(omega);
        }
    }

    fn recompute(&mut self) {
        let start = self.t0() as usize;
        let (eta, omega) = self.history.iter().skip(start).fold(
            (f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(e, o), &(ei, oi)| (e.max(ei), o.max(oi)),
        );
        self.eta_max = eta;
        self.omega_max = omega;
    }

    /// One past the last episode at which some arm had `eta >= 1`.
    pub fn t0(&self) -> u64 {
        self.last_violation + 1
    }

    pub fn episodes(&self) -> u64 {
        self.history.len() as u64
    }

    /// `eta` maximum over episodes `t > t0`; `None` before any such episode.
    pub fn eta(&self) -> Option<f64> {
        self.eta_max.is_finite().then_some(self.eta_max)
    }

    pub fn omega(&self) -> Option<f64> {
        self.omega_max.is_finite().then_some(self.omega_max)
    }

    /// The gap assumption counts as verified when `t0` falls in the first
    /// half of the run.
    pub fn verified(&self) -> bool {
        let t = self.episodes();
        t > 0 && 2 * self.t0() <= t
    }
}

/// Analytic ceiling on the expected revisit interval of an arm:
/// `1 / psi` with `psi = 1 - (2(1-eps)^H + B0 - 2 B0 (1-eps)^H)` and
/// `B0 = lambda^H + (1 - merit_min / (N merit_max))^H`.
pub fn g_upper_bound(
    epsilon: f64,
    horizon: u32,
    num_arms: usize,
    merit_min: f64,
    merit_max: f64,
    lambda: f64,
) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidProbability {
            what: "non-degeneracy epsilon",
            value: epsilon,
        });
    }
    if horizon < 1 || num_arms < 1 || !(lambda < 1.0) || !(merit_min > 0.0 && merit_min <= merit_max) {
        return Err(Error::InvalidConfig(format!(
            "g bound needs H >= 1, N >= 1, lambda < 1, 0 < merit_min <= merit_max \
             (got H={horizon}, N={num_arms}, lambda={lambda}, merits={merit_min}..{merit_max})"
        )));
    }
    let h = horizon as i32;
    let stay = (1.0 - epsilon).powi(h);
    let b0 = lambda.max(0.0).powi(h) + (1.0 - merit_min / (num_arms as f64 * merit_max)).powi(h);
    let psi = 1.0 - (2.0 * stay + b0 - 2.0 * b0 * stay);
    if psi <= 0.0 {
        return Err(Error::VacuousBound { psi });
    }
    Ok(1.0 / psi)
}

/// Upper bound on any arm's per-step inclusion probability when `k` of
/// `num_arms` arms are drawn successively from weights in
/// `[merit_min, merit_max]`.
///
/// For one draw this is the largest possible share of a single weight; for
/// more draws the union bound over draws is used, each draw's share being
/// at most `w_max / (1 - (j - 1) w_max)`.
pub fn inclusion_ceiling(num_arms: usize, k: usize, merit_min: f64, merit_max: f64) -> f64 {
    let share = merit_max / (merit_max + (num_arms as f64 - 1.0) * merit_min);
    let mut total = 0.0;
    for j in 0..k {
        let remaining = 1.0 - j as f64 * share;
        if remaining <= 0.0 {
            return 1.0;
        }
        total += share / remaining;
    }
    total.min(1.0)
}
