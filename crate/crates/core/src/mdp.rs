//! Two-state, two-action controlled Markov chains.
//!
//! Every arm is a chain over `{Bad, Good}` with a pull/no-pull action. The
//! quantities that matter downstream are the stationary probability of the
//! good state under a fixed per-step pull probability, and the difference of
//! that probability between always pulling and never pulling (the arm's
//! merit).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum tolerance for kernel validation.
pub const ROW_TOLERANCE: f64 = 1e-12;

/// Smallest steady-state denominator accepted before reporting degeneracy.
pub const DENOMINATOR_TOLERANCE: f64 = 1e-9;

const ORACLE_MAX_ITERATIONS: usize = 1_000_000;
const ORACLE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum State {
    Bad = 0,
    Good = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Idle = 0,
    Pull = 1,
}

impl State {
    pub const ALL: [State; 2] = [State::Bad, State::Good];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_good(good: bool) -> Self {
        if good {
            State::Good
        } else {
            State::Bad
        }
    }
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Idle, Action::Pull];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_pulled(pulled: bool) -> Self {
        if pulled {
            Action::Pull
        } else {
            Action::Idle
        }
    }
}

/// One observed `(s, a, s')` step of an arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transition {
    pub from: State,
    pub action: Action,
    pub to: State,
}

impl Transition {
    pub fn new(from: State, action: Action, to: State) -> Self {
        Self { from, action, to }
    }
}

/// Full `2 x 2 x 2` transition tensor, indexed `[s][a][s']`.
///
/// Both `s' = 0` and `s' = 1` entries are stored and each `(s, a)` row is
/// checked to sum to one. A kernel may additionally record the `epsilon` it
/// was validated against, in which case every entry lies in
/// `[epsilon, 1 - epsilon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionKernel {
    p: [[[f64; 2]; 2]; 2],
    epsilon: Option<f64>,
}

impl TransitionKernel {
    /// Builds a kernel from the full tensor, checking every row is a
    /// probability distribution.
    pub fn new(p: [[[f64; 2]; 2]; 2]) -> Result<Self> {
        for s in 0..2 {
            for a in 0..2 {
                let row = p[s][a];
                if row.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > 1.0) {
                    return Err(Error::InvalidKernel(format!(
                        "entry outside [0, 1] at (s={s}, a={a}): {row:?}"
                    )));
                }
                if (row[0] + row[1] - 1.0).abs() > ROW_TOLERANCE {
                    return Err(Error::InvalidKernel(format!(
                        "row (s={s}, a={a}) sums to {}",
                        row[0] + row[1]
                    )));
                }
            }
        }
        Ok(Self { p, epsilon: None })
    }

    /// Builds a kernel from `good[s][a] = P(s, a, Good)`; the complement
    /// entries are filled in.
    pub fn from_good_probs(good: [[f64; 2]; 2]) -> Result<Self> {
        let mut p = [[[0.0; 2]; 2]; 2];
        for s in 0..2 {
            for a in 0..2 {
                p[s][a] = [1.0 - good[s][a], good[s][a]];
            }
        }
        Self::new(p)
    }

    /// Like [`from_good_probs`](Self::from_good_probs) but also requires every
    /// entry to lie in `[epsilon, 1 - epsilon]`.
    pub fn non_degenerate(good: [[f64; 2]; 2], epsilon: f64) -> Result<Self> {
        Self::from_good_probs(good)?.with_epsilon(epsilon)
    }

    /// Validates non-degeneracy and records `epsilon` on the kernel.
    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::InvalidProbability {
                what: "non-degeneracy epsilon",
                value: epsilon,
            });
        }
        let slack = ROW_TOLERANCE;
        for (s, by_action) in self.p.iter().enumerate() {
            for (a, row) in by_action.iter().enumerate() {
                for (n, &x) in row.iter().enumerate() {
                    if x < epsilon - slack || x > 1.0 - epsilon + slack {
                        return Err(Error::InvalidKernel(format!(
                            "P({s},{a},{n}) = {x} outside [{epsilon}, {}]",
                            1.0 - epsilon
                        )));
                    }
                }
            }
        }
        self.epsilon = Some(epsilon);
        Ok(self)
    }

    #[inline]
    pub fn prob(&self, from: State, action: Action, to: State) -> f64 {
        self.p[from.index()][action.index()][to.index()]
    }

    /// `P(s, a, Good)`.
    #[inline]
    pub fn to_good(&self, from: State, action: Action) -> f64 {
        self.p[from.index()][action.index()][1]
    }

    pub fn good_probs(&self) -> [[f64; 2]; 2] {
        [
            [self.p[0][0][1], self.p[0][1][1]],
            [self.p[1][0][1], self.p[1][1][1]],
        ]
    }

    pub fn tensor(&self) -> &[[[f64; 2]; 2]; 2] {
        &self.p
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    /// True when the pull and no-pull slices coincide.
    pub fn action_independent(&self) -> bool {
        (0..2).all(|s| self.p[s][0] == self.p[s][1])
    }
}

/// Probability that an arm is pulled at each step.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PullProbability(f64);

impl PullProbability {
    pub const NEVER: Self = Self(0.0);
    pub const ALWAYS: Self = Self(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::InvalidProbability {
                what: "pull probability",
                value,
            })
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Steady-state benefit of pulling an arm, in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct MeritValue(f64);

impl MeritValue {
    pub fn new(value: f64) -> Result<Self> {
        if (-1.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::InvalidProbability {
                what: "merit value",
                value,
            })
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Probability of moving into the good state from `from` when the arm is
/// pulled with probability `p` at each step.
#[inline]
fn mixed_to_good(kernel: &TransitionKernel, from: State, p: f64) -> f64 {
    (1.0 - p) * kernel.to_good(from, Action::Idle) + p * kernel.to_good(from, Action::Pull)
}

/// Stationary probability of the good state under a fixed pull probability.
///
/// Closed form of the fixed point `f = f * q1 + (1 - f) * q0` where `q_s` is
/// the policy-averaged probability of moving to the good state from `s`:
/// `f = q0 / (1 - q1 + q0)`.
pub fn steady_state(kernel: &TransitionKernel, p: PullProbability) -> Result<f64> {
    let q0 = mixed_to_good(kernel, State::Bad, p.value());
    let q1 = mixed_to_good(kernel, State::Good, p.value());
    let denominator = 1.0 - q1 + q0;
    if denominator.abs() < DENOMINATOR_TOLERANCE {
        return Err(Error::DegenerateKernel { denominator });
    }
    Ok((q0 / denominator).clamp(0.0, 1.0))
}

/// Stationary probability of the good state by power iteration on the
/// policy-averaged `2 x 2` chain.
///
/// Independent of [`steady_state`]; intended as a cross-check.
pub fn steady_state_oracle(kernel: &TransitionKernel, p: PullProbability) -> Result<f64> {
    let p = p.value();
    let mut m = [[0.0; 2]; 2];
    for s in State::ALL {
        for n in State::ALL {
            m[s.index()][n.index()] = (1.0 - p) * kernel.prob(s, Action::Idle, n)
                + p * kernel.prob(s, Action::Pull, n);
        }
    }
    let mut dist = [0.5, 0.5];
    for _ in 0..ORACLE_MAX_ITERATIONS {
        let next = [
            dist[0] * m[0][0] + dist[1] * m[1][0],
            dist[0] * m[0][1] + dist[1] * m[1][1],
        ];
        let delta = (next[0] - dist[0]).abs().max((next[1] - dist[1]).abs());
        dist = next;
        if delta < ORACLE_TOLERANCE {
            return Ok(dist[1] / (dist[0] + dist[1]));
        }
    }
    Err(Error::NonConvergence {
        iterations: ORACLE_MAX_ITERATIONS,
    })
}

/// Merit of an arm: stationary good-state probability when always pulled
/// minus the same when never pulled.
pub fn arm_reward(kernel: &TransitionKernel) -> Result<MeritValue> {
    let always = steady_state(kernel, PullProbability::ALWAYS)?;
    let never = steady_state(kernel, PullProbability::NEVER)?;
    Ok(MeritValue((always - never).clamp(-1.0, 1.0)))
}

/// The merit written directly in terms of the kernel's pull and no-pull
/// slices, without going through [`steady_state`].
pub fn arm_reward_simplified(kernel: &TransitionKernel) -> Result<f64> {
    let pulled = {
        let den = 1.0 - kernel.to_good(State::Good, Action::Pull)
            + kernel.to_good(State::Bad, Action::Pull);
        if den.abs() < DENOMINATOR_TOLERANCE {
            return Err(Error::DegenerateKernel { denominator: den });
        }
        kernel.to_good(State::Bad, Action::Pull) / den
    };
    let idle = {
        let den = 1.0 - kernel.to_good(State::Good, Action::Idle)
            + kernel.to_good(State::Bad, Action::Idle);
        if den.abs() < DENOMINATOR_TOLERANCE {
            return Err(Error::DegenerateKernel { denominator: den });
        }
        kernel.to_good(State::Bad, Action::Idle) / den
    };
    Ok(pulled - idle)
}
