//! Merit-fair online learning for restless multi-armed bandits.
//!
//! Each arm is a two-state Markov chain whose dynamics depend on whether it
//! is pulled. An arm's merit is how much pulling it raises the long-run share
//! of time it spends in the good state. The learner estimates every arm's
//! merit from observed transitions, using an optimistic confidence ball, and
//! pulls `K` of `N` arms per step with probabilities proportional to a
//! positive function of those estimates.

pub mod cli;
pub mod datasets;
pub mod error;
pub mod estimation;
pub mod mdp;
pub mod policy;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use mdp::{arm_reward, steady_state, Action, MeritValue, PullProbability, State, Transition, TransitionKernel};
pub use policy::{fair_distribution, ExponentialMerit, MeritFunction, PullDistribution};
pub use sim::{run_experiment, Algorithm, Domain, ExperimentConfig, RunRecord};
