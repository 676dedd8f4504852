//! Entropy trajectories, step-size sweeps, weight-state Markov chains and
//! the statistics behind the group experiments.

mod entropy;
mod experiment;
mod markov;
mod stats;

pub use entropy::{alpha_sweep, detect_plateau, EntropySeries, SweepScenario};
pub use experiment::{
    preference_accuracy, regret_mistake_correlation, ExperimentStats, GroupStats, PairwiseTest,
};
pub use markov::{
    build_transition_matrix, stationary_by_power_iteration, stationary_distribution, ChainSpec,
    Stationary, TransitionMatrix, DAMPING, DEFAULT_STATE_CAP,
};
pub use stats::{mean, mean_sd, pearson, welch_t_test, MeanSd, WelchTest};
