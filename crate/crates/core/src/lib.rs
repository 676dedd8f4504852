//! Mutual reinforcement learning: an expert agent that learns which positive
//! reinforcer a learner responds to, by weighted random selection over a
//! small catalog of reinforcers and success/failure weight updates smoothed
//! with an exponentially weighted moving average.
//!
//! The crate is organised as
//!
//! - [`engine`]: weight vectors, the update rule, entropy and regret;
//! - [`catalog`]: the reinforcer catalogs (robot and block-game variants);
//! - [`sim`]: simulated novices, phase schedules and group experiments;
//! - [`analysis`]: entropy sweeps, transition matrices, stationary
//!   distributions, plateau detection and the statistics used by experiments;
//! - [`store`]: the append-only event log and deterministic replay;
//! - [`config`]: the run configuration file.

pub mod analysis;
pub mod catalog;
pub mod config;
pub mod engine;
mod error;
pub mod sim;
pub mod store;

pub use catalog::{CatalogKind, Reinforcer, ReinforcerCatalog};
pub use engine::{
    entropy, raw_update, regret, Engine, EngineConfig, InteractionRecord, Outcome, WeightVector,
};
pub use error::{Error, Result};
pub use sim::{GroupAssignment, NoviceProfile, Phase, PhaseSchedule, SessionLogSummary};
