//! Simulated learners and the three-group experiment harness.

mod experiment;
mod novice;
mod schedule;
mod session;

pub use experiment::{
    run_group_experiment, ExperimentRun, ExperimentSpec, PopulationSpec, ProfileSampler,
    SubjectRun,
};
pub use novice::NoviceProfile;
pub use schedule::{Phase, PhaseSchedule, PhaseSpec};
pub use session::{
    run_session, run_session_traced, GroupAssignment, PhaseMistakes, SessionLogSummary,
    MAX_ATTEMPTS_PER_MISTAKE, RANDOM_POLICY_STREAM,
};

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a master seed and a path of
/// labels, e.g. `(master, group, subject)`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(master), |acc, p| mix64(acc ^ mix64(*p)))
}
