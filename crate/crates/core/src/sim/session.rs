use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, NoviceProfile, Phase, PhaseSchedule};
use crate::catalog::ReinforcerCatalog;
use crate::engine::{Engine, EngineConfig, InteractionRecord, Outcome, WeightVector};
use crate::store::EventPayload;
use crate::{Error, Result};

/// Reinforcement attempts per mistake before the harness moves on.
pub const MAX_ATTEMPTS_PER_MISTAKE: u32 = 25;

const NOVICE_STREAM: u64 = 1;
/// Stream label for the uniform reinforcer draws of the random group.
pub const RANDOM_POLICY_STREAM: u64 = 2;

/// Experimental condition of a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupAssignment {
    /// No reinforcers; the learner fixes mistakes unaided.
    None,
    /// Uniformly random reinforcers, no learning.
    Random,
    /// Reinforcers chosen and updated by the engine.
    Learned,
}

impl GroupAssignment {
    pub const ALL: [GroupAssignment; 3] =
        [GroupAssignment::None, GroupAssignment::Random, GroupAssignment::Learned];

    pub fn name(self) -> &'static str {
        match self {
            GroupAssignment::None => "none",
            GroupAssignment::Random => "random",
            GroupAssignment::Learned => "learned",
        }
    }

    pub(crate) fn index(self) -> u64 {
        match self {
            GroupAssignment::None => 0,
            GroupAssignment::Random => 1,
            GroupAssignment::Learned => 2,
        }
    }
}

impl fmt::Display for GroupAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GroupAssignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(GroupAssignment::None),
            "random" => Ok(GroupAssignment::Random),
            "learned" => Ok(GroupAssignment::Learned),
            other => Err(Error::Validation(format!(
                "unknown group {other:?} (expected none, random or learned)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMistakes {
    pub phase: Phase,
    pub reinforced: bool,
    pub count: u64,
}

/// Everything a session produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLogSummary {
    pub group: GroupAssignment,
    pub mistakes_per_phase: Vec<PhaseMistakes>,
    /// Interaction records ordered by `t`. Random-group records carry the
    /// uniform selection distribution as their weights.
    pub records: Vec<InteractionRecord>,
    /// Engine's argmax reinforcer at the end of a learned session.
    pub identified_preference: Option<usize>,
    /// The simulated learner's latent favourite, when known.
    pub true_preference: Option<usize>,
}

impl SessionLogSummary {
    pub fn mistakes_before(&self) -> u64 {
        self.mistakes_per_phase.iter().filter(|p| p.reinforced).map(|p| p.count).sum()
    }

    pub fn mistakes_after(&self) -> u64 {
        self.mistakes_per_phase.iter().filter(|p| !p.reinforced).map(|p| p.count).sum()
    }

    pub fn total_mistakes(&self) -> u64 {
        self.mistakes_per_phase.iter().map(|p| p.count).sum()
    }

    pub fn total_regret(&self) -> f64 {
        self.records.iter().map(|r| r.regret).sum()
    }

    pub fn mistakes_in(&self, phase: Phase) -> u64 {
        self.mistakes_per_phase.iter().filter(|p| p.phase == phase).map(|p| p.count).sum()
    }

    /// Entropy after each interaction, starting with the fresh engine at `t = 0`.
    pub fn entropy_trajectory(&self, n: usize) -> Vec<f64> {
        std::iter::once((n as f64).log2())
            .chain(self.records.iter().map(|r| r.entropy_after))
            .collect()
    }
}

/// Runs one simulated session. See [`run_session_traced`].
pub fn run_session(
    profile: &NoviceProfile,
    schedule: &PhaseSchedule,
    group: GroupAssignment,
    config: &EngineConfig,
) -> Result<SessionLogSummary> {
    run_session_traced(profile, schedule, group, config).map(|(summary, _)| summary)
}

/// Runs one simulated session and returns its summary together with the
/// event trail (starting with `SessionStarted`, ending with `SessionEnded`).
///
/// On every step the novice may make a mistake. In reinforced phases a
/// learned session dispatches engine-selected reinforcers until the mistake
/// is rectified or [`MAX_ATTEMPTS_PER_MISTAKE`] attempts are spent, a random
/// session does the same with uniform draws, and an unreinforced (`None`)
/// novice gets one unaided attempt. Unreinforced phases only count mistakes.
///
/// All randomness derives from `config.seed`.
pub fn run_session_traced(
    profile: &NoviceProfile,
    schedule: &PhaseSchedule,
    group: GroupAssignment,
    config: &EngineConfig,
) -> Result<(SessionLogSummary, Vec<EventPayload>)> {
    schedule.validate()?;
    profile.validate()?;
    config.validate()?;
    if profile.n() != config.n {
        return Err(Error::Config(format!(
            "novice has {} preferences but the engine has {} reinforcers",
            profile.n(),
            config.n
        )));
    }

    let n = config.n;
    let mut novice = profile.clone();
    let mut novice_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[NOVICE_STREAM]));
    let mut policy_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[RANDOM_POLICY_STREAM]));
    let mut engine = match group {
        GroupAssignment::Learned => Some(Engine::new(config.clone())?),
        _ => None,
    };
    let uniform = WeightVector::uniform(n);

    let mut trail = vec![EventPayload::SessionStarted {
        config: config.clone(),
        catalog: ReinforcerCatalog::for_size(n),
        group,
    }];
    let mut records = Vec::new();
    let mut mistakes_per_phase = Vec::with_capacity(schedule.phases.len());

    for spec in &schedule.phases {
        let mut count = 0u64;
        for step in 0..spec.steps {
            if !novice.step_novice(&mut novice_rng) {
                continue;
            }
            count += 1;
            let tag = format!("{}:{step}", spec.label);
            trail.push(EventPayload::MistakeObserved { state_tag: tag.clone() });
            if !spec.reinforced {
                continue;
            }
            match group {
                GroupAssignment::None => {
                    novice.self_correct(&mut novice_rng);
                }
                GroupAssignment::Random => {
                    for _ in 0..MAX_ATTEMPTS_PER_MISTAKE {
                        let id = policy_rng.gen_range(0..n);
                        trail.push(EventPayload::ReinforcerDispatched { id });
                        let rectified = novice.respond_to_reinforcer(id, &mut novice_rng);
                        let record = InteractionRecord {
                            t: records.len() as u64 + 1,
                            state_tag: tag.clone(),
                            selected: id,
                            success: rectified,
                            weights_after: uniform.clone(),
                            entropy_after: uniform.entropy(),
                            regret: 0.0,
                        };
                        trail.push(EventPayload::OutcomeRecorded { record: record.clone() });
                        records.push(record);
                        if rectified {
                            break;
                        }
                    }
                }
                GroupAssignment::Learned => {
                    let engine = engine.as_mut().expect("learned sessions own an engine");
                    for _ in 0..MAX_ATTEMPTS_PER_MISTAKE {
                        let id = engine.select_reinforcer();
                        trail.push(EventPayload::ReinforcerDispatched { id });
                        let rectified = novice.respond_to_reinforcer(id, &mut novice_rng);
                        let outcome = Outcome { selected: id, success: rectified };
                        let record = engine.record_outcome(outcome, tag.clone())?;
                        trail.push(EventPayload::OutcomeRecorded { record: record.clone() });
                        records.push(record);
                        if rectified {
                            break;
                        }
                    }
                }
            }
        }
        mistakes_per_phase.push(PhaseMistakes {
            phase: spec.label,
            reinforced: spec.reinforced,
            count,
        });
    }

    let summary = SessionLogSummary {
        group,
        mistakes_per_phase,
        records,
        identified_preference: engine.as_ref().map(Engine::preferred_reinforcer),
        true_preference: Some(profile.true_preference()),
    };
    trail.push(EventPayload::SessionEnded { summary: summary.clone() });
    Ok((summary, trail))
}
