use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Skill-acquisition stage labels used to name experiment phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    GuidedResponseI,
    GuidedResponseII,
    Mechanism,
    Adaptation,
    GuidedResponse,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::GuidedResponseI => "GuidedResponseI",
            Phase::GuidedResponseII => "GuidedResponseII",
            Phase::Mechanism => "Mechanism",
            Phase::Adaptation => "Adaptation",
            Phase::GuidedResponse => "GuidedResponse",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Phase::GuidedResponseI,
            Phase::GuidedResponseII,
            Phase::Mechanism,
            Phase::Adaptation,
            Phase::GuidedResponse,
        ]
        .into_iter()
        .find(|p| p.name() == s)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub label: Phase,
    pub steps: u32,
    /// Whether reinforcers are dispatched on mistakes during this phase.
    pub reinforced: bool,
}

/// Ordered task phases. Reinforced phases count as "before" skill transfer,
/// unreinforced ones as "after".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub phases: Vec<PhaseSpec>,
}

impl PhaseSchedule {
    pub fn new(phases: Vec<PhaseSpec>) -> Result<Self> {
        let schedule = Self { phases };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Two reinforced guided-response halves followed by unreinforced
    /// mechanism and adaptation phases.
    pub fn robot() -> Self {
        Self {
            phases: vec![
                PhaseSpec { label: Phase::GuidedResponseI, steps: 30, reinforced: true },
                PhaseSpec { label: Phase::GuidedResponseII, steps: 30, reinforced: true },
                PhaseSpec { label: Phase::Mechanism, steps: 20, reinforced: false },
                PhaseSpec { label: Phase::Adaptation, steps: 20, reinforced: false },
            ],
        }
    }

    /// One reinforced guided-response phase, then unreinforced adaptation.
    pub fn game() -> Self {
        Self {
            phases: vec![
                PhaseSpec { label: Phase::GuidedResponse, steps: 60, reinforced: true },
                PhaseSpec { label: Phase::Adaptation, steps: 20, reinforced: false },
            ],
        }
    }

    /// A single reinforced phase of `steps` steps.
    pub fn reinforced_only(label: Phase, steps: u32) -> Self {
        Self { phases: vec![PhaseSpec { label, steps, reinforced: true }] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps() == 0 {
            return Err(Error::Config("phase schedule has zero steps".into()));
        }
        if let Some(first_unreinforced) = self.phases.iter().position(|p| !p.reinforced) {
            if !self.phases[..first_unreinforced].iter().any(|p| p.reinforced) {
                return Err(Error::Config(
                    "an unreinforced phase must be preceded by a reinforced phase".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u64 {
        self.phases.iter().map(|p| u64::from(p.steps)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        assert!(PhaseSchedule::robot().validate().is_ok());
        assert!(PhaseSchedule::game().validate().is_ok());
    }

    #[test]
    fn rejects_bad_schedules() {
        assert!(PhaseSchedule::new(vec![]).is_err());
        assert!(PhaseSchedule::new(vec![PhaseSpec {
            label: Phase::GuidedResponse,
            steps: 0,
            reinforced: true
        }])
        .is_err());
        assert!(PhaseSchedule::new(vec![
            PhaseSpec { label: Phase::Mechanism, steps: 3, reinforced: false },
            PhaseSpec { label: Phase::GuidedResponse, steps: 3, reinforced: true },
        ])
        .is_err());
    }

    #[test]
    fn phase_names_round_trip() {
        for p in [Phase::GuidedResponseI, Phase::Mechanism, Phase::GuidedResponse] {
            assert_eq!(Phase::parse(p.name()), Some(p));
        }
        assert_eq!(Phase::parse("Origination"), None);
    }
}
