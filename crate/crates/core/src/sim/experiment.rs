use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, run_session_traced, GroupAssignment, NoviceProfile, PhaseSchedule, SessionLogSummary};
use crate::analysis::ExperimentStats;
use crate::engine::EngineConfig;
use crate::store::EventPayload;
use crate::{Error, Result};

const PROFILE_STREAM: u64 = 0x70_72_6f_66;

/// Draws novice profiles for experiment subjects.
pub trait ProfileSampler: Sync {
    fn sample(&self, rng: &mut ChaCha8Rng) -> NoviceProfile;
}

impl<F> ProfileSampler for F
where
    F: Fn(&mut ChaCha8Rng) -> NoviceProfile + Sync,
{
    fn sample(&self, rng: &mut ChaCha8Rng) -> NoviceProfile {
        self(rng)
    }
}

/// A population of novices with uniformly drawn parameters.
///
/// Each subject gets a favourite reinforcer drawn uniformly; `dominant` of
/// the preference mass goes to it and the rest is spread evenly. Every other
/// field is an inclusive `[low, high]` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub n: usize,
    pub dominant: [f64; 2],
    pub base_rectify: [f64; 2],
    /// `boost * n`, the extra rectify probability for a uniform preference.
    pub boost_times_n: [f64; 2],
    pub skill: [f64; 2],
    pub learn_rate: [f64; 2],
    pub mistake_hazard: [f64; 2],
}

impl PopulationSpec {
    /// Novices that respond moderately to their favourite reinforcer
    /// (`boost * n = 0.6`, `base_rectify = 0.2`).
    pub fn responsive(n: usize) -> Self {
        Self {
            n,
            dominant: [0.7, 0.9],
            base_rectify: [0.2, 0.2],
            boost_times_n: [0.6, 0.6],
            skill: [0.0, 0.2],
            learn_rate: [0.02, 0.04],
            mistake_hazard: [0.4, 0.7],
        }
    }

    /// Novices with a strongly dominant favourite that barely respond to
    /// anything else.
    pub fn sharp(n: usize) -> Self {
        Self {
            n,
            dominant: [0.9, 0.95],
            base_rectify: [0.05, 0.05],
            boost_times_n: [0.9, 0.9],
            skill: [0.0, 0.0],
            learn_rate: [0.0, 0.01],
            mistake_hazard: [0.6, 0.9],
        }
    }

    /// Widely varying novices: some barely err, some err constantly.
    pub fn heterogeneous(n: usize) -> Self {
        Self {
            n,
            dominant: [0.4, 0.9],
            base_rectify: [0.1, 0.4],
            boost_times_n: [0.2, 0.8],
            skill: [0.0, 0.6],
            learn_rate: [0.0, 0.03],
            mistake_hazard: [0.1, 0.9],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config("population needs at least 2 reinforcers".into()));
        }
        for (name, [lo, hi]) in [
            ("dominant", self.dominant),
            ("base_rectify", self.base_rectify),
            ("skill", self.skill),
            ("learn_rate", self.learn_rate),
            ("mistake_hazard", self.mistake_hazard),
        ] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(Error::Config(format!("{name} range [{lo}, {hi}] is not within [0, 1]")));
            }
        }
        let [lo, hi] = self.boost_times_n;
        if !(0.0 <= lo && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("boost_times_n range [{lo}, {hi}] is invalid")));
        }
        if self.dominant[0] < 1.0 / self.n as f64 {
            return Err(Error::Config("dominant mass must be at least 1/n".into()));
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

impl ProfileSampler for PopulationSpec {
    fn sample(&self, rng: &mut ChaCha8Rng) -> NoviceProfile {
        let favourite = rng.gen_range(0..self.n);
        let dominant = draw(rng, self.dominant);
        NoviceProfile {
            preference: NoviceProfile::sharp_preference(self.n, favourite, dominant),
            base_rectify: draw(rng, self.base_rectify),
            boost: draw(rng, self.boost_times_n) / self.n as f64,
            skill: draw(rng, self.skill),
            learn_rate: draw(rng, self.learn_rate),
            mistake_hazard: draw(rng, self.mistake_hazard),
        }
    }
}

/// What to run: `subjects` sessions for each group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub groups: Vec<GroupAssignment>,
    pub subjects: usize,
    pub schedule: PhaseSchedule,
    /// Engine parameters; the seed is replaced per subject.
    pub config: EngineConfig,
    pub master_seed: u64,
}

#[derive(Debug, Clone)]
pub struct SubjectRun {
    pub group: GroupAssignment,
    pub index: usize,
    pub seed: u64,
    pub profile: NoviceProfile,
    pub summary: SessionLogSummary,
    pub trail: Vec<EventPayload>,
}

impl SubjectRun {
    pub fn session_id(&self) -> String {
        format!("{}-{:03}", self.group, self.index)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub stats: ExperimentStats,
    /// Ordered by (position of group in the spec, subject index).
    pub subjects: Vec<SubjectRun>,
}

/// Runs every (group, subject) session and aggregates the statistics.
///
/// Subject `j` of group `g` is seeded with `derive_seed(master, [g, j])`, so
/// its trajectory does not depend on how many other subjects run. Sessions
/// run in parallel; results are collected in a fixed order.
pub fn run_group_experiment(spec: &ExperimentSpec, sampler: &dyn ProfileSampler) -> Result<ExperimentRun> {
    if spec.subjects < 2 {
        return Err(Error::Config(format!("need at least 2 subjects per group, got {}", spec.subjects)));
    }
    if spec.groups.is_empty() {
        return Err(Error::Config("no groups to run".into()));
    }
    spec.schedule.validate()?;

    let jobs: Vec<(GroupAssignment, usize)> = spec
        .groups
        .iter()
        .flat_map(|g| (0..spec.subjects).map(move |j| (*g, j)))
        .collect();

    let subjects = jobs
        .par_iter()
        .map(|&(group, index)| {
            let seed = derive_seed(spec.master_seed, &[group.index(), index as u64]);
            let mut profile_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[PROFILE_STREAM]));
            let profile = sampler.sample(&mut profile_rng);
            let config = EngineConfig { seed, ..spec.config.clone() };
            let (summary, trail) = run_session_traced(&profile, &spec.schedule, group, &config)?;
            Ok(SubjectRun { group, index, seed, profile, summary, trail })
        })
        .collect::<Result<Vec<_>>>()?;

    let sessions: Vec<(GroupAssignment, &SessionLogSummary)> =
        subjects.iter().map(|s| (s.group, &s.summary)).collect();
    let stats = ExperimentStats::from_sessions(&spec.groups, &spec.schedule, &sessions)?;
    Ok(ExperimentRun { stats, subjects })
}
