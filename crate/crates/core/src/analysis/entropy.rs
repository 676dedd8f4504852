use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::EngineConfig;
use crate::sim::{derive_seed, run_session, GroupAssignment, NoviceProfile, PhaseSchedule};
use crate::{Error, Result};

/// Entropy (bits) against interaction index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySeries {
    values: Vec<(u64, f64)>,
}

impl EntropySeries {
    pub fn new(values: Vec<(u64, f64)>) -> Result<Self> {
        if values.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Validation("entropy series indices must be strictly increasing".into()));
        }
        if values.iter().any(|(_, h)| !h.is_finite() || *h < 0.0) {
            return Err(Error::Validation("entropy values must be finite and non-negative".into()));
        }
        Ok(Self { values })
    }

    /// Series indexed `0, 1, 2, ...`.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().enumerate().map(|(t, h)| (t as u64, *h)).collect())
    }

    pub fn values(&self) -> &[(u64, f64)] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first(&self) -> Option<f64> {
        self.values.first().map(|(_, h)| *h)
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().map(|(_, h)| *h)
    }

    /// First index whose entropy is strictly below `threshold`.
    pub fn first_below(&self, threshold: f64) -> Option<u64> {
        self.values.iter().find(|(_, h)| *h < threshold).map(|(t, _)| *t)
    }

    /// `t,entropy` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,entropy\n");
        for (t, h) in &self.values {
            out.push_str(&format!("{t},{h}\n"));
        }
        out
    }
}

/// The smallest index `t` such that every later consecutive change is
/// below `tolerance`. A series with fewer than two points carries no change
/// information and yields `None`.
pub fn detect_plateau(series: &EntropySeries, tolerance: f64) -> Option<u64> {
    let v = series.values();
    if v.len() < 2 {
        return None;
    }
    // Walk back from the final pair while the changes stay small.
    let mut start = None;
    for i in (0..v.len() - 1).rev() {
        if (v[i + 1].1 - v[i].1).abs() < tolerance {
            start = Some(i);
        } else {
            break;
        }
    }
    start.map(|i| v[i].0)
}

/// A learner and task used for every seed of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepScenario {
    pub profile: NoviceProfile,
    pub schedule: PhaseSchedule,
    /// Base engine parameters; `alpha` and `seed` are overridden per run.
    pub config: EngineConfig,
}

/// Mean of identical values is returned bit-exactly.
fn stable_mean(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut iter = xs.clone();
    let Some(first) = iter.next() else { return f64::NAN };
    let count = xs.clone().count() as f64;
    first + xs.map(|x| x - first).sum::<f64>() / count
}

/// Runs learned sessions for each step size and seed, and averages the
/// entropy trajectory across seeds, truncated to the shortest session.
pub fn alpha_sweep(alphas: &[f64], scenario: &SweepScenario, seeds: usize) -> Result<Vec<(f64, EntropySeries)>> {
    if alphas.is_empty() {
        return Err(Error::Config("alpha sweep needs at least one alpha".into()));
    }
    if seeds == 0 {
        return Err(Error::Config("alpha sweep needs at least one seed".into()));
    }
    let n = scenario.config.n;
    alphas
        .iter()
        .map(|&alpha| {
            let config = EngineConfig { alpha, ..scenario.config.clone() };
            config.validate()?;
            let trajectories = (0..seeds)
                .into_par_iter()
                .map(|s| {
                    let run_config = EngineConfig {
                        seed: derive_seed(scenario.config.seed, &[s as u64]),
                        ..config.clone()
                    };
                    run_session(&scenario.profile, &scenario.schedule, GroupAssignment::Learned, &run_config)
                        .map(|summary| summary.entropy_trajectory(n))
                })
                .collect::<Result<Vec<_>>>()?;
            let len = trajectories.iter().map(Vec::len).min().unwrap_or(0);
            let mean: Vec<f64> = (0..len)
                .map(|t| stable_mean(trajectories.iter().map(move |tr| tr[t])))
                .collect();
            Ok((alpha, EntropySeries::from_values(&mean)?))
        })
        .collect()
}
