use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{argmax, SIMPLEX_TOLERANCE};
use crate::{Error, Result};

/// A simulated learner.
///
/// Mistakes occur with probability `mistake_hazard * (1 - skill)`. After a
/// reinforcer `r` the mistake is rectified with probability
/// `base_rectify + boost * preference[r] * n`, clamped to `[0, 1]`, and every
/// rectification adds `learn_rate` to `skill`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoviceProfile {
    /// Latent preference over reinforcers, sums to one.
    pub preference: Vec<f64>,
    pub base_rectify: f64,
    pub boost: f64,
    pub skill: f64,
    pub learn_rate: f64,
    /// Mistake probability of a novice with zero skill.
    pub mistake_hazard: f64,
}

impl NoviceProfile {
    /// Preference-blind novice over `n` reinforcers.
    pub fn uniform(n: usize) -> Self {
        Self {
            preference: vec![1.0 / n as f64; n],
            base_rectify: 0.5,
            boost: 0.0,
            skill: 0.0,
            learn_rate: 0.0,
            mistake_hazard: 0.5,
        }
    }

    /// `dominant` of the preference mass on `favourite`, the rest spread evenly.
    pub fn sharp_preference(n: usize, favourite: usize, dominant: f64) -> Vec<f64> {
        let rest = (1.0 - dominant) / (n - 1) as f64;
        (0..n).map(|i| if i == favourite { dominant } else { rest }).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.preference.len() < 2 {
            return Err(Error::Config("novice preference needs at least 2 entries".into()));
        }
        let sum: f64 = self.preference.iter().sum();
        if self.preference.iter().any(|p| !(0.0..=1.0).contains(p))
            || (sum - 1.0).abs() > SIMPLEX_TOLERANCE
        {
            return Err(Error::Config(format!(
                "novice preference must be a probability vector, got {:?}",
                self.preference
            )));
        }
        for (name, value) in [
            ("base_rectify", self.base_rectify),
            ("skill", self.skill),
            ("learn_rate", self.learn_rate),
            ("mistake_hazard", self.mistake_hazard),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {value}")));
            }
        }
        if !(self.boost >= 0.0 && self.boost.is_finite()) {
            return Err(Error::Config(format!("boost must be non-negative, got {}", self.boost)));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.preference.len()
    }

    /// The reinforcer the novice responds to best (lowest id on ties).
    pub fn true_preference(&self) -> usize {
        argmax(&self.preference)
    }

    pub fn mistake_probability(&self) -> f64 {
        self.mistake_hazard * (1.0 - self.skill)
    }

    pub fn rectify_probability(&self, reinforcer: usize) -> f64 {
        let n = self.n() as f64;
        (self.base_rectify + self.boost * self.preference[reinforcer] * n).clamp(0.0, 1.0)
    }

    /// Draws whether the next task step contains a mistake.
    pub fn step_novice<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        rng.gen::<f64>() < self.mistake_probability()
    }

    /// Draws whether the mistake is rectified after `reinforcer`.
    pub fn respond_to_reinforcer<R: Rng + ?Sized>(&mut self, reinforcer: usize, rng: &mut R) -> bool {
        let p = self.rectify_probability(reinforcer);
        self.attempt(p, rng)
    }

    /// Unassisted attempt at fixing a mistake.
    pub fn self_correct<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let p = self.base_rectify;
        self.attempt(p, rng)
    }

    fn attempt<R: Rng + ?Sized>(&mut self, p: f64, rng: &mut R) -> bool {
        let rectified = rng.gen::<f64>() < p;
        if rectified {
            self.skill = (self.skill + self.learn_rate).min(1.0);
        }
        rectified
    }
}
