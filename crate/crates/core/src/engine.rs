//! The reinforcer-selection engine.
//!
//! Each interaction runs five stages on the weight vector:
//!
//! 1. a raw step: the dispatched reinforcer gains `alpha` on success (loses it
//!    on failure) and the other `n - 1` reinforcers share the opposite change
//!    equally, so total mass is conserved;
//! 2. exponential smoothing against the previous smoothed vector with
//!    multiplier `ewma_phi`;
//! 3. an exploration bonus of `sigma_multiplier` sample standard deviations of
//!    each reinforcer's recent smoothed values;
//! 4. clamping to `epsilon_floor`;
//! 5. normalisation back onto the simplex.

use std::collections::VecDeque;
use std::ops::Index;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on `sum(weights) == 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_EPSILON_FLOOR: f64 = 1e-4;
pub const DEFAULT_SIGMA_MULTIPLIER: f64 = 2.0;

/// Smoothing multiplier for an EWMA spanning `window_k` interactions.
pub fn phi_for_window(window_k: usize) -> f64 {
    2.0 / (window_k as f64 + 1.0)
}

/// A probability distribution over reinforcers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Validation("weight vector is empty".into()));
        }
        if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Validation(format!("weight {bad} is not a probability")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::Validation(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Index of the heaviest reinforcer, lowest id on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.0)
    }
}

impl Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

/// Parameters of one engine instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Number of reinforcers.
    pub n: usize,
    /// Step size of the raw update.
    pub alpha: f64,
    /// Number of smoothed snapshots kept for the exploration bonus.
    pub window_k: usize,
    /// Smoothing multiplier, `2 / (window_k + 1)` unless overridden.
    pub ewma_phi: f64,
    pub epsilon_floor: f64,
    pub sigma_multiplier: f64,
    pub seed: u64,
}

impl EngineConfig {
    pub fn with_window(n: usize, alpha: f64, window_k: usize, seed: u64) -> Self {
        Self {
            n,
            alpha,
            window_k,
            ewma_phi: phi_for_window(window_k),
            epsilon_floor: DEFAULT_EPSILON_FLOOR,
            sigma_multiplier: DEFAULT_SIGMA_MULTIPLIER,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n < 2 {
            return Err(Error::Config(format!("need at least 2 reinforcers, got {n}")));
        }
        let inv_n = 1.0 / n as f64;
        if !(self.alpha > 0.0 && self.alpha < inv_n) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1/n) = (0, {inv_n}), got {}",
                self.alpha
            )));
        }
        if self.window_k == 0 {
            return Err(Error::Config("window_k must be at least 1".into()));
        }
        if !(self.ewma_phi > 0.0 && self.ewma_phi <= 1.0) {
            return Err(Error::Config(format!("ewma_phi must lie in (0, 1], got {}", self.ewma_phi)));
        }
        if !(self.epsilon_floor >= 0.0 && self.epsilon_floor < inv_n) {
            return Err(Error::Config(format!(
                "epsilon_floor must lie in [0, 1/n), got {}",
                self.epsilon_floor
            )));
        }
        if !(self.sigma_multiplier >= 0.0 && self.sigma_multiplier.is_finite()) {
            return Err(Error::Config(format!(
                "sigma_multiplier must be a non-negative number, got {}",
                self.sigma_multiplier
            )));
        }
        Ok(())
    }
}

/// The learner's response to one dispatched reinforcer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub selected: usize,
    /// The learner rectified the mistake after this reinforcer.
    pub success: bool,
}

impl Outcome {
    pub fn success(selected: usize) -> Self {
        Self { selected, success: true }
    }

    pub fn failure(selected: usize) -> Self {
        Self { selected, success: false }
    }
}

/// One selection/outcome event with the metrics observed after the update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    /// 1-based interaction index; index 0 is the fresh engine.
    pub t: u64,
    pub state_tag: String,
    pub selected: usize,
    pub success: bool,
    pub weights_after: WeightVector,
    /// Shannon entropy of `weights_after` in bits.
    pub entropy_after: f64,
    pub regret: f64,
}

/// Engine state for one learner session.
#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    weights: WeightVector,
    ewma_history: VecDeque<Vec<f64>>,
    ewma_current: Vec<f64>,
    interaction_count: u64,
    rng: ChaCha8Rng,
}

impl Engine {
    /// Fresh engine with uniform weights. The smoothed vector starts at the
    /// uniform vector, which is also the first history snapshot.
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let weights = WeightVector::uniform(config.n);
        let ewma_current = weights.as_slice().to_vec();
        let mut ewma_history = VecDeque::with_capacity(config.window_k + 1);
        ewma_history.push_back(ewma_current.clone());
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self {
            config,
            weights,
            ewma_history,
            ewma_current,
            interaction_count: 0,
            rng,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn ewma_current(&self) -> &[f64] {
        &self.ewma_current
    }

    pub fn ewma_history(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.ewma_history.iter().map(Vec::as_slice)
    }

    pub fn interaction_count(&self) -> u64 {
        self.interaction_count
    }

    pub fn entropy(&self) -> f64 {
        self.weights.entropy()
    }

    pub fn preferred_reinforcer(&self) -> usize {
        self.weights.argmax()
    }

    /// Weighted random draw of a reinforcer id. Advances the generator only.
    pub fn select_reinforcer(&mut self) -> usize {
        sample_index(self.weights.as_slice(), &mut self.rng)
    }

    /// Blends `updated` into the smoothed vector and pushes the result onto
    /// the history window.
    pub fn ewma_smooth(&mut self, updated: &[f64]) -> Vec<f64> {
        let phi = self.config.ewma_phi;
        let smoothed: Vec<f64> = updated
            .iter()
            .zip(&self.ewma_current)
            .map(|(u, prev)| u * phi + prev * (1.0 - phi))
            .collect();
        self.ewma_history.push_back(smoothed.clone());
        while self.ewma_history.len() > self.config.window_k {
            self.ewma_history.pop_front();
        }
        self.ewma_current = smoothed.clone();
        smoothed
    }

    /// `sigma_multiplier` times each reinforcer's sample standard deviation
    /// over the history window; zero with fewer than two snapshots.
    pub fn exploration_bonus(&self) -> Vec<f64> {
        let n = self.config.n;
        let len = self.ewma_history.len();
        if len < 2 {
            return vec![0.0; n];
        }
        (0..n)
            .map(|arm| {
                let mean = self.ewma_history.iter().map(|s| s[arm]).sum::<f64>() / len as f64;
                let ss: f64 = self.ewma_history.iter().map(|s| (s[arm] - mean).powi(2)).sum();
                self.config.sigma_multiplier * (ss / (len - 1) as f64).sqrt()
            })
            .collect()
    }

    /// Applies one observed outcome and returns the resulting record.
    pub fn record_outcome(
        &mut self,
        outcome: Outcome,
        state_tag: impl Into<String>,
    ) -> Result<InteractionRecord> {
        if outcome.selected >= self.config.n {
            return Err(Error::Validation(format!(
                "reinforcer {} out of range for {} reinforcers",
                outcome.selected, self.config.n
            )));
        }
        let stepped = raw_update(
            &self.weights,
            outcome,
            self.config.alpha,
            self.config.epsilon_floor,
        );
        let mut boosted = self.ewma_smooth(stepped.as_slice());
        for (w, b) in boosted.iter_mut().zip(self.exploration_bonus()) {
            *w += b;
        }
        self.weights = WeightVector(project_with_floor(&boosted, self.config.epsilon_floor));
        self.interaction_count += 1;

        Ok(InteractionRecord {
            t: self.interaction_count,
            state_tag: state_tag.into(),
            selected: outcome.selected,
            success: outcome.success,
            entropy_after: self.weights.entropy(),
            regret: regret(self.weights.as_slice(), outcome.selected),
            weights_after: self.weights.clone(),
        })
    }
}

/// Success/failure step on the dispatched reinforcer with the opposite change
/// `alpha / (n - 1)` spread over the rest, then clamped and renormalised.
pub fn raw_update(weights: &WeightVector, outcome: Outcome, alpha: f64, epsilon_floor: f64) -> WeightVector {
    let n = weights.len();
    let sign = if outcome.success { 1.0 } else { -1.0 };
    let share = alpha / (n - 1) as f64;
    let stepped: Vec<f64> = weights
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, w)| {
            if i == outcome.selected {
                w + sign * alpha
            } else {
                w - sign * share
            }
        })
        .collect();
    WeightVector(project_with_floor(&stepped, epsilon_floor))
}

/// Clamps every entry to at least `floor`, then scales so the entries sum to
/// one. Entries that the scaling would push back under the floor are pinned
/// at the floor and the remaining mass is rescaled again.
pub(crate) fn project_with_floor(values: &[f64], floor: f64) -> Vec<f64> {
    let clamped: Vec<f64> = values.iter().map(|v| v.max(floor)).collect();
    let mut pinned = vec![false; clamped.len()];
    loop {
        let pinned_count = pinned.iter().filter(|p| **p).count();
        let free_sum: f64 = clamped
            .iter()
            .zip(&pinned)
            .filter(|(_, p)| !**p)
            .map(|(v, _)| v)
            .sum();
        let scale = (1.0 - floor * pinned_count as f64) / free_sum;
        let mut changed = false;
        for (v, p) in clamped.iter().zip(pinned.iter_mut()) {
            if !*p && v * scale < floor {
                *p = true;
                changed = true;
            }
        }
        if !changed {
            return clamped
                .iter()
                .zip(&pinned)
                .map(|(v, p)| if *p { floor } else { v * scale })
                .collect();
        }
    }
}

/// Shannon entropy in bits with `0 log 0 = 0`.
pub fn entropy(weights: &[f64]) -> f64 {
    let h: f64 = weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| -w * w.log2())
        .sum();
    // Guard against -0.0 and tiny negative rounding on point masses.
    h.max(0.0)
}

/// Gap between the heaviest weight and the weight of the dispatched reinforcer.
pub fn regret(weights: &[f64], selected: usize) -> f64 {
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max - weights[selected]
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (i, w) in weights.iter().enumerate() {
        cumulative += w;
        if u < cumulative {
            return i;
        }
    }
    // Rounding left the cumulative sum a hair under 1.
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}
