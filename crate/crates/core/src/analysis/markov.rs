//! Weight-state transition chains and their stationary distributions.
//!
//! States are weight vectors reachable from the uniform vector under the raw
//! step alone (no smoothing, no exploration bonus): a success on reinforcer
//! `i` adds `alpha_gain` to it and removes `beta_redistribution` from every
//! other reinforcer, a failure does the opposite, and the result is clamped
//! at zero and renormalised. From state `w` reinforcer `i` is chosen with
//! probability `w[i]` and succeeds with `success_probability[i]`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::engine::{project_with_floor, WeightVector};
use crate::{Error, Result};

/// Weight of the uniform teleport mixed into the chain before solving.
pub const DAMPING: f64 = 1e-12;
pub const DEFAULT_STATE_CAP: usize = 100_000;

const ROW_TOLERANCE: f64 = 1e-12;
const DEDUP_GRID: f64 = 1e-12;
const DENSE_LIMIT: usize = 800;
const RESIDUAL_LIMIT: f64 = 1e-10;

/// A sparse row-stochastic matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    /// Row `i` lists `(column, probability)` pairs sorted by column.
    rows: Vec<Vec<(usize, f64)>>,
    /// Weight vector of each state, empty for matrices built from raw rows.
    states: Vec<WeightVector>,
    pub n_reinforcers: usize,
    pub alpha_gain: f64,
    pub beta_redistribution: f64,
}

impl TransitionMatrix {
    /// Validates and wraps a dense matrix.
    pub fn from_dense(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        let mut sparse = Vec::with_capacity(size);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(Error::Validation(format!(
                    "row {i} has {} entries, expected {size}",
                    row.len()
                )));
            }
            sparse.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, p)| **p != 0.0)
                    .map(|(j, p)| (j, *p))
                    .collect(),
            );
        }
        let m = Self {
            rows: sparse,
            states: Vec::new(),
            n_reinforcers: 0,
            alpha_gain: 0.0,
            beta_redistribution: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Validation("transition matrix is empty".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if let Some((j, p)) = row.iter().find(|(j, p)| *j >= self.size() || !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::Validation(format!("entry ({i}, {j}) = {p} is not a probability")));
            }
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::Validation(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |(c, _)| *c)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0.0)
    }

    pub fn states(&self) -> &[WeightVector] {
        &self.states
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let size = self.size();
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; size];
                for (j, p) in row {
                    dense[*j] = *p;
                }
                dense
            })
            .collect()
    }

    /// Row vector times matrix.
    pub fn left_multiply(&self, pi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        for (i, row) in self.rows.iter().enumerate() {
            let weight = pi[i];
            if weight == 0.0 {
                continue;
            }
            for (j, p) in row {
                out[*j] += weight * p;
            }
        }
        out
    }

    /// `max_j |(pi M)_j - pi_j|`.
    pub fn residual(&self, pi: &[f64]) -> f64 {
        self.left_multiply(pi)
            .iter()
            .zip(pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Inputs to [`build_transition_matrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_reinforcers: usize,
    pub alpha_gain: f64,
    /// Defaults to `alpha_gain / (n - 1)`.
    pub beta_redistribution: Option<f64>,
    pub success_probability: Vec<f64>,
    /// Number of steps enumerated from the uniform state.
    pub depth: usize,
    pub state_cap: usize,
}

impl ChainSpec {
    pub fn new(n_reinforcers: usize, alpha_gain: f64, success_probability: Vec<f64>, depth: usize) -> Self {
        Self {
            n_reinforcers,
            alpha_gain,
            beta_redistribution: None,
            success_probability,
            depth,
            state_cap: DEFAULT_STATE_CAP,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta_redistribution
            .unwrap_or(self.alpha_gain / (self.n_reinforcers - 1) as f64)
    }
}

fn step(weights: &[f64], arm: usize, success: bool, alpha: f64, beta: f64) -> Vec<f64> {
    let sign = if success { 1.0 } else { -1.0 };
    let raw: Vec<f64> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| if i == arm { w + sign * alpha } else { w - sign * beta })
        .collect();
    project_with_floor(&raw, 0.0)
}

fn state_key(weights: &[f64]) -> Vec<i64> {
    weights.iter().map(|w| (w / DEDUP_GRID).round() as i64).collect()
}

/// Enumerates the weight states reachable within `depth` steps of the
/// uniform vector, in breadth-first order, and the transition probabilities
/// between them. Transitions out of the deepest layer that would reach a
/// state outside the enumeration restart at the uniform state, so every
/// state both is reachable from and returns to the start and the chain has
/// a single closed class.
pub fn build_transition_matrix(spec: &ChainSpec) -> Result<TransitionMatrix> {
    let n = spec.n_reinforcers;
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 reinforcers, got {n}")));
    }
    if spec.success_probability.len() != n
        || spec.success_probability.iter().any(|p| !(0.0..=1.0).contains(p))
    {
        return Err(Error::Validation(format!(
            "need {n} success probabilities in [0, 1], got {:?}",
            spec.success_probability
        )));
    }
    if spec.depth == 0 {
        return Err(Error::Config("depth must be at least 1".into()));
    }
    let (alpha, beta) = (spec.alpha_gain, spec.beta());
    if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::Config(format!("alpha {alpha} and beta {beta} must be non-negative")));
    }

    let uniform = vec![1.0 / n as f64; n];
    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut states: Vec<Vec<f64>> = Vec::new();
    let mut depth_of: Vec<usize> = Vec::new();
    index.insert(state_key(&uniform), 0);
    states.push(uniform);
    depth_of.push(0);

    let mut rows = Vec::new();
    let mut current = 0;
    while current < states.len() {
        let here = states[current].clone();
        let expand = depth_of[current] < spec.depth;
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        for arm in 0..n {
            let p_success = spec.success_probability[arm];
            for (success, p) in [(true, p_success), (false, 1.0 - p_success)] {
                let mass = here[arm] * p;
                if mass == 0.0 {
                    continue;
                }
                let next = step(&here, arm, success, alpha, beta);
                let key = state_key(&next);
                let target = match index.get(&key) {
                    Some(&j) => j,
                    None if expand => {
                        if states.len() >= spec.state_cap {
                            return Err(Error::Resource { cap: spec.state_cap });
                        }
                        let j = states.len();
                        index.insert(key, j);
                        states.push(next);
                        depth_of.push(depth_of[current] + 1);
                        j
                    }
                    None => 0,
                };
                *row.entry(target).or_insert(0.0) += mass;
            }
        }
        rows.push(row.into_iter().collect::<Vec<_>>());
        current += 1;
    }

    let matrix = TransitionMatrix {
        rows,
        states: states.into_iter().map(WeightVector::new).collect::<Result<_>>()?,
        n_reinforcers: n,
        alpha_gain: alpha,
        beta_redistribution: beta,
    };
    matrix.validate()?;
    Ok(matrix)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stationary {
    pub pi: Vec<f64>,
    /// `max_j |(pi M)_j - pi_j|` against the undamped matrix.
    pub residual: f64,
}

/// Solves `pi (M - I) = 0`, `sum(pi) = 1` on the damped chain
/// `(1 - d) M + d U` with `d = DAMPING`, which has a unique fixed point even
/// when `M` is periodic or reducible. Small chains are solved directly,
/// larger ones by lazy power iteration.
pub fn stationary_distribution(m: &TransitionMatrix) -> Result<Stationary> {
    m.validate()?;
    if m.size() <= DENSE_LIMIT {
        let pi = solve_dense(m);
        finish(m, pi, 0)
    } else {
        stationary_by_power_iteration(m, 1_000_000)
    }
}

/// Power iteration on the lazy damped chain `(I + M') / 2`, which shares its
/// fixed point with `M'` and is aperiodic.
pub fn stationary_by_power_iteration(m: &TransitionMatrix, max_iterations: usize) -> Result<Stationary> {
    m.validate()?;
    let size = m.size();
    let teleport = DAMPING / size as f64;
    let mut pi = vec![1.0 / size as f64; size];
    let mut residual = f64::INFINITY;
    for iteration in 0..max_iterations {
        let moved = m.left_multiply(&pi);
        residual = moved.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual < RESIDUAL_LIMIT * 1e-2 {
            return finish(m, pi, iteration);
        }
        let total: f64 = pi.iter().sum();
        for (p, mv) in pi.iter_mut().zip(&moved) {
            let damped = (1.0 - DAMPING) * mv + teleport * total;
            *p = 0.5 * *p + 0.5 * damped;
        }
    }
    Err(Error::Convergence { iterations: max_iterations, residual })
}

fn finish(m: &TransitionMatrix, mut pi: Vec<f64>, iterations: usize) -> Result<Stationary> {
    for p in pi.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    for p in pi.iter_mut() {
        *p /= total;
    }
    let residual = m.residual(&pi);
    if residual.is_nan() || residual >= RESIDUAL_LIMIT {
        return Err(Error::Convergence { iterations, residual });
    }
    Ok(Stationary { pi, residual })
}

/// Gaussian elimination with partial pivoting on the transposed system,
/// with the last equation replaced by the normalisation constraint.
fn solve_dense(m: &TransitionMatrix) -> Vec<f64> {
    let size = m.size();
    let dense = m.to_dense();
    let u = 1.0 / size as f64;
    // a[j][i] = A[i][j] where A = (1 - d)(M - I) + d(U - I).
    let mut a = vec![vec![0.0; size + 1]; size];
    for (i, row) in dense.iter().enumerate() {
        for (j, mij) in row.iter().enumerate() {
            let delta = if i == j { 1.0 } else { 0.0 };
            a[j][i] = (1.0 - DAMPING) * (mij - delta) + DAMPING * (u - delta);
        }
    }
    for value in a[size - 1].iter_mut() {
        *value = 1.0;
    }
    // Column `size` is the right-hand side.
    for (j, row) in a.iter_mut().enumerate() {
        row[size] = if j == size - 1 { 1.0 } else { 0.0 };
    }

    for col in 0..size {
        let pivot = (col..size)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty pivot range");
        a.swap(col, pivot);
        let p = a[col][col];
        if p == 0.0 {
            continue;
        }
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for row in lower.iter_mut() {
            let factor = row[col] / p;
            if factor == 0.0 {
                continue;
            }
            for k in col..=size {
                row[k] -= factor * pivot_row[k];
            }
        }
    }
    let mut x = vec![0.0; size];
    for i in (0..size).rev() {
        let tail: f64 = ((i + 1)..size).map(|k| a[i][k] * x[k]).sum();
        x[i] = if a[i][i] == 0.0 { 0.0 } else { (a[i][size] - tail) / a[i][i] };
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_stochastic_input() {
        assert!(matches!(
            TransitionMatrix::from_dense(vec![vec![0.5, 0.6], vec![0.5, 0.5]]),
            Err(Error::Validation(_))
        ));
        assert!(TransitionMatrix::from_dense(vec![vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
        assert!(TransitionMatrix::from_dense(vec![vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn two_state_chain() {
        let m = TransitionMatrix::from_dense(vec![vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        let s = stationary_distribution(&m).unwrap();
        assert!((s.pi[0] - 5.0 / 6.0).abs() < 1e-10);
        assert!((s.pi[1] - 1.0 / 6.0).abs() < 1e-10);
        assert!(s.residual < 1e-10);
    }

    #[test]
    fn identity_gives_uniform() {
        let identity: Vec<Vec<f64>> =
            (0..5).map(|i| (0..5).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let s = stationary_distribution(&TransitionMatrix::from_dense(identity).unwrap()).unwrap();
        for p in &s.pi {
            assert!((p - 0.2).abs() < 1e-12, "{:?}", s.pi);
        }
    }

    #[test]
    fn doubly_stochastic_gives_uniform() {
        let m = TransitionMatrix::from_dense(vec![
            vec![0.2, 0.3, 0.5],
            vec![0.5, 0.2, 0.3],
            vec![0.3, 0.5, 0.2],
        ])
        .unwrap();
        let s = stationary_distribution(&m).unwrap();
        assert!(s.pi.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-10));
    }

    #[test]
    fn periodic_chain_power_iteration() {
        let m = TransitionMatrix::from_dense(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let s = stationary_by_power_iteration(&m, 10_000).unwrap();
        assert!((s.pi[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn first_row_of_uniform_start() {
        let p = vec![0.9, 0.6, 0.3, 0.1];
        let m = build_transition_matrix(&ChainSpec::new(4, 0.015, p.clone(), 1)).unwrap();
        assert_eq!(m.size(), 9);
        assert_eq!(m.states()[0].as_slice(), &[0.25; 4]);
        let row = m.row(0);
        assert_eq!(row.len(), 8);
        for (j, prob) in row {
            let state = m.states()[*j].as_slice();
            let arm = (0..4)
                .find(|&i| (state[i] - 0.25).abs() > 0.014)
                .expect("one arm moved by alpha");
            let expected = if state[arm] > 0.25 { 0.25 * p[arm] } else { 0.25 * (1.0 - p[arm]) };
            assert!((prob - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn always_successful_chain_only_climbs() {
        let m = build_transition_matrix(&ChainSpec::new(2, 0.1, vec![1.0, 1.0], 4)).unwrap();
        for i in 0..m.size() {
            let from = m.states()[i].as_slice();
            for (j, _) in m.row(i) {
                let to = m.states()[*j].as_slice();
                // The drawn arm gained, stayed pinned at 1, or the walk left
                // the enumeration and restarted.
                assert!(to.iter().zip(from).any(|(t, f)| t > f) || *j == i || *j == 0);
            }
        }
    }

    #[test]
    fn state_cap_is_enforced() {
        let mut spec = ChainSpec::new(4, 0.01, vec![0.5; 4], 12);
        spec.state_cap = 50;
        assert!(matches!(build_transition_matrix(&spec), Err(Error::Resource { cap: 50 })));
    }

    #[test]
    fn direct_and_iterative_routes_agree() {
        let m = build_transition_matrix(&ChainSpec::new(3, 0.05, vec![0.7, 0.4, 0.2], 5)).unwrap();
        let direct = stationary_distribution(&m).unwrap();
        let iterative = stationary_by_power_iteration(&m, 1_000_000).unwrap();
        for (a, b) in direct.pi.iter().zip(&iterative.pi) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}
