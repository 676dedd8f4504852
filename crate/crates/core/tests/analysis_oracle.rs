mod common;

use std::collections::HashMap;

use mrl_core::analysis::{
    build_transition_matrix, detect_plateau, pearson, stationary_distribution, welch_t_test, ChainSpec,
    EntropySeries, TransitionMatrix,
};
use mrl_core::sim::{derive_seed, run_session, PhaseSchedule};
use mrl_core::{EngineConfig, GroupAssignment, NoviceProfile, Phase};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{exact_pearson, exact_welch, student_t_two_sided};

fn sample(rng: &mut ChaCha8Rng, len: usize, shift: f64) -> Vec<f64> {
    if rng.gen_bool(0.5) {
        (0..len).map(|_| rng.gen_range(0..30) as f64 + shift.round()).collect()
    } else {
        (0..len).map(|_| rng.gen_range(-5.0..5.0) * 3.0 + shift).collect()
    }
}

#[test]
fn welch_and_pearson_match_exact_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    while checked < 100 {
        let (len_a, len_b, shift) = (rng.gen_range(3..40), rng.gen_range(3..40), rng.gen_range(-4.0..4.0));
        let a = sample(&mut rng, len_a, 0.0);
        let b = sample(&mut rng, len_b, shift);
        let Ok(w) = welch_t_test(&a, &b) else { continue };
        if !w.t_statistic.is_finite() {
            continue;
        }
        let (t, df) = exact_welch(&a, &b);
        assert!((w.t_statistic - t).abs() < 1e-10, "t {} vs {t}", w.t_statistic);
        assert!((w.df - df).abs() < 1e-10, "df {} vs {df}", w.df);
        let p = student_t_two_sided(t, df);
        assert!((w.p_value - p).abs() < 1e-10, "p {} vs {p} (t {t}, df {df})", w.p_value);

        let ys: Vec<f64> = a.iter().map(|x| 0.5 * x + rng.gen_range(-10.0..10.0)).collect();
        let r = pearson(&a, &ys).unwrap();
        assert!((r - exact_pearson(&a, &ys)).abs() < 1e-10);
        checked += 1;
    }
}

#[test]
fn welch_reference_example() {
    let w = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    assert!((w.t_statistic + 1.0).abs() < 1e-12);
    assert!((w.df - 8.0).abs() < 1e-12);
    assert!((w.p_value - student_t_two_sided(-1.0, 8.0)).abs() < 1e-12);
}

fn state_index(m: &TransitionMatrix) -> HashMap<Vec<i64>, usize> {
    m.states()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_slice().iter().map(|w| (w * 1e9).round() as i64).collect(), i))
        .collect()
}

fn find(m: &TransitionMatrix, weights: &[f64]) -> usize {
    let key: Vec<i64> = weights.iter().map(|w| (w * 1e9).round() as i64).collect();
    state_index(m)[&key]
}

#[test]
fn two_arm_chain_matches_hand_enumeration() {
    check_two_arm_chain(0.5, 0.5);
    check_two_arm_chain(0.6, 0.3);
}

#[test]
fn leaving_the_enumeration_restarts_at_uniform() {
    let m = build_transition_matrix(&ChainSpec::new(3, 0.1, vec![0.4; 3], 4)).unwrap();
    let mut reaches_start = vec![false; m.size()];
    reaches_start[0] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..m.size() {
            if !reaches_start[i] && m.row(i).iter().any(|(j, _)| reaches_start[*j]) {
                reaches_start[i] = true;
                changed = true;
            }
        }
    }
    assert!(reaches_start.iter().all(|r| *r));
}

fn check_two_arm_chain(p0: f64, p1: f64) {
    let m = build_transition_matrix(&ChainSpec::new(2, 0.25, vec![p0, p1], 2)).unwrap();
    assert_eq!(m.size(), 5);
    let u = find(&m, &[0.5, 0.5]);
    let a = find(&m, &[0.75, 0.25]);
    let b = find(&m, &[0.25, 0.75]);
    let c = find(&m, &[1.0, 0.0]);
    let d = find(&m, &[0.0, 1.0]);
    assert_eq!((u, a, b, c, d), (0, 1, 2, 3, 4));

    let mut expected = vec![vec![0.0; 5]; 5];
    expected[u][a] = 0.5 * p0 + 0.5 * (1.0 - p1);
    expected[u][b] = 0.5 * (1.0 - p0) + 0.5 * p1;
    expected[a][c] = 0.75 * p0 + 0.25 * (1.0 - p1);
    expected[a][u] = 0.75 * (1.0 - p0) + 0.25 * p1;
    expected[b][d] = 0.75 * p1 + 0.25 * (1.0 - p0);
    expected[b][u] = 0.75 * (1.0 - p1) + 0.25 * p0;
    // From a corner only the dominant arm is ever drawn.
    expected[c][c] = p0;
    expected[c][a] = 1.0 - p0;
    expected[d][d] = p1;
    expected[d][b] = 1.0 - p1;
    let dense = m.to_dense();
    for i in 0..5 {
        for j in 0..5 {
            assert!((dense[i][j] - expected[i][j]).abs() < 1e-15, "({i},{j})");
        }
    }

    // Birth-death chain on D-B-U-A-C: detailed balance gives pi directly.
    let mut pi = [0.0; 5];
    pi[u] = 1.0;
    pi[a] = pi[u] * expected[u][a] / expected[a][u];
    pi[c] = pi[a] * expected[a][c] / expected[c][a];
    pi[b] = pi[u] * expected[u][b] / expected[b][u];
    pi[d] = pi[b] * expected[b][d] / expected[d][b];
    let total: f64 = pi.iter().sum();
    let s = stationary_distribution(&m).unwrap();
    for (got, want) in s.pi.iter().zip(pi.iter()) {
        assert!((got - want / total).abs() < 1e-10);
    }
    assert!(s.residual < 1e-10);
}

#[test]
fn hand_solved_two_state_chain() {
    let m = TransitionMatrix::from_dense(vec![vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
    let s = stationary_distribution(&m).unwrap();
    assert!((s.pi[0] - 5.0 / 6.0).abs() < 1e-10);
    assert!((s.pi[1] - 1.0 / 6.0).abs() < 1e-10);
}

fn permuted(weights: &[f64], perm: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; weights.len()];
    for (i, w) in weights.iter().enumerate() {
        out[perm[i]] = *w;
    }
    out
}

fn assert_equivariant(p: Vec<f64>, perm: &[usize], alpha: f64, depth: usize) {
    let base = build_transition_matrix(&ChainSpec::new(p.len(), alpha, p.clone(), depth)).unwrap();
    let relabelled = build_transition_matrix(&ChainSpec::new(p.len(), alpha, permuted(&p, perm), depth)).unwrap();
    assert_eq!(base.size(), relabelled.size());
    let pi = stationary_distribution(&base).unwrap().pi;
    let pi_relabelled = stationary_distribution(&relabelled).unwrap().pi;
    for (i, state) in base.states().iter().enumerate() {
        let j = find(&relabelled, &permuted(state.as_slice(), perm));
        assert!((pi[i] - pi_relabelled[j]).abs() < 1e-12, "state {i}: {} vs {}", pi[i], pi_relabelled[j]);
    }
}

#[test]
fn stationary_distribution_follows_arm_relabelling() {
    assert_equivariant(vec![0.8, 0.5, 0.2], &[2, 0, 1], 0.1, 4);
    assert_equivariant(vec![0.9, 0.6, 0.3, 0.1], &[3, 1, 0, 2], 0.05, 3);
}

#[test]
fn arm_independent_success_gives_symmetric_distribution() {
    let m = build_transition_matrix(&ChainSpec::new(3, 0.1, vec![0.4; 3], 4)).unwrap();
    let pi = stationary_distribution(&m).unwrap().pi;
    for perm in [[1, 2, 0], [1, 0, 2], [0, 2, 1]] {
        for (i, state) in m.states().iter().enumerate() {
            let j = find(&m, &permuted(state.as_slice(), &perm));
            assert!((pi[i] - pi[j]).abs() < 1e-12);
        }
    }
}

#[test]
fn preference_blind_learners_leave_weights_near_uniform() {
    let n = 4;
    let profile = NoviceProfile {
        preference: NoviceProfile::sharp_preference(n, 2, 0.9),
        base_rectify: 0.4,
        boost: 0.0,
        skill: 0.0,
        learn_rate: 0.0,
        mistake_hazard: 1.0,
    };
    let schedule = PhaseSchedule::reinforced_only(Phase::GuidedResponse, 60);
    let seeds = 400;
    let mut mean = vec![0.0; n];
    for s in 0..seeds {
        let config = EngineConfig::with_window(n, 0.015, 3, derive_seed(2024, &[s]));
        let summary = run_session(&profile, &schedule, GroupAssignment::Learned, &config).unwrap();
        let last = summary.records.last().unwrap();
        for (m, w) in mean.iter_mut().zip(last.weights_after.as_slice()) {
            *m += w / seeds as f64;
        }
    }
    for m in &mean {
        assert!((m - 0.25).abs() < 0.02, "{mean:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_chains_have_small_residuals(
        n in 2usize..=4,
        alpha_frac in 0.05f64..0.9,
        p in prop::collection::vec(0.0f64..=1.0, 4),
        depth in 1usize..=4,
    ) {
        let spec = ChainSpec::new(n, alpha_frac / n as f64, p[..n].to_vec(), depth);
        let m = build_transition_matrix(&spec).unwrap();
        let s = stationary_distribution(&m).unwrap();
        prop_assert!(s.residual < 1e-10);
        prop_assert!((s.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(s.pi.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn plateau_index_shrinks_as_tolerance_grows(
        values in prop::collection::vec(0.0f64..3.0, 2..60),
        small in 1e-6f64..0.5,
        extra in 0.0f64..1.0,
    ) {
        let series = EntropySeries::from_values(&values).unwrap();
        let tight = detect_plateau(&series, small);
        let loose = detect_plateau(&series, small + extra);
        if let Some(k) = tight {
            prop_assert!(loose.is_some_and(|l| l <= k));
        }
    }

    #[test]
    fn stabilising_series_has_a_plateau(
        head in prop::collection::vec(0.0f64..3.0, 0..40),
        level in 0.0f64..3.0,
        tail_len in 2usize..20,
    ) {
        let mut values = head;
        values.extend((0..tail_len).map(|i| level + 1e-7 * 0.5f64.powi(i as i32)));
        let series = EntropySeries::from_values(&values).unwrap();
        let k = detect_plateau(&series, 1e-6);
        prop_assert!(k.is_some_and(|k| k as usize <= values.len() - tail_len));
    }
}
