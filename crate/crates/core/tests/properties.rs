use proptest::prelude::*;

use rewardot::io::{
    measure_from_csv, measure_to_csv, metric_from_csv, metric_to_csv, records_digest,
    records_from_csv, records_to_csv, reward_from_csv, reward_to_csv,
};
use rewardot::lab::{isotonic_nondecreasing, ExperimentKind, ResultRecord};
use rewardot::mdp::{build_gridworld, greedy_policy, value_iteration, QTable};
use rewardot::oracle;
use rewardot::ot::{exact_wasserstein, ground_metric_gridworld, GroundMetric};
use rewardot::reward::{phi_embed, potential_shaping, verify_policy_equivalence, Equivalence};
use rewardot::{DiscreteMeasure, RewardTable};

fn masses(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.01f64..1.0], d)
        .prop_filter("some mass", |m| m.iter().any(|&x| x > 0.0))
}

/// A metric on `d` points of the plane and three measures on it.
fn metric_and_measures() -> impl Strategy<Value = (GroundMetric, [DiscreteMeasure; 3])> {
    (2usize..=12).prop_flat_map(|d| {
        (
            prop::collection::vec((0.0f64..4.0, 0.0f64..4.0), d),
            masses(d),
            masses(d),
            masses(d),
        )
            .prop_map(move |(pts, a, b, c)| {
                let costs = (0..d * d)
                    .map(|k| {
                        let (p, q) = (pts[k / d], pts[k % d]);
                        ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
                    })
                    .collect();
                let m = |w: &[f64]| DiscreteMeasure::from_masses(w).unwrap();
                (GroundMetric::new(d, costs).unwrap(), [m(&a), m(&b), m(&c)])
            })
    })
}

fn gridworld_case() -> impl Strategy<Value = (usize, usize, f64, f64, u64)> {
    (
        2usize..=4,
        2usize..=4,
        0.0f64..0.3,
        0.5f64..0.95,
        any::<u64>(),
    )
}

fn table(states: usize, values: &[f64]) -> RewardTable {
    RewardTable::new(states, 5, values[..states * 5].to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wasserstein_is_a_metric((metric, [a, b, c]) in metric_and_measures(), p in 1.0f64..3.0) {
        let w = |x: &DiscreteMeasure, y: &DiscreteMeasure| exact_wasserstein(x, y, &metric, p).unwrap().distance;
        let (ab, ba, bc, ac) = (w(&a, &b), w(&b, &a), w(&b, &c), w(&a, &c));
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-9);
        prop_assert!(w(&a, &a) <= 1e-9);
        prop_assert!(ac <= ab + bc + 1e-7);
        prop_assert!(ab <= metric.diameter() + 1e-9);
    }

    #[test]
    fn w1_is_at_most_w2((metric, [a, b, _]) in metric_and_measures()) {
        let w1 = exact_wasserstein(&a, &b, &metric, 1.0).unwrap().distance;
        let w2 = exact_wasserstein(&a, &b, &metric, 2.0).unwrap().distance;
        prop_assert!(w1 <= w2 + 1e-9, "{} > {}", w1, w2);
    }

    #[test]
    fn exact_matches_brute_force_on_tiny_problems(
        supply in masses(3), demand in masses(3), costs in prop::collection::vec(0.0f64..5.0, 9)
    ) {
        let a = DiscreteMeasure::from_masses(&supply).unwrap();
        let b = DiscreteMeasure::from_masses(&demand).unwrap();
        let mut sym = costs.clone();
        for i in 0..3 {
            sym[i * 3 + i] = 0.0;
            for j in 0..i {
                sym[i * 3 + j] = sym[j * 3 + i];
            }
        }
        // shortest-path closure of the symmetric costs
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    sym[i * 3 + j] = sym[i * 3 + j].min(sym[i * 3 + k] + sym[k * 3 + j]);
                }
            }
        }
        let metric = GroundMetric::new(3, sym.clone()).unwrap();
        let lp = exact_wasserstein(&a, &b, &metric, 1.0).unwrap().objective;
        let brute = oracle::brute_force_transport(a.weights(), b.weights(), &sym);
        prop_assert!((lp - brute).abs() <= 1e-9, "{} vs {}", lp, brute);
    }

    #[test]
    fn measure_csv_round_trips(m in masses(20)) {
        let a = DiscreteMeasure::from_masses(&m).unwrap();
        prop_assert_eq!(measure_from_csv(&measure_to_csv(&a)).unwrap(), a);
    }

    #[test]
    fn reward_and_metric_csv_round_trip(values in prop::collection::vec(-10.0f64..10.0, 45)) {
        let r = table(9, &values);
        prop_assert_eq!(reward_from_csv(&reward_to_csv(&r)).unwrap(), r);
        let mdp = build_gridworld(3, 3, 0.0, 0.9, &[(2, 2)]).unwrap();
        let metric = ground_metric_gridworld(&mdp, values[0].abs()).unwrap();
        prop_assert_eq!(metric_from_csv(&metric_to_csv(&metric)).unwrap(), metric);
    }

    #[test]
    fn records_csv_round_trips_and_digest_ignores_wall_time(
        rows in prop::collection::vec((0.0f64..100.0, prop::option::of(0u64..50), -1e6f64..1e6, any::<bool>(), any::<u32>()), 1..20)
    ) {
        let records: Vec<ResultRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, &(variable, seed, value, converged, wall))| ResultRecord {
                kind: ExperimentKind::Noise,
                variable,
                seed,
                metric: format!("m{}", i % 3),
                value,
                converged,
                wall_ms: wall as u64,
            })
            .collect();
        let text = records_to_csv(&records);
        let back = records_from_csv(&text).unwrap();
        prop_assert_eq!(records_to_csv(&back), text.clone());
        let retimed: Vec<ResultRecord> = back.into_iter().map(|r| ResultRecord { wall_ms: 7, ..r }).collect();
        prop_assert_eq!(records_digest(&records_to_csv(&retimed)), records_digest(&text));
    }

    #[test]
    fn embedding_keeps_argmax_and_ignores_shifts(
        values in prop::collection::vec(-5.0f64..5.0, 20), shift in -3.0f64..3.0, t in 0.2f64..5.0
    ) {
        let r = table(4, &values);
        let shifted = table(4, &values.iter().map(|v| v + shift).collect::<Vec<_>>());
        let a = phi_embed(&r, t).unwrap();
        let b = phi_embed(&shifted, t).unwrap();
        prop_assert!(a.total_variation(&b) <= 1e-12);
        prop_assert!((a.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let top = |w: &[f64]| w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let best = top(r.values());
        let hit = (0..20).filter(|&k| r.values()[k] == best).any(|k| a.weights()[k] == top(a.weights()));
        prop_assert!(hit);
    }

    #[test]
    fn embedding_separates_non_shift_tables(
        values in prop::collection::vec(-5.0f64..5.0, 20), k in 0usize..20, bump in 0.01f64..2.0
    ) {
        let mdp = build_gridworld(2, 2, 0.0, 0.9, &[(1, 1)]).unwrap();
        let metric = ground_metric_gridworld(&mdp, 1.0).unwrap();
        let mut bumped = values.clone();
        bumped[k] += bump;
        let a = phi_embed(&table(4, &values), 1.0).unwrap();
        let b = phi_embed(&table(4, &bumped), 1.0).unwrap();
        prop_assert!(exact_wasserstein(&a, &b, &metric, 2.0).unwrap().distance > 0.0);
    }

    #[test]
    fn greedy_ignores_per_state_offsets(
        q in prop::collection::vec(-5.0f64..5.0, 45), offsets in prop::collection::vec(-10.0f64..10.0, 9)
    ) {
        let shifted: Vec<f64> = q.iter().enumerate().map(|(k, v)| v + offsets[k / 5]).collect();
        let a = greedy_policy(&QTable::new(5, q).unwrap());
        let b = greedy_policy(&QTable::new(5, shifted).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn isotonic_fit_matches_enumeration(values in prop::collection::vec(-3.0f64..3.0, 1..8)) {
        let fit = isotonic_nondecreasing(&values);
        let reference = oracle::isotonic_by_enumeration(&values);
        prop_assert!(oracle::max_norm_difference(&fit, &reference) <= 1e-12);
        prop_assert!(fit.windows(2).all(|w| w[0] <= w[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn bellman_residual_is_below_tolerance((w, h, slip, gamma, seed) in gridworld_case()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let goal = (rng.gen_range(0..w), rng.gen_range(0..h));
        let mdp = build_gridworld(w, h, slip, gamma, &[goal]).unwrap();
        let values: Vec<f64> = (0..mdp.dimension()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let reward = RewardTable::new(mdp.num_states(), 5, values).unwrap();
        let tol = 1e-9;
        let (v, _) = value_iteration(&mdp, &reward, tol).unwrap();
        let mut residual: f64 = 0.0;
        for s in 0..mdp.num_states() {
            let best = (0..5)
                .map(|a| reward.get(s, a) + gamma * mdp.expected_next(s, a, &v))
                .fold(f64::NEG_INFINITY, f64::max);
            residual = residual.max((best - v[s]).abs());
        }
        prop_assert!(residual < tol, "residual {}", residual);
    }

    #[test]
    fn shaping_keeps_the_greedy_policy((w, h, slip, gamma, seed) in gridworld_case()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mdp = build_gridworld(w, h, slip, gamma, &[(w - 1, h - 1)]).unwrap();
        let base = rewardot::reward::goal_reward_table(&mdp, 1.0, 0.1).unwrap();
        let potential: Vec<f64> = (0..mdp.num_states()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let shaped = potential_shaping(&mdp, &base, &potential, gamma).unwrap();
        prop_assert_eq!(verify_policy_equivalence(&mdp, &base, &shaped).unwrap(), Equivalence::Equivalent);
    }
}
