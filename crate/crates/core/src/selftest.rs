//! The oracle suite behind `rewardot selftest`: every solver is checked
//! against an independent reference computation or a seeded statistical
//! bound, at small sizes.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::io::{records_digest, records_to_csv};
use crate::irl::{
    empirical_visitation, expected_visitation, log_likelihood, log_likelihood_gradient, maxent_irl,
    soft_optimal_policies, IrlConfig,
};
use crate::lab::{
    average_pairwise_distance, isotonic_nondecreasing, medians_by_variable, run_experiment,
    ExperimentConfig, ExperimentKind, GridSize,
};
use crate::mdp::{
    build_gridworld, greedy_policy, sample_trajectories, soft_value_iteration, softmax_policy,
    value_iteration, Move, Policy, TabularMdp,
};
use crate::oracle;
use crate::ot::{
    convexity_probe, exact_wasserstein, ground_metric_gridworld, medoid_centroid,
    pairwise_distance_matrix, sinkhorn_distance, wasserstein_barycenter,
    wasserstein_barycenter_from, BarycenterStart, GroundMetric, OtConfig, Solver,
};
use crate::reward::{
    compute_reward_variance, generate_equivalent_rewards, goal_reward_table, phi_embed,
    potential_shaping, verify_policy_equivalence, DiscreteMeasure, Equivalence, GenerationMethod,
    RewardTable,
};

/// Result of one check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub millis: u128,
}

type Check = fn() -> Result<String, String>;

fn ensure(condition: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if condition {
        Ok(())
    } else {
        Err(message())
    }
}

fn lift<T>(r: crate::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn random_measure(rng: &mut ChaCha8Rng, d: usize) -> DiscreteMeasure {
    let masses: Vec<f64> = (0..d).map(|_| rng.gen_range(0.01..1.0)).collect();
    DiscreteMeasure::from_masses(&masses).unwrap()
}

fn line_metric(points: &[f64]) -> GroundMetric {
    let n = points.len();
    let costs = (0..n * n)
        .map(|k| (points[k / n] - points[k % n]).abs())
        .collect();
    GroundMetric::new(n, costs).unwrap()
}

fn grid_metric(width: usize, height: usize, penalty: f64) -> GroundMetric {
    let mdp = build_gridworld(width, height, 0.0, 0.9, &[(width - 1, height - 1)]).unwrap();
    ground_metric_gridworld(&mdp, penalty).unwrap()
}

fn goal_only(mdp: &TabularMdp, goal: usize) -> RewardTable {
    let mut values = vec![0.0; mdp.dimension()];
    values[goal * mdp.num_actions() + Move::Stay as usize] = 1.0;
    RewardTable::new(mdp.num_states(), mdp.num_actions(), values).unwrap()
}

fn transition_rows() -> Result<String, String> {
    let mdp = lift(build_gridworld(3, 3, 0.2, 0.9, &[(2, 2)]))?;
    let mut worst: f64 = 0.0;
    for s in 0..9 {
        for a in 0..5 {
            worst = worst.max((mdp.next_states(s, a).iter().sum::<f64>() - 1.0).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("row sum error {worst:e}"))?;
    Ok(format!("45 rows, max error {worst:.1e}"))
}

fn bellman_unrolled() -> Result<String, String> {
    let mdp = lift(build_gridworld(3, 3, 0.0, 0.9, &[(2, 2)]))?;
    let (v, _) = lift(value_iteration(&mdp, &goal_only(&mdp, 8), 1e-12))?;
    let layout = mdp.layout().unwrap();
    for s in 0..9 {
        let expected = 10.0 * 0.9f64.powi(layout.manhattan(s, 8) as i32);
        ensure((v[s] - expected).abs() < 1e-9, || {
            format!("state {s}: {} vs {expected}", v[s])
        })?;
    }
    Ok("V(s) = 0.9^dist · 10 on all 9 states".into())
}

fn greedy_is_optimal() -> Result<String, String> {
    let mdp = lift(build_gridworld(3, 3, 0.0, 0.9, &[(2, 2)]))?;
    let reward = goal_only(&mdp, 8);
    let (v, q) = lift(value_iteration(&mdp, &reward, 1e-12))?;
    let greedy = greedy_policy(&q).actions().unwrap();
    for s in 0..9 {
        let g = oracle::deterministic_policy_value(&mdp, &reward, &greedy, s);
        ensure((g - v[s]).abs() < 1e-9, || {
            format!("greedy value at {s}: {g} vs {}", v[s])
        })?;
    }
    let mut actions = [0usize; 9];
    for code in 0..5usize.pow(9) {
        let mut c = code;
        for a in actions.iter_mut() {
            *a = c % 5;
            c /= 5;
        }
        for s in 0..9 {
            let value = oracle::deterministic_policy_value(&mdp, &reward, &actions, s);
            ensure(value <= v[s] + 1e-9, || {
                format!("policy {actions:?} beats greedy at {s}")
            })?;
        }
    }
    Ok("no deterministic policy of 1953125 beats greedy".into())
}

fn soft_values_match_sweeps() -> Result<String, String> {
    let transitions = vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
    let mdp = lift(TabularMdp::new(
        2,
        2,
        transitions,
        vec![1.0, 0.0],
        0.8,
        None,
    ))?;
    let reward = lift(RewardTable::new(2, 2, vec![0.1, -0.4, 0.7, 0.2]))?;
    let q = lift(soft_value_iteration(&mdp, &reward, 1e-13))?;
    let v = oracle::soft_values_by_sweeps(&mdp, &reward, 200);
    let mut worst: f64 = 0.0;
    for s in 0..2 {
        for a in 0..2 {
            let next: f64 = mdp
                .next_states(s, a)
                .iter()
                .zip(&v)
                .map(|(p, x)| p * x)
                .sum();
            worst = worst.max((q.get(s, a) - (reward.get(s, a) + 0.8 * next)).abs());
        }
    }
    ensure(worst < 1e-10, || format!("soft q error {worst:e}"))?;
    let policy = softmax_policy(&q);
    ensure(
        (0..2).all(|s| (policy.row(s).iter().sum::<f64>() - 1.0).abs() < 1e-12),
        || "softmax rows".into(),
    )?;
    Ok(format!("max q error {worst:.1e}"))
}

fn slip_frequencies() -> Result<String, String> {
    let grid = lift(build_gridworld(3, 3, 0.2, 0.9, &[]))?;
    let mut transitions = Vec::with_capacity(9 * 5 * 9);
    for s in 0..9 {
        for a in 0..5 {
            transitions.extend_from_slice(grid.next_states(s, a));
        }
    }
    let mut start = vec![0.0; 9];
    start[4] = 1.0;
    let mdp = lift(TabularMdp::new(
        9,
        5,
        transitions,
        start,
        0.9,
        grid.layout(),
    ))?;
    let policy = lift(Policy::deterministic(5, &[Move::Up as usize; 9]))?;
    let trajs = lift(sample_trajectories(&mdp, &policy, 10_000, 2, 11))?;
    let mut counts = [0usize; 9];
    for t in &trajs {
        counts[t.steps[1].0] += 1;
    }
    let row = mdp.next_states(4, Move::Up as usize);
    for (s, &c) in counts.iter().enumerate() {
        let n = 10_000.0;
        let sigma = (n * row[s] * (1.0 - row[s])).sqrt();
        ensure((c as f64 - n * row[s]).abs() <= 3.0 * sigma + 1e-9, || {
            format!("state {s}: {c}")
        })?;
    }
    Ok("10000 draws within 3σ per successor".into())
}

fn embedding_sums_and_argmax() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let values: Vec<f64> = (0..45).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let argmax = crate::mdp::argmax(&values);
    let reward = lift(RewardTable::new(9, 5, values))?;
    for t in [0.5, 2.0] {
        let m = lift(phi_embed(&reward, t))?;
        let total: f64 = m.weights().iter().sum();
        ensure((total - 1.0).abs() <= 1e-12, || {
            format!("sum {total} at temperature {t}")
        })?;
        ensure(crate::mdp::argmax(m.weights()) == argmax, || {
            format!("argmax moved at temperature {t}")
        })?;
    }
    Ok("sums and argmax preserved at temperatures 0.5, 2".into())
}

fn shaping_keeps_policy() -> Result<String, String> {
    let mdp = lift(build_gridworld(3, 3, 0.1, 0.9, &[(2, 2)]))?;
    let base = lift(goal_reward_table(&mdp, 1.0, 0.1))?;
    let base_q = lift(value_iteration(&mdp, &base, 1e-10))?.1;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..20 {
        let potential: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let shaped = lift(potential_shaping(&mdp, &base, &potential, 0.9))?;
        let q = lift(value_iteration(&mdp, &shaped, 1e-10))?.1;
        ensure(greedy_policy(&q) == greedy_policy(&base_q), || {
            format!("potential {k} changed the policy")
        })?;
    }
    Ok("20 random potentials".into())
}

fn perturbed_sets_are_distinct() -> Result<String, String> {
    let mdp = lift(build_gridworld(3, 3, 0.0, 0.9, &[(2, 2)]))?;
    // per-action costs spaced 0.5 apart, goal stay worth 5
    let mut values = vec![0.0; 45];
    for s in 0..9 {
        for a in 0..5 {
            values[s * 5 + a] = if s == 8 && a == 4 {
                5.0
            } else {
                -0.5 * (a + 1) as f64
            };
        }
    }
    let base = lift(RewardTable::new(9, 5, values))?;
    let set = lift(generate_equivalent_rewards(
        &mdp,
        &base,
        20,
        GenerationMethod::PerturbAccept,
        0.1,
        8,
    ))?;
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            let d = oracle::max_norm_difference(set[i].values(), set[j].values());
            ensure(d > 0.0, || format!("tables {i} and {j} coincide"))?;
        }
        ensure(
            lift(verify_policy_equivalence(&mdp, &base, &set[i]))? == Equivalence::Equivalent,
            || format!("table {i} is not equivalent"),
        )?;
    }
    Ok("20 distinct equivalent tables".into())
}

fn opposite_goals_differ() -> Result<String, String> {
    let mdp = lift(build_gridworld(3, 3, 0.0, 0.9, &[(2, 2), (0, 0)]))?;
    let a = lift(goal_reward_table(&mdp, 1.0, 0.1))?;
    let mut flipped = a.values().to_vec();
    flipped[8 * 5 + 4] = 0.0;
    let b = lift(RewardTable::new(9, 5, flipped))?;
    let mut other = a.values().to_vec();
    other[4] = 0.0;
    let c = lift(RewardTable::new(9, 5, other))?;
    ensure(
        lift(verify_policy_equivalence(&mdp, &b, &c))? == Equivalence::Different,
        || "opposite goals".into(),
    )?;
    Ok("goal at (0,0) vs (2,2): different".into())
}

fn variance_two_pass() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let tables: Vec<RewardTable> = (0..10)
        .map(|_| {
            RewardTable::new(9, 5, (0..45).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap()
        })
        .collect();
    let fast = lift(compute_reward_variance(&tables))?;
    let rows: Vec<&[f64]> = tables.iter().map(|t| t.values()).collect();
    let reference = oracle::mean_population_variance(&rows);
    ensure((fast - reference).abs() < 1e-12, || {
        format!("{fast} vs {reference}")
    })?;
    Ok(format!("V = {fast:.6}"))
}

fn metric_triangle_exhaustive() -> Result<String, String> {
    let metric = grid_metric(2, 2, 0.5);
    let d = metric.size();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                worst = worst.max(metric.get(i, k) - metric.get(i, j) - metric.get(j, k));
            }
        }
    }
    ensure(worst <= 1e-12, || format!("violation {worst}"))?;
    Ok("8000 triples".into())
}

fn exact_matches_brute_force() -> Result<String, String> {
    let metric = line_metric(&[0.0, 2.0]);
    let mu = lift(DiscreteMeasure::new(vec![0.5, 0.5]))?;
    let nu = lift(DiscreteMeasure::dirac(2, 1))?;
    let r = lift(exact_wasserstein(&mu, &nu, &metric, 2.0))?;
    ensure((r.distance - 2f64.sqrt()).abs() < 1e-12, || {
        format!("two-point case {}", r.distance)
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..40 {
        let d = rng.gen_range(2..=4);
        let points: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..5.0)).collect();
        let metric = line_metric(&points);
        let mu = random_measure(&mut rng, d);
        let nu = random_measure(&mut rng, d);
        let p = if case % 2 == 0 { 1.0 } else { 2.0 };
        let r = lift(exact_wasserstein(&mu, &nu, &metric, p))?;
        let brute = oracle::brute_force_transport(mu.weights(), nu.weights(), &metric.powered(p));
        ensure((r.objective - brute).abs() < 1e-9, || {
            format!("case {case}: {} vs {brute}", r.objective)
        })?;
        if p == 1.0 {
            let line = oracle::w1_on_line(&points, mu.weights(), nu.weights());
            ensure((r.distance - line).abs() < 1e-9, || {
                format!("case {case}: CDF formula {line}")
            })?;
        }
    }
    Ok("40 random problems plus the two-point case".into())
}

fn plans_are_feasible() -> Result<String, String> {
    let metric = grid_metric(3, 3, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mu = random_measure(&mut rng, 45);
        let nu = random_measure(&mut rng, 45);
        let r = lift(exact_wasserstein(&mu, &nu, &metric, 2.0))?;
        worst = worst.max(r.plan.marginal_violation());
        let cost = r.plan.cost(&metric, 2.0);
        ensure((cost - r.distance.powi(2)).abs() <= 1e-9, || {
            format!("objective {cost} vs {}", r.distance)
        })?;
    }
    ensure(worst <= 1e-9, || format!("marginal violation {worst:e}"))?;
    Ok(format!(
        "20 plans on d = 45, max marginal error {worst:.1e}"
    ))
}

fn sinkhorn_padded_diracs() -> Result<String, String> {
    let metric = line_metric(&[0.0, 3.0]);
    let pad = 1e-9;
    let mu = lift(DiscreteMeasure::new(vec![1.0 - pad, pad]))?;
    let nu = lift(DiscreteMeasure::new(vec![pad, 1.0 - pad]))?;
    let config = OtConfig {
        order_p: 2.0,
        reg_epsilon: 0.09,
        max_iterations: 100_000,
        convergence_tol: 1e-10,
    };
    let s = lift(sinkhorn_distance(&mu, &nu, &metric, &config))?;
    let e = lift(exact_wasserstein(&mu, &nu, &metric, 2.0))?.distance;
    let rel = (s.value - e).abs() / e;
    ensure(s.converged && rel < 0.01, || {
        format!("relative error {rel}")
    })?;
    Ok(format!("relative error {rel:.1e}"))
}

fn sinkhorn_gap_monotone() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let points: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..4.0)).collect();
    let metric = line_metric(&points);
    for case in 0..5 {
        let mu = random_measure(&mut rng, 10);
        let nu = random_measure(&mut rng, 10);
        let exact = lift(exact_wasserstein(&mu, &nu, &metric, 2.0))?.distance;
        let mut last = f64::INFINITY;
        for eps in [1.0, 0.3, 0.1, 0.03] {
            let config = OtConfig {
                order_p: 2.0,
                reg_epsilon: eps,
                max_iterations: 1_000_000,
                convergence_tol: 1e-10,
            };
            let gap = lift(sinkhorn_distance(&mu, &nu, &metric, &config))?.value - exact;
            ensure(gap <= last + 1e-9, || {
                format!("case {case}: gap rose to {gap} at ε = {eps}")
            })?;
            last = gap;
        }
    }
    Ok("5 pairs over ε ∈ {1, 0.3, 0.1, 0.03}".into())
}

fn medoid_by_enumeration() -> Result<String, String> {
    let metric = grid_metric(2, 2, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let set: Vec<DiscreteMeasure> = (0..5).map(|_| random_measure(&mut rng, 20)).collect();
    let medoid = lift(medoid_centroid(&set, &metric, 2.0))?;
    let sums: Vec<f64> = set
        .iter()
        .map(|a| {
            set.iter()
                .map(|b| exact_wasserstein(a, b, &metric, 2.0).unwrap().distance)
                .sum()
        })
        .collect();
    let best = (0..5).fold(0, |b, i| if sums[i] < sums[b] { i } else { b });
    ensure(
        medoid.index == best && (medoid.objective - sums[best]).abs() < 1e-9,
        || format!("medoid {} vs enumeration {best}", medoid.index),
    )?;
    Ok(format!("index {best}"))
}

fn barycenter_slack_and_uniqueness() -> Result<String, String> {
    let metric = grid_metric(2, 2, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let set = vec![random_measure(&mut rng, 20), random_measure(&mut rng, 20)];
    let weights = [0.5, 0.5];
    let config = OtConfig {
        order_p: 2.0,
        reg_epsilon: 0.1,
        max_iterations: 100_000,
        convergence_tol: 1e-11,
    };
    let base = lift(wasserstein_barycenter(&set, &weights, &metric, &config))?;
    let objective = |b: &DiscreteMeasure| -> f64 {
        set.iter()
            .map(|m| 0.5 * exact_wasserstein(b, m, &metric, 2.0).unwrap().objective)
            .sum()
    };
    let medoid = set.iter().map(objective).fold(f64::INFINITY, f64::min);
    let slack = config.reg_epsilon * 20f64.ln();
    ensure(objective(&base.barycenter) <= medoid + slack, || {
        "barycenter objective above slack".into()
    })?;
    let mut spread: f64 = 0.0;
    for seed in 0..5 {
        let other = lift(wasserstein_barycenter_from(
            &set,
            &weights,
            &metric,
            &config,
            BarycenterStart::Random(seed),
        ))?;
        spread = spread.max(other.barycenter.total_variation(&base.barycenter));
    }
    ensure(spread < 1e-4, || format!("multi-start spread {spread:e}"))?;
    Ok(format!("spread {spread:.1e}"))
}

fn pairwise_triangles() -> Result<String, String> {
    let metric = grid_metric(2, 2, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let set: Vec<DiscreteMeasure> = (0..6).map(|_| random_measure(&mut rng, 20)).collect();
    let m = lift(pairwise_distance_matrix(
        &set,
        &metric,
        2.0,
        Solver::Exact,
        &OtConfig::default(),
    ))?;
    let mut triples = 0;
    for i in 0..6 {
        for j in i + 1..6 {
            for k in j + 1..6 {
                for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                    ensure(m.get(a, c) <= m.get(a, b) + m.get(b, c) + 1e-7, || {
                        format!("({a},{b},{c})")
                    })?;
                }
                triples += 1;
            }
        }
    }
    Ok(format!("{triples} triples"))
}

fn convexity_replay() -> Result<String, String> {
    let mdp = lift(build_gridworld(2, 2, 0.0, 0.9, &[(1, 1)]))?;
    let metric = lift(ground_metric_gridworld(&mdp, 1.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut table =
        || RewardTable::new(4, 5, (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let (r1, r2, r3) = (table(), table(), table());
    let reference = lift(phi_embed(&r3, 1.0))?;
    let grid: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
    let a = lift(convexity_probe(
        &r1, &r2, &reference, &metric, &grid, 1.0, 2.0,
    ))?;
    let b = lift(convexity_probe(
        &r1, &r2, &reference, &metric, &grid, 1.0, 2.0,
    ))?;
    ensure(a == b && a.len() == 9, || {
        "convexity probe is not reproducible".into()
    })?;
    Ok("9 points, bit-identical replay".into())
}

fn empirical_occupancy() -> Result<String, String> {
    let mdp = lift(build_gridworld(2, 2, 0.2, 0.9, &[(1, 1)]))?;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let probs: Vec<f64> = (0..4)
        .flat_map(|_| {
            let row: Vec<f64> = (0..5).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = row.iter().sum();
            row.into_iter().map(move |p| p / total)
        })
        .collect();
    let policy = lift(Policy::new(5, probs))?;
    let n = 1000;
    let trajs = lift(sample_trajectories(&mdp, &policy, n, 10, 3))?;
    let empirical = lift(empirical_visitation(&trajs, &mdp))?;
    let expected = oracle::forward_occupancy(&mdp, &policy, 10);
    for k in 0..20 {
        let second: f64 = trajs
            .iter()
            .map(|t| t.steps.iter().filter(|&&(s, a)| s * 5 + a == k).count() as f64)
            .map(|c| c * c)
            .sum::<f64>()
            / n as f64;
        let sigma = ((second - empirical[k].powi(2)).max(1e-12) / n as f64).sqrt();
        ensure(
            (empirical[k] - expected[k]).abs() <= 3.0 * sigma + 1e-3,
            || format!("index {k}"),
        )?;
    }
    Ok("1000 trajectories within 3σ".into())
}

fn expected_visitation_monte_carlo() -> Result<String, String> {
    let transitions = vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
    let mdp = lift(TabularMdp::new(
        2,
        2,
        transitions,
        vec![1.0, 0.0],
        0.9,
        None,
    ))?;
    let reward = lift(RewardTable::new(2, 2, vec![0.3, -0.2, 0.5, 0.0]))?;
    let config = IrlConfig {
        horizon: 6,
        ..IrlConfig::default()
    };
    let expected = lift(expected_visitation(&mdp, &reward, &config))?;
    let policies = lift(soft_optimal_policies(&mdp, &reward, &config))?;
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let n = 100_000;
    let mut sums = [0.0; 4];
    let mut squares = [0.0; 4];
    for _ in 0..n {
        let mut local = [0.0; 4];
        let mut s = 0;
        for policy in &policies {
            let a = if rng.gen::<f64>() < policy.row(s)[0] {
                0
            } else {
                1
            };
            local[s * 2 + a] += 1.0;
            s = if mdp.next_states(s, a)[0] == 1.0 {
                0
            } else {
                1
            };
        }
        for k in 0..4 {
            sums[k] += local[k];
            squares[k] += local[k] * local[k];
        }
    }
    for k in 0..4 {
        let mean = sums[k] / n as f64;
        let sigma = ((squares[k] / n as f64 - mean * mean) / n as f64).sqrt();
        ensure((mean - expected[k]).abs() <= 3.0 * sigma + 1e-12, || {
            format!("index {k}: {mean} vs {}", expected[k])
        })?;
    }
    Ok("100000 simulated episodes within 3σ".into())
}

fn symmetric_irl_is_flat() -> Result<String, String> {
    let mdp = lift(TabularMdp::new(1, 5, vec![1.0; 5], vec![1.0], 0.9, None))?;
    let policy = lift(Policy::new(5, vec![0.2; 5]))?;
    let trajs = lift(sample_trajectories(&mdp, &policy, 2000, 10, 5))?;
    let r = lift(maxent_irl(
        &mdp,
        &trajs,
        &IrlConfig {
            horizon: 10,
            ..IrlConfig::default()
        },
        0,
    ))?;
    let max = r.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = r.values().iter().copied().fold(f64::INFINITY, f64::min);
    ensure(max - min < 0.1, || format!("spread {}", max - min))?;
    Ok(format!("spread {:.3}", max - min))
}

fn gradient_finite_differences() -> Result<String, String> {
    let mdp = lift(build_gridworld(3, 3, 0.1, 0.9, &[(2, 2)]))?;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let reward: Vec<f64> = (0..45).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let policy = lift(Policy::new(5, vec![0.2; 45]))?;
    let trajs = lift(sample_trajectories(&mdp, &policy, 20, 15, 2))?;
    let config = IrlConfig {
        horizon: 15,
        ..IrlConfig::default()
    };
    let empirical = lift(empirical_visitation(&trajs, &mdp))?;
    let analytic = lift(log_likelihood_gradient(&mdp, &empirical, &reward, &config))?;
    let objective = |r: &[f64]| log_likelihood(&mdp, &empirical, r, &config).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let k = rng.gen_range(0..45);
        let fd = oracle::central_difference(objective, &reward, k, 1e-5);
        worst = worst.max((fd - analytic[k]).abs() / analytic[k].abs().max(1e-8));
    }
    ensure(worst < 1e-4, || format!("relative error {worst:e}"))?;
    Ok(format!("20 coordinates, max relative error {worst:.1e}"))
}

fn average_pairwise_enumeration() -> Result<String, String> {
    let metric = grid_metric(2, 2, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let set: Vec<DiscreteMeasure> = (0..4).map(|_| random_measure(&mut rng, 20)).collect();
    let delta = lift(average_pairwise_distance(&set, &metric, 2.0))?;
    let mut total = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            total += lift(exact_wasserstein(&set[i], &set[j], &metric, 2.0))?.distance;
        }
    }
    ensure((delta - total / 6.0).abs() < 1e-12, || {
        format!("{delta} vs {}", total / 6.0)
    })?;
    Ok(format!("Δ = {delta:.6}"))
}

fn isotonic_enumeration() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let values: Vec<f64> = (0..rng.gen_range(1..8))
            .map(|_| rng.gen_range(0.0..1.0))
            .collect();
        let fit = isotonic_nondecreasing(&values);
        let reference = oracle::isotonic_by_enumeration(&values);
        ensure(
            fit.iter()
                .zip(&reference)
                .all(|(a, b)| (a - b).abs() < 1e-12),
            || format!("{values:?}"),
        )?;
    }
    Ok("50 random sequences".into())
}

fn convergence_trend() -> Result<String, String> {
    let mut config = ExperimentConfig::new(ExperimentKind::Converge);
    config.trajectory_counts = vec![8, 512];
    let records = lift(run_experiment(&config))?;
    let medians = medians_by_variable(&records, "wp_to_true");
    let (a, b) = (
        medians[0].1.unwrap_or(f64::NAN),
        medians[1].1.unwrap_or(f64::NAN),
    );
    ensure(b < a, || format!("median at n=512 {b} not below n=8 {a}"))?;
    Ok(format!("median W_p {a:.4} -> {b:.4}"))
}

fn noise_envelope() -> Result<String, String> {
    let config = ExperimentConfig::new(ExperimentKind::Noise);
    let records = lift(run_experiment(&config))?;
    let envelope: Vec<f64> = records
        .iter()
        .filter(|r| r.metric == "wp_envelope")
        .map(|r| r.value)
        .collect();
    ensure(
        envelope.len() == 4 && envelope.iter().all(|v| v.is_finite()),
        || "envelope not finite".into(),
    )?;
    ensure(envelope.windows(2).all(|w| w[0] <= w[1]), || {
        format!("{envelope:?}")
    })?;
    let zero = records
        .iter()
        .filter(|r| r.metric == "wp_noise" && r.variable == 0.0)
        .all(|r| r.value == 0.0);
    ensure(zero, || "wp_noise at ε = 0 is not zero".into())?;
    Ok(format!("envelope {envelope:.4?}"))
}

fn dimension_trend() -> Result<String, String> {
    let config = ExperimentConfig::new(ExperimentKind::DimSweep);
    let records = lift(run_experiment(&config))?;
    let delta: Vec<f64> = medians_by_variable(&records, "delta_d")
        .iter()
        .map(|m| m.1.unwrap_or(f64::NAN))
        .collect();
    ensure(delta.windows(2).all(|w| w[0] < w[1]), || {
        format!("median Δ_d {delta:?}")
    })?;
    Ok(format!("median Δ_d {delta:.4?}"))
}

fn centroid_records() -> Result<String, String> {
    let mut config = ExperimentConfig::new(ExperimentKind::Centroid);
    config.seeds = vec![0, 1, 2];
    let records = lift(run_experiment(&config))?;
    let slack = config.ot.reg_epsilon
        * (GridSize {
            width: 2,
            height: 2,
        }
        .dimension() as f64)
            .ln();
    for seed in &config.seeds {
        let get = |m: &str| {
            records
                .iter()
                .find(|r| r.seed == Some(*seed) && r.metric == m)
                .map(|r| r.value)
        };
        let (medoid, bary, spread) = (
            get("medoid_objective"),
            get("barycenter_objective"),
            get("multistart_spread"),
        );
        let (Some(medoid), Some(bary), Some(spread)) = (medoid, bary, spread) else {
            return Err(format!("seed {seed}: missing records"));
        };
        ensure(bary <= medoid + slack, || {
            format!("seed {seed}: {bary} > {medoid} + {slack}")
        })?;
        ensure(spread < 1e-4, || format!("seed {seed}: spread {spread:e}"))?;
    }
    Ok("3 sets on the 2×2 grid".into())
}

fn replay_digest() -> Result<String, String> {
    let mut config = ExperimentConfig::new(ExperimentKind::Converge);
    config.trajectory_counts = vec![4, 16];
    config.seeds = vec![0, 1];
    config.irl.iterations = 50;
    config.grid_sizes = vec![GridSize {
        width: 3,
        height: 3,
    }];
    let a = records_digest(&records_to_csv(&lift(run_experiment(&config))?));
    let b = records_digest(&records_to_csv(&lift(run_experiment(&config))?));
    ensure(a == b, || "replay digests differ".into())?;
    Ok(format!("digest {}", &a[..16]))
}

const CHECKS: &[(&str, Check)] = &[
    ("gridworld transition rows", transition_rows),
    ("value iteration vs unrolled Bellman", bellman_unrolled),
    (
        "greedy policy vs all deterministic policies",
        greedy_is_optimal,
    ),
    (
        "soft value iteration vs direct sweeps",
        soft_values_match_sweeps,
    ),
    ("slip frequencies", slip_frequencies),
    (
        "embedding normalization and argmax",
        embedding_sums_and_argmax,
    ),
    ("shaping keeps the greedy policy", shaping_keeps_policy),
    (
        "perturb-accept sets are distinct",
        perturbed_sets_are_distinct,
    ),
    ("opposite goals are not equivalent", opposite_goals_differ),
    ("reward variance vs two-pass", variance_two_pass),
    (
        "ground metric triangle inequality",
        metric_triangle_exhaustive,
    ),
    ("exact transport vs brute force", exact_matches_brute_force),
    ("transport plan feasibility", plans_are_feasible),
    ("sinkhorn on padded diracs", sinkhorn_padded_diracs),
    ("sinkhorn gap schedule", sinkhorn_gap_monotone),
    ("medoid vs enumeration", medoid_by_enumeration),
    (
        "barycenter slack and multi-start",
        barycenter_slack_and_uniqueness,
    ),
    ("pairwise triangle inequality", pairwise_triangles),
    ("convexity probe replay", convexity_replay),
    ("empirical visitation vs occupancy", empirical_occupancy),
    (
        "expected visitation vs simulation",
        expected_visitation_monte_carlo,
    ),
    (
        "symmetric demonstrations give a flat reward",
        symmetric_irl_is_flat,
    ),
    (
        "likelihood gradient vs finite differences",
        gradient_finite_differences,
    ),
    (
        "average pairwise distance vs enumeration",
        average_pairwise_enumeration,
    ),
    ("isotonic fit vs enumeration", isotonic_enumeration),
    ("convergence trend", convergence_trend),
    ("noise envelope", noise_envelope),
    ("dimension trend", dimension_trend),
    ("centroid records", centroid_records),
    ("replay digest", replay_digest),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Runs every check in order, calling `report` after each.
pub fn run_selftest(mut report: impl FnMut(&CheckOutcome)) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|(name, check)| {
            let start = Instant::now();
            let result = check();
            let outcome = CheckOutcome {
                name,
                passed: result.is_ok(),
                detail: result.unwrap_or_else(|e| e),
                millis: start.elapsed().as_millis(),
            };
            report(&outcome);
            outcome
        })
        .collect()
}
