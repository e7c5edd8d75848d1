//! Independent reference computations used by the test suites and the
//! `selftest` command. None of these share code paths with the solvers they
//! check; they are slow on purpose.

use crate::mdp::{Policy, TabularMdp};
use crate::reward::RewardTable;

/// Minimum transport cost by enumerating every basic solution of the
/// transportation polytope: each spanning tree of `m + n - 1` cells in the
/// bipartite row/column graph, with flows fixed by peeling leaves.
/// Exponential; meant for supports of four or fewer points.
pub fn brute_force_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    let cells = m * n;
    let k = m + n - 1;
    let mut best = f64::INFINITY;
    let mut choice: Vec<usize> = (0..k).collect();
    loop {
        if let Some(flows) = tree_flows(&choice, supply, demand, m, n) {
            if flows.iter().all(|&x| x >= -1e-12) {
                let total: f64 = choice.iter().zip(&flows).map(|(&c, x)| cost[c] * x).sum();
                best = best.min(total);
            }
        }
        // next k-combination of 0..cells in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if choice[i] < cells - k + i {
                choice[i] += 1;
                for t in i + 1..k {
                    choice[t] = choice[t - 1] + 1;
                }
                break;
            }
        }
    }
}

fn tree_flows(
    choice: &[usize],
    supply: &[f64],
    demand: &[f64],
    m: usize,
    n: usize,
) -> Option<Vec<f64>> {
    let mut remaining: Vec<f64> = supply.iter().chain(demand).copied().collect();
    let mut degree = vec![0usize; m + n];
    for &c in choice {
        degree[c / n] += 1;
        degree[m + c % n] += 1;
    }
    if degree.iter().any(|&d| d == 0) {
        return None;
    }
    let mut flows = vec![f64::NAN; choice.len()];
    let mut alive = vec![true; choice.len()];
    for _ in 0..choice.len() {
        let (edge, leaf) = choice
            .iter()
            .enumerate()
            .filter(|(e, _)| alive[*e])
            .find_map(|(e, &c)| {
                let (r, col) = (c / n, m + c % n);
                if degree[r] == 1 {
                    Some((e, r))
                } else if degree[col] == 1 {
                    Some((e, col))
                } else {
                    None
                }
            })?;
        let c = choice[edge];
        let (r, col) = (c / n, m + c % n);
        let other = if leaf == r { col } else { r };
        let x = remaining[leaf];
        flows[edge] = x;
        remaining[leaf] = 0.0;
        remaining[other] -= x;
        degree[r] -= 1;
        degree[col] -= 1;
        alive[edge] = false;
    }
    // a cycle leaves a node unbalanced
    if remaining.iter().any(|r| r.abs() > 1e-9) {
        return None;
    }
    Some(flows)
}

/// W1 on the real line through the CDF formula `∫ |F_μ − F_ν|`.
pub fn w1_on_line(points: &[f64], mu: &[f64], nu: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
    let mut cdf_gap = 0.0;
    let mut total = 0.0;
    for w in order.windows(2) {
        cdf_gap += mu[w[0]] - nu[w[0]];
        total += cdf_gap.abs() * (points[w[1]] - points[w[0]]);
    }
    total
}

pub fn max_norm_difference(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Textbook two-pass population variance per coordinate, averaged over coordinates.
pub fn mean_population_variance(rows: &[&[f64]]) -> f64 {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mut total = 0.0;
    for idx in 0..d {
        let mean = rows.iter().map(|r| r[idx]).sum::<f64>() / n;
        total += rows.iter().map(|r| (r[idx] - mean).powi(2)).sum::<f64>() / n;
    }
    total / d as f64
}

/// Central finite difference of `f` at `x` along coordinate `index`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], index: usize, step: f64) -> f64 {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[index] += step;
    minus[index] -= step;
    (f(&plus) - f(&minus)) / (2.0 * step)
}

/// Undiscounted state-action occupancy over `horizon` steps, by forward
/// recursion on the state distribution. Episodes stop after their first step
/// in an absorbing state.
pub fn forward_occupancy(mdp: &TabularMdp, policy: &Policy, horizon: usize) -> Vec<f64> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut occupancy = vec![0.0; ns * na];
    let mut state: Vec<f64> = mdp.start_distribution().to_vec();
    for _ in 0..horizon {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            if state[s] == 0.0 {
                continue;
            }
            for a in 0..na {
                let mass = state[s] * policy.row(s)[a];
                occupancy[s * na + a] += mass;
                if !mdp.is_absorbing(s) {
                    for (t, p) in mdp.next_states(s, a).iter().enumerate() {
                        next[t] += mass * p;
                    }
                }
            }
        }
        state = next;
    }
    occupancy
}

/// Nondecreasing least-squares fit by the max-min formula, independent of
/// the pool-adjacent-violators routine in the library.
pub fn isotonic_by_enumeration(values: &[f64]) -> Vec<f64> {
    // f_i = max_{j<=i} min_{k>=i} mean(values[j..=k])
    let n = values.len();
    (0..n)
        .map(|i| {
            (0..=i)
                .map(|j| {
                    (i..n)
                        .map(|k| values[j..=k].iter().sum::<f64>() / (k - j + 1) as f64)
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Discounted value of a deterministic policy on a deterministic MDP from
/// `start`, by walking the successor chain until it cycles and summing the
/// prefix and the geometric cycle in closed form.
pub fn deterministic_policy_value(
    mdp: &TabularMdp,
    reward: &RewardTable,
    actions: &[usize],
    start: usize,
) -> f64 {
    let gamma = mdp.discount();
    let mut seen = vec![usize::MAX; mdp.num_states()];
    let mut rewards = Vec::new();
    let mut s = start;
    while seen[s] == usize::MAX {
        seen[s] = rewards.len();
        let a = actions[s];
        rewards.push(reward.get(s, a));
        s = mdp
            .next_states(s, a)
            .iter()
            .position(|&p| p == 1.0)
            .expect("deterministic transitions");
    }
    let cycle_start = seen[s];
    let cycle_len = rewards.len() - cycle_start;
    let mut prefix = 0.0;
    for (t, r) in rewards.iter().enumerate().take(cycle_start) {
        prefix += gamma.powi(t as i32) * r;
    }
    let mut cycle = 0.0;
    for (k, r) in rewards[cycle_start..].iter().enumerate() {
        cycle += gamma.powi(k as i32) * r;
    }
    prefix + gamma.powi(cycle_start as i32) * cycle / (1.0 - gamma.powi(cycle_len as i32))
}

/// Soft state values after `sweeps` synchronous applications of
/// `V(s) <- ln Σ_a exp(R(s,a) + γ Σ_s' P(s'|s,a) V(s'))`, starting from zero.
pub fn soft_values_by_sweeps(mdp: &TabularMdp, reward: &RewardTable, sweeps: usize) -> Vec<f64> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut v = vec![0.0; ns];
    for _ in 0..sweeps {
        v = (0..ns)
            .map(|s| {
                let terms: Vec<f64> = (0..na)
                    .map(|a| {
                        let next: f64 = mdp
                            .next_states(s, a)
                            .iter()
                            .zip(&v)
                            .map(|(p, x)| p * x)
                            .sum();
                        reward.get(s, a) + mdp.discount() * next
                    })
                    .collect();
                let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
            })
            .collect();
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_single_feasible_coupling() {
        // all mass must go from row 0 to column 1
        let v = brute_force_transport(&[1.0, 0.0], &[0.0, 1.0], &[0.0, 4.0, 4.0, 0.0]);
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn minmax_isotonic_formula() {
        let fit = isotonic_by_enumeration(&[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(fit, vec![1.0, 2.5, 2.5, 4.0]);
    }
}
