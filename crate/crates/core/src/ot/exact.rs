//! Exact discrete optimal transport by the transportation simplex.
//!
//! The initial basis comes from the matrix-minimum rule, which yields a
//! spanning tree of `m + n - 1` basic cells. Pivots use Dantzig pricing
//! (most negative reduced cost); after a run of degenerate pivots the solver
//! switches to Bland's rule for the rest of the solve, which cannot cycle.

use crate::error::{invalid, numeric, Result};
use crate::reward::DiscreteMeasure;

use super::{GroundMetric, TransportPlan};

const DEGENERATE_STALL_LIMIT: usize = 50;

/// Optimal solution of a transportation LP on the reduced support.
#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Row-major `rows × cols` flows.
    pub flows: Vec<f64>,
    /// Dual potentials certifying optimality: `cost[i][j] - u[i] - v[j] >= 0`
    /// everywhere, with equality on basic cells.
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

/// Result of [`exact_wasserstein`].
#[derive(Debug, Clone)]
pub struct ExactResult {
    pub distance: f64,
    /// `Σ γ(i,j)·cost(i,j)^p`, i.e. `distance^p`.
    pub objective: f64,
    pub plan: TransportPlan,
}

/// Exact p-Wasserstein distance between two measures on the metric's support.
pub fn exact_wasserstein(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    metric: &GroundMetric,
    order_p: f64,
) -> Result<ExactResult> {
    check_inputs(mu, nu, metric, order_p)?;
    let d = metric.size();
    let rows: Vec<usize> = (0..d).filter(|&i| mu.weights()[i] > 0.0).collect();
    let cols: Vec<usize> = (0..d).filter(|&j| nu.weights()[j] > 0.0).collect();
    let supply: Vec<f64> = rows.iter().map(|&i| mu.weights()[i]).collect();
    let demand: Vec<f64> = cols.iter().map(|&j| nu.weights()[j]).collect();
    let mut cost = Vec::with_capacity(rows.len() * cols.len());
    for &i in &rows {
        for &j in &cols {
            let c = metric.get(i, j);
            cost.push(if order_p == 1.0 { c } else { c.powf(order_p) });
        }
    }

    let solution = solve_transportation(&supply, &demand, &cost)?;

    let mut coupling = vec![0.0; d * d];
    for (ri, &i) in rows.iter().enumerate() {
        for (ci, &j) in cols.iter().enumerate() {
            coupling[i * d + j] = solution.flows[ri * cols.len() + ci];
        }
    }
    let objective = solution.objective.max(0.0);
    Ok(ExactResult {
        distance: objective.powf(1.0 / order_p),
        objective,
        plan: TransportPlan::new(coupling, mu.weights().to_vec(), nu.weights().to_vec()),
    })
}

pub(crate) fn check_inputs(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    metric: &GroundMetric,
    order_p: f64,
) -> Result<()> {
    if mu.len() != metric.size() || nu.len() != metric.size() {
        return Err(invalid(format!(
            "measure sizes ({}, {}) do not match the metric size {}",
            mu.len(),
            nu.len(),
            metric.size()
        )));
    }
    if !(order_p >= 1.0) || !order_p.is_finite() {
        return Err(invalid(format!(
            "order p must be at least 1, got {order_p}"
        )));
    }
    Ok(())
}

/// Solves `min Σ c_ij x_ij` subject to row sums `supply`, column sums
/// `demand`, `x >= 0`. Supplies and demands must be positive; `demand` is
/// rescaled to the supply total before solving.
pub fn solve_transportation(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<LpSolution> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 || cost.len() != m * n {
        return Err(invalid(
            "transportation problem has inconsistent dimensions",
        ));
    }
    let total_supply: f64 = supply.iter().sum();
    let total_demand: f64 = demand.iter().sum();
    let scale = total_supply / total_demand;
    let demand: Vec<f64> = demand.iter().map(|b| b * scale).collect();

    let mut basis = initial_basis(supply, &demand, cost, m, n);
    let mut in_basis = vec![false; m * n];
    for cell in &basis {
        in_basis[cell.row * n + cell.col] = true;
    }

    let cost_scale = cost.iter().fold(1.0f64, |acc, c| acc.max(c.abs()));
    let optimality_tol = 1e-12 * cost_scale;
    let max_pivots = (50 * m * n).max(1000);

    let mut tree = Tree::new(m, n);
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut degenerate_run = 0usize;
    let mut bland = false;
    let mut pivots = 0usize;

    loop {
        tree.rebuild(&basis);
        tree.potentials(&basis, cost, &mut u, &mut v);

        let entering = if bland {
            (0..m * n).find(|&k| !in_basis[k] && cost[k] - u[k / n] - v[k % n] < -optimality_tol)
        } else {
            let mut best: Option<(usize, f64)> = None;
            for k in 0..m * n {
                if in_basis[k] {
                    continue;
                }
                let rc = cost[k] - u[k / n] - v[k % n];
                if rc < -optimality_tol && best.map_or(true, |(_, b)| rc < b) {
                    best = Some((k, rc));
                }
            }
            best.map(|(k, _)| k)
        };
        let Some(entering) = entering else { break };

        pivots += 1;
        if pivots > max_pivots {
            return Err(numeric(format!(
                "transportation simplex exceeded {max_pivots} pivots"
            )));
        }

        let (ei, ej) = (entering / n, entering % n);
        // cycle: entering cell (+), then the tree path from column ej back to row ei
        let path = tree.path(m + ej, ei);
        let mut theta = f64::INFINITY;
        let mut leaving: Option<usize> = None;
        for (step, &slot) in path.iter().enumerate() {
            if step % 2 == 0 {
                let cell = &basis[slot];
                let key = cell.row * n + cell.col;
                let better = match leaving {
                    None => true,
                    Some(l) => {
                        let current = &basis[l];
                        cell.flow < theta
                            || (cell.flow == theta && key < current.row * n + current.col)
                    }
                };
                if better {
                    theta = cell.flow;
                    leaving = Some(slot);
                }
            }
        }
        let leaving = leaving.ok_or_else(|| numeric("pivot cycle without a decreasing cell"))?;

        for (step, &slot) in path.iter().enumerate() {
            if step % 2 == 0 {
                basis[slot].flow -= theta;
            } else {
                basis[slot].flow += theta;
            }
        }
        if theta == 0.0 {
            degenerate_run += 1;
            if degenerate_run >= DEGENERATE_STALL_LIMIT {
                bland = true;
            }
        } else {
            degenerate_run = 0;
        }

        let old = basis[leaving];
        in_basis[old.row * n + old.col] = false;
        in_basis[entering] = true;
        basis[leaving] = BasicCell {
            row: ei,
            col: ej,
            flow: theta,
        };
    }

    let mut flows = vec![0.0; m * n];
    let mut objective = 0.0;
    for cell in &basis {
        let k = cell.row * n + cell.col;
        let x = cell.flow.max(0.0);
        flows[k] = x;
        objective += x * cost[k];
    }
    Ok(LpSolution {
        flows,
        row_potentials: u,
        col_potentials: v,
        objective,
        pivots,
    })
}

#[derive(Debug, Clone, Copy)]
struct BasicCell {
    row: usize,
    col: usize,
    flow: f64,
}

/// Matrix-minimum starting solution. Each allocation crosses out exactly one
/// line except the last, so the basic cells form a spanning tree.
fn initial_basis(
    supply: &[f64],
    demand: &[f64],
    cost: &[f64],
    m: usize,
    n: usize,
) -> Vec<BasicCell> {
    let mut order: Vec<usize> = (0..m * n).collect();
    order.sort_by(|&a, &b| cost[a].total_cmp(&cost[b]).then(a.cmp(&b)));

    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let mut row_done = vec![false; m];
    let mut col_done = vec![false; n];
    let (mut rows_left, mut cols_left) = (m, n);
    let mut basis = Vec::with_capacity(m + n - 1);

    for k in order {
        let (i, j) = (k / n, k % n);
        if row_done[i] || col_done[j] {
            continue;
        }
        let x = s[i].min(d[j]);
        s[i] -= x;
        d[j] -= x;
        basis.push(BasicCell {
            row: i,
            col: j,
            flow: x,
        });
        if rows_left == 1 && cols_left == 1 {
            break;
        }
        let cross_row = if rows_left == 1 {
            false
        } else if cols_left == 1 {
            true
        } else {
            s[i] <= d[j]
        };
        if cross_row {
            row_done[i] = true;
            rows_left -= 1;
        } else {
            col_done[j] = true;
            cols_left -= 1;
        }
    }
    debug_assert_eq!(basis.len(), m + n - 1);
    basis
}

/// Adjacency view of the basis tree. Nodes `0..m` are rows, `m..m+n` columns;
/// edges carry the index of their basic cell.
struct Tree {
    m: usize,
    adjacency: Vec<Vec<(usize, usize)>>,
    parent: Vec<Option<(usize, usize)>>,
    queue: Vec<usize>,
}

impl Tree {
    fn new(m: usize, n: usize) -> Self {
        Self {
            m,
            adjacency: vec![Vec::new(); m + n],
            parent: vec![None; m + n],
            queue: Vec::with_capacity(m + n),
        }
    }

    fn rebuild(&mut self, basis: &[BasicCell]) {
        self.adjacency.iter_mut().for_each(Vec::clear);
        for (slot, cell) in basis.iter().enumerate() {
            let (r, c) = (cell.row, self.m + cell.col);
            self.adjacency[r].push((c, slot));
            self.adjacency[c].push((r, slot));
        }
    }

    /// Solves `u_i + v_j = c_ij` on basic cells with `u_0 = 0`.
    fn potentials(&mut self, basis: &[BasicCell], cost: &[f64], u: &mut [f64], v: &mut [f64]) {
        let n = v.len();
        let mut seen = vec![false; self.adjacency.len()];
        self.queue.clear();
        self.queue.push(0);
        seen[0] = true;
        u[0] = 0.0;
        let mut head = 0;
        while head < self.queue.len() {
            let node = self.queue[head];
            head += 1;
            for &(next, slot) in &self.adjacency[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                let cell = basis[slot];
                let c = cost[cell.row * n + cell.col];
                if next >= self.m {
                    v[next - self.m] = c - u[node];
                } else {
                    u[next] = c - v[node - self.m];
                }
                self.queue.push(next);
            }
        }
    }

    /// Basis slots along the tree path from `from` to `to`, in order.
    fn path(&mut self, from: usize, to: usize) -> Vec<usize> {
        self.parent.iter_mut().for_each(|p| *p = None);
        self.queue.clear();
        self.queue.push(from);
        let mut visited = vec![false; self.adjacency.len()];
        visited[from] = true;
        let mut head = 0;
        while head < self.queue.len() {
            let node = self.queue[head];
            head += 1;
            if node == to {
                break;
            }
            for &(next, slot) in &self.adjacency[node] {
                if !visited[next] {
                    visited[next] = true;
                    self.parent[next] = Some((node, slot));
                    self.queue.push(next);
                }
            }
        }
        let mut slots = Vec::new();
        let mut node = to;
        while node != from {
            let (prev, slot) = self.parent[node].expect("basis is a spanning tree");
            slots.push(slot);
            node = prev;
        }
        slots.reverse();
        slots
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_metric(points: &[f64]) -> GroundMetric {
        let n = points.len();
        let mut costs = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                costs[i * n + j] = (points[i] - points[j]).abs();
            }
        }
        GroundMetric::new(n, costs).unwrap()
    }

    fn random_measure(rng: &mut ChaCha8Rng, d: usize) -> DiscreteMeasure {
        let masses: Vec<f64> = (0..d).map(|_| rng.gen_range(0.01..1.0)).collect();
        DiscreteMeasure::from_masses(&masses).unwrap()
    }

    #[test]
    fn identical_measures_are_at_distance_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let metric = line_metric(&[0.0, 1.0, 3.0, 4.5, 7.0]);
        let mu = random_measure(&mut rng, 5);
        for p in [1.0, 2.0, 3.5] {
            let r = exact_wasserstein(&mu, &mu, &metric, p).unwrap();
            assert!(r.distance.abs() < 1e-9);
        }
    }

    #[test]
    fn diracs_move_full_mass() {
        let metric = line_metric(&[0.0, 3.0]);
        let a = DiscreteMeasure::dirac(2, 0).unwrap();
        let b = DiscreteMeasure::dirac(2, 1).unwrap();
        for p in [1.0, 2.0] {
            let r = exact_wasserstein(&a, &b, &metric, p).unwrap();
            assert!((r.distance - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn half_mass_to_dirac_matches_brute_force() {
        let metric = line_metric(&[0.0, 2.0]);
        let mu = DiscreteMeasure::new(vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::dirac(2, 1).unwrap();
        let r = exact_wasserstein(&mu, &nu, &metric, 2.0).unwrap();
        assert!((r.distance - 2f64.sqrt()).abs() < 1e-12);
        let brute = oracle::brute_force_transport(mu.weights(), nu.weights(), &metric.powered(2.0));
        assert!((brute - 2.0).abs() < 1e-12);
        assert!((r.objective - brute).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..40 {
            let d = 2 + trial % 3;
            let points: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..5.0)).collect();
            let metric = line_metric(&points);
            let mu = random_measure(&mut rng, d);
            let nu = random_measure(&mut rng, d);
            let p = if trial % 2 == 0 { 1.0 } else { 2.0 };
            let r = exact_wasserstein(&mu, &nu, &metric, p).unwrap();
            let brute =
                oracle::brute_force_transport(mu.weights(), nu.weights(), &metric.powered(p));
            assert!(
                (r.objective - brute).abs() < 1e-10,
                "trial {trial}: {} vs {brute}",
                r.objective
            );
        }
    }

    #[test]
    fn one_dimensional_w1_matches_cdf_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let points: Vec<f64> = (0..12).map(|i| i as f64 * 0.7).collect();
        let metric = line_metric(&points);
        for _ in 0..20 {
            let mu = random_measure(&mut rng, 12);
            let nu = random_measure(&mut rng, 12);
            let r = exact_wasserstein(&mu, &nu, &metric, 1.0).unwrap();
            let expected = oracle::w1_on_line(&points, mu.weights(), nu.weights());
            assert!((r.distance - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn solution_satisfies_complementary_slackness() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (m, n) = (7, 9);
        let supply: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = supply.iter().sum();
        let mut demand: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let dt: f64 = demand.iter().sum();
        demand.iter_mut().for_each(|b| *b *= total / dt);
        let cost: Vec<f64> = (0..m * n).map(|_| rng.gen_range(0.0..10.0)).collect();
        let sol = solve_transportation(&supply, &demand, &cost).unwrap();
        for i in 0..m {
            for j in 0..n {
                let rc = cost[i * n + j] - sol.row_potentials[i] - sol.col_potentials[j];
                assert!(rc > -1e-9);
                if sol.flows[i * n + j] > 1e-12 {
                    assert!(rc.abs() < 1e-9);
                }
            }
        }
        // strong duality
        let dual: f64 = supply
            .iter()
            .zip(&sol.row_potentials)
            .map(|(a, u)| a * u)
            .sum::<f64>()
            + demand
                .iter()
                .zip(&sol.col_potentials)
                .map(|(b, v)| b * v)
                .sum::<f64>();
        assert!((dual - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn degenerate_uniform_problem_terminates() {
        // equal costs and uniform masses give massively degenerate pivots
        let n = 12;
        let supply = vec![1.0 / n as f64; n];
        let cost: Vec<f64> = (0..n * n)
            .map(|k| ((k / n) as f64 - (k % n) as f64).abs().min(2.0))
            .collect();
        let sol = solve_transportation(&supply, &supply, &cost).unwrap();
        assert!(sol.objective.abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_invalid() {
        let metric = line_metric(&[0.0, 1.0, 2.0]);
        let mu = DiscreteMeasure::uniform(2).unwrap();
        assert!(exact_wasserstein(&mu, &mu, &metric, 1.0).is_err());
        let nu = DiscreteMeasure::uniform(3).unwrap();
        assert!(exact_wasserstein(&nu, &nu, &metric, 0.5).is_err());
    }
}
