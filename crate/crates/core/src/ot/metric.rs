use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::mdp::TabularMdp;

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const TRIANGLE_TOLERANCE: f64 = 1e-12;
const EXHAUSTIVE_TRIANGLE_LIMIT: usize = 30;
const SAMPLED_TRIPLES: usize = 10_000;

/// Pairwise ground cost between support points: symmetric, nonnegative,
/// zero on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundMetric {
    size: usize,
    costs: Vec<f64>,
}

impl GroundMetric {
    /// Builds a metric from a dense row-major `size × size` matrix.
    pub fn new(size: usize, costs: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(invalid("ground metric needs at least one point"));
        }
        if costs.len() != size * size {
            return Err(invalid(format!(
                "ground metric has {} entries, expected {}",
                costs.len(),
                size * size
            )));
        }
        for i in 0..size {
            if costs[i * size + i] != 0.0 {
                return Err(invalid(format!(
                    "ground metric diagonal entry {i} is nonzero"
                )));
            }
            for j in 0..size {
                let c = costs[i * size + j];
                if !c.is_finite() || c < 0.0 {
                    return Err(invalid(format!("ground cost ({i}, {j}) = {c} is invalid")));
                }
                if (c - costs[j * size + i]).abs() > SYMMETRY_TOLERANCE {
                    return Err(invalid(format!(
                        "ground metric is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { size, costs })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.costs[i * self.size + j]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Largest pairwise cost. Bounds every Wasserstein distance on this support.
    pub fn diameter(&self) -> f64 {
        self.costs.iter().copied().fold(0.0, f64::max)
    }

    /// Element-wise `cost^p`, the linear objective of the transport LP.
    pub fn powered(&self, order_p: f64) -> Vec<f64> {
        if order_p == 1.0 {
            self.costs.clone()
        } else {
            self.costs.iter().map(|c| c.powf(order_p)).collect()
        }
    }

    /// Worst triangle-inequality violation `d(i,k) - d(i,j) - d(j,k)`, checked
    /// over all triples when the support has at most 30 points and over
    /// 10,000 seeded random triples otherwise. Negative or zero means it holds.
    pub fn worst_triangle_violation(&self) -> f64 {
        let n = self.size;
        let mut worst = f64::NEG_INFINITY;
        let mut check = |i: usize, j: usize, k: usize| {
            worst = worst.max(self.get(i, k) - self.get(i, j) - self.get(j, k));
        };
        if n <= EXHAUSTIVE_TRIANGLE_LIMIT {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        check(i, j, k);
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            for _ in 0..SAMPLED_TRIPLES {
                check(
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                );
            }
        }
        worst
    }

    pub fn satisfies_triangle_inequality(&self) -> bool {
        self.worst_triangle_violation() <= TRIANGLE_TOLERANCE
    }
}

/// Ground metric on gridworld state-action pairs:
/// `manhattan(s, s') + action_penalty·[a ≠ a']`.
pub fn ground_metric_gridworld(mdp: &TabularMdp, action_penalty: f64) -> Result<GroundMetric> {
    let layout = mdp
        .layout()
        .ok_or_else(|| invalid("ground metric needs an MDP with grid layout"))?;
    if !(action_penalty >= 0.0) || !action_penalty.is_finite() {
        return Err(invalid(format!(
            "action penalty must be nonnegative, got {action_penalty}"
        )));
    }
    let na = mdp.num_actions();
    let d = mdp.dimension();
    let mut costs = vec![0.0; d * d];
    for x in 0..d {
        let (s1, a1) = (x / na, x % na);
        for y in 0..d {
            let (s2, a2) = (y / na, y % na);
            let penalty = if a1 == a2 { 0.0 } else { action_penalty };
            costs[x * d + y] = layout.manhattan(s1, s2) as f64 + penalty;
        }
    }
    GroundMetric::new(d, costs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_gridworld, TabularMdp};

    #[test]
    fn gridworld_metric_entries() {
        let mdp = build_gridworld(3, 3, 0.0, 0.9, &[(2, 2)]).unwrap();
        let m = ground_metric_gridworld(&mdp, 1.0).unwrap();
        assert_eq!(m.size(), 45);
        assert_eq!(m.get(7, 7), 0.0);
        // state 0 action 2 vs state 1 action 2: adjacent cells
        assert_eq!(m.get(2, 5 + 2), 1.0);
        // state 0 action 0 vs state 8 action 4: distance 4 plus the penalty
        assert_eq!(m.get(0, 8 * 5 + 4), 5.0);
        assert_eq!(m.diameter(), 5.0);
    }

    #[test]
    fn small_grid_metric_is_a_metric() {
        let mdp = build_gridworld(2, 2, 0.0, 0.9, &[(1, 1)]).unwrap();
        let m = ground_metric_gridworld(&mdp, 0.5).unwrap();
        assert_eq!(m.size(), 20);
        // exhaustive over all 8,000 triples
        let mut triples = 0;
        for i in 0..20 {
            for j in 0..20 {
                for k in 0..20 {
                    assert!(m.get(i, k) <= m.get(i, j) + m.get(j, k) + 1e-12);
                    triples += 1;
                }
            }
        }
        assert_eq!(triples, 8000);
        assert!(m.satisfies_triangle_inequality());
    }

    #[test]
    fn sampled_triangle_check_on_large_support() {
        let mdp = build_gridworld(4, 4, 0.0, 0.9, &[(3, 3)]).unwrap();
        let m = ground_metric_gridworld(&mdp, 1.0).unwrap();
        assert!(m.satisfies_triangle_inequality());
        let bad = GroundMetric::new(3, vec![0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0]).unwrap();
        assert!(!bad.satisfies_triangle_inequality());
    }

    #[test]
    fn metric_validation() {
        assert!(GroundMetric::new(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(GroundMetric::new(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(GroundMetric::new(2, vec![0.0, -1.0, -1.0, 0.0]).is_err());
        assert!(GroundMetric::new(2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn missing_layout_is_rejected() {
        let mdp = TabularMdp::new(1, 2, vec![1.0, 1.0], vec![1.0], 0.9, None).unwrap();
        assert!(ground_metric_gridworld(&mdp, 1.0).is_err());
    }
}
