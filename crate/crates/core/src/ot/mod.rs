//! Discrete optimal transport over a shared finite support.

mod barycenter;
mod centroid;
mod exact;
mod metric;
mod sinkhorn;

pub use barycenter::{
    wasserstein_barycenter, wasserstein_barycenter_from, BarycenterResult, BarycenterStart,
};
pub use centroid::{
    convexity_probe, medoid_centroid, pairwise_distance_matrix, ConvexityPoint, DistanceMatrix,
    Medoid, Solver,
};
pub use exact::{exact_wasserstein, solve_transportation, ExactResult, LpSolution};
pub use metric::{ground_metric_gridworld, GroundMetric};
pub use sinkhorn::{sinkhorn_distance, SinkhornResult};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Solver settings shared by the entropic routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtConfig {
    /// Wasserstein order `p >= 1`.
    pub order_p: f64,
    /// Entropic regularization strength, in units of `cost^p`.
    pub reg_epsilon: f64,
    pub max_iterations: usize,
    pub convergence_tol: f64,
}

impl Default for OtConfig {
    fn default() -> Self {
        Self {
            order_p: 2.0,
            reg_epsilon: 0.05,
            max_iterations: 100_000,
            convergence_tol: 1e-9,
        }
    }
}

impl OtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.order_p >= 1.0) || !self.order_p.is_finite() {
            return Err(invalid(format!(
                "order_p must be >= 1, got {}",
                self.order_p
            )));
        }
        if !(self.reg_epsilon > 0.0) || !self.reg_epsilon.is_finite() {
            return Err(invalid(format!(
                "reg_epsilon must be positive, got {}",
                self.reg_epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be positive"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(invalid("convergence_tol must be positive"));
        }
        Ok(())
    }
}

/// A coupling between two measures on a `d`-point support, row-major `d × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    coupling: Vec<f64>,
    source_marginal: Vec<f64>,
    target_marginal: Vec<f64>,
}

impl TransportPlan {
    pub(crate) fn new(
        coupling: Vec<f64>,
        source_marginal: Vec<f64>,
        target_marginal: Vec<f64>,
    ) -> Self {
        Self {
            coupling,
            source_marginal,
            target_marginal,
        }
    }

    pub fn size(&self) -> usize {
        self.source_marginal.len()
    }

    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.size() + j]
    }

    pub fn source_marginal(&self) -> &[f64] {
        &self.source_marginal
    }

    pub fn target_marginal(&self) -> &[f64] {
        &self.target_marginal
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.coupling
            .chunks(self.size())
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let d = self.size();
        let mut sums = vec![0.0; d];
        for row in self.coupling.chunks(d) {
            for (s, x) in sums.iter_mut().zip(row) {
                *s += x;
            }
        }
        sums
    }

    /// Largest deviation of either marginal from its prescribed value.
    pub fn marginal_violation(&self) -> f64 {
        let rows = crate::mdp::max_abs_diff(&self.row_sums(), &self.source_marginal);
        let cols = crate::mdp::max_abs_diff(&self.col_sums(), &self.target_marginal);
        rows.max(cols)
    }

    /// `Σ γ(i,j)·cost(i,j)^p`.
    pub fn cost(&self, metric: &GroundMetric, order_p: f64) -> f64 {
        self.coupling
            .iter()
            .zip(metric.powered(order_p))
            .map(|(g, c)| g * c)
            .sum()
    }
}
