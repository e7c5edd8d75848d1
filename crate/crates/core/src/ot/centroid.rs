use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::reward::{phi_embed, DiscreteMeasure, RewardTable};

use super::{exact_wasserstein, sinkhorn_distance, GroundMetric, OtConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Exact,
    Sinkhorn,
}

/// Symmetric matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    size: usize,
    values: Vec<f64>,
    /// False if any Sinkhorn entry hit its iteration cap.
    pub converged: bool,
}

impl DistanceMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.values
            .chunks(self.size)
            .map(|r| r.iter().sum())
            .collect()
    }

    /// Mean of the strict upper triangle.
    pub fn upper_mean(&self) -> f64 {
        let n = self.size;
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                total += self.get(i, j);
            }
        }
        total * 2.0 / (n * (n - 1)) as f64
    }
}

/// All pairwise distances. Each unordered pair is solved once, independently
/// of the others, so the parallel evaluation order cannot change any entry.
pub fn pairwise_distance_matrix(
    measures: &[DiscreteMeasure],
    metric: &GroundMetric,
    order_p: f64,
    solver: Solver,
    config: &OtConfig,
) -> Result<DistanceMatrix> {
    if measures.len() < 2 {
        return Err(invalid("pairwise distances need at least two measures"));
    }
    pairwise_unchecked(measures, metric, order_p, solver, config)
}

fn pairwise_unchecked(
    measures: &[DiscreteMeasure],
    metric: &GroundMetric,
    order_p: f64,
    solver: Solver,
    config: &OtConfig,
) -> Result<DistanceMatrix> {
    let n = measures.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let sinkhorn_config = OtConfig { order_p, ..*config };
    let entries: Vec<(f64, bool)> = pairs
        .par_iter()
        .map(|&(i, j)| match solver {
            Solver::Exact => exact_wasserstein(&measures[i], &measures[j], metric, order_p)
                .map(|r| (r.distance, true)),
            Solver::Sinkhorn => {
                sinkhorn_distance(&measures[i], &measures[j], metric, &sinkhorn_config)
                    .map(|r| (r.value, r.converged))
            }
        })
        .collect::<Result<_>>()?;

    let mut values = vec![0.0; n * n];
    let mut converged = true;
    for (&(i, j), &(value, ok)) in pairs.iter().zip(&entries) {
        values[i * n + j] = value;
        values[j * n + i] = value;
        converged &= ok;
    }
    Ok(DistanceMatrix {
        size: n,
        values,
        converged,
    })
}

/// Set member minimizing the sum of exact distances to all members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Medoid {
    pub index: usize,
    pub objective: f64,
}

/// Medoid over a finite set; ties go to the lowest index.
pub fn medoid_centroid(
    measures: &[DiscreteMeasure],
    metric: &GroundMetric,
    order_p: f64,
) -> Result<Medoid> {
    if measures.is_empty() {
        return Err(invalid("medoid of an empty set"));
    }
    if measures.len() == 1 {
        super::exact::check_inputs(&measures[0], &measures[0], metric, order_p)?;
        return Ok(Medoid {
            index: 0,
            objective: 0.0,
        });
    }
    let matrix = pairwise_unchecked(
        measures,
        metric,
        order_p,
        Solver::Exact,
        &OtConfig::default(),
    )?;
    let sums = matrix.row_sums();
    let mut best = 0;
    for (i, &s) in sums.iter().enumerate().skip(1) {
        if s < sums[best] {
            best = i;
        }
    }
    Ok(Medoid {
        index: best,
        objective: sums[best],
    })
}

/// One sample of the convexity probe along a reward mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexityPoint {
    pub t: f64,
    /// `W_p(Φ(t·R1 + (1-t)·R2), reference)`.
    pub lhs: f64,
    /// `t·W_p(Φ(R1), reference) + (1-t)·W_p(Φ(R2), reference)`.
    pub rhs: f64,
}

/// Samples distance-to-reference along the segment between two rewards,
/// next to the chord of the endpoint distances. The inequality `lhs <= rhs`
/// is recorded, not enforced: the softmax embedding is nonlinear.
pub fn convexity_probe(
    r1: &RewardTable,
    r2: &RewardTable,
    reference: &DiscreteMeasure,
    metric: &GroundMetric,
    t_grid: &[f64],
    temperature: f64,
    order_p: f64,
) -> Result<Vec<ConvexityPoint>> {
    if t_grid.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(invalid(
            "mixture weights must lie in the open interval (0, 1)",
        ));
    }
    let distance = |r: &RewardTable| -> Result<f64> {
        Ok(exact_wasserstein(&phi_embed(r, temperature)?, reference, metric, order_p)?.distance)
    };
    let d1 = distance(r1)?;
    let d2 = distance(r2)?;
    t_grid
        .iter()
        .map(|&t| {
            let lhs = distance(&r1.mix(r2, t)?)?;
            Ok(ConvexityPoint {
                t,
                lhs,
                rhs: t * d1 + (1.0 - t) * d2,
            })
        })
        .collect()
}
