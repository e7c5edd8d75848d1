//! Fixed-support entropic barycenters by iterative Bregman projections,
//! carried out on log-scalings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::reward::DiscreteMeasure;

use super::sinkhorn::lse;
use super::{GroundMetric, OtConfig};

#[derive(Debug, Clone)]
pub struct BarycenterResult {
    pub barycenter: DiscreteMeasure,
    pub converged: bool,
    pub iterations: usize,
    /// Max change of the barycenter weights over the last sweep.
    pub residual: f64,
}

/// How the row scalings are initialised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarycenterStart {
    /// All scalings one.
    Ones,
    /// Dual potentials drawn uniformly from `[-1, 1]·ε`, seeded, then
    /// recentred so their weighted sum vanishes. Converges to the same
    /// barycenter as `Ones`.
    Random(u64),
}

pub fn wasserstein_barycenter(
    measures: &[DiscreteMeasure],
    weights: &[f64],
    metric: &GroundMetric,
    config: &OtConfig,
) -> Result<BarycenterResult> {
    wasserstein_barycenter_from(measures, weights, metric, config, BarycenterStart::Ones)
}

/// Entropic barycenter on the metric's support, started from `start`.
///
/// When every positively weighted input is the same measure, that measure is
/// returned as is.
pub fn wasserstein_barycenter_from(
    measures: &[DiscreteMeasure],
    weights: &[f64],
    metric: &GroundMetric,
    config: &OtConfig,
    start: BarycenterStart,
) -> Result<BarycenterResult> {
    config.validate()?;
    if measures.is_empty() {
        return Err(invalid("barycenter needs at least one measure"));
    }
    if weights.len() != measures.len() {
        return Err(invalid("barycenter weights and measures differ in length"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0)
        || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12
    {
        return Err(invalid("barycenter weights must be a probability vector"));
    }
    let d = metric.size();
    if measures.iter().any(|m| m.len() != d) {
        return Err(invalid("measures do not share the metric's support"));
    }

    let active: Vec<usize> = (0..measures.len()).filter(|&k| weights[k] > 0.0).collect();
    let first = &measures[active[0]];
    if active.iter().all(|&k| measures[k] == *first) {
        return Ok(BarycenterResult {
            barycenter: first.clone(),
            converged: true,
            iterations: 0,
            residual: 0.0,
        });
    }
    if active.iter().any(|&k| !measures[k].is_strictly_positive()) {
        return Err(invalid(
            "entropic barycenter requires strictly positive measures",
        ));
    }

    let eps = config.reg_epsilon;
    let cost = metric.powered(config.order_p);
    let log_targets: Vec<Vec<f64>> = active
        .iter()
        .map(|&k| measures[k].weights().iter().map(|w| w.ln()).collect())
        .collect();
    let lambdas: Vec<f64> = active.iter().map(|&k| weights[k]).collect();

    // f_k = ε·log u_k (barycenter side), g_k = ε·log v_k (input side)
    let mut f: Vec<Vec<f64>> = match start {
        BarycenterStart::Ones => vec![vec![0.0; d]; active.len()],
        BarycenterStart::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut f: Vec<Vec<f64>> = (0..active.len())
                .map(|_| (0..d).map(|_| rng.gen_range(-1.0..=1.0) * eps).collect())
                .collect();
            for i in 0..d {
                let centre: f64 = (0..active.len()).map(|k| lambdas[k] * f[k][i]).sum();
                for fk in f.iter_mut() {
                    fk[i] -= centre;
                }
            }
            f
        }
    };
    let mut g = vec![vec![0.0; d]; active.len()];
    let mut log_kv = vec![vec![0.0; d]; active.len()];
    let mut scratch = vec![0.0; d];
    let mut bary = vec![1.0 / d as f64; d];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iterations {
        iterations += 1;
        let mut log_b = vec![0.0; d];
        for k in 0..active.len() {
            // project onto the input marginal
            for j in 0..d {
                for i in 0..d {
                    scratch[i] = (f[k][i] - cost[i * d + j]) / eps;
                }
                g[k][j] = eps * (log_targets[k][j] - lse(&scratch));
            }
            for i in 0..d {
                let row = &cost[i * d..(i + 1) * d];
                for j in 0..d {
                    scratch[j] = (g[k][j] - row[j]) / eps;
                }
                log_kv[k][i] = lse(&scratch);
                log_b[i] += lambdas[k] * (f[k][i] / eps + log_kv[k][i]);
            }
        }
        // project onto equal first marginals
        for k in 0..active.len() {
            for i in 0..d {
                f[k][i] = eps * (log_b[i] - log_kv[k][i]);
            }
        }
        let max_log = log_b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnormalized: Vec<f64> = log_b.iter().map(|l| (l - max_log).exp()).collect();
        let total: f64 = unnormalized.iter().sum();
        let next: Vec<f64> = unnormalized.iter().map(|x| x / total).collect();
        residual = crate::mdp::max_abs_diff(&next, &bary);
        bary = next;
        if !residual.is_finite() {
            break;
        }
        if residual < config.convergence_tol {
            converged = true;
            break;
        }
    }

    Ok(BarycenterResult {
        barycenter: DiscreteMeasure::from_masses(&bary)?,
        converged,
        iterations,
        residual,
    })
}
