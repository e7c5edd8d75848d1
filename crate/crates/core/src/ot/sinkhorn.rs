use crate::error::{invalid, Result};
use crate::reward::DiscreteMeasure;

use super::exact::check_inputs;
use super::{GroundMetric, OtConfig, TransportPlan};

/// Entropic transport estimate.
#[derive(Debug, Clone)]
pub struct SinkhornResult {
    /// `⟨γ_ε, cost^p⟩^(1/p)`; the entropy term is not included.
    pub value: f64,
    /// False when `max_iterations` ran out before the marginal violation
    /// dropped below `convergence_tol`.
    pub converged: bool,
    pub iterations: usize,
    pub marginal_violation: f64,
    pub plan: TransportPlan,
}

/// Log-domain Sinkhorn iterations on the kernel `exp(-cost^p / ε)`.
pub fn sinkhorn_distance(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    metric: &GroundMetric,
    config: &OtConfig,
) -> Result<SinkhornResult> {
    config.validate()?;
    check_inputs(mu, nu, metric, config.order_p)?;
    if !mu.is_strictly_positive() || !nu.is_strictly_positive() {
        return Err(invalid("sinkhorn requires strictly positive measures"));
    }
    let d = metric.size();
    let eps = config.reg_epsilon;
    let cost = metric.powered(config.order_p);
    let log_a: Vec<f64> = mu.weights().iter().map(|w| w.ln()).collect();
    let log_b: Vec<f64> = nu.weights().iter().map(|w| w.ln()).collect();

    let mut f = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut converged = false;
    let mut iterations = 0;
    let mut violation = f64::INFINITY;

    while iterations < config.max_iterations {
        iterations += 1;
        for i in 0..d {
            let row = &cost[i * d..(i + 1) * d];
            for j in 0..d {
                scratch[j] = (g[j] - row[j]) / eps;
            }
            f[i] = eps * (log_a[i] - lse(&scratch));
        }
        for j in 0..d {
            for i in 0..d {
                scratch[i] = (f[i] - cost[i * d + j]) / eps;
            }
            g[j] = eps * (log_b[j] - lse(&scratch));
        }
        // columns are exact after the g-update; measure the row error
        violation = 0.0;
        for i in 0..d {
            let row = &cost[i * d..(i + 1) * d];
            let mass: f64 = (0..d).map(|j| ((f[i] + g[j] - row[j]) / eps).exp()).sum();
            violation += (mass - mu.weights()[i]).abs();
        }
        if !violation.is_finite() {
            break;
        }
        if violation < config.convergence_tol {
            converged = true;
            break;
        }
    }

    let mut coupling = vec![0.0; d * d];
    let mut transport_cost = 0.0;
    for i in 0..d {
        for j in 0..d {
            let k = i * d + j;
            let gamma = ((f[i] + g[j] - cost[k]) / eps).exp();
            coupling[k] = gamma;
            transport_cost += gamma * cost[k];
        }
    }
    Ok(SinkhornResult {
        value: transport_cost.max(0.0).powf(1.0 / config.order_p),
        converged,
        iterations,
        marginal_violation: violation,
        plan: TransportPlan::new(coupling, mu.weights().to_vec(), nu.weights().to_vec()),
    })
}

pub(crate) fn lse(xs: &[f64]) -> f64 {
    crate::mdp::log_sum_exp(xs)
}
