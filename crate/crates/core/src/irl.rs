//! Maximum-entropy IRL with one-hot state-action features.
//!
//! The soft-optimal policy comes from a finite-horizon soft Bellman backward
//! pass that shares the episode structure of the sampled data (horizon cap,
//! termination after the first step in an absorbing state). With that
//! policy, `empirical − expected visitation − l2·R` is the exact gradient of
//!
//! ```text
//! L(R) = mean_τ Σ_t R(s_t, a_t) − Σ_s start(s)·V_0(s) − (l2/2)·‖R‖²
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{invalid, numeric, Result};
use crate::mdp::{log_sum_exp, Policy, TabularMdp, Trajectory};
use crate::reward::{RewardTable, DEFAULT_REWARD_BOUND};

const GRADIENT_NORM_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrlConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2_penalty: f64,
    /// Tolerance of the value-iteration solves around an IRL run (policy
    /// extraction from the inferred reward).
    pub soft_vi_tolerance: f64,
    pub horizon: usize,
}

impl Default for IrlConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            iterations: 500,
            l2_penalty: 0.01,
            soft_vi_tolerance: 1e-10,
            horizon: 50,
        }
    }
}

impl IrlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(invalid("learning_rate must be positive"));
        }
        if !(self.l2_penalty >= 0.0) || !self.l2_penalty.is_finite() {
            return Err(invalid("l2_penalty must be nonnegative"));
        }
        if !(self.soft_vi_tolerance > 0.0) {
            return Err(invalid("soft_vi_tolerance must be positive"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be positive"));
        }
        Ok(())
    }
}

/// Mean per-trajectory count of every state-action pair.
pub fn empirical_visitation(trajectories: &[Trajectory], mdp: &TabularMdp) -> Result<Vec<f64>> {
    if trajectories.is_empty() {
        return Err(invalid(
            "empirical visitation needs at least one trajectory",
        ));
    }
    let na = mdp.num_actions();
    let mut counts = vec![0.0; mdp.dimension()];
    for t in trajectories {
        for &(s, a) in &t.steps {
            if s >= mdp.num_states() || a >= na {
                return Err(invalid(format!("trajectory step ({s}, {a}) out of range")));
            }
            counts[s * na + a] += 1.0;
        }
    }
    let n = trajectories.len() as f64;
    counts.iter_mut().for_each(|c| *c /= n);
    Ok(counts)
}

/// Time-indexed soft-optimal policy and the soft value at time zero.
struct SoftPass {
    /// `policies[t][s * na + a]`.
    policies: Vec<Vec<f64>>,
    initial_values: Vec<f64>,
}

fn soft_backward(mdp: &TabularMdp, reward: &[f64], horizon: usize) -> Result<SoftPass> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut next_values = vec![0.0; ns];
    let mut policies = vec![Vec::new(); horizon];
    let mut q = vec![0.0; ns * na];
    for t in (0..horizon).rev() {
        let mut values = vec![0.0; ns];
        for s in 0..ns {
            for a in 0..na {
                let continuation = if mdp.is_absorbing(s) {
                    0.0
                } else {
                    mdp.expected_next(s, a, &next_values)
                };
                q[s * na + a] = reward[s * na + a] + continuation;
            }
            values[s] = log_sum_exp(&q[s * na..(s + 1) * na]);
            if !values[s].is_finite() {
                return Err(numeric("soft backward pass produced a non-finite value"));
            }
        }
        policies[t] = (0..ns * na)
            .map(|k| (q[k] - values[k / na]).exp())
            .collect();
        next_values = values;
    }
    Ok(SoftPass {
        policies,
        initial_values: next_values,
    })
}

fn forward_visitation(mdp: &TabularMdp, pass: &SoftPass) -> Vec<f64> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut visitation = vec![0.0; ns * na];
    let mut state = mdp.start_distribution().to_vec();
    for policy in &pass.policies {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            if state[s] == 0.0 {
                continue;
            }
            for a in 0..na {
                let mass = state[s] * policy[s * na + a];
                visitation[s * na + a] += mass;
                if !mdp.is_absorbing(s) {
                    for (sn, p) in mdp.next_states(s, a).iter().enumerate() {
                        next[sn] += mass * p;
                    }
                }
            }
        }
        state = next;
    }
    visitation
}

/// Expected state-action counts over the horizon under the soft-optimal policy of `reward`.
pub fn expected_visitation(
    mdp: &TabularMdp,
    reward: &RewardTable,
    config: &IrlConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    mdp.check_reward(reward)?;
    let pass = soft_backward(mdp, reward.values(), config.horizon)?;
    Ok(forward_visitation(mdp, &pass))
}

/// The time-indexed soft-optimal policies of `reward`, one per step of the horizon.
pub fn soft_optimal_policies(
    mdp: &TabularMdp,
    reward: &RewardTable,
    config: &IrlConfig,
) -> Result<Vec<Policy>> {
    config.validate()?;
    mdp.check_reward(reward)?;
    let pass = soft_backward(mdp, reward.values(), config.horizon)?;
    Ok(pass
        .policies
        .into_iter()
        .map(|p| Policy::from_rows_unchecked(mdp.num_actions(), p))
        .collect())
}

/// The regularized MaxEnt log-likelihood `L(R)` for raw reward values.
pub fn log_likelihood(
    mdp: &TabularMdp,
    empirical: &[f64],
    reward: &[f64],
    config: &IrlConfig,
) -> Result<f64> {
    let pass = soft_backward(mdp, reward, config.horizon)?;
    let data_term: f64 = empirical.iter().zip(reward).map(|(e, r)| e * r).sum();
    let partition: f64 = mdp
        .start_distribution()
        .iter()
        .zip(&pass.initial_values)
        .map(|(p, v)| p * v)
        .sum();
    let penalty = 0.5 * config.l2_penalty * reward.iter().map(|r| r * r).sum::<f64>();
    Ok(data_term - partition - penalty)
}

/// Analytic gradient of [`log_likelihood`].
pub fn log_likelihood_gradient(
    mdp: &TabularMdp,
    empirical: &[f64],
    reward: &[f64],
    config: &IrlConfig,
) -> Result<Vec<f64>> {
    let pass = soft_backward(mdp, reward, config.horizon)?;
    let expected = forward_visitation(mdp, &pass);
    Ok(empirical
        .iter()
        .zip(&expected)
        .zip(reward)
        .map(|((e, x), r)| e - x - config.l2_penalty * r)
        .collect())
}

/// Output of [`maxent_irl_traced`].
#[derive(Debug, Clone)]
pub struct IrlRun {
    pub reward: RewardTable,
    /// Log-likelihood before each update and after the last one.
    pub log_likelihoods: Vec<f64>,
}

/// Projected gradient ascent from the zero reward for a fixed number of
/// iterations; iterates are clipped into the reward bound. The procedure has
/// no random component, so `seed` does not change the result.
pub fn maxent_irl(
    mdp: &TabularMdp,
    trajectories: &[Trajectory],
    config: &IrlConfig,
    _seed: u64,
) -> Result<RewardTable> {
    run(mdp, trajectories, config, false).map(|r| r.reward)
}

/// [`maxent_irl`], also recording the log-likelihood at every iterate.
pub fn maxent_irl_traced(
    mdp: &TabularMdp,
    trajectories: &[Trajectory],
    config: &IrlConfig,
) -> Result<IrlRun> {
    run(mdp, trajectories, config, true)
}

fn run(
    mdp: &TabularMdp,
    trajectories: &[Trajectory],
    config: &IrlConfig,
    trace: bool,
) -> Result<IrlRun> {
    config.validate()?;
    let empirical = empirical_visitation(trajectories, mdp)?;
    let bound = DEFAULT_REWARD_BOUND;
    let mut reward = vec![0.0; mdp.dimension()];
    let mut log_likelihoods = Vec::new();
    for _ in 0..config.iterations {
        if trace {
            log_likelihoods.push(log_likelihood(mdp, &empirical, &reward, config)?);
        }
        let gradient = log_likelihood_gradient(mdp, &empirical, &reward, config)?;
        let norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !(norm <= GRADIENT_NORM_LIMIT) {
            return Err(numeric(format!("MaxEnt gradient norm {norm:.3e} diverged")));
        }
        for (r, g) in reward.iter_mut().zip(&gradient) {
            *r = (*r + config.learning_rate * g).clamp(-bound, bound);
        }
    }
    if trace {
        log_likelihoods.push(log_likelihood(mdp, &empirical, &reward, config)?);
    }
    Ok(IrlRun {
        reward: RewardTable::with_bound(mdp.num_states(), mdp.num_actions(), reward, bound)?,
        log_likelihoods,
    })
}
