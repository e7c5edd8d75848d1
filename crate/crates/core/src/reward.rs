//! Reward tables, the softmax embedding into probability measures, and
//! generators of policy-equivalent reward sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::mdp::{value_iteration, Move, QTable, TabularMdp, GRID_ACTIONS};

/// Default magnitude bound on reward entries.
pub const DEFAULT_REWARD_BOUND: f64 = 10.0;

/// Minimum gap between the best and second-best q-value for a greedy action
/// to count as decided.
pub const POLICY_MARGIN: f64 = 1e-8;

const EQUIVALENCE_VI_TOLERANCE: f64 = 1e-10;
const MAX_REJECTIONS: usize = 10_000;

/// A bounded real function on state-action pairs, stored row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
    bound: f64,
}

impl RewardTable {
    pub fn new(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_bound(num_states, num_actions, values, DEFAULT_REWARD_BOUND)
    }

    pub fn with_bound(
        num_states: usize,
        num_actions: usize,
        values: Vec<f64>,
        bound: f64,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(invalid(
                "reward table needs at least one state and one action",
            ));
        }
        if values.len() != num_states * num_actions {
            return Err(invalid(format!(
                "reward table has {} entries, expected {}",
                values.len(),
                num_states * num_actions
            )));
        }
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(invalid(format!(
                "reward bound must be positive and finite, got {bound}"
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > bound)
        {
            return Err(invalid(format!(
                "reward entry {i} = {v} is not finite or exceeds the bound {bound}"
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            values,
            bound,
        })
    }

    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![0.0; num_states * num_actions],
            bound: DEFAULT_REWARD_BOUND,
        }
    }

    /// Builds a table by clipping every entry into `[-bound, bound]`.
    pub fn clipped(
        num_states: usize,
        num_actions: usize,
        mut values: Vec<f64>,
        bound: f64,
    ) -> Result<Self> {
        values.iter_mut().for_each(|v| *v = v.clamp(-bound, bound));
        Self::with_bound(num_states, num_actions, values, bound)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn same_shape(&self, other: &RewardTable) -> bool {
        self.num_states == other.num_states && self.num_actions == other.num_actions
    }

    /// `t·self + (1-t)·other`.
    pub fn mix(&self, other: &RewardTable, t: f64) -> Result<RewardTable> {
        if !self.same_shape(other) {
            return Err(invalid("cannot mix reward tables of different shapes"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| t * a + (1.0 - t) * b)
            .collect();
        Self::with_bound(
            self.num_states,
            self.num_actions,
            values,
            self.bound.max(other.bound),
        )
    }
}

/// A probability vector over the state-action index set.
///
/// Weights are nonnegative and sum to one. Measures produced by
/// [`phi_embed`] are strictly positive; the entropic solvers require that.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
}

pub const MEASURE_SUM_TOLERANCE: f64 = 1e-12;

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("measure needs at least one support point"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("measure weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MEASURE_SUM_TOLERANCE {
            return Err(invalid(format!("measure weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    /// Normalizes nonnegative masses to a probability vector.
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(invalid("masses must have positive finite total"));
        }
        Self::new(masses.iter().map(|m| m / total).collect())
    }

    pub fn uniform(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(invalid("measure needs at least one support point"));
        }
        Ok(Self {
            weights: vec![1.0 / len as f64; len],
        })
    }

    pub fn dirac(len: usize, at: usize) -> Result<Self> {
        if at >= len {
            return Err(invalid(format!(
                "dirac location {at} outside support of size {len}"
            )));
        }
        let mut weights = vec![0.0; len];
        weights[at] = 1.0;
        Ok(Self { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0)
    }

    pub fn total_variation(&self, other: &DiscreteMeasure) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Embeds a reward table as the temperature softmax over all state-action
/// pairs. The maximum entry is subtracted before exponentiating.
pub fn phi_embed(reward: &RewardTable, temperature: f64) -> Result<DiscreteMeasure> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(invalid(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let max = reward
        .values()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let unnormalized: Vec<f64> = reward
        .values()
        .iter()
        .map(|v| ((v - max) / temperature).exp())
        .collect();
    let total: f64 = unnormalized.iter().sum();
    Ok(DiscreteMeasure {
        weights: unnormalized.into_iter().map(|w| w / total).collect(),
    })
}

/// Potential-based shaping: `R'(s,a) = R(s,a) + γ·E[φ(s')|s,a] − φ(s)`.
///
/// Fails if a shaped entry leaves the reward bound.
pub fn potential_shaping(
    mdp: &TabularMdp,
    reward: &RewardTable,
    potential: &[f64],
    discount: f64,
) -> Result<RewardTable> {
    mdp.check_reward(reward)?;
    if potential.len() != mdp.num_states() {
        return Err(invalid("potential length differs from state count"));
    }
    if potential.iter().any(|p| !p.is_finite()) {
        return Err(invalid("potential must be finite"));
    }
    let na = mdp.num_actions();
    let mut values = reward.values().to_vec();
    for s in 0..mdp.num_states() {
        for a in 0..na {
            values[s * na + a] += discount * mdp.expected_next(s, a, potential) - potential[s];
        }
    }
    RewardTable::with_bound(mdp.num_states(), na, values, reward.bound())
}

/// Outcome of comparing the greedy policies of two rewards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equivalence {
    Equivalent,
    Different,
    /// Some state has a best-vs-second-best q gap at or below [`POLICY_MARGIN`].
    Indeterminate,
}

fn greedy_with_margin(q: &QTable) -> (Vec<usize>, f64) {
    let mut actions = Vec::with_capacity(q.num_states());
    let mut margin = f64::INFINITY;
    for s in 0..q.num_states() {
        let row = q.row(s);
        let best = crate::mdp::argmax(row);
        let second = row
            .iter()
            .enumerate()
            .filter(|(a, _)| *a != best)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        margin = margin.min(row[best] - second);
        actions.push(best);
    }
    (actions, margin)
}

/// Greedy actions of `reward` and the smallest q-gap over states.
pub fn greedy_actions_with_margin(
    mdp: &TabularMdp,
    reward: &RewardTable,
) -> Result<(Vec<usize>, f64)> {
    let (_, q) = value_iteration(mdp, reward, EQUIVALENCE_VI_TOLERANCE)?;
    Ok(greedy_with_margin(&q))
}

pub fn verify_policy_equivalence(
    mdp: &TabularMdp,
    r1: &RewardTable,
    r2: &RewardTable,
) -> Result<Equivalence> {
    let (a1, m1) = greedy_actions_with_margin(mdp, r1)?;
    let (a2, m2) = greedy_actions_with_margin(mdp, r2)?;
    Ok(classify(&a1, m1, &a2, m2))
}

fn classify(a1: &[usize], m1: f64, a2: &[usize], m2: f64) -> Equivalence {
    if m1 <= POLICY_MARGIN || m2 <= POLICY_MARGIN {
        Equivalence::Indeterminate
    } else if a1 == a2 {
        Equivalence::Equivalent
    } else {
        Equivalence::Different
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMethod {
    /// Random potential-based shaping with potentials uniform in ±noise_scale.
    Shaping,
    /// I.i.d. uniform perturbation, rejection-sampled until the greedy policy matches.
    PerturbAccept,
}

/// Draws `count` rewards whose greedy policy matches that of `base_reward`.
/// Sample `i` uses its own generator seeded with `seed + i`.
pub fn generate_equivalent_rewards(
    mdp: &TabularMdp,
    base_reward: &RewardTable,
    count: usize,
    method: GenerationMethod,
    noise_scale: f64,
    seed: u64,
) -> Result<Vec<RewardTable>> {
    if count == 0 {
        return Err(invalid("count must be positive"));
    }
    if !(noise_scale > 0.0) || !noise_scale.is_finite() {
        return Err(invalid(format!(
            "noise scale must be positive, got {noise_scale}"
        )));
    }
    let (base_actions, base_margin) = greedy_actions_with_margin(mdp, base_reward)?;
    if base_margin <= POLICY_MARGIN {
        return Err(invalid(format!(
            "base reward has a greedy tie (q-gap {base_margin:.3e}); equivalence is undecidable"
        )));
    }

    let bound = base_reward.bound();
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let mut rejections = 0usize;
        let mut attempts = 0usize;
        loop {
            attempts += 1;
            let values = match method {
                GenerationMethod::Shaping => {
                    let potential: Vec<f64> = (0..ns)
                        .map(|_| rng.gen_range(-noise_scale..=noise_scale))
                        .collect();
                    let mut values = base_reward.values().to_vec();
                    for s in 0..ns {
                        for a in 0..na {
                            values[s * na + a] +=
                                mdp.discount() * mdp.expected_next(s, a, &potential) - potential[s];
                        }
                    }
                    values
                }
                GenerationMethod::PerturbAccept => base_reward
                    .values()
                    .iter()
                    .map(|v| v + rng.gen_range(-noise_scale..=noise_scale))
                    .collect(),
            };
            let candidate = RewardTable::clipped(ns, na, values, bound)?;
            let (actions, margin) = greedy_actions_with_margin(mdp, &candidate)?;
            if classify(&base_actions, base_margin, &actions, margin) == Equivalence::Equivalent {
                out.push(candidate);
                break;
            }
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(Error::GenerationFailure {
                    message: format!("sample {i} exhausted {MAX_REJECTIONS} rejections"),
                    acceptance_rate: (out.len() as f64) / (out.len() + attempts) as f64,
                });
            }
        }
    }
    Ok(out)
}

/// Mean over state-action pairs of the population variance across the set.
pub fn compute_reward_variance(rewards: &[RewardTable]) -> Result<f64> {
    if rewards.len() < 2 {
        return Err(invalid("reward variance needs at least two tables"));
    }
    let first = &rewards[0];
    if rewards.iter().any(|r| !r.same_shape(first)) {
        return Err(invalid("reward tables have different shapes"));
    }
    let d = first.dimension();
    let mut total = 0.0;
    for idx in 0..d {
        // Welford's single-pass update
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (k, r) in rewards.iter().enumerate() {
            let x = r.values[idx];
            let delta = x - mean;
            mean += delta / (k + 1) as f64;
            m2 += delta * (x - mean);
        }
        total += m2 / rewards.len() as f64;
    }
    Ok(total / d as f64)
}

/// The gridworld reward used as ground truth by the experiments: `goal_value`
/// for staying in an absorbing cell, and a small action-ordered cost
/// `action_cost·(a+1)/5` everywhere else.
pub fn goal_reward_table(
    mdp: &TabularMdp,
    goal_value: f64,
    action_cost: f64,
) -> Result<RewardTable> {
    if mdp.num_actions() != GRID_ACTIONS {
        return Err(invalid(
            "goal reward is defined for the five-action gridworld",
        ));
    }
    let na = GRID_ACTIONS;
    let mut values = vec![0.0; mdp.dimension()];
    for s in 0..mdp.num_states() {
        for a in 0..na {
            values[s * na + a] = if mdp.is_absorbing(s) && a == Move::Stay as usize {
                goal_value
            } else {
                -action_cost * (a + 1) as f64 / na as f64
            };
        }
    }
    RewardTable::new(mdp.num_states(), na, values)
}
