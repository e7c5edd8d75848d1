//! Experiment drivers: reward ambiguity as a function of trajectory count,
//! demonstration noise and dimension, plus centroid analysis of
//! policy-equivalent reward sets.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]. Replicate
//! streams are seeded with [`derive_seed`]; records are sorted canonically
//! before they are returned, so the rayon schedule never shows in the output.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::irl::{maxent_irl, IrlConfig};
use crate::mdp::{
    build_gridworld, greedy_policy, sample_trajectories, value_iteration, Policy, TabularMdp,
};
use crate::ot::{
    exact_wasserstein, ground_metric_gridworld, medoid_centroid, pairwise_distance_matrix,
    wasserstein_barycenter, wasserstein_barycenter_from, BarycenterStart, GroundMetric, OtConfig,
    Solver,
};
use crate::reward::{
    compute_reward_variance, generate_equivalent_rewards, goal_reward_table, phi_embed,
    DiscreteMeasure, GenerationMethod, RewardTable,
};

/// Stream offsets added to a replicate's base seed.
pub const TRAJECTORY_STREAM: u64 = 1;
pub const IRL_STREAM: u64 = 2;
pub const GENERATION_STREAM: u64 = 3;
pub const MULTISTART_STREAM: u64 = 4;

const REPLICATE_STRIDE: u64 = 1_000_003;

/// `master + 1_000_003·replicate + stream`, wrapping.
pub fn derive_seed(master: u64, replicate: u64, stream: u64) -> u64 {
    master
        .wrapping_add(replicate.wrapping_mul(REPLICATE_STRIDE))
        .wrapping_add(stream)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Converge,
    Noise,
    DimSweep,
    Centroid,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Converge => "converge",
            ExperimentKind::Noise => "noise",
            ExperimentKind::DimSweep => "dim_sweep",
            ExperimentKind::Centroid => "centroid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "converge" => Some(ExperimentKind::Converge),
            "noise" => Some(ExperimentKind::Noise),
            "dim_sweep" => Some(ExperimentKind::DimSweep),
            "centroid" => Some(ExperimentKind::Centroid),
            _ => None,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Gridworld shape; the goal sits in the far corner `(width-1, height-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSize {
    pub width: usize,
    pub height: usize,
}

impl GridSize {
    pub fn dimension(&self) -> usize {
        self.width * self.height * crate::mdp::GRID_ACTIONS
    }
}

/// How equivalence sets are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub method: GenerationMethod,
    /// Noise scale as a fraction of the ground-truth reward's range
    /// (`max - min` over entries).
    pub noise_scale: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            method: GenerationMethod::Shaping,
            noise_scale: 0.1,
        }
    }
}

fn default_temperature() -> f64 {
    1.0
}
fn default_slip() -> f64 {
    0.1
}
fn default_discount() -> f64 {
    0.9
}
fn default_goal_value() -> f64 {
    1.0
}
fn default_action_cost() -> f64 {
    0.1
}
fn default_action_penalty() -> f64 {
    1.0
}
fn default_noise_trajectories() -> usize {
    64
}
fn default_multistart() -> usize {
    4
}

/// A single JSON document describing one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub grid_sizes: Vec<GridSize>,
    #[serde(default)]
    pub trajectory_counts: Vec<usize>,
    #[serde(default)]
    pub noise_levels: Vec<f64>,
    #[serde(default)]
    pub set_size: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub ot: OtConfig,
    #[serde(default)]
    pub irl: IrlConfig,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_slip")]
    pub slip: f64,
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default = "default_goal_value")]
    pub goal_value: f64,
    #[serde(default = "default_action_cost")]
    pub action_cost: f64,
    /// Extra ground-metric cost between different actions.
    #[serde(default = "default_action_penalty")]
    pub action_penalty: f64,
    #[serde(default)]
    pub generation: GenerationConfig,
    /// Trajectories per replicate in the noise experiment.
    #[serde(default = "default_noise_trajectories")]
    pub noise_trajectories: usize,
    /// Random barycenter starts compared against the default start.
    #[serde(default = "default_multistart")]
    pub multistart: usize,
}

impl ExperimentConfig {
    /// A ready-to-run config for `kind`. Fields not listed in a JSON config
    /// take the serde defaults instead; the presets differ from those where
    /// noted: the IRL experiments use temperature 4 and 2000 IRL iterations.
    pub fn new(kind: ExperimentKind) -> Self {
        let four = GridSize {
            width: 4,
            height: 4,
        };
        let mut config = Self {
            kind,
            grid_sizes: vec![four],
            trajectory_counts: Vec::new(),
            noise_levels: Vec::new(),
            set_size: 0,
            seeds: (0..10).collect(),
            master_seed: 0,
            ot: OtConfig::default(),
            irl: IrlConfig::default(),
            temperature: default_temperature(),
            slip: default_slip(),
            discount: default_discount(),
            goal_value: default_goal_value(),
            action_cost: default_action_cost(),
            action_penalty: default_action_penalty(),
            generation: GenerationConfig::default(),
            noise_trajectories: default_noise_trajectories(),
            multistart: default_multistart(),
        };
        match kind {
            ExperimentKind::Converge => {
                config.trajectory_counts = vec![8, 64, 512];
                config.temperature = 4.0;
                config.irl.iterations = 2000;
            }
            ExperimentKind::Noise => {
                config.noise_levels = vec![0.0, 0.05, 0.1, 0.2];
                config.temperature = 4.0;
                config.irl.iterations = 2000;
            }
            ExperimentKind::DimSweep => {
                config.grid_sizes = (2..=4)
                    .map(|n| GridSize {
                        width: n,
                        height: n,
                    })
                    .collect();
                config.set_size = 15;
            }
            ExperimentKind::Centroid => {
                config.grid_sizes = vec![GridSize {
                    width: 2,
                    height: 2,
                }];
                config.set_size = 8;
                config.ot.reg_epsilon = 0.1;
            }
        }
        config
    }

    /// Checks every field; error messages start with the offending key.
    pub fn validate(&self) -> Result<()> {
        self.ot.validate().map_err(|e| prefix("ot", e))?;
        self.irl.validate().map_err(|e| prefix("irl", e))?;
        if self.grid_sizes.is_empty() {
            return Err(invalid("grid_sizes: must not be empty"));
        }
        if self
            .grid_sizes
            .iter()
            .any(|g| g.width == 0 || g.height == 0)
        {
            return Err(invalid("grid_sizes: width and height must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds: must not be empty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(invalid("seeds: must be distinct"));
        }
        for (key, value) in [
            ("temperature", self.temperature),
            ("goal_value", self.goal_value),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(invalid(format!("{key}: must be positive and finite")));
            }
        }
        if !(0.0..1.0).contains(&self.slip) {
            return Err(invalid("slip: must lie in [0, 1)"));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(invalid("discount: must lie in (0, 1)"));
        }
        if !(self.action_cost >= 0.0) || !self.action_cost.is_finite() {
            return Err(invalid("action_cost: must be nonnegative"));
        }
        if !(self.action_penalty >= 0.0) || !self.action_penalty.is_finite() {
            return Err(invalid("action_penalty: must be nonnegative"));
        }
        if !(self.generation.noise_scale > 0.0) || !self.generation.noise_scale.is_finite() {
            return Err(invalid("generation.noise_scale: must be positive"));
        }
        match self.kind {
            ExperimentKind::Converge => {
                self.single_grid()?;
                strictly_increasing("trajectory_counts", &self.trajectory_counts)?;
                if self.trajectory_counts[0] == 0 {
                    return Err(invalid("trajectory_counts: entries must be positive"));
                }
            }
            ExperimentKind::Noise => {
                self.single_grid()?;
                strictly_increasing("noise_levels", &self.noise_levels)?;
                if self.noise_levels.iter().any(|e| !(0.0..1.0).contains(e)) {
                    return Err(invalid("noise_levels: entries must lie in [0, 1)"));
                }
                if self.noise_levels[0] != 0.0 {
                    return Err(invalid("noise_levels: must include 0"));
                }
                if self.noise_trajectories == 0 {
                    return Err(invalid("noise_trajectories: must be positive"));
                }
            }
            ExperimentKind::DimSweep => {
                let dims: Vec<usize> = self.grid_sizes.iter().map(GridSize::dimension).collect();
                strictly_increasing("grid_sizes", &dims)?;
                if self.set_size < 2 {
                    return Err(invalid("set_size: needs at least 2 rewards"));
                }
            }
            ExperimentKind::Centroid => {
                let dims: Vec<usize> = self.grid_sizes.iter().map(GridSize::dimension).collect();
                strictly_increasing("grid_sizes", &dims)?;
                if self.set_size < 1 {
                    return Err(invalid("set_size: must be positive"));
                }
            }
        }
        Ok(())
    }

    fn single_grid(&self) -> Result<GridSize> {
        match self.grid_sizes.as_slice() {
            [g] => Ok(*g),
            _ => Err(invalid(format!(
                "grid_sizes: {} experiments use exactly one grid",
                self.kind
            ))),
        }
    }

    fn world(&self, grid: GridSize) -> Result<World> {
        let goal = (grid.width - 1, grid.height - 1);
        let mdp = build_gridworld(grid.width, grid.height, self.slip, self.discount, &[goal])?;
        let metric = ground_metric_gridworld(&mdp, self.action_penalty)?;
        let truth = goal_reward_table(&mdp, self.goal_value, self.action_cost)?;
        let (_, q) = value_iteration(&mdp, &truth, self.irl.soft_vi_tolerance)?;
        let expert = greedy_policy(&q);
        let truth_measure = phi_embed(&truth, self.temperature)?;
        Ok(World {
            mdp,
            metric,
            truth,
            expert,
            truth_measure,
        })
    }
}

fn prefix(key: &str, e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => invalid(format!("{key}.{m}")),
        other => other,
    }
}

fn strictly_increasing<T: PartialOrd>(key: &str, values: &[T]) -> Result<()> {
    if values.is_empty() {
        return Err(invalid(format!("{key}: must not be empty")));
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid(format!("{key}: must be strictly increasing")));
    }
    Ok(())
}

struct World {
    mdp: TabularMdp,
    metric: GroundMetric,
    truth: RewardTable,
    expert: Policy,
    truth_measure: DiscreteMeasure,
}

/// One measured value. Aggregate rows (such as the noise envelope) carry no seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub kind: ExperimentKind,
    /// `n`, `ε` or `d`, depending on the experiment.
    pub variable: f64,
    pub seed: Option<u64>,
    pub metric: String,
    pub value: f64,
    pub converged: bool,
    pub wall_ms: u64,
}

impl ResultRecord {
    fn new(
        kind: ExperimentKind,
        variable: f64,
        seed: Option<u64>,
        metric: &str,
        value: f64,
    ) -> Self {
        Self {
            kind,
            variable,
            seed,
            metric: metric.to_string(),
            value,
            converged: true,
            wall_ms: 0,
        }
    }

    /// A record standing in for a failed computation: NaN value, not converged.
    fn failed(kind: ExperimentKind, variable: f64, seed: u64, metric: &str) -> Self {
        Self {
            converged: false,
            ..Self::new(kind, variable, Some(seed), metric, f64::NAN)
        }
    }
}

/// Sorts by kind, variable, seed (aggregates last) and metric name.
pub fn sort_records(records: &mut [ResultRecord]) {
    records.sort_by(|a, b| {
        a.kind
            .cmp(&b.kind)
            .then(a.variable.total_cmp(&b.variable))
            .then(a.seed.unwrap_or(u64::MAX).cmp(&b.seed.unwrap_or(u64::MAX)))
            .then(a.seed.is_none().cmp(&b.seed.is_none()))
            .then(a.metric.cmp(&b.metric))
    });
}

/// How demonstrations are corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// `(1-ε)·π + ε·uniform`.
    UniformMix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    epsilon: f64,
    kind: Perturbation,
}

impl NoiseModel {
    pub fn new(epsilon: f64, kind: Perturbation) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(invalid(format!(
                "noise epsilon must lie in [0, 1), got {epsilon}"
            )));
        }
        Ok(Self { epsilon, kind })
    }

    pub fn uniform_mix(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, Perturbation::UniformMix)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kind(&self) -> Perturbation {
        self.kind
    }
}

/// Mixes the policy toward uniform. Uniform mixing draws nothing at random;
/// `seed` is accepted for perturbation kinds that do.
pub fn perturb_policy(policy: &Policy, noise: &NoiseModel, _seed: u64) -> Policy {
    let eps = noise.epsilon;
    if eps == 0.0 {
        return policy.clone();
    }
    let na = policy.num_actions();
    let share = eps / na as f64;
    let probabilities = policy
        .probabilities()
        .iter()
        .map(|p| (1.0 - eps) * p + share)
        .collect();
    Policy::from_rows_unchecked(na, probabilities)
}

/// `(2 / (m(m-1))) · Σ_{i<j} W_p(μ_i, μ_j)` with the exact solver.
pub fn average_pairwise_distance(
    measures: &[DiscreteMeasure],
    metric: &GroundMetric,
    order_p: f64,
) -> Result<f64> {
    if measures.len() < 2 {
        return Err(invalid(
            "average pairwise distance needs at least two measures",
        ));
    }
    let matrix = pairwise_distance_matrix(
        measures,
        metric,
        order_p,
        Solver::Exact,
        &OtConfig::default(),
    )?;
    Ok(matrix.upper_mean())
}

/// Pool-adjacent-violators fit of a nondecreasing sequence (equal weights).
pub fn isotonic_nondecreasing(values: &[f64]) -> Vec<f64> {
    // blocks of (sum, count)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s2, c2) = blocks[blocks.len() - 1];
            let (s1, c1) = blocks[blocks.len() - 2];
            if s1 / c1 as f64 <= s2 / c2 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s1 + s2, c1 + c2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, c)| std::iter::repeat(s / c as f64).take(c))
        .collect()
}

/// Expected undiscounted episode return of `policy` under `reward`, with the
/// episode structure of the sampler (horizon cap, stop after the first step
/// in an absorbing state).
pub fn expected_return(
    mdp: &TabularMdp,
    policy: &Policy,
    reward: &RewardTable,
    horizon: usize,
) -> f64 {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut state = mdp.start_distribution().to_vec();
    let mut total = 0.0;
    for _ in 0..horizon {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            if state[s] == 0.0 {
                continue;
            }
            for a in 0..na {
                let mass = state[s] * policy.row(s)[a];
                total += mass * reward.get(s, a);
                if !mdp.is_absorbing(s) {
                    for (t, p) in mdp.next_states(s, a).iter().enumerate() {
                        next[t] += mass * p;
                    }
                }
            }
        }
        state = next;
    }
    total
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn finish(mut records: Vec<ResultRecord>) -> Vec<ResultRecord> {
    sort_records(&mut records);
    records
}

fn expect_kind(config: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if config.kind != kind {
        return Err(invalid(format!(
            "kind: expected {kind}, got {}",
            config.kind
        )));
    }
    config.validate()
}

/// The reward inferred by the IRL experiments for replicate seed
/// `replicate` from `count` demonstrations of the (possibly perturbed)
/// expert on the config's single grid.
pub fn inferred_reward(
    config: &ExperimentConfig,
    count: usize,
    replicate: u64,
    noise: &NoiseModel,
) -> Result<RewardTable> {
    config.validate()?;
    let world = config.world(config.single_grid()?)?;
    infer(
        &world,
        config,
        &perturb_policy(&world.expert, noise, replicate),
        count,
        replicate,
    )
}

/// Infers a reward from `count` demonstrations of `policy`. The trajectory
/// seed depends only on the replicate, so runs that differ in `count` or in
/// the policy share their random stream.
fn infer(
    world: &World,
    config: &ExperimentConfig,
    policy: &Policy,
    count: usize,
    replicate: u64,
) -> Result<RewardTable> {
    let seed = derive_seed(config.master_seed, replicate, TRAJECTORY_STREAM);
    let trajectories = sample_trajectories(&world.mdp, policy, count, config.irl.horizon, seed)?;
    maxent_irl(
        &world.mdp,
        &trajectories,
        &config.irl,
        derive_seed(config.master_seed, replicate, IRL_STREAM),
    )
}

/// For each trajectory count and seed: `wp_to_true` between the embedded
/// inferred and true rewards, and `expected_reward_gap`, the difference
/// between the inferred reward's return under its own greedy policy and the
/// true reward's return under the expert.
pub fn run_convergence_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let kind = ExperimentKind::Converge;
    expect_kind(config, kind)?;
    let world = config.world(config.single_grid()?)?;
    let p = config.ot.order_p;
    let true_return = expected_return(&world.mdp, &world.expert, &world.truth, config.irl.horizon);

    let units: Vec<(usize, u64)> = config
        .trajectory_counts
        .iter()
        .flat_map(|&n| config.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let records = units
        .par_iter()
        .map(|&(n, seed)| -> Result<Vec<ResultRecord>> {
            let start = Instant::now();
            let variable = n as f64;
            let measured = (|| -> Result<(f64, f64)> {
                let inferred = infer(&world, config, &world.expert, n, seed)?;
                let measure = phi_embed(&inferred, config.temperature)?;
                let wp =
                    exact_wasserstein(&measure, &world.truth_measure, &world.metric, p)?.distance;
                let (_, q) = value_iteration(&world.mdp, &inferred, config.irl.soft_vi_tolerance)?;
                let own = expected_return(
                    &world.mdp,
                    &greedy_policy(&q),
                    &inferred,
                    config.irl.horizon,
                );
                Ok((wp, (own - true_return).abs()))
            })();
            let wall_ms = elapsed_ms(start);
            Ok(match measured {
                Ok((wp, gap)) => vec![
                    ResultRecord {
                        wall_ms,
                        ..ResultRecord::new(kind, variable, Some(seed), "wp_to_true", wp)
                    },
                    ResultRecord {
                        wall_ms,
                        ..ResultRecord::new(kind, variable, Some(seed), "expected_reward_gap", gap)
                    },
                ],
                Err(Error::NumericFailure(_)) => vec![
                    ResultRecord {
                        wall_ms,
                        ..ResultRecord::failed(kind, variable, seed, "wp_to_true")
                    },
                    ResultRecord {
                        wall_ms,
                        ..ResultRecord::failed(kind, variable, seed, "expected_reward_gap")
                    },
                ],
                Err(e) => return Err(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(records.into_iter().flatten().collect()))
}

/// For each noise level and seed: `wp_noise` between the rewards inferred
/// from clean and from perturbed demonstrations, drawn with the same
/// trajectory stream. Adds aggregate rows per noise level: `wp_envelope_raw`
/// (max over seeds) and `wp_envelope` (its nondecreasing isotonic fit).
pub fn run_noise_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let kind = ExperimentKind::Noise;
    expect_kind(config, kind)?;
    let world = config.world(config.single_grid()?)?;
    let p = config.ot.order_p;
    let n = config.noise_trajectories;

    let clean: Vec<Option<DiscreteMeasure>> = config
        .seeds
        .par_iter()
        .map(
            |&seed| match infer(&world, config, &world.expert, n, seed) {
                Ok(r) => phi_embed(&r, config.temperature).map(Some),
                Err(Error::NumericFailure(_)) => Ok(None),
                Err(e) => Err(e),
            },
        )
        .collect::<Result<_>>()?;

    let units: Vec<(f64, usize)> = config
        .noise_levels
        .iter()
        .flat_map(|&eps| (0..config.seeds.len()).map(move |k| (eps, k)))
        .collect();
    let mut records = units
        .par_iter()
        .map(|&(eps, k)| -> Result<ResultRecord> {
            let start = Instant::now();
            let seed = config.seeds[k];
            let measured = (|| -> Result<f64> {
                let Some(base) = &clean[k] else {
                    return Err(Error::NumericFailure("clean reward unavailable".into()));
                };
                let noise = NoiseModel::uniform_mix(eps)?;
                let policy = perturb_policy(&world.expert, &noise, seed);
                let noisy = phi_embed(
                    &infer(&world, config, &policy, n, seed)?,
                    config.temperature,
                )?;
                Ok(exact_wasserstein(base, &noisy, &world.metric, p)?.distance)
            })();
            let wall_ms = elapsed_ms(start);
            match measured {
                Ok(v) => Ok(ResultRecord {
                    wall_ms,
                    ..ResultRecord::new(kind, eps, Some(seed), "wp_noise", v)
                }),
                Err(Error::NumericFailure(_)) => Ok(ResultRecord {
                    wall_ms,
                    ..ResultRecord::failed(kind, eps, seed, "wp_noise")
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let raw: Vec<f64> = config
        .noise_levels
        .iter()
        .map(|&eps| {
            records
                .iter()
                .filter(|r| r.variable == eps && r.value.is_finite())
                .map(|r| r.value)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    // a level with no finite value contributes nothing to the fit
    let fitted_levels: Vec<usize> = (0..raw.len()).filter(|&i| raw[i].is_finite()).collect();
    let fitted = isotonic_nondecreasing(&fitted_levels.iter().map(|&i| raw[i]).collect::<Vec<_>>());
    for (i, &eps) in config.noise_levels.iter().enumerate() {
        let complete = records
            .iter()
            .filter(|r| r.variable == eps)
            .all(|r| r.converged);
        let envelope = fitted_levels
            .iter()
            .position(|&j| j == i)
            .map_or(f64::NAN, |k| fitted[k]);
        records.push(ResultRecord {
            converged: complete && raw[i].is_finite(),
            ..ResultRecord::new(
                kind,
                eps,
                None,
                "wp_envelope_raw",
                if raw[i].is_finite() { raw[i] } else { f64::NAN },
            )
        });
        records.push(ResultRecord {
            converged: complete && envelope.is_finite(),
            ..ResultRecord::new(kind, eps, None, "wp_envelope", envelope)
        });
    }
    Ok(finish(records))
}

/// Seeded equivalence set of the ground-truth reward, embedded.
fn equivalence_set(
    world: &World,
    config: &ExperimentConfig,
    replicate: u64,
) -> Result<(Vec<RewardTable>, Vec<DiscreteMeasure>)> {
    let values = world.truth.values();
    let range = values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - values.iter().copied().fold(f64::INFINITY, f64::min);
    let rewards = generate_equivalent_rewards(
        &world.mdp,
        &world.truth,
        config.set_size,
        config.generation.method,
        config.generation.noise_scale * range,
        derive_seed(config.master_seed, replicate, GENERATION_STREAM),
    )?;
    let measures = rewards
        .iter()
        .map(|r| phi_embed(r, config.temperature))
        .collect::<Result<Vec<_>>>()?;
    Ok((rewards, measures))
}

/// For each grid size and seed: `delta_d`, the average pairwise distance of
/// an embedded equivalence set, and `variance_d`, the mean per-entry variance
/// of the raw rewards. Count, noise scale, temperature and solver settings
/// are the same at every size.
pub fn run_dimensionality_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let kind = ExperimentKind::DimSweep;
    expect_kind(config, kind)?;
    let worlds = config
        .grid_sizes
        .iter()
        .map(|&g| config.world(g))
        .collect::<Result<Vec<_>>>()?;
    let p = config.ot.order_p;
    let units: Vec<(usize, u64)> = (0..worlds.len())
        .flat_map(|w| config.seeds.iter().map(move |&s| (w, s)))
        .collect();
    let records = units
        .par_iter()
        .map(|&(w, seed)| -> Result<Vec<ResultRecord>> {
            let start = Instant::now();
            let world = &worlds[w];
            let variable = world.mdp.dimension() as f64;
            let measured = (|| -> Result<(f64, f64)> {
                let (rewards, measures) = equivalence_set(world, config, seed)?;
                Ok((
                    average_pairwise_distance(&measures, &world.metric, p)?,
                    compute_reward_variance(&rewards)?,
                ))
            })();
            let wall_ms = elapsed_ms(start);
            Ok(match measured {
                Ok((delta, variance)) => vec![
                    ResultRecord {
                        wall_ms,
                        ..ResultRecord::new(kind, variable, Some(seed), "delta_d", delta)
                    },
                    ResultRecord {
                        wall_ms,
                        ..ResultRecord::new(kind, variable, Some(seed), "variance_d", variance)
                    },
                ],
                Err(Error::GenerationFailure { .. }) | Err(Error::NumericFailure(_)) => vec![
                    ResultRecord {
                        wall_ms,
                        ..ResultRecord::failed(kind, variable, seed, "delta_d")
                    },
                    ResultRecord {
                        wall_ms,
                        ..ResultRecord::failed(kind, variable, seed, "variance_d")
                    },
                ],
                Err(e) => return Err(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(records.into_iter().flatten().collect()))
}

/// `(1/m) · Σ_k W_p(b, μ_k)^p`, the objective both centroids are scored on.
pub fn centroid_objective(
    candidate: &DiscreteMeasure,
    measures: &[DiscreteMeasure],
    metric: &GroundMetric,
    order_p: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for m in measures {
        total += exact_wasserstein(candidate, m, metric, order_p)?.objective;
    }
    Ok(total / measures.len() as f64)
}

/// Medoid, barycenter and multi-start spread of one embedded set.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidReport {
    pub medoid_index: usize,
    pub medoid_objective: f64,
    pub barycenter: DiscreteMeasure,
    pub barycenter_objective: f64,
    pub barycenter_converged: bool,
    /// Largest total-variation distance between the default-start barycenter
    /// and any random start.
    pub multistart_spread: f64,
}

/// Scores the medoid and the entropic barycenter (uniform weights) of
/// `measures` with [`centroid_objective`], and reruns the barycenter from
/// `starts` seeded random initializations.
pub fn analyze_centroids(
    measures: &[DiscreteMeasure],
    metric: &GroundMetric,
    ot: &OtConfig,
    starts: usize,
    seed: u64,
) -> Result<CentroidReport> {
    let p = ot.order_p;
    let medoid = medoid_centroid(measures, metric, p)?;
    let medoid_objective = centroid_objective(&measures[medoid.index], measures, metric, p)?;
    let weights = vec![1.0 / measures.len() as f64; measures.len()];
    let base = wasserstein_barycenter(measures, &weights, metric, ot)?;
    let mut converged = base.converged;
    let mut spread: f64 = 0.0;
    for k in 0..starts {
        let other = wasserstein_barycenter_from(
            measures,
            &weights,
            metric,
            ot,
            BarycenterStart::Random(seed.wrapping_add(k as u64)),
        )?;
        converged &= other.converged;
        spread = spread.max(other.barycenter.total_variation(&base.barycenter));
    }
    let barycenter_objective = centroid_objective(&base.barycenter, measures, metric, p)?;
    Ok(CentroidReport {
        medoid_index: medoid.index,
        medoid_objective,
        barycenter: base.barycenter,
        barycenter_objective,
        barycenter_converged: converged,
        multistart_spread: spread,
    })
}

/// For each grid size and seed: `medoid_objective`, `barycenter_objective`
/// and `multistart_spread` of an embedded equivalence set. The barycenter
/// rows are flagged unconverged when any start hit its iteration cap.
pub fn run_centroid_analysis(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let kind = ExperimentKind::Centroid;
    expect_kind(config, kind)?;
    let worlds = config
        .grid_sizes
        .iter()
        .map(|&g| config.world(g))
        .collect::<Result<Vec<_>>>()?;
    let units: Vec<(usize, u64)> = (0..worlds.len())
        .flat_map(|w| config.seeds.iter().map(move |&s| (w, s)))
        .collect();
    let metrics = [
        "medoid_objective",
        "barycenter_objective",
        "multistart_spread",
    ];
    let records = units
        .par_iter()
        .map(|&(w, seed)| -> Result<Vec<ResultRecord>> {
            let start = Instant::now();
            let world = &worlds[w];
            let variable = world.mdp.dimension() as f64;
            let measured = (|| -> Result<CentroidReport> {
                let (_, measures) = equivalence_set(world, config, seed)?;
                analyze_centroids(
                    &measures,
                    &world.metric,
                    &config.ot,
                    config.multistart,
                    derive_seed(config.master_seed, seed, MULTISTART_STREAM),
                )
            })();
            let wall_ms = elapsed_ms(start);
            Ok(match measured {
                Ok(report) => vec![
                    ResultRecord {
                        wall_ms,
                        ..ResultRecord::new(
                            kind,
                            variable,
                            Some(seed),
                            metrics[0],
                            report.medoid_objective,
                        )
                    },
                    ResultRecord {
                        wall_ms,
                        converged: report.barycenter_converged,
                        ..ResultRecord::new(
                            kind,
                            variable,
                            Some(seed),
                            metrics[1],
                            report.barycenter_objective,
                        )
                    },
                    ResultRecord {
                        wall_ms,
                        converged: report.barycenter_converged,
                        ..ResultRecord::new(
                            kind,
                            variable,
                            Some(seed),
                            metrics[2],
                            report.multistart_spread,
                        )
                    },
                ],
                Err(Error::GenerationFailure { .. }) | Err(Error::NumericFailure(_)) => metrics
                    .iter()
                    .map(|m| ResultRecord {
                        wall_ms,
                        ..ResultRecord::failed(kind, variable, seed, m)
                    })
                    .collect(),
                Err(e) => return Err(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(records.into_iter().flatten().collect()))
}

/// Dispatches on `config.kind`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    match config.kind {
        ExperimentKind::Converge => run_convergence_experiment(config),
        ExperimentKind::Noise => run_noise_experiment(config),
        ExperimentKind::DimSweep => run_dimensionality_experiment(config),
        ExperimentKind::Centroid => run_centroid_analysis(config),
    }
}

/// Median of the finite entries; `None` when there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

/// Median of `metric` at every distinct value of the independent variable,
/// in increasing order of the variable. Aggregate rows are skipped.
pub fn medians_by_variable(records: &[ResultRecord], metric: &str) -> Vec<(f64, Option<f64>)> {
    let mut variables: Vec<f64> = records
        .iter()
        .filter(|r| r.metric == metric && r.seed.is_some())
        .map(|r| r.variable)
        .collect();
    variables.sort_by(f64::total_cmp);
    variables.dedup();
    variables
        .into_iter()
        .map(|v| {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.metric == metric && r.seed.is_some() && r.variable == v)
                .map(|r| r.value)
                .collect();
            (v, median(&values))
        })
        .collect()
}
