//! Tabular MDPs, gridworld construction, exact planning and trajectory sampling.
//!
//! Tables over state-action pairs are stored flat in row-major order, index
//! `state * num_actions + action`. Transition tensors are stored as
//! `[state][action][next_state]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, numeric, Result};
use crate::reward::RewardTable;

const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Gridworld action set. The discriminant is the action index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
    Stay = 4,
}

impl Move {
    pub const ALL: [Move; 5] = [Move::Up, Move::Down, Move::Left, Move::Right, Move::Stay];

    fn offset(self) -> (i64, i64) {
        match self {
            Move::Up => (0, -1),
            Move::Down => (0, 1),
            Move::Left => (-1, 0),
            Move::Right => (1, 0),
            Move::Stay => (0, 0),
        }
    }
}

pub const GRID_ACTIONS: usize = 5;

/// Grid geometry attached to gridworld MDPs. Cell `(x, y)` is state `y * width + x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridLayout {
    pub width: usize,
    pub height: usize,
}

impl GridLayout {
    pub fn cell(&self, state: usize) -> (usize, usize) {
        (state % self.width, state / self.width)
    }

    pub fn state(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn manhattan(&self, s1: usize, s2: usize) -> usize {
        let (x1, y1) = self.cell(s1);
        let (x2, y2) = self.cell(s2);
        x1.abs_diff(x2) + y1.abs_diff(y2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    transitions: Vec<f64>,
    start_distribution: Vec<f64>,
    discount: f64,
    layout: Option<GridLayout>,
    absorbing: Vec<bool>,
}

impl TabularMdp {
    /// Validates and builds an MDP. `transitions` is laid out as
    /// `[state][action][next_state]`.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transitions: Vec<f64>,
        start_distribution: Vec<f64>,
        discount: f64,
        layout: Option<GridLayout>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(invalid("MDP needs at least one state and one action"));
        }
        if transitions.len() != num_states * num_actions * num_states {
            return Err(invalid(format!(
                "transition tensor has {} entries, expected {}",
                transitions.len(),
                num_states * num_actions * num_states
            )));
        }
        if start_distribution.len() != num_states {
            return Err(invalid(
                "start distribution length differs from state count",
            ));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(invalid(format!("discount {discount} outside [0, 1)")));
        }
        if let Some(l) = layout {
            if l.width * l.height != num_states {
                return Err(invalid("grid layout does not cover the state space"));
            }
        }
        for (row_index, row) in transitions.chunks(num_states).enumerate() {
            check_distribution(row).map_err(|msg| {
                invalid(format!(
                    "transition row (state {}, action {}) {msg}",
                    row_index / num_actions,
                    row_index % num_actions
                ))
            })?;
        }
        check_distribution(&start_distribution)
            .map_err(|msg| invalid(format!("start distribution {msg}")))?;

        Ok(Self {
            num_states,
            num_actions,
            transitions,
            start_distribution,
            discount,
            layout,
            absorbing: vec![false; num_states],
        })
    }

    /// Marks `states` as absorbing goals. Each must self-loop with
    /// probability one under every action.
    pub fn with_absorbing(mut self, states: &[usize]) -> Result<Self> {
        for &s in states {
            if s >= self.num_states {
                return Err(invalid(format!("absorbing state {s} out of range")));
            }
            if (0..self.num_actions).any(|a| self.next_states(s, a)[s] != 1.0) {
                return Err(invalid(format!(
                    "state {s} does not self-loop under every action"
                )));
            }
            self.absorbing[s] = true;
        }
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Number of state-action pairs, |S|·|A|.
    pub fn dimension(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn layout(&self) -> Option<GridLayout> {
        self.layout
    }

    pub fn start_distribution(&self) -> &[f64] {
        &self.start_distribution
    }

    /// Next-state distribution for `(state, action)`.
    pub fn next_states(&self, state: usize, action: usize) -> &[f64] {
        let base = (state * self.num_actions + action) * self.num_states;
        &self.transitions[base..base + self.num_states]
    }

    /// Absorbing (goal) states. Episodes end after the first step taken in one.
    pub fn is_absorbing(&self, state: usize) -> bool {
        self.absorbing[state]
    }

    /// Expected value of `values` over the next state of `(state, action)`.
    pub fn expected_next(&self, state: usize, action: usize, values: &[f64]) -> f64 {
        self.next_states(state, action)
            .iter()
            .zip(values)
            .map(|(p, v)| p * v)
            .sum()
    }

    pub(crate) fn check_reward(&self, reward: &RewardTable) -> Result<()> {
        if reward.num_states() != self.num_states || reward.num_actions() != self.num_actions {
            return Err(invalid(format!(
                "reward is {}x{}, MDP is {}x{}",
                reward.num_states(),
                reward.num_actions(),
                self.num_states,
                self.num_actions
            )));
        }
        Ok(())
    }
}

fn check_distribution(row: &[f64]) -> std::result::Result<(), String> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err("has a negative or non-finite entry".into());
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(format!("sums to {total}, not 1"));
    }
    Ok(())
}

/// Builds a slippery gridworld with the five moves of [`Move`].
///
/// The intended move succeeds with probability `1 - slip_probability`;
/// otherwise one of the four other moves happens, uniformly. Moves off the
/// grid leave the agent in place. Goal cells `(x, y)` are absorbing. Episodes
/// start uniformly over non-goal cells.
pub fn build_gridworld(
    width: usize,
    height: usize,
    slip_probability: f64,
    discount: f64,
    goal_cells: &[(usize, usize)],
) -> Result<TabularMdp> {
    if width == 0 || height == 0 {
        return Err(invalid("grid dimensions must be positive"));
    }
    if width * height < 2 {
        return Err(invalid("grid needs at least two cells"));
    }
    if !(0.0..1.0).contains(&slip_probability) {
        return Err(invalid(format!(
            "slip probability {slip_probability} outside [0, 1)"
        )));
    }
    let layout = GridLayout { width, height };
    let num_states = width * height;
    let mut goal = vec![false; num_states];
    for &(x, y) in goal_cells {
        if x >= width || y >= height {
            return Err(invalid(format!(
                "goal cell ({x}, {y}) outside {width}x{height} grid"
            )));
        }
        goal[layout.state(x, y)] = true;
    }

    let destination = |s: usize, m: Move| -> usize {
        let (x, y) = layout.cell(s);
        let (dx, dy) = m.offset();
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
            s
        } else {
            layout.state(nx as usize, ny as usize)
        }
    };

    let slip_each = slip_probability / (GRID_ACTIONS - 1) as f64;
    let mut transitions = vec![0.0; num_states * GRID_ACTIONS * num_states];
    for s in 0..num_states {
        for intended in Move::ALL {
            let row = &mut transitions[(s * GRID_ACTIONS + intended as usize) * num_states..]
                [..num_states];
            if goal[s] {
                row[s] = 1.0;
                continue;
            }
            for actual in Move::ALL {
                let p = if actual == intended {
                    1.0 - slip_probability
                } else {
                    slip_each
                };
                row[destination(s, actual)] += p;
            }
        }
    }

    let starts = goal.iter().filter(|g| !**g).count();
    let start_distribution = if starts == 0 {
        vec![1.0 / num_states as f64; num_states]
    } else {
        goal.iter()
            .map(|&g| if g { 0.0 } else { 1.0 / starts as f64 })
            .collect()
    };

    let goal_states: Vec<usize> = (0..num_states).filter(|&s| goal[s]).collect();
    TabularMdp::new(
        num_states,
        GRID_ACTIONS,
        transitions,
        start_distribution,
        discount,
        Some(layout),
    )?
    .with_absorbing(&goal_states)
}

/// Values indexed by state-action pair.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if num_actions == 0 || values.len() % num_actions != 0 {
            return Err(invalid(
                "q-table length is not a multiple of the action count",
            ));
        }
        Ok(Self {
            num_actions,
            values,
        })
    }

    pub fn num_states(&self) -> usize {
        self.values.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn bellman_q(mdp: &TabularMdp, reward: &RewardTable, values: &[f64]) -> Vec<f64> {
    let gamma = mdp.discount();
    let mut q = vec![0.0; mdp.dimension()];
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            q[s * mdp.num_actions() + a] =
                reward.get(s, a) + gamma * mdp.expected_next(s, a, values);
        }
    }
    q
}

/// Hard value iteration. Stops once the sup-norm change of the state values
/// falls below `tolerance`; the returned q-values are the Bellman backup of
/// the returned state values.
pub fn value_iteration(
    mdp: &TabularMdp,
    reward: &RewardTable,
    tolerance: f64,
) -> Result<(Vec<f64>, QTable)> {
    if !(tolerance > 0.0) {
        return Err(invalid(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    mdp.check_reward(reward)?;
    let na = mdp.num_actions();
    let mut values = vec![0.0; mdp.num_states()];
    loop {
        let q = bellman_q(mdp, reward, &values);
        let next: Vec<f64> = q
            .chunks(na)
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let residual = max_abs_diff(&next, &values);
        values = next;
        if !residual.is_finite() {
            return Err(numeric("value iteration produced a non-finite value"));
        }
        if residual < tolerance {
            break;
        }
    }
    let q = bellman_q(mdp, reward, &values);
    Ok((values, QTable::new(na, q)?))
}

/// Soft (log-sum-exp) value iteration on the discounted MDP.
pub fn soft_value_iteration(
    mdp: &TabularMdp,
    reward: &RewardTable,
    tolerance: f64,
) -> Result<QTable> {
    if !(tolerance > 0.0) {
        return Err(invalid(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    mdp.check_reward(reward)?;
    let na = mdp.num_actions();
    let mut values = vec![0.0; mdp.num_states()];
    let mut previous_residual = f64::INFINITY;
    let mut growth_streak = 0;
    loop {
        let q = bellman_q(mdp, reward, &values);
        let next: Vec<f64> = q.chunks(na).map(log_sum_exp).collect();
        let residual = max_abs_diff(&next, &values);
        values = next;
        if !residual.is_finite() {
            return Err(numeric("soft value iteration produced a non-finite value"));
        }
        if residual < tolerance {
            break;
        }
        if residual > previous_residual {
            growth_streak += 1;
            if growth_streak >= 10 {
                return Err(numeric("soft value iteration residual grew for 10 sweeps"));
            }
        } else {
            growth_streak = 0;
        }
        previous_residual = residual;
    }
    QTable::new(na, bellman_q(mdp, reward, &values))
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Per-state action distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    num_actions: usize,
    probabilities: Vec<f64>,
}

impl Policy {
    pub fn new(num_actions: usize, probabilities: Vec<f64>) -> Result<Self> {
        if num_actions == 0 || probabilities.len() % num_actions != 0 {
            return Err(invalid(
                "policy length is not a multiple of the action count",
            ));
        }
        for (s, row) in probabilities.chunks(num_actions).enumerate() {
            check_distribution(row).map_err(|msg| invalid(format!("policy row {s} {msg}")))?;
        }
        Ok(Self {
            num_actions,
            probabilities,
        })
    }

    /// Deterministic policy from one action per state.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probabilities = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(invalid(format!("action {a} out of range at state {s}")));
            }
            probabilities[s * num_actions + a] = 1.0;
        }
        Ok(Self {
            num_actions,
            probabilities,
        })
    }

    pub(crate) fn from_rows_unchecked(num_actions: usize, probabilities: Vec<f64>) -> Self {
        Self {
            num_actions,
            probabilities,
        }
    }

    pub fn num_states(&self) -> usize {
        self.probabilities.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.probabilities[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// The action with probability one at each state, if the policy is deterministic.
    pub fn actions(&self) -> Option<Vec<usize>> {
        (0..self.num_states())
            .map(|s| self.row(s).iter().position(|&p| p == 1.0))
            .collect()
    }
}

/// Per-state argmax of `q`. Ties go to the lowest action index.
pub fn greedy_policy(q: &QTable) -> Policy {
    let actions: Vec<usize> = (0..q.num_states()).map(|s| argmax(q.row(s))).collect();
    Policy::deterministic(q.num_actions(), &actions).expect("argmax is in range")
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Row-wise softmax of soft q-values.
pub fn softmax_policy(q: &QTable) -> Policy {
    let na = q.num_actions();
    let mut probabilities = Vec::with_capacity(q.values().len());
    for s in 0..q.num_states() {
        let row = q.row(s);
        let lse = log_sum_exp(row);
        let start = probabilities.len();
        probabilities.extend(row.iter().map(|x| (x - lse).exp()));
        let total: f64 = probabilities[start..].iter().sum();
        probabilities[start..].iter_mut().for_each(|p| *p /= total);
    }
    Policy::from_rows_unchecked(na, probabilities)
}

/// An observed sequence of `(state, action)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub steps: Vec<(usize, usize)>,
}

fn sample_index<R: Rng>(rng: &mut R, probabilities: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (i, &p) in probabilities.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    // u landed in the rounding gap above the cumulative sum
    probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Samples `count` episodes of at most `horizon` steps. An episode ends early
/// after its first step in an absorbing state.
pub fn sample_trajectories(
    mdp: &TabularMdp,
    policy: &Policy,
    count: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    if count == 0 || horizon == 0 {
        return Err(invalid("trajectory count and horizon must be positive"));
    }
    if policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions() {
        return Err(invalid("policy shape does not match the MDP"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut state = sample_index(&mut rng, mdp.start_distribution());
        let mut steps = Vec::new();
        for _ in 0..horizon {
            let action = sample_index(&mut rng, policy.row(state));
            steps.push((state, action));
            if mdp.is_absorbing(state) {
                break;
            }
            state = sample_index(&mut rng, mdp.next_states(state, action));
        }
        out.push(Trajectory { steps });
    }
    Ok(out)
}
