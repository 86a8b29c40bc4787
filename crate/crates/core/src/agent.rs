//! The episodic control loop: epsilon-greedy selection over per-action kNN
//! estimates, and backward writeback of returns once an episode ends.

use rand::Rng;

use crate::embedding::{ProjectionMatrix, StateKey};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::store::{QecStore, WritebackOutcome};

#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    /// Probability of a uniformly random action.
    pub epsilon: f64,
    /// Neighbour budget, counted in aggregated experiences.
    pub k: usize,
    /// Merge only when the nearest entry is closer than this (embedded units).
    pub eps_in: f64,
    /// ...and its value differs from the return by less than this.
    pub eps_out: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            epsilon: 0.005,
            k: 11,
            eps_in: 0.0,
            eps_out: 100.0,
            gamma: 1.0,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::config(
                "epsilon",
                format!("must be in [0, 1], got {}", self.epsilon),
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(
                "gamma",
                format!("must be in [0, 1], got {}", self.gamma),
            ));
        }
        if self.k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        for (key, v) in [("eps-in", self.eps_in), ("eps-out", self.eps_out)] {
            if v.is_nan() || v < 0.0 {
                return Err(Error::config(key, format!("must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub key: StateKey,
    pub action: usize,
    /// Reward received after taking `action`.
    pub reward: f64,
}

/// Steps of one episode in the order they happened.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeTrace {
    steps: Vec<TraceStep>,
}

impl EpisodeTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: StateKey, action: usize, reward: f64) -> Result<()> {
        if !reward.is_finite() {
            return Err(Error::input(format!("reward {reward} is not finite")));
        }
        self.steps.push(TraceStep {
            key,
            action,
            reward,
        });
        Ok(())
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.reward)
    }
}

/// Per-step returns `R_t = r_t + gamma * R_{t+1}`, aligned with the trace.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnTrace {
    pub returns: Vec<f64>,
}

pub fn compute_returns(trace: &EpisodeTrace, gamma: f64) -> Result<ReturnTrace> {
    if trace.is_empty() {
        return Err(Error::input("cannot compute returns of an empty episode"));
    }
    let mut returns = vec![0.0; trace.len()];
    let mut acc = 0.0;
    for (slot, step) in returns.iter_mut().zip(trace.steps()).rev() {
        acc = step.reward + gamma * acc;
        *slot = acc;
    }
    Ok(ReturnTrace { returns })
}

/// Value estimate of every action at `key`. Actions with an empty buffer get
/// `+inf` so each one is tried at least once.
pub fn action_values(store: &mut QecStore, key: &StateKey, k: usize) -> Result<Vec<f64>> {
    (0..store.num_actions())
        .map(|a| {
            let estimate = store.buffer_mut(a)?.knn_estimate(key.as_slice(), k)?;
            Ok(estimate.unwrap_or(f64::INFINITY))
        })
        .collect()
}

/// Epsilon-greedy choice. One uniform draw decides exploration; greedy ties
/// are broken uniformly at random.
pub fn select_action<R: Rng + ?Sized>(
    store: &mut QecStore,
    key: &StateKey,
    cfg: &AgentConfig,
    rng: &mut R,
) -> Result<usize> {
    if key.dim() != store.dim() {
        return Err(Error::input(format!(
            "key has dimension {}, store expects {}",
            key.dim(),
            store.dim()
        )));
    }
    let n = store.num_actions();
    if rng.random::<f64>() < cfg.epsilon {
        return Ok(rng.random_range(0..n));
    }
    let values = action_values(store, key, cfg.k)?;
    Ok(argmax_random_tie(&values, rng))
}

fn argmax_random_tie<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..values.len()).filter(|&a| values[a] == best).collect();
    match ties.len() {
        1 => ties[0],
        n => ties[rng.random_range(0..n)],
    }
}

/// Writes the episode's returns back into the store, last step first.
/// Outcomes are returned in the order they were applied.
pub fn finish_episode(
    store: &mut QecStore,
    trace: &EpisodeTrace,
    cfg: &AgentConfig,
) -> Result<Vec<WritebackOutcome>> {
    let returns = compute_returns(trace, cfg.gamma)?;
    trace
        .steps()
        .iter()
        .zip(&returns.returns)
        .rev()
        .map(|(step, &ret)| {
            store
                .buffer_mut(step.action)?
                .writeback(&step.key, ret, cfg.eps_in, cfg.eps_out)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub trace: EpisodeTrace,
    /// Undiscounted reward sum.
    pub score: f64,
    pub outcomes: Vec<WritebackOutcome>,
}

/// Resets `env` with `episode_seed`, plays until it reports `done`, then
/// writes the episode back into `store`.
pub fn run_episode<R: Rng + ?Sized>(
    env: &mut dyn Environment,
    episode_seed: u64,
    store: &mut QecStore,
    proj: &ProjectionMatrix,
    cfg: &AgentConfig,
    rng: &mut R,
) -> Result<EpisodeResult> {
    if env.num_actions() != store.num_actions() {
        return Err(Error::input(format!(
            "environment has {} actions, store has {}",
            env.num_actions(),
            store.num_actions()
        )));
    }
    let mut observation = env.reset(episode_seed);
    let mut trace = EpisodeTrace::new();
    let mut score = 0.0;
    loop {
        let key = proj.embed(&observation)?;
        let action = select_action(store, &key, cfg, rng)?;
        let step = env.step(action)?;
        score += step.reward;
        trace.push(key, action, step.reward)?;
        if step.done {
            break;
        }
        if trace.len() > env.max_steps() {
            return Err(Error::State(format!(
                "environment exceeded its step cap of {}",
                env.max_steps()
            )));
        }
        observation = step.observation;
    }
    let outcomes = finish_episode(store, &trace, cfg)?;
    Ok(EpisodeResult {
        trace,
        score,
        outcomes,
    })
}
