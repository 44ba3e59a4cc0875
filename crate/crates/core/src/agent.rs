//! Double deep Q-learning agent: epsilon-greedy exploration, bounded
//! replay memory, and targets where the online network picks the next
//! action and the lagged target network scores it.

use std::collections::VecDeque;

use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neural::{sync_target, train_step, Mlp, NeuralError, QNetwork, RmsProp};
use crate::world::{Observation, ACTION_COUNT, OBS_DIM};

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_state: Observation,
    pub terminal: bool,
}

/// Bounded FIFO of transitions; the oldest is evicted first.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayMemory {
    buf: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            buf: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.capacity == 0 {
            return;
        }
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buf.iter()
    }

    /// `batch` distinct transitions drawn uniformly (fewer if the memory is smaller).
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<Transition> {
        let amount = batch.min(self.buf.len());
        index::sample(rng, self.buf.len(), amount)
            .into_iter()
            .map(|i| self.buf[i])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub discount: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub memory_capacity: usize,
    pub target_sync_period: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Steps over which epsilon decays linearly; `None` lets the trainer
    /// pick a fraction of the planned training length.
    pub epsilon_decay_steps: Option<u64>,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            discount: 0.95,
            learning_rate: 1e-4,
            batch_size: 1024,
            memory_capacity: 10_000,
            target_sync_period: 100,
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            epsilon_decay_steps: None,
            rmsprop_decay: 0.99,
            rmsprop_epsilon: 1e-8,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let fail = |m: &str| Err(AgentError::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.discount) {
            return fail("discount must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.batch_size > self.memory_capacity {
            return fail("batch_size must be in [1, memory_capacity]");
        }
        if self.target_sync_period == 0 {
            return fail("target_sync_period must be at least 1");
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.epsilon_start) || !unit.contains(&self.epsilon_end) {
            return fail("epsilon endpoints must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) || !(self.rmsprop_epsilon > 0.0) {
            return fail("rmsprop_decay must lie in [0, 1) and rmsprop_epsilon be positive");
        }
        Ok(())
    }
}

/// Linear decay from `epsilon_start` at step 0 to `epsilon_end` at the decay
/// horizon, constant afterwards.
pub fn epsilon_at(step: u64, cfg: &AgentConfig) -> f64 {
    let horizon = cfg.epsilon_decay_steps.unwrap_or(0);
    if step >= horizon {
        return cfg.epsilon_end;
    }
    let frac = step as f64 / horizon as f64;
    cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Uniform random action with probability `epsilon`, otherwise greedy.
pub fn select_action<R: Rng + ?Sized>(net: &QNetwork, obs: &Observation, epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return rng.gen_range(0..ACTION_COUNT);
    }
    greedy_action(net, obs)
}

pub fn greedy_action(net: &QNetwork, obs: &Observation) -> usize {
    argmax(&net.forward_one(obs).expect("observation width matches the Q-network"))
}

fn stack(rows: impl ExactSizeIterator<Item = Observation>) -> Array2<f64> {
    let n = rows.len();
    let flat: Vec<f64> = rows.flatten().collect();
    Array2::from_shape_vec((n, OBS_DIM), flat).expect("rows have OBS_DIM entries")
}

/// Bootstrapped targets for `batch`: `r` for terminal transitions, else
/// `r + discount * Q_target(s', argmax_a Q_main(s', a))`.
pub fn double_q_targets(
    main: &QNetwork,
    target: &QNetwork,
    batch: &[Transition],
    discount: f64,
) -> Result<Vec<f64>, NeuralError> {
    let next = stack(batch.iter().map(|t| t.next_state));
    let q_main = main.forward(next.view())?;
    let q_target = target.forward(next.view())?;
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.terminal {
                t.reward
            } else {
                let row = q_main.row(i);
                let best = argmax(row.as_slice().expect("standard layout"));
                t.reward + discount * q_target[[i, best]]
            }
        })
        .collect())
}

/// One independent learner: online and target networks, optimiser state,
/// private replay memory and random stream.
#[derive(Debug, Clone)]
pub struct DdqnAgent {
    pub config: AgentConfig,
    main: QNetwork,
    target: QNetwork,
    optimizer: RmsProp,
    memory: ReplayMemory,
    rng: ChaCha8Rng,
    env_steps: u64,
    updates: u64,
}

impl DdqnAgent {
    pub fn new(config: AgentConfig, seed: u64) -> Result<Self, AgentError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let main = Mlp::q_network(&mut rng);
        Self::with_network(config, main, rng)
    }

    /// Builds an agent around an existing online network; the target starts
    /// as an exact copy.
    pub fn with_network(config: AgentConfig, main: QNetwork, rng: ChaCha8Rng) -> Result<Self, AgentError> {
        config.validate()?;
        let target = main.clone();
        let optimizer = RmsProp::new(&main, config.learning_rate, config.rmsprop_decay, config.rmsprop_epsilon);
        Ok(Self {
            memory: ReplayMemory::new(config.memory_capacity),
            config,
            main,
            target,
            optimizer,
            rng,
            env_steps: 0,
            updates: 0,
        })
    }

    pub fn main(&self) -> &QNetwork {
        &self.main
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    /// Replaces the target network; used to set up fixed network pairs.
    pub fn set_target(&mut self, target: QNetwork) -> Result<(), AgentError> {
        sync_target(&target, &mut self.target)?;
        Ok(())
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_at(self.env_steps, &self.config)
    }

    /// Epsilon-greedy action under the current schedule; advances the
    /// environment-step counter.
    pub fn act(&mut self, obs: &Observation) -> usize {
        let eps = self.epsilon();
        self.env_steps += 1;
        select_action(&self.main, obs, eps, &mut self.rng)
    }

    pub fn remember(&mut self, t: Transition) {
        self.memory.push(t);
    }

    pub fn targets(&self, batch: &[Transition]) -> Result<Vec<f64>, NeuralError> {
        double_q_targets(&self.main, &self.target, batch, self.config.discount)
    }

    /// One learning step. Does nothing until the memory holds a full batch;
    /// syncs the target network every `target_sync_period` updates.
    pub fn ddqn_update(&mut self) -> Result<Option<f64>, AgentError> {
        if self.memory.len() < self.config.batch_size {
            return Ok(None);
        }
        let batch = self.memory.sample(self.config.batch_size, &mut self.rng);
        let targets = self.targets(&batch)?;
        let states = stack(batch.iter().map(|t| t.state));
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
        let loss = train_step(&mut self.main, &mut self.optimizer, states.view(), &targets, &actions)?;
        self.updates += 1;
        if self.updates.is_multiple_of(self.config.target_sync_period) {
            sync_target(&self.main, &mut self.target)?;
        }
        Ok(Some(loss))
    }
}
