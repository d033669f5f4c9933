//! Deep Q-learning written from scratch: an MLP Q-network with analytic
//! gradients, a replay buffer, ε-greedy exploration and a target network.
//!
//! IDQN and PressLight share this code path and differ only in the
//! environment's observation and reward wiring.

mod dqn;
pub mod mlp;
pub mod replay;
mod training;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dqn::{AgentCheckpoint, DqnAgent, CHECKPOINT_VERSION};
pub use mlp::{clip_global_norm, Gradients, Layer, Mlp};
pub use replay::{ReplayBuffer, Transition};
pub use training::{agent_seed, build_agents, evaluate, run_training, EpisodeLog};

use crate::env::EnvError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid network shape: {0}")]
    Shape(String),
    #[error("empty q-value vector")]
    EmptyQ,
    #[error("training needs {need} experiences, have {have}")]
    NotReady { have: u64, need: u64 },
    #[error("batch of {got} transitions, expected {expected}")]
    BatchSize { expected: usize, got: usize },
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub learning_rate: f64,
    pub buffer_size: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub learning_start: u64,
    pub update_model_rate: u64,
    pub update_target_rate: u64,
    pub grad_clip: f64,
    pub episodes: usize,
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    /// Checkpoint every this many episodes (0 disables).
    pub save_rate: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            buffer_size: 5000,
            batch_size: 64,
            gamma: 0.95,
            epsilon: 0.1,
            epsilon_decay: 0.995,
            epsilon_min: 0.01,
            learning_start: 1000,
            update_model_rate: 1,
            update_target_rate: 10,
            grad_clip: 5.0,
            episodes: 200,
            hidden: vec![20, 20],
            save_rate: 20,
        }
    }
}

impl DqnConfig {
    pub fn check(&self) -> Result<(), AgentError> {
        let fail = |m: &str| Err(AgentError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.epsilon) || !(0.0..=1.0).contains(&self.epsilon_min) {
            return fail("epsilon must lie in [0, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail("gamma must lie in (0, 1]");
        }
        if self.batch_size == 0 || self.buffer_size < self.batch_size {
            return fail("need 0 < batch_size <= buffer_size");
        }
        if self.update_model_rate == 0 || self.update_target_rate == 0 {
            return fail("update rates must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.grad_clip > 0.0) {
            return fail("learning_rate and grad_clip must be positive");
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return fail("epsilon_decay must lie in (0, 1]");
        }
        if self.hidden.contains(&0) {
            return fail("hidden widths must be positive");
        }
        Ok(())
    }

    /// `max(epsilon_min, epsilon · epsilon_decay^k)`.
    pub fn epsilon_after(&self, decays: u64) -> f64 {
        (self.epsilon * self.epsilon_decay.powf(decays as f64)).max(self.epsilon_min)
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(q: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in q.iter().enumerate() {
        if best.is_none_or(|b| v > q[b]) {
            best = Some(i);
        }
    }
    best
}

/// With probability `eps` a uniform index, otherwise the argmax. No random
/// numbers are drawn when `eps == 0`.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &[f64], eps: f64, rng: &mut R) -> Result<usize, AgentError> {
    let greedy = argmax(q).ok_or(AgentError::EmptyQ)?;
    if eps > 0.0 && rng.gen::<f64>() < eps {
        return Ok(rng.gen_range(0..q.len()));
    }
    Ok(greedy)
}

/// `r` when `done`, else `r + gamma · max(q_next)`.
pub fn td_target(r: f64, done: bool, gamma: f64, q_next: &[f64]) -> f64 {
    if done {
        return r;
    }
    let best = q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best.is_finite() {
        r + gamma * best
    } else {
        r
    }
}
