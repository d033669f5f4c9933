use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{clip_global_norm, Gradients, Mlp};
use super::replay::{ReplayBuffer, Transition};
use super::{epsilon_greedy, td_target, AgentError, DqnConfig};

pub const CHECKPOINT_VERSION: u32 = 1;

/// One Q-learning agent controlling one intersection.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    cfg: DqnConfig,
    online: Mlp,
    target: Mlp,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    grads: Gradients,
    epsilon_decays: u64,
    train_steps: u64,
    decisions: u64,
}

impl DqnAgent {
    pub fn new(obs_dim: usize, actions: usize, cfg: DqnConfig, seed: u64) -> Result<Self, AgentError> {
        cfg.check()?;
        if obs_dim == 0 || actions == 0 {
            return Err(AgentError::Shape("observation and action sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![obs_dim];
        sizes.extend(&cfg.hidden);
        sizes.push(actions);
        let online = Mlp::new(&sizes, &mut rng);
        Ok(Self {
            grads: Gradients::zeros_like(&online),
            target: online.clone(),
            online,
            buffer: ReplayBuffer::new(cfg.buffer_size),
            cfg,
            rng,
            epsilon_decays: 0,
            train_steps: 0,
            decisions: 0,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.cfg
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn epsilon(&self) -> f64 {
        self.cfg.epsilon_after(self.epsilon_decays)
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        self.online.forward(obs)
    }

    /// ε-greedy when exploring, greedy otherwise.
    pub fn act(&mut self, obs: &[f64], explore: bool) -> Result<usize, AgentError> {
        let q = self.online.forward(obs)?;
        let eps = if explore { self.epsilon() } else { 0.0 };
        epsilon_greedy(&q, eps, &mut self.rng)
    }

    pub fn remember(&mut self, t: Transition) -> Result<(), AgentError> {
        let dim = self.online.input_dim();
        for v in [&t.s, &t.s_next] {
            if v.len() != dim {
                return Err(AgentError::Dimension { expected: dim, got: v.len() });
            }
        }
        if t.a >= self.online.output_dim() {
            return Err(AgentError::Dimension {
                expected: self.online.output_dim(),
                got: t.a,
            });
        }
        self.buffer.push(t);
        Ok(())
    }

    /// Bookkeeping after a training-mode decision: trains on a replay batch
    /// when due and decays ε. Returns the loss when a train step ran.
    pub fn after_decision(&mut self) -> Result<Option<f64>, AgentError> {
        self.decisions += 1;
        self.epsilon_decays += 1;
        let ready = self.buffer.inserted() >= self.cfg.learning_start && self.buffer.len() >= self.cfg.batch_size;
        if !ready || !self.decisions.is_multiple_of(self.cfg.update_model_rate) {
            return Ok(None);
        }
        let batch: Vec<Transition> = self
            .buffer
            .sample(self.cfg.batch_size, &mut self.rng)
            .into_iter()
            .cloned()
            .collect();
        self.train_step(&batch).map(Some)
    }

    /// One gradient step on the mean squared TD error of `batch`.
    pub fn train_step(&mut self, batch: &[Transition]) -> Result<f64, AgentError> {
        if self.buffer.inserted() < self.cfg.learning_start {
            return Err(AgentError::NotReady {
                have: self.buffer.inserted(),
                need: self.cfg.learning_start,
            });
        }
        if batch.len() != self.cfg.batch_size {
            return Err(AgentError::BatchSize {
                expected: self.cfg.batch_size,
                got: batch.len(),
            });
        }
        let n = batch.len() as f64;
        let outputs = self.online.output_dim();
        self.grads.clear();
        let mut loss = 0.0;
        let mut grad_out = vec![0.0; outputs];
        for t in batch {
            if t.a >= outputs {
                return Err(AgentError::Dimension { expected: outputs, got: t.a });
            }
            let trace = self.online.trace(&t.s)?;
            let y = td_target(t.r, t.done, self.cfg.gamma, &self.target.forward(&t.s_next)?);
            let err = trace.output()[t.a] - y;
            loss += err * err;
            grad_out.iter_mut().for_each(|g| *g = 0.0);
            grad_out[t.a] = 2.0 * err / n;
            self.online.accumulate(&trace, &grad_out, &mut self.grads)?;
        }
        clip_global_norm(&mut self.grads, self.cfg.grad_clip);
        self.online.descend(&self.grads, self.cfg.learning_rate);
        self.train_steps += 1;
        if self.train_steps.is_multiple_of(self.cfg.update_target_rate) {
            self.target = self.online.clone();
        }
        Ok(loss / n)
    }

    pub fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            version: CHECKPOINT_VERSION,
            config: self.cfg.clone(),
            online: self.online.clone(),
            target: self.target.clone(),
            rng: self.rng.clone(),
            epsilon_decays: self.epsilon_decays,
            train_steps: self.train_steps,
            decisions: self.decisions,
        }
    }

    /// Restores networks, counters and the generator; the replay buffer starts empty.
    pub fn from_checkpoint(c: AgentCheckpoint) -> Result<Self, AgentError> {
        if c.version != CHECKPOINT_VERSION {
            return Err(AgentError::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                c.version
            )));
        }
        c.config.check()?;
        let online = Mlp::from_layers(c.online.layers().to_vec())?;
        let target = Mlp::from_layers(c.target.layers().to_vec())?;
        if online.sizes() != target.sizes() {
            return Err(AgentError::Checkpoint("online and target shapes differ".into()));
        }
        Ok(Self {
            grads: Gradients::zeros_like(&online),
            buffer: ReplayBuffer::new(c.config.buffer_size),
            cfg: c.config,
            online,
            target,
            rng: c.rng,
            epsilon_decays: c.epsilon_decays,
            train_steps: c.train_steps,
            decisions: c.decisions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub version: u32,
    pub config: DqnConfig,
    pub online: Mlp,
    pub target: Mlp,
    pub rng: ChaCha8Rng,
    pub epsilon_decays: u64,
    pub train_steps: u64,
    pub decisions: u64,
}
