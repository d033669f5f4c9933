use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{AgentError, DqnAgent, DqnConfig, Transition};
use crate::env::TscEnv;
use crate::metrics::EpisodeMetrics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Greedy evaluation episode run after this training episode.
    pub metrics: EpisodeMetrics,
    /// Mean training loss over the episode's train steps (0 when none ran).
    pub mean_loss: f64,
    pub epsilon: f64,
    /// Informational only.
    pub wall_seconds: f64,
}

/// Seed of the agent controlling the `index`-th intersection.
pub fn agent_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64 + 1)
}

/// Builds one agent per controlled intersection of `env`.
pub fn build_agents(env: &TscEnv, cfg: &DqnConfig, seed: u64) -> Result<Vec<DqnAgent>, AgentError> {
    env.obs_dims()
        .into_iter()
        .zip(env.phase_counts())
        .enumerate()
        .map(|(i, (dim, actions))| DqnAgent::new(dim, actions, cfg.clone(), agent_seed(seed, i)))
        .collect()
}

/// Runs one greedy episode and returns its metrics.
pub fn evaluate(env: &mut TscEnv, agents: &mut [DqnAgent]) -> Result<EpisodeMetrics, AgentError> {
    let mut obs = env.reset();
    loop {
        let actions = agents
            .iter_mut()
            .zip(&obs)
            .map(|(a, o)| a.act(o, false))
            .collect::<Result<Vec<_>, _>>()?;
        let r = env.step(&actions)?;
        obs = r.observations;
        if r.done {
            return Ok(env.episode_metrics());
        }
    }
}

/// Trains `agents` (one per agent of `env`) for `episodes` episodes, each
/// followed by a greedy evaluation episode. `on_episode` sees every log row
/// as it is produced.
pub fn run_training<F>(
    env: &mut TscEnv,
    agents: &mut [DqnAgent],
    episodes: usize,
    mut on_episode: F,
) -> Result<Vec<EpisodeLog>, AgentError>
where
    F: FnMut(&EpisodeLog, &[DqnAgent]) -> Result<(), AgentError>,
{
    if agents.len() != env.agents().len() {
        return Err(AgentError::Config(format!(
            "{} agents for {} intersections",
            agents.len(),
            env.agents().len()
        )));
    }
    let mut logs = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let started = Instant::now();
        let mut obs = env.reset();
        let (mut loss_sum, mut loss_n) = (0.0, 0u64);
        loop {
            let actions = agents
                .iter_mut()
                .zip(&obs)
                .map(|(a, o)| a.act(o, true))
                .collect::<Result<Vec<_>, _>>()?;
            let r = env.step(&actions)?;
            for (i, agent) in agents.iter_mut().enumerate() {
                agent.remember(Transition {
                    s: std::mem::take(&mut obs[i]),
                    a: actions[i],
                    r: r.rewards[i],
                    s_next: r.observations[i].clone(),
                    done: r.done,
                })?;
                if let Some(loss) = agent.after_decision()? {
                    loss_sum += loss;
                    loss_n += 1;
                }
            }
            obs = r.observations;
            if r.done {
                break;
            }
        }
        let metrics = evaluate(env, agents)?;
        let log = EpisodeLog {
            episode,
            metrics,
            mean_loss: if loss_n > 0 { loss_sum / loss_n as f64 } else { 0.0 },
            epsilon: agents.first().map_or(0.0, DqnAgent::epsilon),
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        on_episode(&log, agents)?;
        logs.push(log);
    }
    Ok(logs)
}
