//! Episodic multi-intersection environment over the simulator.
//!
//! Every signalized intersection is one agent. Agents are ordered by
//! intersection id; actions select a target phase (acyclic scheme).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{EpisodeMetrics, MetricsAccumulator};
use crate::model::{FlowSet, ModelError, RoadNetwork};
use crate::sim::{is_positive_multiple, Engine, InterIdx, LaneQuery, SimConfig, SimError, Topology, TrafficView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoName {
    LaneCount,
    LaneWaitingCount,
    LaneWaitingTimeCount,
    Pressure,
    Phase,
}

impl InfoName {
    pub const ALL: [InfoName; 5] = [
        InfoName::LaneCount,
        InfoName::LaneWaitingCount,
        InfoName::LaneWaitingTimeCount,
        InfoName::Pressure,
        InfoName::Phase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InfoName::LaneCount => "lane_count",
            InfoName::LaneWaitingCount => "lane_waiting_count",
            InfoName::LaneWaitingTimeCount => "lane_waiting_time_count",
            InfoName::Pressure => "pressure",
            InfoName::Phase => "phase",
        }
    }
}

impl fmt::Display for InfoName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InfoName {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|n| n.name() == s)
            .ok_or_else(|| EnvError::UnknownInfo(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardName {
    NegWaitingCount,
    NegPressureAbs,
    NegWaitingTime,
}

impl RewardName {
    pub const ALL: [RewardName; 3] = [
        RewardName::NegWaitingCount,
        RewardName::NegPressureAbs,
        RewardName::NegWaitingTime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RewardName::NegWaitingCount => "neg_waiting_count",
            RewardName::NegPressureAbs => "neg_pressure_abs",
            RewardName::NegWaitingTime => "neg_waiting_time",
        }
    }
}

impl fmt::Display for RewardName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RewardName {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|n| n.name() == s)
            .ok_or_else(|| EnvError::UnknownReward(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error("episode is done; call reset")]
    Done,
    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("unknown info function `{0}`")]
    UnknownInfo(String),
    #[error("unknown reward function `{0}`")]
    UnknownReward(String),
}

impl From<ModelError> for EnvError {
    fn from(e: ModelError) -> Self {
        EnvError::Sim(SimError::Model(e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Seconds between decisions.
    pub action_interval: f64,
    /// Episode length in seconds.
    pub episode_steps: f64,
    /// Observation layout, shared by every agent.
    pub obs_spec: Vec<InfoName>,
    pub reward_spec: RewardName,
    pub phase_one_hot: bool,
    pub seed: u64,
    #[serde(flatten)]
    pub sim: SimParams,
}

/// Simulator settings exposed through the environment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub dt: f64,
    pub waiting_speed_threshold: f64,
    pub depart_speed: crate::sim::DepartSpeed,
}

impl Default for SimParams {
    fn default() -> Self {
        let s = SimConfig::default();
        Self {
            dt: s.dt,
            waiting_speed_threshold: s.waiting_speed_threshold,
            depart_speed: s.depart_speed,
        }
    }
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            action_interval: 10.0,
            episode_steps: 3600.0,
            obs_spec: vec![InfoName::LaneCount, InfoName::Phase],
            reward_spec: RewardName::NegWaitingCount,
            phase_one_hot: true,
            seed: 0,
            sim: SimParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn check(&self) -> Result<(), EnvError> {
        if !is_positive_multiple(self.action_interval, self.sim.dt) {
            return Err(EnvError::Config(format!(
                "action_interval {} is not a positive multiple of dt {}",
                self.action_interval, self.sim.dt
            )));
        }
        if !is_positive_multiple(self.episode_steps, self.action_interval) {
            return Err(EnvError::Config(format!(
                "episode_steps {} is not a multiple of action_interval {}",
                self.episode_steps, self.action_interval
            )));
        }
        if self.obs_spec.is_empty() {
            return Err(EnvError::Config("obs_spec is empty".into()));
        }
        Ok(())
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            dt: self.sim.dt,
            horizon: self.episode_steps,
            waiting_speed_threshold: self.sim.waiting_speed_threshold,
            seed,
            depart_speed: self.sim.depart_speed,
        }
    }

    /// Decisions per episode.
    pub fn decisions(&self) -> usize {
        (self.episode_steps / self.action_interval).round() as usize
    }

    fn ticks_per_action(&self) -> usize {
        (self.action_interval / self.sim.dt).round() as usize
    }
}

/// `Σ over movements of (in-lane count − out-lane count)`.
pub fn pressure(view: &impl TrafficView, intersection: InterIdx) -> f64 {
    let topo = view.topology();
    topo.intersections[intersection]
        .movements
        .iter()
        .map(|&m| {
            let mv = &topo.movements[m];
            view.lane_vehicle_count(mv.in_lane) as f64 - view.lane_vehicle_count(mv.out_lane) as f64
        })
        .sum()
}

/// Evaluates one info function for an intersection. `phase` yields a one-hot
/// vector when `one_hot` is set, else the bare index.
pub fn info_function(engine: &Engine, intersection: InterIdx, name: InfoName, one_hot: bool) -> Vec<f64> {
    let info = &engine.topology().intersections[intersection];
    let lanes = |q: LaneQuery| info.incoming_lanes.iter().map(|&l| engine.lane_query(l, q)).collect();
    match name {
        InfoName::LaneCount => lanes(LaneQuery::Count),
        InfoName::LaneWaitingCount => lanes(LaneQuery::WaitingCount),
        InfoName::LaneWaitingTimeCount => lanes(LaneQuery::WaitingTimeSum),
        InfoName::Pressure => vec![pressure(engine, intersection)],
        InfoName::Phase => {
            let phase = engine.signal_state(intersection).map_or(0, |s| s.current_phase);
            if one_hot {
                let mut v = vec![0.0; info.phase_count()];
                if let Some(slot) = v.get_mut(phase) {
                    *slot = 1.0;
                }
                v
            } else {
                vec![phase as f64]
            }
        }
    }
}

/// Reward of one intersection. `interval_waiting` is the waiting time accrued
/// on its incoming lanes during the last action interval.
pub fn reward_function(engine: &Engine, intersection: InterIdx, name: RewardName, interval_waiting: f64) -> f64 {
    let info = &engine.topology().intersections[intersection];
    let cost = match name {
        RewardName::NegWaitingCount => {
            info.incoming_lanes.iter().map(|&l| engine.lane_waiting_count(l)).sum::<usize>() as f64
        }
        RewardName::NegPressureAbs => pressure(engine, intersection).abs(),
        RewardName::NegWaitingTime => interval_waiting,
    };
    // 0.0 - x keeps an empty intersection at +0.0
    0.0 - cost
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepInfo {
    pub clock: f64,
    pub queue: f64,
    pub delay: f64,
    pub throughput: u64,
    pub in_network: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observations: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub struct TscEnv {
    engine: Engine,
    cfg: EnvConfig,
    agents: Vec<InterIdx>,
    episode: u64,
    metrics: MetricsAccumulator,
    interval_waiting: Vec<f64>,
}

impl TscEnv {
    pub fn new(net: &RoadNetwork, flows: &FlowSet, cfg: EnvConfig) -> Result<Self, EnvError> {
        let topo = Arc::new(Topology::build(net)?);
        Self::with_topology(topo, flows, cfg)
    }

    pub fn with_topology(topo: Arc<Topology>, flows: &FlowSet, cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.check()?;
        let engine = Engine::with_topology(topo, flows, cfg.sim_config(cfg.seed))?;
        let agents = engine.topology().signalized.clone();
        Ok(Self {
            interval_waiting: vec![0.0; agents.len()],
            engine,
            cfg,
            agents,
            episode: 0,
            metrics: MetricsAccumulator::new(),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    /// Controlled intersections in id order.
    pub fn agents(&self) -> &[InterIdx] {
        &self.agents
    }

    pub fn agent_ids(&self) -> Vec<&str> {
        self.agents
            .iter()
            .map(|&i| self.engine.topology().intersections[i].id.as_str())
            .collect()
    }

    pub fn phase_counts(&self) -> Vec<usize> {
        self.agents
            .iter()
            .map(|&i| self.engine.topology().intersections[i].phase_count())
            .collect()
    }

    pub fn obs_dims(&self) -> Vec<usize> {
        self.observations().iter().map(Vec::len).collect()
    }

    /// Episodes started so far.
    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn clock(&self) -> f64 {
        self.engine.clock()
    }

    pub fn is_done(&self) -> bool {
        self.engine.clock() >= self.cfg.episode_steps - 1e-9
    }

    /// Starts the next episode with seed `seed + episode_index`.
    pub fn reset(&mut self) -> Vec<Vec<f64>> {
        let episode = self.episode;
        self.reset_episode(episode)
    }

    /// Starts episode `index` explicitly; the following `reset` continues from `index + 1`.
    pub fn reset_episode(&mut self, index: u64) -> Vec<Vec<f64>> {
        self.engine.reset(self.cfg.seed.wrapping_add(index));
        self.episode = index + 1;
        self.metrics = MetricsAccumulator::new();
        self.interval_waiting.iter_mut().for_each(|w| *w = 0.0);
        self.observations()
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        self.agents.iter().map(|&i| self.observe(i)).collect()
    }

    fn observe(&self, intersection: InterIdx) -> Vec<f64> {
        let mut out = Vec::new();
        for &name in &self.cfg.obs_spec {
            out.extend(info_function(&self.engine, intersection, name, self.cfg.phase_one_hot));
        }
        out
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.agents
            .iter()
            .zip(&self.interval_waiting)
            .map(|(&i, &w)| reward_function(&self.engine, i, self.cfg.reward_spec, w))
            .collect()
    }

    /// Uniformly random phase per agent from the engine's seeded generator.
    pub fn sample_action(&mut self) -> Vec<usize> {
        let counts = self.phase_counts();
        let rng = self.engine.rng_mut();
        counts.into_iter().map(|k| rng.gen_range(0..k)).collect()
    }

    pub fn step(&mut self, actions: &[usize]) -> Result<StepResult, EnvError> {
        if self.is_done() {
            return Err(EnvError::Done);
        }
        if actions.len() != self.agents.len() {
            return Err(EnvError::ActionCount {
                expected: self.agents.len(),
                got: actions.len(),
            });
        }
        let topo = self.engine.topology();
        for (&i, &a) in self.agents.iter().zip(actions) {
            let info = &topo.intersections[i];
            if a >= info.phase_count() {
                return Err(ModelError::PhaseOutOfRange {
                    intersection: info.id.clone(),
                    index: a,
                    count: info.phase_count(),
                }
                .into());
            }
        }
        for (&i, &a) in self.agents.iter().zip(actions) {
            self.engine.set_phase(i, a)?;
        }
        self.interval_waiting.iter_mut().for_each(|w| *w = 0.0);
        let dt = self.cfg.sim.dt;
        for _ in 0..self.cfg.ticks_per_action() {
            self.engine.step()?;
            self.metrics.record_tick(&self.engine);
            let topo = self.engine.topology();
            for (slot, &i) in self.interval_waiting.iter_mut().zip(&self.agents) {
                let waiting: usize = topo.intersections[i]
                    .incoming_lanes
                    .iter()
                    .map(|&l| self.engine.lane_waiting_count(l))
                    .sum();
                *slot += waiting as f64 * dt;
            }
        }
        Ok(StepResult {
            observations: self.observations(),
            rewards: self.rewards(),
            done: self.is_done(),
            info: self.step_info(),
        })
    }

    pub fn step_info(&self) -> StepInfo {
        StepInfo {
            clock: self.engine.clock(),
            queue: self.metrics.average_queue().unwrap_or(0.0),
            delay: self.metrics.average_delay(),
            throughput: self.metrics.throughput(),
            in_network: self.engine.vehicles_in_network() as u64,
        }
    }

    /// Metrics of the current episode at the current clock.
    pub fn episode_metrics(&self) -> EpisodeMetrics {
        self.metrics.finish(&self.engine)
    }
}
