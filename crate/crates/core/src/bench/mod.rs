//! Experiment runner behind the `tsc` command line: configs, per-episode
//! logs, run summaries, conversion and result comparison.

mod compare;
mod config;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use compare::{compare, load_summary, CompareReport, MetricRanking, RankEntry};
pub use config::{AgentKind, ClassicalSection, EnvSection, ExperimentConfig, ExperimentSection, Scenario};

use crate::agent::{build_agents, run_training, AgentCheckpoint, AgentError};
use crate::controllers::{Classical, ControllerError};
use crate::env::{EnvError, TscEnv};
use crate::format::{self, ConversionOptions, FormatError, FormatKind};
use crate::metrics::EpisodeMetrics;
use crate::model::ValidationReport;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl BenchError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        BenchError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for invalid input (config, files, validation), 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Format(_) | BenchError::Validation(_) => 1,
            BenchError::Agent(AgentError::Config(_)) => 1,
            BenchError::Env(EnvError::Config(_)) => 1,
            _ => 2,
        }
    }
}

/// One row of `episodes.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: usize,
    pub travel_time: f64,
    pub queue: f64,
    pub delay: f64,
    pub real_delay: f64,
    pub throughput: u64,
    pub wall_seconds: f64,
}

impl EpisodeRow {
    fn new(episode: usize, m: &EpisodeMetrics, wall_seconds: f64) -> Self {
        Self {
            episode,
            travel_time: m.travel_time,
            queue: m.queue,
            delay: m.delay,
            real_delay: m.real_delay,
            throughput: m.throughput,
            wall_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub agent: AgentKind,
    pub seed: u64,
    pub episodes: usize,
    /// Hash of the network and demand; runs are comparable iff these match.
    pub scenario_fingerprint: String,
    /// Hash of the scenario, the full config and the seed.
    pub run_fingerprint: String,
    #[serde(rename = "final")]
    pub final_metrics: EpisodeMetrics,
    pub best: EpisodeMetrics,
    /// Episode with the lowest travel time (earliest on ties).
    pub best_episode: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub rows: Vec<EpisodeRow>,
    pub episode_metrics: Vec<EpisodeMetrics>,
    pub summary: Summary,
}

fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

pub fn scenario_fingerprint(s: &Scenario) -> String {
    let net = &s.network;
    let net_json = serde_json::to_vec(&(net.intersections(), net.roads(), net.lanes(), net.movements()))
        .expect("network serializes");
    let flow_json = serde_json::to_vec(&s.flows).expect("flows serialize");
    sha256_hex(&[&net_json, &flow_json])
}

pub fn run_fingerprint(s: &Scenario, cfg: &ExperimentConfig) -> String {
    let mut cfg = cfg.clone();
    // where results go does not change them
    cfg.experiment.output = None;
    sha256_hex(&[
        scenario_fingerprint(s).as_bytes(),
        cfg.to_toml().as_bytes(),
        &cfg.experiment.seed.to_le_bytes(),
    ])
}

/// Runs the configured agent. RL checkpoints go to `checkpoint_dir` when given.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    checkpoint_dir: Option<&Path>,
) -> Result<RunResult, BenchError> {
    cfg.check()?;
    let env_cfg = cfg.env_config()?;
    let mut env = TscEnv::new(&scenario.network, &scenario.flows, env_cfg)?;
    let agent = cfg.experiment.agent;
    let mut rows = Vec::new();
    let mut metrics = Vec::new();
    if let Some(dqn) = cfg.dqn_config() {
        let mut agents = build_agents(&env, dqn, cfg.experiment.seed)?;
        let ids: Vec<String> = env.agent_ids().into_iter().map(String::from).collect();
        let save_rate = dqn.save_rate;
        let logs = run_training(&mut env, &mut agents, dqn.episodes, |log, agents| {
            if let (Some(dir), true) = (checkpoint_dir, save_rate > 0 && (log.episode + 1) % save_rate == 0) {
                save_checkpoint(dir, log.episode, &ids, agents).map_err(|e| AgentError::Checkpoint(e.to_string()))?;
            }
            Ok(())
        })?;
        for log in logs {
            rows.push(EpisodeRow::new(log.episode, &log.metrics, log.wall_seconds));
            metrics.push(log.metrics);
        }
    } else {
        let (controller, episodes) = match agent {
            AgentKind::Fixedtime => (Classical::FixedTime(cfg.fixedtime.params), cfg.fixedtime.episodes),
            AgentKind::Maxpressure => (Classical::MaxPressure(cfg.maxpressure.params), cfg.maxpressure.episodes),
            AgentKind::Sotl => (Classical::Sotl(cfg.sotl.params), cfg.sotl.episodes),
            _ => unreachable!("learning agents handled above"),
        };
        for episode in 0..episodes {
            let started = Instant::now();
            let m = run_classical_episode(&mut env, &controller)?;
            rows.push(EpisodeRow::new(episode, &m, started.elapsed().as_secs_f64()));
            metrics.push(m);
        }
    }
    let summary = summarize(cfg, scenario, &metrics);
    Ok(RunResult {
        rows,
        episode_metrics: metrics,
        summary,
    })
}

/// One full episode driven by a classical controller.
pub fn run_classical_episode(env: &mut TscEnv, controller: &Classical) -> Result<EpisodeMetrics, BenchError> {
    env.reset();
    loop {
        let actions = controller.act(env)?;
        if env.step(&actions)?.done {
            return Ok(env.episode_metrics());
        }
    }
}

fn summarize(cfg: &ExperimentConfig, scenario: &Scenario, metrics: &[EpisodeMetrics]) -> Summary {
    let mut best_episode = 0;
    for (i, m) in metrics.iter().enumerate() {
        if m.travel_time < metrics[best_episode].travel_time {
            best_episode = i;
        }
    }
    Summary {
        agent: cfg.experiment.agent,
        seed: cfg.experiment.seed,
        episodes: metrics.len(),
        scenario_fingerprint: scenario_fingerprint(scenario),
        run_fingerprint: run_fingerprint(scenario, cfg),
        final_metrics: metrics.last().copied().unwrap_or_default(),
        best: metrics.get(best_episode).copied().unwrap_or_default(),
        best_episode,
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    episode: usize,
    intersections: Vec<String>,
    agents: Vec<AgentCheckpoint>,
}

fn save_checkpoint(dir: &Path, episode: usize, ids: &[String], agents: &[crate::agent::DqnAgent]) -> Result<(), BenchError> {
    fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let file = CheckpointFile {
        episode,
        intersections: ids.to_vec(),
        agents: agents.iter().map(|a| a.checkpoint()).collect(),
    };
    let path = dir.join(format!("episode_{:04}.json", episode + 1));
    let json = serde_json::to_vec(&file).expect("checkpoint serializes");
    fs::write(&path, json).map_err(|e| BenchError::io(&path, e))
}

/// Loads a checkpoint written during a run: intersection ids and one agent per id.
pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, crate::agent::DqnAgent)>, BenchError> {
    let bytes = fs::read(path).map_err(|e| BenchError::io(path, e))?;
    let file: CheckpointFile = serde_json::from_slice(&bytes).map_err(|e| BenchError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    file.intersections
        .into_iter()
        .zip(file.agents)
        .map(|(id, c)| Ok((id, crate::agent::DqnAgent::from_checkpoint(c)?)))
        .collect()
}

pub fn episodes_csv(rows: &[EpisodeRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialize");
    }
    w.into_inner().expect("in-memory writer")
}

pub fn read_episodes_csv(bytes: &[u8]) -> Result<Vec<EpisodeRow>, csv::Error> {
    csv::Reader::from_reader(bytes).deserialize().collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), BenchError> {
    fs::write(path, bytes).map_err(|e| BenchError::io(path, e))
}

/// Writes `episodes.csv`, `summary.json` and the resolved `config.toml` into `out`.
pub fn write_run(out: &Path, cfg: &ExperimentConfig, result: &RunResult) -> Result<(), BenchError> {
    fs::create_dir_all(out).map_err(|e| BenchError::io(out, e))?;
    write_file(&out.join("episodes.csv"), &episodes_csv(&result.rows))?;
    let mut summary = serde_json::to_vec_pretty(&result.summary).expect("summary serializes");
    summary.push(b'\n');
    write_file(&out.join("summary.json"), &summary)?;
    write_file(&out.join("config.toml"), cfg.to_toml().as_bytes())
}

/// `tsc run`: load the config, apply overrides, run and write results.
pub fn cmd_run(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(PathBuf, RunResult), BenchError> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    if let Some(s) = seed {
        cfg.experiment.seed = s;
    }
    let out_dir = match (out, &cfg.experiment.output) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => o.clone(),
        (None, None) => PathBuf::from("results").join(format!(
            "{}-seed{}",
            cfg.experiment.agent.name(),
            cfg.experiment.seed
        )),
    };
    let scenario = cfg.load_scenario()?;
    let ckpt = out_dir.join("checkpoints");
    let result = run_experiment(&cfg, &scenario, Some(&ckpt))?;
    write_run(&out_dir, &cfg, &result)?;
    Ok((out_dir, result))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvertOutcome {
    pub network_path: PathBuf,
    pub flow_path: PathBuf,
    pub report: ValidationReport,
}

fn output_name(input: &Path, kind_ext: &str) -> String {
    let name = input.file_name().and_then(|n| n.to_str()).unwrap_or("scenario");
    let stem = name.split('.').next().filter(|s| !s.is_empty()).unwrap_or("scenario");
    format!("{stem}.{kind_ext}")
}

/// `tsc convert`: convert a network/flow pair and write it into `out_dir`.
pub fn cmd_convert(
    net: &Path,
    flow: &Path,
    from: FormatKind,
    to: FormatKind,
    opts: &ConversionOptions,
    out_dir: &Path,
) -> Result<ConvertOutcome, BenchError> {
    let net_bytes = fs::read(net).map_err(|e| BenchError::io(net, e))?;
    let flow_bytes = fs::read(flow).map_err(|e| BenchError::io(flow, e))?;
    let (network, flows) = format::convert_model(&net_bytes, &flow_bytes, from, opts)?;
    let report = format::scenario_report(&network, &flows);
    let net_out = format::save_network(to, &network)?;
    let flow_out = format::save_flows(to, &flows)?;
    fs::create_dir_all(out_dir).map_err(|e| BenchError::io(out_dir, e))?;
    let network_path = out_dir.join(output_name(net, to.network_extension()));
    let flow_path = out_dir.join(output_name(flow, to.flow_extension()));
    for (path, input) in [(&network_path, net), (&flow_path, flow)] {
        if path.canonicalize().ok().is_some_and(|p| input.canonicalize().ok() == Some(p)) {
            return Err(BenchError::Config(format!(
                "output {} would overwrite the input",
                path.display()
            )));
        }
    }
    write_file(&network_path, &net_out)?;
    write_file(&flow_path, &flow_out)?;
    Ok(ConvertOutcome {
        network_path,
        flow_path,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(agent: &str, extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            "[experiment]\nagent = \"{agent}\"\nscenario = \"grid1x1\"\n[env]\nepisode_steps = 600\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn classical_run_has_one_row() {
        let c = cfg("fixedtime", "");
        let s = c.load_scenario().unwrap();
        let r = run_experiment(&c, &s, None).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.summary.best_episode, 0);
        assert_eq!(r.summary.final_metrics, r.summary.best);
    }

    #[test]
    fn rl_run_has_one_row_per_episode() {
        let c = cfg("idqn", "[idqn]\nepisodes = 3\nlearning_start = 50\n");
        let s = c.load_scenario().unwrap();
        let r = run_experiment(&c, &s, None).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.rows.iter().map(|x| x.episode).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn fingerprints() {
        let a = cfg("fixedtime", "");
        let b = cfg("maxpressure", "");
        let s = a.load_scenario().unwrap();
        assert_eq!(scenario_fingerprint(&s), scenario_fingerprint(&b.load_scenario().unwrap()));
        assert_ne!(run_fingerprint(&s, &a), run_fingerprint(&s, &b));
        let other = ExperimentConfig::from_toml("[experiment]\nagent = \"sotl\"\nscenario = \"arterial1x3\"\n").unwrap();
        assert_ne!(scenario_fingerprint(&s), scenario_fingerprint(&other.load_scenario().unwrap()));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![EpisodeRow {
            episode: 0,
            travel_time: 101.25,
            queue: 3.5,
            delay: 0.125,
            real_delay: 12.0,
            throughput: 7,
            wall_seconds: 0.5,
        }];
        let bytes = episodes_csv(&rows);
        assert!(String::from_utf8_lossy(&bytes)
            .starts_with("episode,travel_time,queue,delay,real_delay,throughput,wall_seconds\n"));
        assert_eq!(read_episodes_csv(&bytes).unwrap(), rows);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(BenchError::Config("x".into()).exit_code(), 1);
        assert_eq!(BenchError::Validation("x".into()).exit_code(), 1);
        assert_eq!(BenchError::io(Path::new("x"), io::Error::other("boom")).exit_code(), 2);
    }
}
