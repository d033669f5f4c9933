use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::agent::DqnConfig;
use crate::controllers::{FixedTimeConfig, MaxPressureConfig, SotlConfig};
use crate::env::{EnvConfig, InfoName, RewardName, SimParams};
use crate::fixtures;
use crate::format::{self, FormatKind};
use crate::model::{FlowSet, RoadNetwork};
use crate::sim::is_positive_multiple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Fixedtime,
    Maxpressure,
    Sotl,
    Idqn,
    Presslight,
}

impl AgentKind {
    pub const ALL: [AgentKind; 5] = [
        AgentKind::Fixedtime,
        AgentKind::Maxpressure,
        AgentKind::Sotl,
        AgentKind::Idqn,
        AgentKind::Presslight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Fixedtime => "fixedtime",
            AgentKind::Maxpressure => "maxpressure",
            AgentKind::Sotl => "sotl",
            AgentKind::Idqn => "idqn",
            AgentKind::Presslight => "presslight",
        }
    }

    pub fn is_learning(self) -> bool {
        matches!(self, AgentKind::Idqn | AgentKind::Presslight)
    }

    /// Observation and reward wiring used when the config does not override it.
    pub fn default_specs(self) -> (Vec<InfoName>, RewardName) {
        let obs = vec![InfoName::LaneCount, InfoName::Phase];
        match self {
            AgentKind::Presslight => (obs, RewardName::NegPressureAbs),
            _ => (obs, RewardName::NegWaitingCount),
        }
    }
}

impl std::str::FromStr for AgentKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown agent `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub agent: AgentKind,
    #[serde(default)]
    pub seed: u64,
    /// Built-in fixture name; alternative to `network` + `flow`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network_format: Option<FormatKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_format: Option<FormatKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yellow_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub action_interval: f64,
    pub episode_steps: f64,
    pub phase_one_hot: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obs_spec: Option<Vec<InfoName>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward_spec: Option<RewardName>,
    pub dt: f64,
    pub waiting_speed_threshold: f64,
    pub depart_speed: crate::sim::DepartSpeed,
}

impl Default for EnvSection {
    fn default() -> Self {
        let env = EnvConfig::default();
        Self {
            action_interval: env.action_interval,
            episode_steps: env.episode_steps,
            phase_one_hot: env.phase_one_hot,
            obs_spec: None,
            reward_spec: None,
            dt: env.sim.dt,
            waiting_speed_threshold: env.sim.waiting_speed_threshold,
            depart_speed: env.sim.depart_speed,
        }
    }
}

/// Controller parameters plus the number of evaluation episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSection<C> {
    #[serde(default = "one")]
    pub episodes: usize,
    #[serde(flatten)]
    pub params: C,
}

fn one() -> usize {
    1
}

impl<C: Default> Default for ClassicalSection<C> {
    fn default() -> Self {
        Self {
            episodes: 1,
            params: C::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub env: EnvSection,
    #[serde(default)]
    pub fixedtime: ClassicalSection<FixedTimeConfig>,
    #[serde(default)]
    pub maxpressure: ClassicalSection<MaxPressureConfig>,
    #[serde(default)]
    pub sotl: ClassicalSection<SotlConfig>,
    #[serde(default)]
    pub idqn: DqnConfig,
    #[serde(default)]
    pub presslight: DqnConfig,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            agent: AgentKind::Fixedtime,
            seed: 0,
            scenario: Some("grid1x1".into()),
            network: None,
            network_format: None,
            flow: None,
            flow_format: None,
            yellow_time: None,
            output: None,
        }
    }
}

/// A loaded network and demand pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub network: RoadNetwork,
    pub flows: FlowSet,
}

fn format_from_path(path: &Path) -> Option<FormatKind> {
    let name = path.file_name()?.to_str()?;
    if name.ends_with(".xml") {
        Some(FormatKind::SumoStyleXml)
    } else if name.ends_with(".json") {
        Some(FormatKind::CityflowStyleJson)
    } else {
        None
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a config; relative paths inside it are resolved against its directory.
    pub fn from_file(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.experiment.network, &mut cfg.experiment.flow, &mut cfg.experiment.output]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<(), BenchError> {
        let e = &self.experiment;
        match (&e.scenario, &e.network, &e.flow) {
            (Some(_), None, None) | (None, Some(_), Some(_)) => {}
            _ => {
                return Err(BenchError::Config(
                    "give either `scenario` or both `network` and `flow`".into(),
                ))
            }
        }
        if let Some(name) = &e.scenario {
            if !fixtures::SCENARIOS.contains(&name.as_str()) {
                return Err(BenchError::Config(format!(
                    "unknown scenario `{name}` (known: {})",
                    fixtures::SCENARIOS.join(", ")
                )));
            }
        }
        self.env_config()?.check()?;
        let t_fixed = self.fixedtime.params.t_fixed;
        if !is_positive_multiple(t_fixed, self.env.action_interval) {
            return Err(BenchError::Config(format!(
                "t_fixed {t_fixed} is not a positive multiple of action_interval {}",
                self.env.action_interval
            )));
        }
        if !(self.maxpressure.params.t_min >= 0.0) || !(self.sotl.params.t_min >= 0.0) {
            return Err(BenchError::Config("t_min must be non-negative".into()));
        }
        self.idqn.check()?;
        self.presslight.check()?;
        Ok(())
    }

    pub fn env_config(&self) -> Result<EnvConfig, BenchError> {
        let (obs, reward) = self.experiment.agent.default_specs();
        Ok(EnvConfig {
            action_interval: self.env.action_interval,
            episode_steps: self.env.episode_steps,
            obs_spec: self.env.obs_spec.clone().unwrap_or(obs),
            reward_spec: self.env.reward_spec.unwrap_or(reward),
            phase_one_hot: self.env.phase_one_hot,
            seed: self.experiment.seed,
            sim: SimParams {
                dt: self.env.dt,
                waiting_speed_threshold: self.env.waiting_speed_threshold,
                depart_speed: self.env.depart_speed,
            },
        })
    }

    /// Settings of the selected learning agent.
    pub fn dqn_config(&self) -> Option<&DqnConfig> {
        match self.experiment.agent {
            AgentKind::Idqn => Some(&self.idqn),
            AgentKind::Presslight => Some(&self.presslight),
            _ => None,
        }
    }

    pub fn load_scenario(&self) -> Result<Scenario, BenchError> {
        let e = &self.experiment;
        let (network, flows) = if let Some(name) = &e.scenario {
            let (net, flows) =
                fixtures::scenario(name).ok_or_else(|| BenchError::Config(format!("unknown scenario `{name}`")))?;
            (net, flows)
        } else {
            let net_path = e.network.as_ref().expect("checked");
            let flow_path = e.flow.as_ref().expect("checked");
            let net_kind = e
                .network_format
                .or_else(|| format_from_path(net_path))
                .ok_or_else(|| BenchError::Config("cannot infer network_format".into()))?;
            let flow_kind = e
                .flow_format
                .or_else(|| format_from_path(flow_path))
                .ok_or_else(|| BenchError::Config("cannot infer flow_format".into()))?;
            let net_bytes = std::fs::read(net_path).map_err(|err| BenchError::io(net_path, err))?;
            let flow_bytes = std::fs::read(flow_path).map_err(|err| BenchError::io(flow_path, err))?;
            let net = format::load_network(net_kind, &net_bytes)?;
            let flows = format::load_flows(flow_kind, &flow_bytes)?;
            let flows = format::complete_routes(&net, &flows)?;
            (net, flows)
        };
        let network = match e.yellow_time {
            Some(y) => network.with_yellow_time(y),
            None => network,
        };
        Ok(Scenario { network, flows })
    }
}
