//! Experiment configuration files.
//!
//! Configs are TOML with one table per concern. Every key is optional and
//! defaults to the full-scale experiment. Any key can be overridden from the
//! environment as `UAVNET__<SECTION>__<KEY>=<value>`, e.g.
//! `UAVNET__WORLD__UAV_COUNT=4`; values are parsed as TOML literals and
//! fall back to strings.
//!
//! ```toml
//! [experiment]
//! episodes = 250
//! trials = 2000
//! seed = 0
//! policy = "mad-ddqn"
//! output_dir = "runs/default"
//! checkpoint_every = 50
//! epsilon_decay_fraction = 0.5
//!
//! [world]
//! x_max = 1000.0
//! uav_count = 12
//! max_steps = 1500
//!
//! [channel]
//! tx_power_dbm = 20.0
//! sinr_threshold_db = 5.0
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agent::AgentConfig;
use crate::energy::PowerParams;
use crate::mobility::GmmParams;
use crate::radio::{db_to_linear, dbm_to_watts, ChannelParams};
use crate::world::{WorldConfig, DEFAULT_ENERGY_BUDGET};

pub const ENV_PREFIX: &str = "UAVNET__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "mad-ddqn")]
    MadDdqn,
    #[serde(rename = "random")]
    Random,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::MadDdqn => "mad-ddqn",
            PolicyKind::Random => "random",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mad-ddqn" => Ok(PolicyKind::MadDdqn),
            "random" => Ok(PolicyKind::Random),
            other => Err(format!("unknown policy `{other}` (expected mad-ddqn or random)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExperimentSection {
    episodes: usize,
    trials: usize,
    seed: u64,
    policy: PolicyKind,
    output_dir: PathBuf,
    checkpoint_every: usize,
    epsilon_decay_fraction: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            episodes: 250,
            trials: 2000,
            seed: 0,
            policy: PolicyKind::MadDdqn,
            output_dir: PathBuf::from("runs/default"),
            checkpoint_every: 50,
            epsilon_decay_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct WorldSection {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    h_min: f64,
    h_max: f64,
    step_x: f64,
    step_y: f64,
    step_z: f64,
    uav_count: usize,
    static_users: usize,
    mobile_users: usize,
    neighbourhood_radius: f64,
    step_duration: f64,
    max_steps: usize,
    energy_budget_j: f64,
}

impl Default for WorldSection {
    fn default() -> Self {
        let w = WorldConfig::default();
        Self {
            x_min: w.x_min,
            x_max: w.x_max,
            y_min: w.y_min,
            y_max: w.y_max,
            h_min: w.h_min,
            h_max: w.h_max,
            step_x: w.step_x,
            step_y: w.step_y,
            step_z: w.step_z,
            uav_count: w.uav_count,
            static_users: w.static_users,
            mobile_users: w.mobile_users,
            neighbourhood_radius: w.neighbourhood_radius,
            step_duration: w.step_duration,
            max_steps: w.max_steps,
            energy_budget_j: DEFAULT_ENERGY_BUDGET,
        }
    }
}

/// Channel constants in the units they are usually quoted in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ChannelSection {
    attenuation: f64,
    pathloss_exponent: f64,
    tx_power_dbm: f64,
    noise_power_dbm: f64,
    bandwidth_hz: f64,
    sinr_threshold_db: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            attenuation: 1.0,
            pathloss_exponent: 2.0,
            tx_power_dbm: 20.0,
            noise_power_dbm: -130.0,
            bandwidth_hz: 1e6,
            sinr_threshold_db: 5.0,
        }
    }
}

impl ChannelSection {
    fn to_params(&self) -> ChannelParams {
        ChannelParams {
            attenuation: self.attenuation,
            pathloss_exponent: self.pathloss_exponent,
            tx_power_w: dbm_to_watts(self.tx_power_dbm),
            noise_power_w: dbm_to_watts(self.noise_power_dbm),
            bandwidth_hz: self.bandwidth_hz,
            sinr_threshold: db_to_linear(self.sinr_threshold_db),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    experiment: ExperimentSection,
    world: WorldSection,
    channel: ChannelSection,
    power: PowerParams,
    mobility: GmmParams,
    agent: AgentConfig,
}

/// Everything one training or evaluation run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub world: WorldConfig,
    pub agent: AgentConfig,
    pub episodes: usize,
    pub trials: usize,
    pub seed: u64,
    pub policy: PolicyKind,
    pub output_dir: PathBuf,
    /// Write intermediate checkpoints every this many episodes (0 = final only).
    pub checkpoint_every: usize,
    /// Share of planned training steps over which epsilon decays, used when
    /// the agent section leaves `epsilon_decay_steps` unset.
    pub epsilon_decay_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ConfigFile::default().into_config()
    }
}

impl ConfigFile {
    fn into_config(self) -> ExperimentConfig {
        let w = self.world;
        ExperimentConfig {
            world: WorldConfig {
                x_min: w.x_min,
                x_max: w.x_max,
                y_min: w.y_min,
                y_max: w.y_max,
                h_min: w.h_min,
                h_max: w.h_max,
                step_x: w.step_x,
                step_y: w.step_y,
                step_z: w.step_z,
                uav_count: w.uav_count,
                static_users: w.static_users,
                mobile_users: w.mobile_users,
                neighbourhood_radius: w.neighbourhood_radius,
                step_duration: w.step_duration,
                max_steps: w.max_steps,
                energy_budget: w.energy_budget_j,
                channel: self.channel.to_params(),
                power: self.power,
                mobility: GmmParams {
                    step_duration: w.step_duration,
                    ..self.mobility
                },
            },
            agent: self.agent,
            episodes: self.experiment.episodes,
            trials: self.experiment.trials,
            seed: self.experiment.seed,
            policy: self.experiment.policy,
            output_dir: self.experiment.output_dir,
            checkpoint_every: self.experiment.checkpoint_every,
            epsilon_decay_fraction: self.experiment.epsilon_decay_fraction,
        }
    }
}

fn parse_env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl ExperimentConfig {
    /// Parses TOML text, then applies `UAVNET__SECTION__KEY` overrides from
    /// `env` in sorted key order.
    pub fn from_toml_str<I>(text: &str, env: I) -> Result<Self, HarnessError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let mut overrides: Vec<(String, String)> = env
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        overrides.sort();
        for (key, raw) in overrides {
            let path = &key[ENV_PREFIX.len()..];
            let (section, field) = path
                .split_once("__")
                .ok_or_else(|| HarnessError::Config(format!("override `{key}` must look like {ENV_PREFIX}SECTION__KEY")))?;
            let section = table
                .entry(section.to_ascii_lowercase())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(section) = section else {
                return Err(HarnessError::Config(format!("override `{key}` targets a non-table section")));
            };
            section.insert(field.to_ascii_lowercase(), parse_env_value(&raw));
        }
        let file: ConfigFile = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        let cfg = file.into_config();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file with overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, std::env::vars())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.world.validate()?;
        self.agent.validate()?;
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            return Err(HarnessError::Config("epsilon_decay_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Total environment steps each agent takes during training.
    pub fn planned_steps(&self) -> u64 {
        (self.episodes * self.world.max_steps) as u64
    }

    /// Agent configuration with the epsilon horizon resolved.
    pub fn resolved_agent(&self) -> AgentConfig {
        let mut agent = self.agent.clone();
        if agent.epsilon_decay_steps.is_none() {
            let steps = (self.epsilon_decay_fraction * self.planned_steps() as f64).round() as u64;
            agent.epsilon_decay_steps = Some(steps);
        }
        agent
    }
}
