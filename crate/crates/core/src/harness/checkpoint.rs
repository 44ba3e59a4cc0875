//! Per-agent checkpoints.
//!
//! A checkpoint directory holds, for each UAV `j`, the online network as
//! `agent_<j>.qnet` (see [`crate::neural`] for the byte layout) and a TOML
//! sidecar `agent_<j>.toml` echoing the agent configuration and the
//! training-step counters.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agent::{AgentConfig, DdqnAgent};
use crate::neural::{QNetwork, Q_NETWORK_LAYERS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub uav: usize,
    pub episodes_completed: usize,
    pub env_steps: u64,
    pub updates: u64,
    pub agent: AgentConfig,
}

pub fn network_path(dir: &Path, uav: usize) -> PathBuf {
    dir.join(format!("agent_{uav}.qnet"))
}

pub fn meta_path(dir: &Path, uav: usize) -> PathBuf {
    dir.join(format!("agent_{uav}.toml"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save_network(path: &Path, net: &QNetwork) -> Result<(), HarnessError> {
    fs::write(path, net.to_bytes()).map_err(io_err(path))
}

/// Loads a Q-network file, requiring the `5 -> 128 -> 64 -> 7` layout.
pub fn load_network(path: &Path) -> Result<QNetwork, HarnessError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    QNetwork::from_bytes(&bytes, Some(&Q_NETWORK_LAYERS)).map_err(|source| HarnessError::Checkpoint {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_meta(path: &Path) -> Result<CheckpointMeta, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

pub fn save_agents(dir: &Path, agents: &[DdqnAgent], episodes_completed: usize) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (uav, agent) in agents.iter().enumerate() {
        save_network(&network_path(dir, uav), agent.main())?;
        let meta = CheckpointMeta {
            uav,
            episodes_completed,
            env_steps: agent.env_steps(),
            updates: agent.updates(),
            agent: agent.config.clone(),
        };
        let text = toml::to_string(&meta).map_err(|e| HarnessError::Config(e.to_string()))?;
        let path = meta_path(dir, uav);
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Loads one network per UAV. The directory must hold exactly `uav_count`
/// agent files numbered from zero.
pub fn load_agents(dir: &Path, uav_count: usize) -> Result<Vec<QNetwork>, HarnessError> {
    let stored = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(Result::ok)
        .filter(|e| {
            let name = e.file_name();
            let name = name.to_string_lossy();
            name.starts_with("agent_") && name.ends_with(".qnet")
        })
        .count();
    if stored != uav_count {
        return Err(HarnessError::FleetMismatch {
            dir: dir.to_path_buf(),
            expected: uav_count,
            found: stored,
        });
    }
    (0..uav_count).map(|j| load_network(&network_path(dir, j))).collect()
}
