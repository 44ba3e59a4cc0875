//! Independent-learner training loop.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::save_agents;
use super::metrics::{write_records, EpisodeRecord, StepRow, StepWriter};
use super::{derive_seed, ExperimentConfig, HarnessError, Stream};
use crate::agent::{AgentError, DdqnAgent, Transition};
use crate::neural::NeuralError;
use crate::world::{Action, World};

pub struct TrainingRun {
    pub agents: Vec<DdqnAgent>,
    pub log: Vec<EpisodeRecord>,
}

/// Builds one agent per UAV, each with its own seed.
pub fn build_agents(cfg: &ExperimentConfig) -> Result<Vec<DdqnAgent>, HarnessError> {
    let agent_cfg = cfg.resolved_agent();
    (0..cfg.world.uav_count)
        .map(|j| Ok(DdqnAgent::new(agent_cfg.clone(), derive_seed(cfg.seed, Stream::Agent, j as u64))?))
        .collect()
}

fn numeric(err: AgentError, episode: usize, step: usize, uav: usize) -> HarnessError {
    match err {
        AgentError::Neural(NeuralError::NonFinite { what }) => HarnessError::NonFinite {
            what,
            episode,
            step,
            uav,
        },
        other => other.into(),
    }
}

/// Runs every training episode, calling `hook` with each finished episode's
/// record, its step rows and the agents.
pub fn train_with<F>(cfg: &ExperimentConfig, mut hook: F) -> Result<TrainingRun, HarnessError>
where
    F: FnMut(&EpisodeRecord, &[StepRow], &[DdqnAgent]) -> Result<(), HarnessError>,
{
    cfg.validate()?;
    let mut agents = build_agents(cfg)?;
    let mut log = Vec::with_capacity(cfg.episodes);
    let n = cfg.world.uav_count;

    for episode in 0..cfg.episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, Stream::TrainingWorld, episode as u64));
        let mut world = World::reset(cfg.world.clone(), &mut rng)?;
        let mut obs = world.observations();
        let mut rows = Vec::with_capacity(cfg.world.max_steps);
        let (mut reward_sum, mut reward_count) = (0.0, 0usize);
        let (mut loss_sum, mut loss_count) = (0.0, 0usize);

        while !world.is_done() {
            let alive = world.state().alive().to_vec();
            let mut chosen = vec![Action::Hover.index(); n];
            for j in (0..n).filter(|&j| alive[j]) {
                chosen[j] = agents[j].act(&obs[j]);
            }
            let actions: Vec<Action> = chosen
                .iter()
                .map(|&a| Action::from_index(a).unwrap_or(Action::Hover))
                .collect();
            let out = world.step(&actions)?;
            let step = out.metrics.step;

            for j in (0..n).filter(|&j| out.acted[j]) {
                agents[j].remember(Transition {
                    state: obs[j],
                    action: chosen[j],
                    reward: out.rewards[j],
                    next_state: out.observations[j],
                    terminal: out.terminal[j],
                });
                reward_sum += out.rewards[j];
                reward_count += 1;
                if let Some(loss) = agents[j].ddqn_update().map_err(|e| numeric(e, episode, step, j))? {
                    loss_sum += loss;
                    loss_count += 1;
                }
            }
            obs = out.observations;
            rows.push(StepRow {
                trial: 0,
                episode,
                metrics: out.metrics,
            });
        }

        let steps = rows.len();
        let record = EpisodeRecord {
            episode,
            steps,
            energy_efficiency: rows.iter().map(|r| r.metrics.energy_efficiency).sum(),
            mean_reward: reward_sum / reward_count.max(1) as f64,
            mean_outage: rows.iter().map(|r| r.metrics.outage as f64).sum::<f64>() / steps.max(1) as f64,
            total_energy_j: rows.iter().map(|r| r.metrics.total_energy).sum(),
            mean_loss: (loss_count > 0).then(|| loss_sum / loss_count as f64),
            epsilon: agents.iter().map(|a| a.epsilon()).sum::<f64>() / n as f64,
        };
        hook(&record, &rows, &agents)?;
        log.push(record);
    }
    Ok(TrainingRun { agents, log })
}

pub fn train(cfg: &ExperimentConfig) -> Result<TrainingRun, HarnessError> {
    train_with(cfg, |_, _, _| Ok(()))
}

/// Trains and writes `training_log.csv`, `train_steps.csv` and checkpoints
/// under `out`: `checkpoints/episode_<e>/` every `checkpoint_every`
/// episodes and `checkpoints/final/` at the end. With zero episodes only
/// the empty log is written.
pub fn run_training(cfg: &ExperimentConfig, out: &Path) -> Result<TrainingRun, HarnessError> {
    fs::create_dir_all(out).map_err(|source| HarnessError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let mut steps = StepWriter::create(&out.join("train_steps.csv"), cfg.world.uav_count)?;
    let checkpoints = out.join("checkpoints");
    let run = train_with(cfg, |record, rows, agents| {
        for row in rows {
            steps.write(row)?;
        }
        let done = record.episode + 1;
        if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 {
            save_agents(&checkpoints.join(format!("episode_{done}")), agents, done)?;
        }
        Ok(())
    })?;
    steps.finish()?;
    write_log(&out.join("training_log.csv"), &run.log)?;
    if !run.log.is_empty() {
        save_agents(&checkpoints.join("final"), &run.agents, run.log.len())?;
    }
    Ok(run)
}

fn write_log(path: &Path, log: &[EpisodeRecord]) -> Result<(), HarnessError> {
    if log.is_empty() {
        // serde-driven writers emit headers only with the first record
        fs::write(
            path,
            "episode,steps,energy_efficiency,mean_reward,mean_outage,total_energy_j,mean_loss,epsilon\n",
        )
        .map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })
    } else {
        write_records(path, log)
    }
}
