//! Monte-Carlo evaluation of trained or baseline policies.
//!
//! Trial `t` resets its world from the same derived seed whichever policy
//! runs, so learned and random controllers face identical scenarios.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::load_agents;
use super::metrics::{write_records, RunSummary, StepRow, StepWriter, TrialSummary};
use super::{derive_seed, ExperimentConfig, HarnessError, PolicyKind, Stream};
use crate::agent::greedy_action;
use crate::baseline::random_action;
use crate::neural::QNetwork;
use crate::world::{Action, World};

pub enum Controller {
    /// Greedy actions from one network per UAV.
    Learned(Vec<QNetwork>),
    Random,
}

impl Controller {
    pub fn policy(&self) -> PolicyKind {
        match self {
            Controller::Learned(_) => PolicyKind::MadDdqn,
            Controller::Random => PolicyKind::Random,
        }
    }
}

pub struct EvaluationRun {
    pub trials: Vec<TrialSummary>,
    pub summary: RunSummary,
}

/// Runs `cfg.trials` episodes, passing every step row to `sink`.
pub fn evaluate_with<F>(cfg: &ExperimentConfig, controller: &Controller, mut sink: F) -> Result<EvaluationRun, HarnessError>
where
    F: FnMut(&StepRow) -> Result<(), HarnessError>,
{
    cfg.validate()?;
    let n = cfg.world.uav_count;
    if let Controller::Learned(nets) = controller {
        if nets.len() != n {
            return Err(HarnessError::Config(format!(
                "controller has {} networks for {n} UAVs",
                nets.len()
            )));
        }
    }
    let mut trials = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let mut world_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, Stream::EvaluationWorld, trial as u64));
        let mut policy_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, Stream::EvaluationPolicy, trial as u64));
        let mut world = World::reset(cfg.world.clone(), &mut world_rng)?;
        let mut metrics = Vec::with_capacity(cfg.world.max_steps);
        while !world.is_done() {
            let actions: Vec<Action> = (0..n)
                .map(|j| {
                    let index = match controller {
                        Controller::Learned(nets) => greedy_action(&nets[j], &world.observe(j)),
                        Controller::Random => random_action(&mut policy_rng),
                    };
                    Action::from_index(index).unwrap_or(Action::Hover)
                })
                .collect();
            let out = world.step(&actions)?;
            let row = StepRow {
                trial,
                episode: 0,
                metrics: out.metrics,
            };
            sink(&row)?;
            metrics.push(row.metrics);
        }
        trials.push(TrialSummary::from_rows(trial, &metrics));
    }
    let summary = RunSummary::from_trials(&controller.policy().to_string(), n, &trials);
    Ok(EvaluationRun { trials, summary })
}

pub fn evaluate(cfg: &ExperimentConfig, controller: &Controller) -> Result<EvaluationRun, HarnessError> {
    evaluate_with(cfg, controller, |_| Ok(()))
}

/// Evaluates `cfg.policy` and writes `eval_steps.csv`, `eval_trials.csv`
/// and `eval_summary.csv` under `out`.
///
/// Normalized EE is relative to the learned policy's mean, so it needs
/// `checkpoints`. For the random policy the learned policy is evaluated
/// as well, on the same seeds, and appears as a second summary row.
pub fn run_evaluation(
    cfg: &ExperimentConfig,
    checkpoints: Option<&Path>,
    out: &Path,
) -> Result<Vec<RunSummary>, HarnessError> {
    let learned = checkpoints
        .map(|dir| load_agents(dir, cfg.world.uav_count).map(Controller::Learned))
        .transpose()?;
    let controller = match (cfg.policy, learned) {
        (PolicyKind::MadDdqn, Some(c)) => c,
        (PolicyKind::MadDdqn, None) => {
            return Err(HarnessError::Config("the mad-ddqn policy needs a checkpoint directory".into()))
        }
        (PolicyKind::Random, learned) => {
            return run_random_evaluation(cfg, learned, out);
        }
    };
    let mut summaries = vec![write_run(cfg, &controller, out)?.summary];
    let mean = summaries[0].mean_ee;
    summaries[0].normalize_against(mean);
    write_records(&out.join("eval_summary.csv"), &summaries)?;
    Ok(summaries)
}

fn run_random_evaluation(
    cfg: &ExperimentConfig,
    learned: Option<Controller>,
    out: &Path,
) -> Result<Vec<RunSummary>, HarnessError> {
    let mut summaries = vec![write_run(cfg, &Controller::Random, out)?.summary];
    if let Some(learned) = learned {
        let mut reference = evaluate(cfg, &learned)?.summary;
        let mean = reference.mean_ee;
        reference.normalize_against(mean);
        summaries[0].normalize_against(mean);
        summaries.push(reference);
    }
    write_records(&out.join("eval_summary.csv"), &summaries)?;
    Ok(summaries)
}

fn write_run(cfg: &ExperimentConfig, controller: &Controller, out: &Path) -> Result<EvaluationRun, HarnessError> {
    fs::create_dir_all(out).map_err(|source| HarnessError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let mut steps = StepWriter::create(&out.join("eval_steps.csv"), cfg.world.uav_count)?;
    let run = evaluate_with(cfg, controller, |row| steps.write(row))?;
    steps.finish()?;
    write_records(&out.join("eval_trials.csv"), &run.trials)?;
    Ok(run)
}
