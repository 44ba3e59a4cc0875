use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use uavnet::harness::checkpoint::load_meta;
use uavnet::harness::{load_network, run_evaluation, run_training, ExperimentConfig, HarnessError, PolicyKind};

#[derive(Parser)]
#[command(name = "uavnet", version, about = "Train and evaluate multi-agent UAV base-station controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one DDQN agent per UAV and write logs and checkpoints.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run Monte-Carlo evaluation trials.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Directory holding agent_<j>.qnet files.
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
        #[arg(long)]
        policy: Option<PolicyKind>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Describe a saved Q-network.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let run = run_training(&cfg, &out)?;
            match run.log.last() {
                Some(last) => println!(
                    "trained {} episodes; final episode EE {:.6e} bit/J, epsilon {:.4}; output in {}",
                    run.log.len(),
                    last.energy_efficiency,
                    last.epsilon,
                    out.display()
                ),
                None => println!("no episodes requested; empty log in {}", out.display()),
            }
            Ok(())
        }
        Command::Eval {
            config,
            checkpoint_dir,
            policy,
            trials,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(policy) = policy {
                cfg.policy = policy;
            }
            if let Some(trials) = trials {
                cfg.trials = trials;
            }
            let out = out.unwrap_or_else(|| cfg.output_dir.join("eval"));
            for s in run_evaluation(&cfg, checkpoint_dir.as_deref(), &out)? {
                let normalized = s.normalized_ee.map_or("-".to_string(), |v| format!("{v:.4}"));
                println!(
                    "{}: {} trials, mean EE {:.6e} bit/J (normalized {normalized}), mean outage {:.2}, mean energy {:.1} J",
                    s.policy, s.trials, s.mean_ee, s.mean_outage, s.mean_total_energy_j
                );
            }
            Ok(())
        }
        Command::Inspect { checkpoint } => inspect(&checkpoint),
    }
}

fn inspect(path: &Path) -> Result<(), HarnessError> {
    let net = load_network(path)?;
    let sizes: Vec<String> = net.sizes().iter().map(|s| s.to_string()).collect();
    println!("layers: {}", sizes.join(" -> "));
    println!("parameters: {}", net.parameter_count());
    println!("finite: {}", net.is_finite());
    let meta = path.with_extension("toml");
    if meta.exists() {
        let meta = load_meta(&meta)?;
        println!(
            "uav {}: {} episodes, {} environment steps, {} updates",
            meta.uav, meta.episodes_completed, meta.env_steps, meta.updates
        );
    }
    Ok(())
}
