//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! `ACCEPTANCE_ONLY=1,4,7` restricts the run to the listed criteria.
//! Training artifacts are kept under the cargo target tmp directory.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uavnet::baseline::random_action;
use uavnet::energy::{propulsion_power, PowerParams};
use uavnet::harness::{run_evaluation, run_training, ExperimentConfig, PolicyKind, RunSummary};
use uavnet::radio::{associate, ChannelParams};
use uavnet::world::{shaped_reward, Action, World, WorldConfig};

use common::{brute_force_association, constraint_violations, double_q_check, gradient_check, random_instance};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: Duration, v: Verdict) -> Verdict {
    if elapsed > limit {
        verdict(false, format!("{}; exceeded {:?} limit", v.detail, limit))
    } else {
        v
    }
}

fn desk_config() -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let text = fs::read_to_string(&path).expect("desk preset");
    ExperimentConfig::from_toml_str(&text, std::iter::empty::<(String, String)>()).expect("valid desk preset")
}

fn artifacts() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn fresh_dir(path: &Path) -> PathBuf {
    let _ = fs::remove_dir_all(path);
    fs::create_dir_all(path).unwrap();
    path.to_path_buf()
}

fn hover_identity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let pp = PowerParams {
            blade_profile: rng.gen_range(1.0..500.0),
            induced: rng.gen_range(1.0..500.0),
            tip_speed: rng.gen_range(50.0..300.0),
            hover_velocity: rng.gen_range(1.0..15.0),
            drag_ratio: rng.gen_range(0.1..2.0),
            rotor_solidity: rng.gen_range(0.01..0.2),
            disc_area: rng.gen_range(0.1..2.0),
            air_density: rng.gen_range(0.5..1.5),
        };
        let expected = pp.blade_profile + pp.induced;
        let got = propulsion_power(0.0, &pp).unwrap();
        worst = worst.max((got - expected).abs() / expected);
    }
    verdict(worst <= 1e-12, format!("max relative error {worst:.2e} over 100 parameter sets"))
}

fn gradient_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let worst = (0..50).map(|_| gradient_check(&mut rng)).fold(0.0, f64::max);
    verdict(worst < 1e-4, format!("max relative error {worst:.2e} over 50 networks"))
}

fn association_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ch = ChannelParams::default();
    let mut mismatches = 0;
    for _ in 0..500 {
        let (users, uavs) = random_instance(&mut rng);
        let map = associate(&users, &uavs, &ch).unwrap();
        let expected = brute_force_association(&users, &uavs, &ch);
        mismatches += map.serving.iter().zip(&expected).filter(|(a, b)| a != b).count();
    }
    verdict(mismatches == 0, format!("{mismatches} mismatched users over 500 instances"))
}

fn reward_table() -> Verdict {
    // (own prev, own now, neighbourhood prev, neighbourhood now, e prev, e now, expected)
    let cases: [(usize, usize, usize, usize, f64, f64, f64); 5] = [
        (5, 7, 10, 12, 168.0, 168.0, 2.0),
        (5, 5, 12, 10, 168.0, 168.0, -1.0),
        (7, 5, 10, 12, 300.0, 100.0, 0.5),
        (5, 5, 10, 12, 168.0, 168.0, 1.0),
        (7, 5, 12, 12, 168.0, 168.0, -2.0),
    ];
    let wrong: Vec<String> = cases
        .iter()
        .filter_map(|&(a, b, c, d, e0, e1, want)| {
            let got = shaped_reward(a, b, c, d, e0, e1);
            (got != want).then(|| format!("{a}->{b}, {c}->{d}: {got} != {want}"))
        })
        .collect();
    verdict(wrong.is_empty(), if wrong.is_empty() { "5 cases exact".to_string() } else { wrong.join("; ") })
}

fn double_q_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = 0;
    for seed in 0..100 {
        let c = double_q_check(&mut rng, seed);
        if !(c.targets_match && c.loss_matches && c.synced_match_max) {
            failures += 1;
        }
    }
    verdict(failures == 0, format!("{failures} failing batches of 100"))
}

fn constraint_suite() -> Verdict {
    let desk = desk_config().world;
    let tight = WorldConfig {
        energy_budget: 40_000.0,
        ..desk.clone()
    };
    let mut violations = Vec::new();
    let mut steps = 0;
    let mut deaths = 0;
    for (label, cfg) in [("desk", &desk), ("tight budget", &tight)] {
        for episode in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(600 + episode);
            let mut world = World::reset(cfg.clone(), &mut rng).unwrap();
            let mut alive = world.state().alive().to_vec();
            violations.extend(constraint_violations(&world, &alive).into_iter().map(|v| format!("{label} reset: {v}")));
            while !world.is_done() {
                let actions: Vec<Action> = (0..cfg.uav_count)
                    .map(|_| Action::from_index(random_action(&mut rng)).unwrap())
                    .collect();
                world.step(&actions).unwrap();
                steps += 1;
                violations.extend(
                    constraint_violations(&world, &alive)
                        .into_iter()
                        .map(|v| format!("{label} episode {episode} step {}: {v}", world.state().step)),
                );
                alive = world.state().alive().to_vec();
            }
            deaths += alive.iter().filter(|a| !**a).count();
        }
    }
    if deaths == 0 {
        violations.push("tight budget never exhausted a battery".into());
    }
    let shown: Vec<&String> = violations.iter().take(3).collect();
    verdict(
        violations.is_empty(),
        format!("{steps} steps checked, {deaths} depleted UAVs, {} violations {shown:?}", violations.len()),
    )
}

struct LearningRun {
    learned: RunSummary,
    random: RunSummary,
    episode_ee: Vec<f64>,
    elapsed: Duration,
}

fn train_and_evaluate(cfg: &ExperimentConfig, dir: &Path) -> LearningRun {
    let start = Instant::now();
    let run = run_training(cfg, &dir.join("train")).expect("training");
    let ckpt = dir.join("train/checkpoints/final");
    let learned = run_evaluation(cfg, Some(&ckpt), &dir.join("eval")).expect("evaluation").remove(0);
    let random_cfg = ExperimentConfig {
        policy: PolicyKind::Random,
        ..cfg.clone()
    };
    let random = run_evaluation(&random_cfg, Some(&ckpt), &dir.join("eval_random"))
        .expect("evaluation")
        .remove(0);
    LearningRun {
        learned,
        random,
        episode_ee: run.log.iter().map(|r| r.energy_efficiency).collect(),
        elapsed: start.elapsed(),
    }
}

fn learning_gain(run: &LearningRun) -> Verdict {
    let ratio = run.learned.mean_ee / run.random.mean_ee;
    verdict(
        ratio >= 1.3,
        format!(
            "learned/random mean EE = {ratio:.3} over {} trials (bar 1.3); training and evaluation took {:.0?}",
            run.learned.trials, run.elapsed
        ),
    )
}

fn convergence(run: &LearningRun) -> Verdict {
    let ee = &run.episode_ee;
    if ee.len() < 29 {
        return verdict(false, format!("only {} episodes logged", ee.len()));
    }
    let averages: Vec<f64> = (9..ee.len()).map(|i| ee[i - 9..=i].iter().sum::<f64>() / 10.0).collect();
    let tail = &averages[averages.len() - 20..];
    let last = *tail.last().unwrap();
    let spread = tail.iter().map(|m| (m - last).abs() / last).fold(0.0, f64::max);
    let ratios: Vec<String> = tail.iter().map(|m| format!("{:.2}", m / last)).collect();
    verdict(
        spread < 0.10,
        format!(
            "10-episode moving average over the final 20 episodes deviates up to {:.1}% from its final value (bar 10%); ratios [{}]",
            spread * 100.0,
            ratios.join(" ")
        ),
    )
}

fn fleet_trend(root: &Path) -> Verdict {
    let start = Instant::now();
    let mut energies = Vec::new();
    for n in [2usize, 4, 6] {
        let mut cfg = desk_config();
        cfg.world.uav_count = n;
        let dir = fresh_dir(&root.join(format!("fleet_{n}")));
        run_training(&cfg, &dir.join("train")).expect("training");
        let summary = run_evaluation(&cfg, Some(&dir.join("train/checkpoints/final")), &dir.join("eval"))
            .expect("evaluation")
            .remove(0);
        energies.push((n, summary.mean_total_energy_j));
    }
    let monotone = energies.windows(2).all(|w| w[1].1 >= w[0].1);
    let shown: Vec<String> = energies.iter().map(|(n, e)| format!("{n} UAVs {:.0} J", e)).collect();
    within(
        start.elapsed(),
        Duration::from_secs(90 * 60),
        verdict(monotone, format!("mean total energy: {} in {:.0?}", shown.join(", "), start.elapsed())),
    )
}

fn determinism(first: &Path, second: &Path) -> Verdict {
    let files = [
        "train/training_log.csv",
        "train/train_steps.csv",
        "eval/eval_steps.csv",
        "eval/eval_trials.csv",
        "eval/eval_summary.csv",
        "eval_random/eval_steps.csv",
        "eval_random/eval_trials.csv",
        "eval_random/eval_summary.csv",
    ];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| fs::read(first.join(f)).ok() != fs::read(second.join(f)).ok())
        .collect();
    verdict(
        differing.is_empty(),
        format!("{} metric CSVs compared, differing: {differing:?}", files.len()),
    )
}

fn timed(limit: Duration, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let v = f();
    let elapsed = start.elapsed();
    within(elapsed, limit, verdict(v.pass, format!("{} ({elapsed:.2?})", v.detail)))
}

fn main() -> ExitCode {
    let selected: Option<BTreeSet<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wants = |n: u32| selected.as_ref().is_none_or(|s| s.contains(&n));
    let root = artifacts();
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut report = |n: u32, name: &'static str, v: Verdict| {
        println!("{} criterion {n} ({name}): {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((n, name, v));
    };

    let secs = Duration::from_secs;
    if wants(1) {
        report(1, "hover identity", timed(secs(1), hover_identity));
    }
    if wants(2) {
        report(2, "gradient oracle", timed(secs(30), gradient_oracle));
    }
    if wants(3) {
        report(3, "association oracle", timed(secs(10), association_oracle));
    }
    if wants(4) {
        report(4, "reward table", timed(secs(1), reward_table));
    }
    if wants(5) {
        report(5, "double-Q target oracle", timed(secs(10), double_q_oracle));
    }
    if wants(6) {
        report(6, "constraint suite", timed(secs(60), constraint_suite));
    }
    if wants(7) || wants(8) || wants(10) {
        let cfg = desk_config();
        let first_dir = fresh_dir(&root.join("desk_a"));
        let first = train_and_evaluate(&cfg, &first_dir);
        if wants(7) {
            report(7, "desk-scale learning gain", learning_gain(&first));
        }
        if wants(8) {
            report(8, "convergence shape", convergence(&first));
        }
        if wants(10) {
            let second_dir = fresh_dir(&root.join("desk_b"));
            train_and_evaluate(&cfg, &second_dir);
            report(10, "determinism", determinism(&first_dir, &second_dir));
        }
    }
    if wants(9) {
        report(9, "fleet-size energy trend", fleet_trend(&root));
    }

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!("; failed {failed:?}") }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
