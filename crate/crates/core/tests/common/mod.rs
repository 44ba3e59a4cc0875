//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;

use uavnet::agent::{AgentConfig, DdqnAgent, Transition};
use uavnet::geometry::Point3;
use uavnet::neural::{Mlp, QNetwork};
use uavnet::radio::ChannelParams;
use uavnet::world::{World, WorldConfig, OBS_DIM};

/// Strongest-SINR server per user, computed from scratch: every candidate's
/// SINR is evaluated, the best value found, then the first UAV reaching it.
pub fn brute_force_association(users: &[Point3], uavs: &[Point3], ch: &ChannelParams) -> Vec<Option<usize>> {
    users
        .iter()
        .map(|u| {
            let power: Vec<f64> = uavs
                .iter()
                .map(|v| {
                    let d = ((u.x - v.x).powi(2) + (u.y - v.y).powi(2) + (u.z - v.z).powi(2)).sqrt();
                    ch.attenuation * ch.tx_power_w / d.powf(ch.pathloss_exponent)
                })
                .collect();
            let sinr: Vec<f64> = (0..uavs.len())
                .map(|j| {
                    let interference: f64 = (0..uavs.len()).filter(|&z| z != j).map(|z| power[z]).sum();
                    power[j] / (interference + ch.noise_power_w)
                })
                .collect();
            let best = sinr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let first = sinr.iter().position(|&g| g == best)?;
            (best > ch.sinr_threshold).then_some(first)
        })
        .collect()
}

/// Random association instance: 1-5 UAVs and 1-20 ground users.
pub fn random_instance<R: Rng>(rng: &mut R) -> (Vec<Point3>, Vec<Point3>) {
    let side = if rng.gen_bool(0.5) { 300.0 } else { 1000.0 };
    let uavs = (0..rng.gen_range(1..=5))
        .map(|_| Point3::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side), rng.gen_range(50.0..200.0)))
        .collect();
    let users = (0..rng.gen_range(1..=20))
        .map(|_| Point3::ground(rng.gen_range(0.0..side), rng.gen_range(0.0..side)))
        .collect();
    (users, uavs)
}

/// Largest relative difference between backprop gradients and central
/// finite differences of the loss, for one random network and batch.
pub fn gradient_check<R: Rng>(rng: &mut R) -> f64 {
    let mut sizes = vec![rng.gen_range(1..=5)];
    for _ in 0..rng.gen_range(1..=2) {
        sizes.push(rng.gen_range(2..=6));
    }
    sizes.push(rng.gen_range(1..=4));
    let mut net = Mlp::new(&sizes, rng);
    // non-zero biases so every parameter is exercised
    for layer in net.layers_mut() {
        layer.bias.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
    }
    let rows = rng.gen_range(1..=6);
    let batch = Array2::from_shape_fn((rows, sizes[0]), |_| rng.gen_range(-1.0..1.0));
    let targets: Vec<f64> = (0..rows).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let actions: Vec<usize> = (0..rows).map(|_| rng.gen_range(0..*sizes.last().unwrap())).collect();

    let (_, grads) = net.loss_and_gradients(batch.view(), &targets, &actions).unwrap();
    let analytic: Vec<f64> = grads.iter().flat_map(|g| g.weights.iter().chain(g.bias.iter()).cloned().collect::<Vec<_>>()).collect();

    let loss_at = |net: &Mlp| {
        let out = net.forward(batch.view()).unwrap();
        actions
            .iter()
            .zip(&targets)
            .enumerate()
            .map(|(i, (&a, &y))| (out[[i, a]] - y).powi(2))
            .sum::<f64>()
            / rows as f64
    };
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (k, &a) in analytic.iter().enumerate() {
        let mut plus = net.clone();
        *plus.params_mut().nth(k).unwrap() += h;
        let mut minus = net.clone();
        *minus.params_mut().nth(k).unwrap() -= h;
        let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
        let scale = a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((a - numeric).abs() / scale);
    }
    worst
}

pub fn random_observation<R: Rng>(rng: &mut R) -> [f64; OBS_DIM] {
    std::array::from_fn(|_| rng.gen_range(0.0..1.0))
}

pub fn random_transition<R: Rng>(rng: &mut R) -> Transition {
    Transition {
        state: random_observation(rng),
        action: rng.gen_range(0..7),
        reward: rng.gen_range(-3.0..3.0),
        next_state: random_observation(rng),
        terminal: rng.gen_bool(0.2),
    }
}

fn argmax_first(q: &[f64]) -> usize {
    let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    q.iter().position(|&v| v == best).unwrap()
}

/// Double-Q target of one transition, one observation at a time.
pub fn oracle_target(main: &QNetwork, target: &QNetwork, t: &Transition, discount: f64) -> f64 {
    if t.terminal {
        return t.reward;
    }
    let pick = argmax_first(&main.forward_one(&t.next_state).unwrap());
    t.reward + discount * target.forward_one(&t.next_state).unwrap()[pick]
}

/// Plain max-Q target under a single network.
pub fn oracle_max_target(net: &QNetwork, t: &Transition, discount: f64) -> f64 {
    if t.terminal {
        return t.reward;
    }
    let q = net.forward_one(&t.next_state).unwrap();
    t.reward + discount * q.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Outcome of one double-Q oracle trial.
pub struct DoubleQCheck {
    pub targets_match: bool,
    pub loss_matches: bool,
    pub synced_match_max: bool,
}

/// Fills an agent's memory with exactly one batch, so the sampled batch is
/// the whole memory, then compares targets and the training loss against
/// the per-transition oracle. After a manual sync, double-Q targets must
/// equal plain max targets.
pub fn double_q_check<R: Rng>(rng: &mut R, seed: u64) -> DoubleQCheck {
    let cfg = AgentConfig {
        batch_size: 32,
        memory_capacity: 32,
        ..AgentConfig::default()
    };
    let mut agent = DdqnAgent::new(cfg.clone(), seed).unwrap();
    let target = Mlp::q_network(rng);
    agent.set_target(target.clone()).unwrap();
    let batch: Vec<Transition> = (0..cfg.batch_size).map(|_| random_transition(rng)).collect();
    for t in &batch {
        agent.remember(*t);
    }
    let main = agent.main().clone();

    let expected: Vec<f64> = batch.iter().map(|t| oracle_target(&main, &target, t, cfg.discount)).collect();
    let got = agent.targets(&batch).unwrap();
    let targets_match = expected.iter().zip(&got).all(|(e, g)| close(*e, *g, 1e-12));

    let oracle_loss = batch
        .iter()
        .zip(&expected)
        .map(|(t, y)| (main.forward_one(&t.state).unwrap()[t.action] - y).powi(2))
        .sum::<f64>()
        / batch.len() as f64;
    let loss = agent.ddqn_update().unwrap().expect("memory holds a full batch");
    let loss_matches = close(loss, oracle_loss, 1e-10);

    let updated = agent.main().clone();
    agent.set_target(updated.clone()).unwrap();
    let synced = agent.targets(&batch).unwrap();
    let synced_match_max = batch
        .iter()
        .zip(&synced)
        .all(|(t, g)| close(oracle_max_target(&updated, t, cfg.discount), *g, 1e-12));

    DoubleQCheck {
        targets_match,
        loss_matches,
        synced_match_max,
    }
}

/// Every constraint violation in the current world state.
pub fn constraint_violations(world: &World, was_alive: &[bool]) -> Vec<String> {
    let cfg: &WorldConfig = world.config();
    let s = world.state();
    let mut bad = Vec::new();
    for (j, p) in s.uav_positions.iter().enumerate() {
        if !(cfg.x_min <= p.x && p.x <= cfg.x_max && cfg.y_min <= p.y && p.y <= cfg.y_max) {
            bad.push(format!("uav {j} outside the area at {p:?}"));
        }
        if !(cfg.h_min <= p.z && p.z <= cfg.h_max) {
            bad.push(format!("uav {j} altitude {} outside bounds", p.z));
        }
        let spent = s.ledger.cumulative()[j];
        let alive = s.ledger.is_alive(j);
        if alive && spent > cfg.energy_budget {
            bad.push(format!("uav {j} alive with {spent} J spent"));
        }
        if !alive && spent <= cfg.energy_budget {
            bad.push(format!("uav {j} dead with only {spent} J spent"));
        }
        if !was_alive[j] && (alive || s.step_energy[j] != 0.0) {
            bad.push(format!("uav {j} was dead but revived or spent energy"));
        }
    }
    let assoc = &s.association;
    let mut counts = vec![0usize; cfg.uav_count];
    for (i, serving) in assoc.serving.iter().enumerate() {
        if let Some(j) = *serving {
            counts[j] += 1;
            if !was_alive[j] {
                bad.push(format!("user {i} served by dead uav {j}"));
            }
            if assoc.sinr[i] <= cfg.channel.sinr_threshold {
                bad.push(format!("user {i} served below the SINR threshold"));
            }
        } else if assoc.rate[i] != 0.0 {
            bad.push(format!("user {i} in outage with non-zero rate"));
        }
    }
    if counts != s.scores {
        bad.push(format!("scores {:?} disagree with association counts {counts:?}", s.scores));
    }
    if s.scores.iter().sum::<usize>() + assoc.outage() != cfg.user_count() {
        bad.push("connected plus outage differs from the user count".into());
    }
    bad
}
