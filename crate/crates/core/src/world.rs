//! The shared multi-UAV environment.
//!
//! A step applies every UAV's move, advances mobile users, re-associates
//! users, charges propulsion energy from the realized speeds, then shapes
//! each agent's reward from its own connectivity change, its energy trend
//! and the connectivity trend of its broadcast neighbourhood.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::energy::{energy_efficiency, propulsion_power, EnergyError, EnergyLedger, PowerParams};
use crate::geometry::Point3;
use crate::mobility::{gmm_step, Area, GmmParams, MobilityError, UserState};
use crate::radio::{associate_active, AssociationMap, ChannelParams, RadioError};

pub const ACTION_COUNT: usize = 7;
pub const OBS_DIM: usize = 5;

/// Largest per-axis step a UAV may take in one time step (m).
pub const MAX_STEP_DISTANCE: f64 = 20.0;

pub type Observation = [f64; OBS_DIM];

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid world configuration: {0}")]
    Config(String),
    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("episode already finished at step {0}")]
    EpisodeDone(usize),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
}

/// The seven discrete moves, in their fixed index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
    Up,
    Down,
    Hover,
}

impl Action {
    pub const ALL: [Action; ACTION_COUNT] = [
        Action::PlusX,
        Action::MinusX,
        Action::PlusY,
        Action::MinusY,
        Action::Up,
        Action::Down,
        Action::Hover,
    ];

    pub fn from_index(index: usize) -> Option<Action> {
        Self::ALL.get(index).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn displacement(self, cfg: &WorldConfig) -> (f64, f64, f64) {
        match self {
            Action::PlusX => (cfg.step_x, 0.0, 0.0),
            Action::MinusX => (-cfg.step_x, 0.0, 0.0),
            Action::PlusY => (0.0, cfg.step_y, 0.0),
            Action::MinusY => (0.0, -cfg.step_y, 0.0),
            Action::Up => (0.0, 0.0, cfg.step_z),
            Action::Down => (0.0, 0.0, -cfg.step_z),
            Action::Hover => (0.0, 0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub step_x: f64,
    pub step_y: f64,
    pub step_z: f64,
    pub uav_count: usize,
    pub static_users: usize,
    pub mobile_users: usize,
    pub neighbourhood_radius: f64,
    pub step_duration: f64,
    pub max_steps: usize,
    /// Per-UAV energy budget (J).
    pub energy_budget: f64,
    pub channel: ChannelParams,
    pub power: PowerParams,
    pub mobility: GmmParams,
}

/// 16,000 mAh at a 22.2 V nominal pack voltage.
pub const DEFAULT_ENERGY_BUDGET: f64 = 16.0 * 22.2 * 3600.0;

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: 1000.0,
            y_min: 0.0,
            y_max: 1000.0,
            h_min: 50.0,
            h_max: 200.0,
            step_x: 20.0,
            step_y: 20.0,
            step_z: 20.0,
            uav_count: 12,
            static_users: 200,
            mobile_users: 200,
            neighbourhood_radius: 300.0,
            step_duration: 1.0,
            max_steps: 1500,
            energy_budget: DEFAULT_ENERGY_BUDGET,
            channel: ChannelParams::default(),
            power: PowerParams::default(),
            mobility: GmmParams::default(),
        }
    }
}

impl WorldConfig {
    pub fn area(&self) -> Area {
        Area {
            x_min: self.x_min,
            x_max: self.x_max,
            y_min: self.y_min,
            y_max: self.y_max,
        }
    }

    pub fn user_count(&self) -> usize {
        self.static_users + self.mobile_users
    }

    /// Mobility parameters with the world's step duration.
    pub fn gmm(&self) -> GmmParams {
        GmmParams {
            step_duration: self.step_duration,
            ..self.mobility
        }
    }

    pub fn in_bounds(&self, p: &Point3) -> bool {
        (self.x_min..=self.x_max).contains(&p.x)
            && (self.y_min..=self.y_max).contains(&p.y)
            && (self.h_min..=self.h_max).contains(&p.z)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let err = |msg: String| Err(WorldError::Config(msg));
        if self.uav_count == 0 {
            return err("at least one UAV is required".into());
        }
        if self.user_count() == 0 {
            return err("at least one ground user is required".into());
        }
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return err("area bounds must satisfy min < max".into());
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h_max) {
            return err(format!(
                "altitude bounds must satisfy 0 < h_min <= h_max, got [{}, {}]",
                self.h_min, self.h_max
            ));
        }
        for (name, d) in [("step_x", self.step_x), ("step_y", self.step_y), ("step_z", self.step_z)] {
            if !(0.0..=MAX_STEP_DISTANCE).contains(&d) {
                return err(format!("{name} = {d} outside [0, {MAX_STEP_DISTANCE}] m"));
            }
        }
        if !(self.step_duration > 0.0) {
            return err("step_duration must be positive".into());
        }
        if !(self.neighbourhood_radius >= 0.0) {
            return err("neighbourhood_radius must be non-negative".into());
        }
        if self.max_steps == 0 {
            return err("max_steps must be at least 1".into());
        }
        if !(self.energy_budget > 0.0) {
            return err("energy_budget must be positive".into());
        }
        self.channel.validate()?;
        self.power.validate()?;
        self.gmm().validate()?;
        Ok(())
    }
}

/// Single source of simulation truth for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub uav_positions: Vec<Point3>,
    pub ledger: EnergyLedger,
    pub users: Vec<UserState>,
    user_rngs: Vec<ChaCha8Rng>,
    pub association: AssociationMap,
    pub scores: Vec<usize>,
    pub prev_scores: Vec<usize>,
    pub neighbourhood_scores: Vec<usize>,
    pub prev_neighbourhood_scores: Vec<usize>,
    /// Energy each UAV spent in the latest step (J); hover energy right after reset.
    pub step_energy: Vec<f64>,
    pub prev_step_energy: Vec<f64>,
    pub step: usize,
}

impl WorldState {
    pub fn alive(&self) -> &[bool] {
        self.ledger.alive()
    }

    pub fn user_positions(&self) -> Vec<Point3> {
        self.users.iter().map(|u| Point3::ground(u.x, u.y)).collect()
    }
}

/// Summed connectivity score of every UAV within `radius` of `uav`, itself
/// included.
pub fn neighbourhood_score(state: &WorldState, uav: usize, radius: f64) -> usize {
    let centre = state.uav_positions[uav];
    state
        .uav_positions
        .iter()
        .zip(&state.scores)
        .filter(|(p, _)| centre.distance(p) <= radius)
        .map(|(_, s)| s)
        .sum()
}

/// Reward from its parts: neighbourhood factor (+1/-1), energy trend in
/// `(-1, 1)`, and own connectivity trend (+1/0/-1).
pub fn shaped_reward(
    own_prev: usize,
    own_now: usize,
    neighbourhood_prev: usize,
    neighbourhood_now: usize,
    energy_prev: f64,
    energy_now: f64,
) -> f64 {
    let cooperative = if neighbourhood_now > neighbourhood_prev { 1.0 } else { -1.0 };
    let energy_trend = (energy_prev - energy_now) / (energy_now + energy_prev);
    let own = match own_now.cmp(&own_prev) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Equal => 0.0,
        std::cmp::Ordering::Less => -1.0,
    };
    cooperative + energy_trend + own
}

/// Reward of `uav` for the transition `before -> after`.
pub fn compute_reward(uav: usize, before: &WorldState, after: &WorldState, radius: f64) -> f64 {
    shaped_reward(
        before.scores[uav],
        after.scores[uav],
        neighbourhood_score(before, uav, radius),
        neighbourhood_score(after, uav, radius),
        before.step_energy[uav],
        after.step_energy[uav],
    )
}

/// Where `action` would take `uav` and at what speed. Moves that would leave
/// the flight volume, and any move by a dead UAV, become hover.
pub fn apply_action(state: &WorldState, cfg: &WorldConfig, uav: usize, action: Action) -> (Point3, f64) {
    let here = state.uav_positions[uav];
    if !state.ledger.is_alive(uav) {
        return (here, 0.0);
    }
    let (dx, dy, dz) = action.displacement(cfg);
    let target = here.offset(dx, dy, dz);
    if !cfg.in_bounds(&target) {
        return (here, 0.0);
    }
    (target, here.distance(&target) / cfg.step_duration)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    /// Throughput over total step energy (bit/J).
    pub energy_efficiency: f64,
    pub throughput: f64,
    pub outage: usize,
    pub total_energy: f64,
    pub scores: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observations: Vec<Observation>,
    pub rewards: Vec<f64>,
    /// UAVs that were alive (and therefore acted) at the start of the step.
    pub acted: Vec<bool>,
    /// UAVs whose battery ran out during this step or earlier.
    pub terminal: Vec<bool>,
    pub done: bool,
    pub metrics: StepMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    cfg: WorldConfig,
    state: WorldState,
    done: bool,
}

impl World {
    /// Places UAVs and users uniformly at random and computes the initial
    /// association.
    pub fn reset<R: Rng + ?Sized>(cfg: WorldConfig, rng: &mut R) -> Result<World, WorldError> {
        cfg.validate()?;
        let uav_positions: Vec<Point3> = (0..cfg.uav_count)
            .map(|_| {
                Point3::new(
                    rng.gen_range(cfg.x_min..=cfg.x_max),
                    rng.gen_range(cfg.y_min..=cfg.y_max),
                    rng.gen_range(cfg.h_min..=cfg.h_max),
                )
            })
            .collect();
        let area = cfg.area();
        let mut users = Vec::with_capacity(cfg.user_count());
        let mut user_rngs = Vec::with_capacity(cfg.user_count());
        for i in 0..cfg.user_count() {
            users.push(UserState::random(&area, i >= cfg.static_users, rng));
            user_rngs.push(ChaCha8Rng::seed_from_u64(rng.gen()));
        }
        let ledger = EnergyLedger::new(cfg.uav_count, cfg.energy_budget, cfg.step_duration);
        let hover_energy = cfg.power.hover_power() * cfg.step_duration;

        let mut state = WorldState {
            uav_positions,
            ledger,
            users,
            user_rngs,
            association: AssociationMap::default(),
            scores: Vec::new(),
            prev_scores: Vec::new(),
            neighbourhood_scores: Vec::new(),
            prev_neighbourhood_scores: Vec::new(),
            step_energy: vec![hover_energy; cfg.uav_count],
            prev_step_energy: vec![hover_energy; cfg.uav_count],
            step: 0,
        };
        state.association = associate_active(&state.user_positions(), &state.uav_positions, None, &cfg.channel)?;
        state.scores = state.association.scores.clone();
        state.prev_scores = state.scores.clone();
        state.neighbourhood_scores = (0..cfg.uav_count)
            .map(|j| neighbourhood_score(&state, j, cfg.neighbourhood_radius))
            .collect();
        state.prev_neighbourhood_scores = state.neighbourhood_scores.clone();
        Ok(World {
            cfg,
            state,
            done: false,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn observe(&self, uav: usize) -> Observation {
        let cfg = &self.cfg;
        let p = self.state.uav_positions[uav];
        let h_span = cfg.h_max - cfg.h_min;
        let h = if h_span > 0.0 { (p.z - cfg.h_min) / h_span } else { 0.0 };
        [
            (p.x - cfg.x_min) / (cfg.x_max - cfg.x_min),
            (p.y - cfg.y_min) / (cfg.y_max - cfg.y_min),
            h,
            self.state.scores[uav] as f64 / cfg.user_count() as f64,
            self.state.ledger.remaining_fraction(uav),
        ]
    }

    pub fn observations(&self) -> Vec<Observation> {
        (0..self.cfg.uav_count).map(|j| self.observe(j)).collect()
    }

    /// Advances the world by one time step under the joint action.
    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome, WorldError> {
        if self.done {
            return Err(WorldError::EpisodeDone(self.state.step));
        }
        let n = self.cfg.uav_count;
        if actions.len() != n {
            return Err(WorldError::ActionCount {
                expected: n,
                got: actions.len(),
            });
        }
        let cfg = &self.cfg;
        let state = &mut self.state;
        let acted = state.alive().to_vec();

        let mut speeds = vec![0.0; n];
        for (j, &action) in actions.iter().enumerate() {
            let (pos, speed) = apply_action(state, cfg, j, action);
            state.uav_positions[j] = pos;
            speeds[j] = speed;
        }

        let area = cfg.area();
        let gmm = cfg.gmm();
        for (user, rng) in state.users.iter_mut().zip(state.user_rngs.iter_mut()) {
            if user.mobile {
                *user = gmm_step(user, &gmm, rng, &area)?;
            }
        }

        state.association = associate_active(&state.user_positions(), &state.uav_positions, Some(&acted), &cfg.channel)?;
        state.prev_scores = std::mem::replace(&mut state.scores, state.association.scores.clone());
        let neighbourhood: Vec<usize> = (0..n)
            .map(|j| neighbourhood_score(state, j, cfg.neighbourhood_radius))
            .collect();
        state.prev_neighbourhood_scores = std::mem::replace(&mut state.neighbourhood_scores, neighbourhood);

        state.ledger.clear_step();
        let mut energy = vec![0.0; n];
        for j in (0..n).filter(|&j| acted[j]) {
            energy[j] = state.ledger.accumulate(j, propulsion_power(speeds[j], &cfg.power)?)?;
        }
        state.prev_step_energy = std::mem::replace(&mut state.step_energy, energy);

        let rewards: Vec<f64> = (0..n)
            .map(|j| {
                if !acted[j] {
                    return 0.0;
                }
                shaped_reward(
                    state.prev_scores[j],
                    state.scores[j],
                    state.prev_neighbourhood_scores[j],
                    state.neighbourhood_scores[j],
                    state.prev_step_energy[j],
                    state.step_energy[j],
                )
            })
            .collect();

        let throughput = state.association.throughput();
        let metrics = StepMetrics {
            step: state.step,
            energy_efficiency: energy_efficiency(throughput, &state.step_energy)?,
            throughput,
            outage: state.association.outage(),
            total_energy: state.step_energy.iter().sum(),
            scores: state.scores.clone(),
        };

        state.step += 1;
        let terminal: Vec<bool> = state.alive().iter().map(|a| !a).collect();
        self.done = state.step >= cfg.max_steps || terminal.iter().all(|&t| t);

        Ok(StepOutcome {
            observations: self.observations(),
            rewards,
            acted,
            terminal,
            done: self.done,
            metrics,
        })
    }
}
