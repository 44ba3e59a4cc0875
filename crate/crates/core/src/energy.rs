//! Rotary-wing propulsion power, per-UAV energy accounting and system
//! energy efficiency. Communication energy is neglected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("speed must be finite and non-negative, got {0}")]
    NegativeSpeed(f64),
    #[error("UAV {0} is out of energy and cannot accumulate more")]
    DeadUav(usize),
    #[error("UAV index {index} out of range for {count} UAVs")]
    InvalidUav { index: usize, count: usize },
    #[error("total step energy must be positive, got {0}")]
    ZeroEnergy(f64),
    #[error("invalid power parameter `{name}` = {value}")]
    InvalidParam { name: &'static str, value: f64 },
}

/// Rotary-wing propulsion constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerParams {
    /// Blade profile power in hover (W).
    pub blade_profile: f64,
    /// Induced power in hover (W).
    pub induced: f64,
    /// Rotor blade tip speed (m/s).
    pub tip_speed: f64,
    /// Mean rotor induced velocity in hover (m/s).
    pub hover_velocity: f64,
    pub drag_ratio: f64,
    pub rotor_solidity: f64,
    /// Rotor disc area (m^2).
    pub disc_area: f64,
    /// Air density (kg/m^3).
    pub air_density: f64,
}

impl Default for PowerParams {
    fn default() -> Self {
        Self {
            blade_profile: 79.86,
            induced: 88.63,
            tip_speed: 120.0,
            hover_velocity: 4.03,
            drag_ratio: 0.6,
            rotor_solidity: 0.05,
            disc_area: 0.503,
            air_density: 1.225,
        }
    }
}

impl PowerParams {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let fields = [
            ("blade_profile", self.blade_profile),
            ("induced", self.induced),
            ("tip_speed", self.tip_speed),
            ("hover_velocity", self.hover_velocity),
            ("drag_ratio", self.drag_ratio),
            ("rotor_solidity", self.rotor_solidity),
            ("disc_area", self.disc_area),
            ("air_density", self.air_density),
        ];
        match fields.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            Some(&(name, value)) => Err(EnergyError::InvalidParam { name, value }),
            None => Ok(()),
        }
    }

    pub fn hover_power(&self) -> f64 {
        self.blade_profile + self.induced
    }

    /// Coefficient of the cubic parasite term, `rho/2 * nu * s * A`.
    pub fn parasite_coefficient(&self) -> f64 {
        0.5 * self.air_density * self.drag_ratio * self.rotor_solidity * self.disc_area
    }
}

/// Propulsion power (W) at forward speed `speed` (m/s).
pub fn propulsion_power(speed: f64, pp: &PowerParams) -> Result<f64, EnergyError> {
    if !(speed.is_finite() && speed >= 0.0) {
        return Err(EnergyError::NegativeSpeed(speed));
    }
    let v2 = speed * speed;
    let v0_2 = pp.hover_velocity * pp.hover_velocity;
    let blade = pp.blade_profile * (1.0 + 3.0 * v2 / (pp.tip_speed * pp.tip_speed));
    let induced = pp.induced * ((1.0 + v2 * v2 / (4.0 * v0_2 * v0_2)).sqrt() + v2 / (2.0 * v0_2)).sqrt();
    let parasite = pp.parasite_coefficient() * v2 * speed;
    Ok(blade + induced + parasite)
}

/// Per-UAV energy bookkeeping over an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    cumulative: Vec<f64>,
    last_step: Vec<f64>,
    alive: Vec<bool>,
    budget: f64,
    step_duration: f64,
}

impl EnergyLedger {
    pub fn new(uavs: usize, budget: f64, step_duration: f64) -> Self {
        Self {
            cumulative: vec![0.0; uavs],
            last_step: vec![0.0; uavs],
            alive: vec![true; uavs],
            budget,
            step_duration,
        }
    }

    /// Adds `power * step_duration` to UAV `uav` and returns that step energy.
    /// The UAV is marked dead once its cumulative energy exceeds the budget.
    pub fn accumulate(&mut self, uav: usize, power: f64) -> Result<f64, EnergyError> {
        let count = self.alive.len();
        let alive = self
            .alive
            .get(uav)
            .copied()
            .ok_or(EnergyError::InvalidUav { index: uav, count })?;
        if !alive {
            return Err(EnergyError::DeadUav(uav));
        }
        let energy = power * self.step_duration;
        self.last_step[uav] = energy;
        self.cumulative[uav] += energy;
        if self.cumulative[uav] > self.budget {
            self.alive[uav] = false;
        }
        Ok(energy)
    }

    /// Marks the start of a new step: energies of UAVs that do not fly this
    /// step read as zero.
    pub fn clear_step(&mut self) {
        self.last_step.iter_mut().for_each(|e| *e = 0.0);
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn last_step(&self) -> &[f64] {
        &self.last_step
    }

    pub fn alive(&self) -> &[bool] {
        &self.alive
    }

    pub fn is_alive(&self, uav: usize) -> bool {
        self.alive[uav]
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn step_duration(&self) -> f64 {
        self.step_duration
    }

    /// Fraction of the budget still available, clamped to `[0, 1]`.
    pub fn remaining_fraction(&self, uav: usize) -> f64 {
        (1.0 - self.cumulative[uav] / self.budget).clamp(0.0, 1.0)
    }
}

/// System energy efficiency: total throughput over total step energy.
pub fn energy_efficiency(total_rate: f64, step_energies: &[f64]) -> Result<f64, EnergyError> {
    let total: f64 = step_energies.iter().sum();
    if !(total > 0.0) {
        return Err(EnergyError::ZeroEnergy(total));
    }
    Ok(total_rate / total)
}
