//! Downlink SINR, strongest-server association, Shannon rates and
//! per-UAV connectivity scores.
//!
//! The channel is line-of-sight with distance-power path loss. Every
//! transmitting UAV other than the serving one interferes, since all cells
//! share one band.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;

#[derive(Debug, Error, PartialEq)]
pub enum RadioError {
    #[error("user {user} coincides with UAV {uav}; SINR undefined at zero distance")]
    CoincidentPosition { user: usize, uav: usize },
    #[error("serving UAV index {index} out of range for {count} UAVs")]
    InvalidServer { index: usize, count: usize },
    #[error("association needs at least one UAV")]
    NoUavs,
    #[error("active mask has {mask} entries for {uavs} UAVs")]
    MaskLength { mask: usize, uavs: usize },
    #[error("invalid channel parameter `{name}` = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) * 1e-3
}

/// Radio constants. All power quantities are linear watts, the SINR
/// threshold is a linear ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub attenuation: f64,
    pub pathloss_exponent: f64,
    pub tx_power_w: f64,
    pub noise_power_w: f64,
    pub bandwidth_hz: f64,
    pub sinr_threshold: f64,
}

impl Default for ChannelParams {
    /// 20 dBm transmit power, -130 dBm noise, 5 dB threshold, 1 MHz, exponent 2.
    fn default() -> Self {
        Self {
            attenuation: 1.0,
            pathloss_exponent: 2.0,
            tx_power_w: dbm_to_watts(20.0),
            noise_power_w: dbm_to_watts(-130.0),
            bandwidth_hz: 1e6,
            sinr_threshold: db_to_linear(5.0),
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), RadioError> {
        let fields = [
            ("attenuation", self.attenuation),
            ("pathloss_exponent", self.pathloss_exponent),
            ("tx_power_w", self.tx_power_w),
            ("noise_power_w", self.noise_power_w),
            ("bandwidth_hz", self.bandwidth_hz),
            ("sinr_threshold", self.sinr_threshold),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(RadioError::InvalidParam {
                    name,
                    value,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        if self.pathloss_exponent < 1.0 {
            return Err(RadioError::InvalidParam {
                name: "pathloss_exponent",
                value: self.pathloss_exponent,
                reason: "must be at least 1",
            });
        }
        Ok(())
    }

    /// Received power `beta * P * d^-alpha` at distance `d`.
    pub fn received_power(&self, distance: f64) -> f64 {
        self.attenuation * self.tx_power_w * distance.powf(-self.pathloss_exponent)
    }

    pub fn shannon_rate(&self, sinr: f64) -> f64 {
        self.bandwidth_hz * (1.0 + sinr).log2()
    }
}

fn checked_distance(user: &Point3, uav: &Point3, user_idx: usize, uav_idx: usize) -> Result<f64, RadioError> {
    let d = user.distance(uav);
    if d > 0.0 {
        Ok(d)
    } else {
        Err(RadioError::CoincidentPosition {
            user: user_idx,
            uav: uav_idx,
        })
    }
}

/// SINR of `user` when served by `uavs[serving]`, with every other UAV interfering.
pub fn sinr(user: &Point3, serving: usize, uavs: &[Point3], ch: &ChannelParams) -> Result<f64, RadioError> {
    sinr_among(user, 0, serving, uavs, None, ch)
}

fn sinr_among(
    user: &Point3,
    user_idx: usize,
    serving: usize,
    uavs: &[Point3],
    active: Option<&[bool]>,
    ch: &ChannelParams,
) -> Result<f64, RadioError> {
    if serving >= uavs.len() {
        return Err(RadioError::InvalidServer {
            index: serving,
            count: uavs.len(),
        });
    }
    let signal = ch.received_power(checked_distance(user, &uavs[serving], user_idx, serving)?);
    let mut interference = 0.0;
    for (z, uav) in uavs.iter().enumerate() {
        if z == serving || active.is_some_and(|m| !m[z]) {
            continue;
        }
        interference += ch.received_power(checked_distance(user, uav, user_idx, z)?);
    }
    Ok(signal / (interference + ch.noise_power_w))
}

/// Per-user association outcome for one time step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssociationMap {
    /// Serving UAV per user, `None` when in outage.
    pub serving: Vec<Option<usize>>,
    /// Best SINR over all transmitting UAVs (the achieved SINR when served).
    pub sinr: Vec<f64>,
    /// Downlink rate in bit/s; zero exactly when unassociated.
    pub rate: Vec<f64>,
    /// Connectivity score per UAV.
    pub scores: Vec<usize>,
}

impl AssociationMap {
    pub fn user_count(&self) -> usize {
        self.serving.len()
    }

    pub fn outage(&self) -> usize {
        self.serving.iter().filter(|s| s.is_none()).count()
    }

    pub fn connected(&self) -> usize {
        self.user_count() - self.outage()
    }

    pub fn throughput(&self) -> f64 {
        self.rate.iter().sum()
    }
}

/// Associates every user to its strongest-SINR UAV when that SINR exceeds
/// the threshold. Ties go to the lowest UAV index.
pub fn associate(users: &[Point3], uavs: &[Point3], ch: &ChannelParams) -> Result<AssociationMap, RadioError> {
    associate_active(users, uavs, None, ch)
}

/// Like [`associate`], but UAVs with `active[j] == false` neither serve nor
/// interfere.
pub fn associate_active(
    users: &[Point3],
    uavs: &[Point3],
    active: Option<&[bool]>,
    ch: &ChannelParams,
) -> Result<AssociationMap, RadioError> {
    if uavs.is_empty() {
        return Err(RadioError::NoUavs);
    }
    if let Some(mask) = active {
        if mask.len() != uavs.len() {
            return Err(RadioError::MaskLength {
                mask: mask.len(),
                uavs: uavs.len(),
            });
        }
    }
    let mut map = AssociationMap {
        serving: Vec::with_capacity(users.len()),
        sinr: Vec::with_capacity(users.len()),
        rate: Vec::with_capacity(users.len()),
        scores: vec![0; uavs.len()],
    };
    for (i, user) in users.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..uavs.len() {
            if active.is_some_and(|m| !m[j]) {
                continue;
            }
            let g = sinr_among(user, i, j, uavs, active, ch)?;
            if best.is_none_or(|(_, b)| g > b) {
                best = Some((j, g));
            }
        }
        match best {
            Some((j, g)) if g > ch.sinr_threshold => {
                map.serving.push(Some(j));
                map.sinr.push(g);
                map.rate.push(ch.shannon_rate(g));
                map.scores[j] += 1;
            }
            other => {
                map.serving.push(None);
                map.sinr.push(other.map_or(0.0, |(_, g)| g));
                map.rate.push(0.0);
            }
        }
    }
    Ok(map)
}

/// Total delivered throughput in bit/s.
pub fn system_throughput(assoc: &AssociationMap) -> f64 {
    assoc.throughput()
}
