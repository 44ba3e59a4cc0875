//! Gauss-Markov mobility for ground users.
//!
//! Speed and heading follow first-order autoregressive recursions pulled
//! toward a per-user mean, with tunable memory `alpha`. Users bounce off the
//! area edges by specular reflection of position and heading.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on ground-user speed (m/s).
pub const MAX_USER_SPEED: f64 = 15.0;

#[derive(Debug, Error, PartialEq)]
pub enum MobilityError {
    #[error("gmm_step called on a static user")]
    StaticUser,
    #[error("invalid mobility parameter `{name}` = {value}")]
    InvalidParam { name: &'static str, value: f64 },
}

/// Axis-aligned rectangle in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Area {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmParams {
    pub memory: f64,
    pub mean_speed: f64,
    pub speed_noise_std: f64,
    pub heading_noise_std: f64,
    /// Set from the world's step duration, not read from config files.
    #[serde(skip)]
    pub step_duration: f64,
}

impl Default for GmmParams {
    fn default() -> Self {
        Self {
            memory: 0.85,
            mean_speed: 5.0,
            speed_noise_std: 1.5,
            heading_noise_std: 0.3,
            step_duration: 1.0,
        }
    }
}

impl GmmParams {
    pub fn validate(&self) -> Result<(), MobilityError> {
        let bad = |name, value| Err(MobilityError::InvalidParam { name, value });
        if !(0.0..=1.0).contains(&self.memory) {
            return bad("memory", self.memory);
        }
        if !(0.0..=MAX_USER_SPEED).contains(&self.mean_speed) {
            return bad("mean_speed", self.mean_speed);
        }
        if !(self.speed_noise_std >= 0.0 && self.speed_noise_std.is_finite()) {
            return bad("speed_noise_std", self.speed_noise_std);
        }
        if !(self.heading_noise_std >= 0.0 && self.heading_noise_std.is_finite()) {
            return bad("heading_noise_std", self.heading_noise_std);
        }
        if !(self.step_duration > 0.0 && self.step_duration.is_finite()) {
            return bad("step_duration", self.step_duration);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    /// Current heading in `[0, 2pi)`.
    pub heading: f64,
    /// Heading the recursion is pulled toward.
    pub mean_heading: f64,
    pub mobile: bool,
}

impl UserState {
    pub fn fixed(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            speed: 0.0,
            heading: 0.0,
            mean_heading: 0.0,
            mobile: false,
        }
    }

    /// Uniform position in `area`; mobile users also draw a uniform initial
    /// speed in `[0, 15]` and heading in `[0, 2pi)`.
    pub fn random<R: Rng + ?Sized>(area: &Area, mobile: bool, rng: &mut R) -> Self {
        let x = rng.gen_range(area.x_min..=area.x_max);
        let y = rng.gen_range(area.y_min..=area.y_max);
        if !mobile {
            return Self::fixed(x, y);
        }
        let speed = rng.gen_range(0.0..=MAX_USER_SPEED);
        let heading = rng.gen_range(0.0..TAU);
        Self {
            x,
            y,
            speed,
            heading,
            mean_heading: heading,
            mobile,
        }
    }
}

fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Representative of `target` (mod 2pi) closest to `reference`.
fn nearest_branch(target: f64, reference: f64) -> f64 {
    let mut t = target;
    while t - reference > PI {
        t -= TAU;
    }
    while reference - t > PI {
        t += TAU;
    }
    t
}

/// Reflects `pos` into `[lo, hi]`; returns the folded position and whether
/// the direction of travel along this axis flipped.
fn reflect(mut pos: f64, lo: f64, hi: f64) -> (f64, bool) {
    let span = hi - lo;
    if span <= 0.0 {
        return (lo, false);
    }
    let mut flipped = false;
    while pos < lo || pos > hi {
        if pos < lo {
            pos = 2.0 * lo - pos;
        } else {
            pos = 2.0 * hi - pos;
        }
        flipped = !flipped;
    }
    (pos.clamp(lo, hi), flipped)
}

/// One Gauss-Markov update. Position advances with the pre-update speed and
/// heading; the new speed is clamped to `[0, 15]` m/s.
pub fn gmm_step<R: Rng + ?Sized>(
    user: &UserState,
    params: &GmmParams,
    rng: &mut R,
    area: &Area,
) -> Result<UserState, MobilityError> {
    if !user.mobile {
        return Err(MobilityError::StaticUser);
    }
    let a = params.memory;
    let innovation = (1.0 - a * a).max(0.0).sqrt();
    let speed_noise: f64 = StandardNormal.sample(rng);
    let heading_noise: f64 = StandardNormal.sample(rng);

    let speed = (a * user.speed
        + (1.0 - a) * params.mean_speed
        + innovation * params.speed_noise_std * speed_noise)
        .clamp(0.0, MAX_USER_SPEED);
    let mean = nearest_branch(user.mean_heading, user.heading);
    let mut heading = a * user.heading + (1.0 - a) * mean + innovation * params.heading_noise_std * heading_noise;
    let mut mean_heading = user.mean_heading;

    let travel = user.speed * params.step_duration;
    let (x, flip_x) = reflect(user.x + travel * user.heading.cos(), area.x_min, area.x_max);
    let (y, flip_y) = reflect(user.y + travel * user.heading.sin(), area.y_min, area.y_max);
    if flip_x {
        heading = PI - heading;
        mean_heading = PI - mean_heading;
    }
    if flip_y {
        heading = -heading;
        mean_heading = -mean_heading;
    }

    Ok(UserState {
        x,
        y,
        speed,
        heading: wrap_angle(heading),
        mean_heading: wrap_angle(mean_heading),
        mobile: true,
    })
}
