//! Planar dynamic bicycle model with linear, saturating tires.
//!
//! State lives in the body frame (`vx` forward, `vy` left, `yaw_rate`
//! counter-clockwise). Axle loads are static; the drivetrain is a single
//! capped drive force on the front (FF) or rear (FR) axle.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;

pub const GRAVITY: f64 = 9.81;

/// Longitudinal speed floor inside the tire slip-angle `atan2`.
pub const SLIP_VX_FLOOR: f64 = 0.5;

/// Below this speed the slip angle is defined as zero.
pub const SLIP_SPEED_EPS: f64 = 0.05;

/// Tire lateral force ramps in linearly up to this speed, m/s. A rolling
/// tire cannot push a stationary car sideways, and the ramp keeps the lateral
/// dynamics stable at the fixed frame time for every speed.
pub const LATERAL_FADE_SPEED: f64 = 2.0;

/// Front share of the brake force.
pub const BRAKE_FRONT_SHARE: f64 = 0.6;

/// Longest internal integration substep, s. A 1/60 s frame runs as 10.
pub const MAX_SUBSTEP: f64 = 1.0 / 600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layout {
    /// Front engine, front-wheel drive.
    FF,
    /// Front engine, rear-wheel drive.
    FR,
}

impl std::fmt::Display for Layout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Layout::FF => "FF",
            Layout::FR => "FR",
        })
    }
}

impl std::str::FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "FF" | "ff" => Ok(Layout::FF),
            "FR" | "fr" => Ok(Layout::FR),
            other => Err(format!("unknown layout `{other}` (expected FF or FR)")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid vehicle parameters: {0}")]
pub struct ParamsError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    pub layout: Layout,
    pub mass: f64,
    pub yaw_inertia: f64,
    pub lf: f64,
    pub lr: f64,
    pub cornering_stiffness_front: f64,
    pub cornering_stiffness_rear: f64,
    pub friction_coeff: f64,
    pub max_drive_force: f64,
    pub max_brake_force: f64,
    pub max_steer: f64,
    pub drag_coeff: f64,
    pub rolling_resist: f64,
    /// Normalization constant for the speed sensor.
    pub max_speed: f64,
    /// (length, width) of the collision rectangle.
    pub footprint: (f64, f64),
}

impl VehicleParams {
    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }

    /// Static (front, rear) axle normal loads.
    pub fn axle_loads(&self) -> (f64, f64) {
        let w = self.mass * GRAVITY / self.wheelbase();
        (w * self.lr, w * self.lf)
    }

    /// `K = (m / L) (lr / Cf - lf / Cr)`; positive understeers, negative
    /// oversteers.
    pub fn understeer_gradient(&self) -> f64 {
        self.mass / self.wheelbase()
            * (self.lr / self.cornering_stiffness_front - self.lf / self.cornering_stiffness_rear)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        let positive = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("lf", self.lf),
            ("lr", self.lr),
            ("cornering_stiffness_front", self.cornering_stiffness_front),
            ("cornering_stiffness_rear", self.cornering_stiffness_rear),
            ("friction_coeff", self.friction_coeff),
            ("max_drive_force", self.max_drive_force),
            ("max_brake_force", self.max_brake_force),
            ("max_steer", self.max_steer),
            ("drag_coeff", self.drag_coeff),
            ("rolling_resist", self.rolling_resist),
            ("max_speed", self.max_speed),
            ("footprint.length", self.footprint.0),
            ("footprint.width", self.footprint.1),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ParamsError(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.max_steer >= FRAC_PI_2 {
            return Err(ParamsError(format!(
                "max_steer must be below pi/2, got {}",
                self.max_steer
            )));
        }
        let (front, rear) = self.axle_loads();
        if !(front > 0.0 && rear > 0.0) {
            return Err(ParamsError("static axle loads must be positive".into()));
        }
        Ok(())
    }
}

/// Defaults tuned so FF understeers (`K > 0`) and FR oversteers (`K < 0`).
/// Drag and rolling resistance balance the full drive force at `max_speed`.
pub fn default_params(layout: Layout) -> VehicleParams {
    let shared = VehicleParams {
        layout,
        mass: 1200.0,
        yaw_inertia: 1900.0,
        lf: 1.0,
        lr: 1.6,
        cornering_stiffness_front: 70_000.0,
        cornering_stiffness_rear: 90_000.0,
        friction_coeff: 1.0,
        max_drive_force: 6000.0,
        max_brake_force: 9000.0,
        max_steer: 0.61,
        drag_coeff: 2.0,
        rolling_resist: 20.0,
        max_speed: 50.0,
        footprint: (4.5, 1.8),
    };
    match layout {
        Layout::FF => shared,
        Layout::FR => VehicleParams {
            mass: 1300.0,
            yaw_inertia: 2200.0,
            lf: 1.35,
            lr: 1.25,
            cornering_stiffness_front: 95_000.0,
            cornering_stiffness_rear: 70_000.0,
            ..shared
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    pub yaw: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
}

impl VehicleState {
    pub fn at_rest(position: Vec2, yaw: f64) -> Self {
        Self {
            position,
            yaw,
            ..Default::default()
        }
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.yaw)
    }

    pub fn world_velocity(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy).rotated(self.yaw)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.yaw.is_finite()
            && self.vx.is_finite()
            && self.vy.is_finite()
            && self.yaw_rate.is_finite()
    }
}

/// Pedal and steering commands, clamped on construction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Controls {
    throttle: f64,
    brake: f64,
    steer: f64,
}

impl Controls {
    pub fn new(throttle: f64, brake: f64, steer: f64) -> Self {
        Self {
            throttle: throttle.clamp(0.0, 1.0),
            brake: brake.clamp(0.0, 1.0),
            steer: steer.clamp(-1.0, 1.0),
        }
    }

    pub fn throttle(&self) -> f64 {
        self.throttle
    }

    pub fn brake(&self) -> f64 {
        self.brake
    }

    /// Fraction of `max_steer`, positive to the left.
    pub fn steer(&self) -> f64 {
        self.steer
    }
}

/// Unsigned angle in `[0, π]` between the velocity and the heading.
pub fn slip_angle(state: &VehicleState) -> f64 {
    if state.speed() < SLIP_SPEED_EPS {
        return 0.0;
    }
    state.vy.abs().atan2(state.vx).clamp(0.0, PI)
}

/// Per-axle tire forces in the wheel frames, exposed for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxleForces {
    pub front_long: f64,
    pub front_lat: f64,
    pub rear_long: f64,
    pub rear_lat: f64,
}

/// Tire forces for the given state and controls.
pub fn axle_forces(state: &VehicleState, controls: Controls, params: &VehicleParams) -> AxleForces {
    let delta = controls.steer() * params.max_steer;
    let vx_floor = state.vx.max(SLIP_VX_FLOOR);
    let alpha_f = (state.vy + params.lf * state.yaw_rate).atan2(vx_floor) - delta;
    let alpha_r = (state.vy - params.lr * state.yaw_rate).atan2(vx_floor);

    let (fz_f, fz_r) = params.axle_loads();
    let (cap_f, cap_r) = (params.friction_coeff * fz_f, params.friction_coeff * fz_r);
    let fade = (state.speed() / LATERAL_FADE_SPEED).min(1.0);
    let front_lat = (-fade * params.cornering_stiffness_front * alpha_f).clamp(-cap_f, cap_f);
    let rear_lat = (-fade * params.cornering_stiffness_rear * alpha_r).clamp(-cap_r, cap_r);

    let drive = controls.throttle() * params.max_drive_force;
    // Brakes act against the direction of travel and vanish at standstill.
    let brake = controls.brake() * params.max_brake_force * -sign_or_zero(state.vx);
    let (mut front_long, mut rear_long) = match params.layout {
        Layout::FF => (drive, 0.0),
        Layout::FR => (0.0, drive),
    };
    front_long += BRAKE_FRONT_SHARE * brake;
    rear_long += (1.0 - BRAKE_FRONT_SHARE) * brake;

    // Friction circle: longitudinal force takes whatever lateral force leaves.
    let room = |cap: f64, lat: f64| (cap * cap - lat * lat).max(0.0).sqrt();
    let front_long = front_long.clamp(-room(cap_f, front_lat), room(cap_f, front_lat));
    let rear_long = rear_long.clamp(-room(cap_r, rear_lat), room(cap_r, rear_lat));

    AxleForces {
        front_long,
        front_lat,
        rear_long,
        rear_lat,
    }
}

fn sign_or_zero(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Advances the state by `dt` with semi-implicit Euler: velocities are
/// updated from the forces at the current state, then pose is integrated
/// with the new velocities. The interval is split into equal substeps no
/// longer than [`MAX_SUBSTEP`].
pub fn step(
    state: &VehicleState,
    controls: Controls,
    params: &VehicleParams,
    dt: f64,
) -> VehicleState {
    debug_assert!(dt > 0.0 && dt <= 0.05, "dt out of range: {dt}");
    debug_assert!(state.is_finite(), "non-finite vehicle state: {state:?}");

    let n = substep_count(dt);
    let h = dt / n as f64;
    let mut s = *state;
    for _ in 0..n {
        s = substep(&s, controls, params, h);
    }
    debug_assert!(
        s.is_finite(),
        "non-finite result from {state:?} with {controls:?}"
    );
    s
}

/// Number of internal substeps used for a frame of length `dt`.
pub fn substep_count(dt: f64) -> usize {
    ((dt / MAX_SUBSTEP - 1e-9).ceil() as usize).max(1)
}

fn substep(
    state: &VehicleState,
    controls: Controls,
    params: &VehicleParams,
    dt: f64,
) -> VehicleState {
    let f = axle_forces(state, controls, params);
    let delta = controls.steer() * params.max_steer;
    let (sd, cd) = delta.sin_cos();

    let speed = state.speed();
    let resist = params.drag_coeff * speed + params.rolling_resist;
    let (rx, ry) = (-resist * state.vx, -resist * state.vy);

    let fx = f.front_long * cd - f.front_lat * sd + f.rear_long;
    let fy = f.front_long * sd + f.front_lat * cd + f.rear_lat;
    let mz = params.lf * (f.front_long * sd + f.front_lat * cd) - params.lr * f.rear_lat;

    let mut vx = state.vx + dt * (fx + rx) / params.mass;
    let mut vy = state.vy + dt * (fy + ry) / params.mass;
    // Resistive forces and brakes can stop the car but never reverse it.
    let driven = controls.throttle() > 0.0;
    if !driven && state.vx != 0.0 && vx.signum() != state.vx.signum() {
        vx = 0.0;
    }
    let yaw_rate = state.yaw_rate + dt * mz / params.yaw_inertia;

    // Body-frame rotation terms (vy·r, -vx·r) applied as an exact rotation so
    // they exchange speed between axes without changing its magnitude.
    let turn = -yaw_rate * dt;
    let (st, ct) = turn.sin_cos();
    (vx, vy) = (ct * vx - st * vy, st * vx + ct * vy);

    let yaw = state.yaw + yaw_rate * dt;
    let position = state.position + Vec2::new(vx, vy).rotated(yaw) * dt;
    VehicleState {
        position,
        yaw,
        vx,
        vy,
        yaw_rate,
    }
}
