//! Network inputs: normalized ray distances around the car, then speed and
//! slip angle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{normalize_angle, Vec2};
use crate::track::Track;
use crate::vehicle::{slip_angle, VehicleParams, VehicleState};

#[derive(Debug, Error, PartialEq)]
#[error("invalid sensor config: {0}")]
pub struct SensorConfigError(pub String);

/// Ray layout relative to the heading.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorConfig {
    pub ray_count: usize,
    pub ray_angles: Vec<f64>,
    pub max_range: f64,
}

/// Serialized form: `ray_angles` may be omitted, in which case `ray_count`
/// rays are spread evenly over the full circle starting at the heading.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SensorConfigFile {
    ray_count: usize,
    #[serde(default)]
    ray_angles: Option<Vec<f64>>,
    max_range: f64,
}

impl<'de> Deserialize<'de> for SensorConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = SensorConfigFile::deserialize(d)?;
        let cfg = match raw.ray_angles {
            Some(angles) => SensorConfig {
                ray_count: raw.ray_count,
                ray_angles: angles,
                max_range: raw.max_range,
            },
            None => SensorConfig::evenly_spaced(raw.ray_count, raw.max_range),
        };
        cfg.validate().map_err(serde::de::Error::custom)?;
        Ok(cfg)
    }
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self::evenly_spaced(12, 50.0)
    }
}

impl SensorConfig {
    /// `count` rays every `2π / count`, starting at the heading, sorted into
    /// increasing order on `(-π, π]`.
    pub fn evenly_spaced(count: usize, max_range: f64) -> Self {
        let mut ray_angles: Vec<f64> = (0..count)
            .map(|k| normalize_angle(2.0 * PI * k as f64 / count as f64))
            .collect();
        ray_angles.sort_by(f64::total_cmp);
        Self {
            ray_count: count,
            ray_angles,
            max_range,
        }
    }

    pub fn validate(&self) -> Result<(), SensorConfigError> {
        if self.ray_count == 0 {
            return Err(SensorConfigError("ray_count must be positive".into()));
        }
        if self.ray_angles.len() != self.ray_count {
            return Err(SensorConfigError(format!(
                "ray_angles has {} entries, ray_count is {}",
                self.ray_angles.len(),
                self.ray_count
            )));
        }
        if let Some(a) = self.ray_angles.iter().find(|a| !(**a > -PI && **a <= PI)) {
            return Err(SensorConfigError(format!(
                "ray angle {a} outside (-pi, pi]"
            )));
        }
        if self.ray_angles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SensorConfigError(
                "ray_angles must be strictly increasing".into(),
            ));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(SensorConfigError(format!(
                "max_range must be positive, got {}",
                self.max_range
            )));
        }
        Ok(())
    }

    /// Network input width: one per ray plus speed and slip.
    pub fn input_size(&self) -> usize {
        self.ray_count + 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorReading {
    pub distances: Vec<f64>,
    pub speed_norm: f64,
    pub slip_norm: f64,
}

impl SensorReading {
    /// Network input order: distances, speed, slip.
    pub fn to_inputs(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.distances.len() + 2);
        self.write_inputs(&mut v);
        v
    }

    pub fn write_inputs(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.distances);
        out.push(self.speed_norm);
        out.push(self.slip_norm);
    }
}

pub fn sense(
    state: &VehicleState,
    track: &Track,
    params: &VehicleParams,
    cfg: &SensorConfig,
) -> SensorReading {
    let distances = cfg
        .ray_angles
        .iter()
        .map(|&a| {
            let dir = Vec2::from_angle(state.yaw + a);
            track
                .ray_cast(state.position, dir, cfg.max_range)
                .map_or(1.0, |t| (t / cfg.max_range).clamp(0.0, 1.0))
        })
        .collect();
    SensorReading {
        distances,
        speed_norm: (state.speed() / params.max_speed).clamp(0.0, 1.0),
        slip_norm: slip_angle(state) / PI,
    }
}
