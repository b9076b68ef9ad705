//! Rotating multi-channel LiDAR model.
//!
//! Azimuth is measured in the sensor frame from +z toward +x, elevation
//! upward from the x–z plane; with y pointing down the ray direction is
//! `(sin az·cos el, −sin el, cos az·cos el)`. Each azimuth step fires all
//! channels at once, and the scene is posed at that firing time.

use nalgebra::{Rotation3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geom::{Point3, Pose, Vec3};
use crate::sim::scene::Scene;

/// Sensor placement: rotation `Ry(yaw)·Rx(pitch)·Rz(roll)` then translation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mount {
    pub translation: [f64; 3],
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

impl Mount {
    pub fn at(translation: [f64; 3]) -> Self {
        Self {
            translation,
            ..Default::default()
        }
    }

    /// Sensor-to-world transform.
    pub fn pose(&self) -> Pose {
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), self.yaw_deg.to_radians())
            * Rotation3::from_axis_angle(&Vector3::x_axis(), self.pitch_deg.to_radians())
            * Rotation3::from_axis_angle(&Vector3::z_axis(), self.roll_deg.to_radians());
        Pose::new(r.into_inner(), Vec3::from(self.translation)).expect("rotation matrices are orthonormal")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarConfig {
    pub sensor_id: u8,
    pub channels: usize,
    pub vertical_fov_deg: f64,
    pub rotation_rate_hz: f64,
    pub horizontal_step_deg: f64,
    pub range_min: f64,
    pub range_max: f64,
    pub phase_offset_deg: f64,
    pub mount: Mount,
    /// Probability that a return survives the protective panel.
    pub panel_transmittance: f64,
    /// Only azimuths within `window_width_deg / 2` of this fire.
    pub window_center_deg: f64,
    pub window_width_deg: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            sensor_id: 0,
            channels: 128,
            vertical_fov_deg: 45.0,
            rotation_rate_hz: 10.0,
            horizontal_step_deg: 0.2,
            range_min: 1.0,
            range_max: 200.0,
            phase_offset_deg: 0.0,
            mount: Mount::default(),
            panel_transmittance: 1.0,
            window_center_deg: 0.0,
            window_width_deg: 360.0,
        }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::param(format!("lidar {}: {m}", self.sensor_id)));
        if self.channels == 0 {
            return err("needs at least one channel");
        }
        if !(self.vertical_fov_deg >= 0.0 && self.vertical_fov_deg < 180.0) {
            return err("vertical field of view must lie in [0, 180)");
        }
        if !(self.rotation_rate_hz > 0.0 && self.rotation_rate_hz.is_finite()) {
            return err("rotation rate must be positive");
        }
        if !(self.range_min > 0.0 && self.range_min < self.range_max && self.range_max.is_finite()) {
            return err("need 0 < range_min < range_max");
        }
        if !(0.0..=1.0).contains(&self.panel_transmittance) {
            return err("panel transmittance must lie in [0, 1]");
        }
        if !(self.horizontal_step_deg > 0.0) {
            return err("horizontal step must be positive");
        }
        let n = (360.0 / self.horizontal_step_deg).round();
        if (n * self.horizontal_step_deg - 360.0).abs() > 1e-6 {
            return err("horizontal step must divide 360 degrees");
        }
        if !(self.window_width_deg > 0.0) || !self.window_center_deg.is_finite() {
            return err("azimuth window must have positive width");
        }
        if [self.phase_offset_deg, self.mount.yaw_deg, self.mount.pitch_deg, self.mount.roll_deg]
            .iter()
            .chain(&self.mount.translation)
            .any(|x| !x.is_finite())
        {
            return err("angles and mount must be finite");
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (360.0 / self.horizontal_step_deg).round() as usize
    }

    pub fn rays_per_rotation(&self) -> usize {
        self.steps() * self.channels
    }

    /// Channel elevations in radians, top channel first, evenly spaced.
    pub fn elevations(&self) -> Vec<f64> {
        let n = self.channels;
        if n == 1 {
            return vec![0.0];
        }
        let half = self.vertical_fov_deg / 2.0;
        (0..n)
            .map(|c| (half - c as f64 * self.vertical_fov_deg / (n - 1) as f64).to_radians())
            .collect()
    }

    fn in_window(&self, az_deg: f64) -> bool {
        if self.window_width_deg >= 360.0 {
            return true;
        }
        let diff = (az_deg - self.window_center_deg + 180.0).rem_euclid(360.0) - 180.0;
        diff.abs() <= self.window_width_deg / 2.0 + 1e-9
    }
}

pub fn ray_direction(az_rad: f64, el_rad: f64) -> Vec3 {
    let (sa, ca) = az_rad.sin_cos();
    let (se, ce) = el_rad.sin_cos();
    Vec3::new(sa * ce, -se, ca * ce)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform `[0, 1)` draw determined only by its key.
pub fn keyed_uniform(seed: u64, sensor: u8, rotation: u64, ray: u64) -> f64 {
    let h = splitmix64(seed ^ splitmix64(sensor as u64 ^ splitmix64(rotation ^ splitmix64(ray))));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Whether a return passes the panel.
pub fn survives_panel(seed: u64, sensor: u8, rotation: u64, ray: u64, transmittance: f64) -> bool {
    transmittance >= 1.0 || keyed_uniform(seed, sensor, rotation, ray) < transmittance
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarReturn {
    /// `step · channels + channel`.
    pub ray: u64,
    pub point: Point3,
    pub range: f64,
    pub primitive: usize,
    pub time_s: f64,
}

/// Fires one rotation beginning at `start_az_deg` at time `t0`. `rotation`
/// keys the panel dropout draws. Returns are ordered by ray index.
pub fn scan_returns(scene: &Scene, cfg: &LidarConfig, t0: f64, start_az_deg: f64, rotation: u64) -> Result<Vec<LidarReturn>> {
    cfg.validate()?;
    let steps = cfg.steps();
    let channels = cfg.channels;
    let elevations = cfg.elevations();
    let pose = cfg.mount.pose();
    let origin = pose.center();
    let step_dt = 1.0 / (steps as f64 * cfg.rotation_rate_hz);
    let per_step: Vec<Vec<LidarReturn>> = (0..steps)
        .into_par_iter()
        .map(|j| {
            let az_deg = start_az_deg + j as f64 * cfg.horizontal_step_deg;
            if !cfg.in_window(az_deg) {
                return Vec::new();
            }
            let az = az_deg.to_radians();
            let time_s = t0 + j as f64 * step_dt;
            let mut out = Vec::new();
            for (c, &el) in elevations.iter().enumerate() {
                let ray = (j * channels + c) as u64;
                let dir = pose.apply_vector(&ray_direction(az, el));
                let Some(hit) = scene.intersect(&origin, &dir, 0.0, cfg.range_max, time_s) else {
                    continue;
                };
                if hit.t < cfg.range_min {
                    continue;
                }
                if !survives_panel(scene.seed, cfg.sensor_id, rotation, ray, cfg.panel_transmittance) {
                    continue;
                }
                out.push(LidarReturn {
                    ray,
                    point: origin + dir * hit.t,
                    range: hit.t,
                    primitive: hit.primitive,
                    time_s,
                });
            }
            out
        })
        .collect();
    Ok(per_step.into_iter().flatten().collect())
}

/// World-frame cloud of `returns`, colored with the true surface color and
/// stamped with sensor id and firing time.
pub fn returns_to_cloud(scene: &Scene, sensor_id: u8, returns: &[LidarReturn]) -> PointCloud {
    let mut cloud = PointCloud::from_points(returns.iter().map(|r| r.point).collect());
    cloud.colors = Some(
        returns
            .iter()
            .map(|r| scene.primitives[r.primitive].color_at(&r.point, r.time_s))
            .collect(),
    );
    cloud.sensor_id = Some(vec![sensor_id; returns.len()]);
    cloud.timestamp_ns = Some(returns.iter().map(|r| seconds_to_ns(r.time_s)).collect());
    cloud
}

pub fn seconds_to_ns(t: f64) -> u64 {
    (t.max(0.0) * 1e9).round() as u64
}

/// One full rotation starting at the configured phase offset at time `t0`.
/// The dropout key uses rotation index `⌊t0 · rate⌋`.
pub fn lidar_scan(scene: &Scene, cfg: &LidarConfig, t0: f64) -> Result<PointCloud> {
    let rotation = (t0 * cfg.rotation_rate_hz).floor() as i64 as u64;
    let returns = scan_returns(scene, cfg, t0, cfg.phase_offset_deg, rotation)?;
    Ok(returns_to_cloud(scene, cfg.sensor_id, &returns))
}
