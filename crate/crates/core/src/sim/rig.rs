//! Three phase-offset LiDARs and one trigger-coupled camera.
//!
//! LiDAR `i` points at azimuth `phase_i + 360°·rate·t` at time `t`. The
//! camera fires whenever some LiDAR's azimuth crosses the camera's optical
//! axis. The scan paired with a trigger is the rotation centered on that
//! crossing, so the part of the scan facing the camera is captured at the
//! frame instant.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::image::RgbImage;
use crate::projection::{CameraIntrinsics, SensorModel};
use crate::sim::camera::camera_frame;
use crate::sim::lidar::{returns_to_cloud, scan_returns, seconds_to_ns, LidarConfig, Mount};
use crate::sim::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
    pub mount: Mount,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            width: 640,
            height: 360,
            hfov_deg: 90.0,
            mount: Mount::default(),
        }
    }
}

impl CameraSpec {
    pub fn sensor_model(&self) -> Result<SensorModel> {
        if self.width == 0 || self.height == 0 || !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            return Err(Error::param("camera needs a positive size and a field of view in (0, 180)"));
        }
        SensorModel::new(
            CameraIntrinsics::from_hfov(self.width, self.height, self.hfov_deg),
            self.mount.pose().inverse(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigConfig {
    pub lidars: [LidarConfig; 3],
    pub camera: CameraSpec,
    pub camera_fps: f64,
    /// Time of the first trigger considered; must leave room for half a
    /// rotation before it.
    pub start_s: f64,
}

impl Default for RigConfig {
    fn default() -> Self {
        let lidar = |i: u8, phase: f64, t: [f64; 3]| LidarConfig {
            sensor_id: i,
            phase_offset_deg: phase,
            mount: Mount::at(t),
            ..Default::default()
        };
        Self {
            lidars: [
                lidar(0, 0.0, [0.0, -0.15, 0.0]),
                lidar(1, 120.0, [0.13, -0.075, 0.0]),
                lidar(2, 240.0, [-0.13, -0.075, 0.0]),
            ],
            camera: CameraSpec::default(),
            camera_fps: 30.0,
            start_s: 0.1,
        }
    }
}

/// One camera trigger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trigger {
    pub index: usize,
    pub time_s: f64,
    /// Index into [`RigConfig::lidars`].
    pub lidar: usize,
    /// Which crossing of that LiDAR this is; keys its dropout draws.
    pub rotation: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigEvent {
    pub index: usize,
    pub time_s: f64,
    pub timestamp_ns: u64,
    pub lidar: usize,
    pub sensor_id: u8,
    pub rotation: u64,
    /// World-frame scan with true surface colors.
    pub scan: PointCloud,
    pub frame: RgbImage,
}

impl RigConfig {
    pub fn validate(&self) -> Result<()> {
        for l in &self.lidars {
            l.validate()?;
        }
        self.camera.sensor_model()?;
        let rate = self.lidars[0].rotation_rate_hz;
        if self.lidars.iter().any(|l| l.rotation_rate_hz != rate) {
            return Err(Error::param("all lidars must share one rotation rate"));
        }
        if ((self.camera_fps - 3.0 * rate) / self.camera_fps).abs() > 1e-9 {
            return Err(Error::param(format!(
                "camera fps {} does not match three lidars at {rate} Hz",
                self.camera_fps
            )));
        }
        for i in 0..3 {
            for j in i + 1..3 {
                let a = &self.lidars[i];
                let b = &self.lidars[j];
                if a.sensor_id == b.sensor_id {
                    return Err(Error::param("lidar sensor ids must be distinct"));
                }
                let d = (a.phase_offset_deg - b.phase_offset_deg).rem_euclid(360.0);
                if !(1e-9..=360.0 - 1e-9).contains(&d) {
                    return Err(Error::param("lidar phase offsets must be distinct"));
                }
            }
        }
        if !(self.start_s.is_finite() && self.start_s >= 0.5 / rate) {
            return Err(Error::param(format!("start_s must be at least half a rotation ({} s)", 0.5 / rate)));
        }
        Ok(())
    }

    pub fn camera_model(&self) -> Result<SensorModel> {
        self.camera.sensor_model()
    }

    /// Azimuth of the camera's optical axis in LiDAR `i`'s frame, degrees.
    pub fn camera_azimuth_deg(&self, i: usize) -> f64 {
        let axis = self.camera.mount.pose().apply_vector(&Vec3::z());
        let local = self.lidars[i].mount.pose().inverse().apply_vector(&axis);
        local.x.atan2(local.z).to_degrees()
    }

    /// Instantaneous azimuth of LiDAR `i` at time `t`, in `[0, 360)`.
    pub fn azimuth_at(&self, i: usize, t: f64) -> f64 {
        let l = &self.lidars[i];
        (l.phase_offset_deg + 360.0 * l.rotation_rate_hz * t).rem_euclid(360.0)
    }

    /// Triggers with `start_s ≤ t < start_s + duration`, in time order.
    pub fn triggers(&self, duration: f64) -> Result<Vec<Trigger>> {
        self.validate()?;
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::param("duration must be positive"));
        }
        let rate = self.lidars[0].rotation_rate_hz;
        // Tolerance well under one trigger interval absorbs rounding at the ends.
        let eps = 1e-6 / self.camera_fps;
        let (lo, hi) = (self.start_s - eps, self.start_s + duration - eps);
        let mut out = Vec::new();
        for (i, l) in self.lidars.iter().enumerate() {
            let frac = ((self.camera_azimuth_deg(i) - l.phase_offset_deg) / 360.0).rem_euclid(1.0);
            let mut m = ((lo * rate - frac).ceil().max(0.0)) as u64;
            loop {
                let t = (m as f64 + frac) / rate;
                if t >= hi {
                    break;
                }
                if t >= lo {
                    out.push(Trigger {
                        index: 0,
                        time_s: t,
                        lidar: i,
                        rotation: m,
                    });
                }
                m += 1;
            }
        }
        out.sort_by(|a, b| a.time_s.total_cmp(&b.time_s).then(a.lidar.cmp(&b.lidar)));
        for (k, t) in out.iter_mut().enumerate() {
            t.index = k;
        }
        Ok(out)
    }

    /// The scan centered on a trigger: one rotation starting half a turn
    /// before the crossing.
    pub fn scan_for(&self, scene: &Scene, trig: &Trigger) -> Result<PointCloud> {
        let l = &self.lidars[trig.lidar];
        let half = 0.5 / l.rotation_rate_hz;
        let start_az = self.camera_azimuth_deg(trig.lidar) - 180.0;
        let returns = scan_returns(scene, l, trig.time_s - half, start_az, trig.rotation)?;
        Ok(returns_to_cloud(scene, l.sensor_id, &returns))
    }

    pub fn event(&self, scene: &Scene, trig: &Trigger) -> Result<RigEvent> {
        let cam = self.camera_model()?;
        Ok(RigEvent {
            index: trig.index,
            time_s: trig.time_s,
            timestamp_ns: seconds_to_ns(trig.time_s),
            lidar: trig.lidar,
            sensor_id: self.lidars[trig.lidar].sensor_id,
            rotation: trig.rotation,
            scan: self.scan_for(scene, trig)?,
            frame: camera_frame(scene, &cam, trig.time_s),
        })
    }
}

/// All scan/frame events in `[start_s, start_s + duration)`.
pub fn run_rig(scene: &Scene, rig: &RigConfig, duration: f64) -> Result<Vec<RigEvent>> {
    rig.triggers(duration)?.iter().map(|t| rig.event(scene, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::ColorRgb8;
    use crate::geom::Point3;
    use crate::sim::scene::{Motion, Primitive, Shape};

    fn quick_rig() -> RigConfig {
        let mut rig = RigConfig::default();
        for l in &mut rig.lidars {
            l.channels = 16;
            l.horizontal_step_deg = 1.0;
        }
        rig.camera.width = 32;
        rig.camera.height = 18;
        rig
    }

    fn room(moving: bool) -> Scene {
        let mut prims = vec![
            Primitive::new(
                "back",
                Shape::Rect { center: Point3::new(0.0, 0.0, 8.0), u: Vec3::x() * 10.0, v: Vec3::y() * 4.0 },
                ColorRgb8::new(180, 170, 150),
            ),
            Primitive::new(
                "ball",
                Shape::Sphere { center: Point3::new(-1.5, 0.5, 5.0), radius: 0.6 },
                ColorRgb8::new(20, 150, 30),
            ),
        ];
        if moving {
            prims.push(
                Primitive::new(
                    "walker",
                    Shape::Box { center: Point3::new(0.0, 0.2, 4.0), half_extents: Vec3::new(0.25, 0.9, 0.15) },
                    ColorRgb8::new(200, 40, 40),
                )
                .with_motion(Motion::Linear { velocity: [1.2, 0.0, 0.0] }),
            );
        }
        Scene::new(prims, 11).unwrap()
    }

    #[test]
    fn one_second_has_thirty_evenly_spaced_triggers() {
        let trig = RigConfig::default().triggers(1.0).unwrap();
        assert_eq!(trig.len(), 30);
        for w in trig.windows(2) {
            assert!((w[1].time_s - w[0].time_s - 1.0 / 30.0).abs() < 1e-12);
        }
        assert!((trig[0].time_s - 0.1).abs() < 1e-12);
        let lidars: Vec<usize> = trig.iter().take(6).map(|t| t.lidar).collect();
        assert_eq!(lidars, vec![0, 2, 1, 0, 2, 1]);
    }

    #[test]
    fn phases_stay_120_apart_at_triggers() {
        let rig = RigConfig::default();
        for t in rig.triggers(0.5).unwrap() {
            let a: Vec<f64> = (0..3).map(|i| rig.azimuth_at(i, t.time_s)).collect();
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                let d = (a[j] - a[i]).rem_euclid(360.0);
                assert!((d - 120.0).abs() < 1e-9, "{a:?}");
            }
            // The triggering lidar points along the camera axis.
            let d = (rig.azimuth_at(t.lidar, t.time_s) - rig.camera_azimuth_deg(t.lidar) + 180.0).rem_euclid(360.0) - 180.0;
            assert!(d.abs() < 1e-9);
        }
    }

    #[test]
    fn static_scene_repeats_per_sensor() {
        let rig = quick_rig();
        let ev = run_rig(&room(false), &rig, 0.2).unwrap();
        assert_eq!(ev.len(), 6);
        for k in 0..3 {
            assert_eq!(ev[k].lidar, ev[k + 3].lidar);
            assert_eq!(ev[k].scan.points, ev[k + 3].scan.points);
            assert_eq!(ev[k].frame, ev[k + 3].frame);
        }
        assert_ne!(ev[0].scan.points, ev[1].scan.points);
        assert_ne!(ev[1].scan.points, ev[2].scan.points);
        assert_ne!(ev[0].scan.points, ev[2].scan.points);
    }

    #[test]
    fn only_moving_box_points_change() {
        let rig = quick_rig();
        let scene = room(true);
        let trig = rig.triggers(0.2).unwrap();
        let (a, b) = (&trig[0], &trig[3]);
        assert_eq!(a.lidar, b.lidar);
        let l = &rig.lidars[a.lidar];
        let start = rig.camera_azimuth_deg(a.lidar) - 180.0;
        let half = 0.5 / l.rotation_rate_hz;
        let ra = scan_returns(&scene, l, a.time_s - half, start, a.rotation).unwrap();
        let rb = scan_returns(&scene, l, b.time_s - half, start, b.rotation).unwrap();
        let by_ray = |r: &[crate::sim::lidar::LidarReturn]| {
            r.iter().map(|x| (x.ray, *x)).collect::<std::collections::BTreeMap<_, _>>()
        };
        let (ma, mb) = (by_ray(&ra), by_ray(&rb));
        let walker = 2;
        let mut changed = 0;
        for ray in ma.keys().chain(mb.keys()) {
            let (x, y) = (ma.get(ray), mb.get(ray));
            let on_walker = x.is_some_and(|r| r.primitive == walker) || y.is_some_and(|r| r.primitive == walker);
            let same = match (x, y) {
                (Some(p), Some(q)) => p.point == q.point,
                _ => false,
            };
            if !on_walker {
                assert!(same, "ray {ray} changed without touching the walker");
            } else if !same {
                changed += 1;
            }
        }
        assert!(changed > 0);
    }

    #[test]
    fn rejects_inconsistent_rigs() {
        let mut r = RigConfig::default();
        r.camera_fps = 25.0;
        assert!(r.validate().is_err());
        let mut r = RigConfig::default();
        r.lidars[2].phase_offset_deg = 360.0;
        assert!(r.validate().is_err());
        let mut r = RigConfig::default();
        r.start_s = 0.0;
        assert!(r.validate().is_err());
        assert!(RigConfig::default().triggers(0.0).is_err());
    }
}
