//! Ideal pinhole camera: projection, z-buffering, colorization and
//! back-projection.
//!
//! Pixel `(x, y)` has its center at image coordinates `(x, y)`, so a
//! projected coordinate `u` lands in column `floor(u + 0.5)`.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::color::ColorRgb8;
use crate::error::{Error, Result};
use crate::geom::{Point3, Pose};
use crate::image::{DepthImage, RgbImage};

/// Points at or closer than this (camera z, meters) are treated as behind the
/// camera.
pub const Z_NEAR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    /// Square-pixel camera with the principal point at the image center and
    /// the given horizontal field of view.
    pub fn from_hfov(width: usize, height: usize, hfov_deg: f64) -> Self {
        let fx = (width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        Self {
            fx,
            fy: fx,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.fx.is_finite()
            && self.fy.is_finite()
            && (0.0..self.width as f64).contains(&self.cx)
            && (0.0..self.height as f64).contains(&self.cy);
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("invalid camera intrinsics {self:?}")))
        }
    }

    /// Pixel containing image coordinates `(u, v)`, if inside the image.
    #[inline]
    pub fn pixel_of(&self, u: f64, v: f64) -> Option<(usize, usize)> {
        let x = (u + 0.5).floor();
        let y = (v + 0.5).floor();
        if x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64 {
            Some((x as usize, y as usize))
        } else {
            None
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Camera model; `pose` maps world coordinates into the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub intrinsics: CameraIntrinsics,
    pub pose: Pose,
}

impl SensorModel {
    pub fn new(intrinsics: CameraIntrinsics, pose: Pose) -> Result<Self> {
        intrinsics.validate()?;
        pose.validate()?;
        Ok(Self { intrinsics, pose })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.intrinsics.width, self.intrinsics.height)
    }

    /// Pixel and camera depth of a world point, or `None` if it is behind
    /// the camera or outside the image.
    #[inline]
    pub fn pixel_and_depth(&self, p_world: &Point3) -> Option<(usize, usize, f64)> {
        match project_point(p_world, self) {
            Projection::Visible { u, v, z } => {
                self.intrinsics.pixel_of(u, v).map(|(x, y)| (x, y, z))
            }
            Projection::BehindCamera => None,
        }
    }

    fn check_dims(&self, what: &str, dims: (usize, usize)) -> Result<()> {
        if dims != self.dims() {
            return Err(Error::param(format!(
                "{what} is {}x{} but the camera is {}x{}",
                dims.0,
                dims.1,
                self.intrinsics.width,
                self.intrinsics.height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Visible { u: f64, v: f64, z: f64 },
    BehindCamera,
}

#[inline]
pub fn project_point(p_world: &Point3, cam: &SensorModel) -> Projection {
    let p = cam.pose.apply(p_world);
    if p.z <= Z_NEAR {
        return Projection::BehindCamera;
    }
    let k = &cam.intrinsics;
    Projection::Visible {
        u: k.fx * p.x / p.z + k.cx,
        v: k.fy * p.y / p.z + k.cy,
        z: p.z,
    }
}

/// Nearest-point splat: each pixel keeps the smallest camera depth that
/// lands on it; untouched pixels stay 0.
pub fn render_zbuffer(cloud: &PointCloud, cam: &SensorModel) -> DepthImage {
    let (w, h) = cam.dims();
    let mut img = DepthImage::zeros(w, h);
    for p in &cloud.points {
        if let Some((x, y, z)) = cam.pixel_and_depth(p) {
            let d = &mut img.depth[y * w + x];
            if *d == 0.0 || z < *d {
                *d = z;
            }
        }
    }
    img
}

#[derive(Debug, Clone, PartialEq)]
pub struct Colorized {
    /// Input cloud with `colors` filled; uncolored points carry black.
    pub cloud: PointCloud,
    /// `true` where the point projected inside the image.
    pub colored: Vec<bool>,
}

impl Colorized {
    /// Only the points that received a color.
    pub fn colored_only(&self) -> PointCloud {
        let ids: Vec<usize> = (0..self.colored.len()).filter(|&i| self.colored[i]).collect();
        self.cloud.select(&ids)
    }
}

pub fn colorize(cloud: &PointCloud, rgb: &RgbImage, cam: &SensorModel) -> Result<Colorized> {
    cam.check_dims("rgb image", rgb.dims())?;
    let mut colors = Vec::with_capacity(cloud.len());
    let mut colored = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        match cam.pixel_and_depth(p) {
            Some((x, y, _)) => {
                colors.push(rgb.get(x, y));
                colored.push(true);
            }
            None => {
                colors.push(ColorRgb8::BLACK);
                colored.push(false);
            }
        }
    }
    let mut out = cloud.clone();
    out.colors = Some(colors);
    Ok(Colorized {
        cloud: out,
        colored,
    })
}

/// Lifts every valid depth pixel to a world point, row-major.
pub fn backproject(
    depth: &DepthImage,
    rgb: Option<&RgbImage>,
    cam: &SensorModel,
) -> Result<PointCloud> {
    cam.check_dims("depth image", depth.dims())?;
    if let Some(rgb) = rgb {
        cam.check_dims("rgb image", rgb.dims())?;
    }
    let k = &cam.intrinsics;
    let to_world = cam.pose.inverse();
    let mut points = Vec::new();
    let mut colors = Vec::new();
    for y in 0..depth.height {
        for x in 0..depth.width {
            let z = depth.get(x, y);
            if z <= 0.0 {
                continue;
            }
            let p_cam = Point3::new(
                z * (x as f64 - k.cx) / k.fx,
                z * (y as f64 - k.cy) / k.fy,
                z,
            );
            points.push(to_world.apply(&p_cam));
            if let Some(rgb) = rgb {
                colors.push(rgb.get(x, y));
            }
        }
    }
    Ok(PointCloud {
        points,
        colors: rgb.map(|_| colors),
        ..PointCloud::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cam(width: usize, height: usize) -> SensorModel {
        SensorModel::new(
            CameraIntrinsics {
                fx: 100.0,
                fy: 100.0,
                cx: 320.0,
                cy: 240.0,
                width,
                height,
            },
            Pose::identity(),
        )
        .unwrap()
    }

    fn tilted_cam() -> SensorModel {
        SensorModel::new(
            CameraIntrinsics {
                fx: 80.0,
                fy: 90.0,
                cx: 31.5,
                cy: 20.25,
                width: 64,
                height: 40,
            },
            Pose::from_axis_angle(Vec3::new(0.2, 1.0, -0.1), 0.3, Vec3::new(0.5, -0.2, 1.0)),
        )
        .unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let c = cam(640, 480);
        assert_eq!(
            project_point(&Point3::new(0.0, 0.0, 5.0), &c),
            Projection::Visible { u: 320.0, v: 240.0, z: 5.0 }
        );
    }

    #[test]
    fn pinhole_arithmetic() {
        match project_point(&Point3::new(1.0, 0.0, 1.0), &cam(640, 480)) {
            Projection::Visible { u, .. } => assert_eq!(u, 420.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_depth_is_behind() {
        assert_eq!(
            project_point(&Point3::new(0.0, 0.0, -1.0), &cam(640, 480)),
            Projection::BehindCamera
        );
        assert_eq!(
            project_point(&Point3::new(0.0, 0.0, Z_NEAR), &cam(640, 480)),
            Projection::BehindCamera
        );
    }

    #[test]
    fn invalid_intrinsics_rejected() {
        let mut k = cam(640, 480).intrinsics;
        k.cx = 640.0;
        assert!(k.validate().is_err());
        k.cx = 10.0;
        k.fy = 0.0;
        assert!(k.validate().is_err());
    }

    #[test]
    fn empty_cloud_renders_zero_depth() {
        let z = render_zbuffer(&PointCloud::new(), &cam(640, 480));
        assert!(z.depth.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn zbuffer_keeps_minimum() {
        let c = cam(640, 480);
        let cloud = PointCloud::from_points(vec![Point3::new(0.0, 0.0, 5.0), Point3::new(0.0, 0.0, 2.0)]);
        let z = render_zbuffer(&cloud, &c);
        assert_eq!(z.get(320, 240), 2.0);
        assert_eq!(z.valid_count(), 1);
    }

    #[test]
    fn zbuffer_matches_per_pixel_brute_force() {
        let c = tilted_cam();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Point3> = (0..10_000)
            .map(|_| {
                Point3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..8.0))
            })
            .collect();
        let z = render_zbuffer(&PointCloud::from_points(pts.clone()), &c);
        // Oracle: per pixel, scan every point and take the minimum depth of
        // those whose rounded projection equals that pixel.
        let mut per_pixel: std::collections::HashMap<(usize, usize), Vec<f64>> = Default::default();
        for p in &pts {
            let q = c.pose.apply(p);
            if q.z <= Z_NEAR {
                continue;
            }
            let u = c.intrinsics.fx * q.x / q.z + c.intrinsics.cx;
            let v = c.intrinsics.fy * q.y / q.z + c.intrinsics.cy;
            let (xf, yf) = ((u + 0.5).floor(), (v + 0.5).floor());
            if xf < 0.0 || yf < 0.0 || xf >= 64.0 || yf >= 40.0 {
                continue;
            }
            per_pixel.entry((xf as usize, yf as usize)).or_default().push(q.z);
        }
        for y in 0..40 {
            for x in 0..64 {
                let want = per_pixel
                    .get(&(x, y))
                    .map(|zs| zs.iter().copied().fold(f64::INFINITY, f64::min))
                    .unwrap_or(0.0);
                assert_eq!(z.get(x, y), want, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn uniform_red_colorizes_in_frustum_points() {
        let c = cam(640, 480);
        let red = RgbImage::filled(640, 480, ColorRgb8::new(255, 0, 0));
        let cloud = PointCloud::from_points(vec![
            Point3::new(0.0, 0.0, 3.0),
            Point3::new(1.0, 1.0, 4.0),
            Point3::new(0.0, 0.0, -3.0),
            Point3::new(100.0, 0.0, 1.0),
        ]);
        let out = colorize(&cloud, &red, &c).unwrap();
        assert_eq!(out.colored, vec![true, true, false, false]);
        let colors = out.cloud.colors.as_ref().unwrap();
        assert_eq!(colors[0], ColorRgb8::new(255, 0, 0));
        assert_eq!(colors[1], ColorRgb8::new(255, 0, 0));
        assert_eq!(out.colored_only().len(), 2);
    }

    #[test]
    fn colorize_split_image_matches_scalar_projection() {
        let c = tilted_cam();
        let mut img = RgbImage::filled(64, 40, ColorRgb8::new(0, 0, 255));
        for y in 0..40 {
            for x in 0..32 {
                img.set(x, y, ColorRgb8::new(0, 255, 0));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Point3> = (0..2_000)
            .map(|_| Point3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.5..6.0)))
            .collect();
        let out = colorize(&PointCloud::from_points(pts.clone()), &img, &c).unwrap();
        let colors = out.cloud.colors.unwrap();
        let (mut green, mut blue) = (0, 0);
        for (i, p) in pts.iter().enumerate() {
            let q = c.pose.apply(p);
            let u = c.intrinsics.fx * q.x / q.z + c.intrinsics.cx;
            let v = c.intrinsics.fy * q.y / q.z + c.intrinsics.cy;
            let col = (u + 0.5).floor();
            let row = (v + 0.5).floor();
            let inside = q.z > Z_NEAR && col >= 0.0 && row >= 0.0 && col < 64.0 && row < 40.0;
            assert_eq!(out.colored[i], inside);
            if inside {
                let want = if col < 32.0 { ColorRgb8::new(0, 255, 0) } else { ColorRgb8::new(0, 0, 255) };
                if col < 32.0 { green += 1 } else { blue += 1 }
                assert_eq!(colors[i], want);
            }
        }
        assert!(green > 100 && blue > 100);
    }

    #[test]
    fn colorize_rejects_mismatched_image() {
        let c = cam(640, 480);
        let img = RgbImage::filled(10, 10, ColorRgb8::BLACK);
        assert!(colorize(&PointCloud::new(), &img, &c).is_err());
        assert!(backproject(&DepthImage::zeros(10, 10), None, &c).is_err());
    }

    #[test]
    fn all_invalid_depth_backprojects_to_nothing() {
        let c = cam(640, 480);
        assert!(backproject(&DepthImage::zeros(640, 480), None, &c).unwrap().is_empty());
    }

    #[test]
    fn principal_pixel_backprojects_on_axis() {
        let c = cam(640, 480);
        let mut d = DepthImage::zeros(640, 480);
        d.set(320, 240, 3.0);
        let cloud = backproject(&d, None, &c).unwrap();
        assert_eq!(cloud.points, vec![Point3::new(0.0, 0.0, 3.0)]);
    }

    #[test]
    fn zbuffer_backprojection_recovers_pixel_centered_points() {
        // One point per pixel, each placed exactly on its pixel-center ray.
        let c = tilted_cam();
        let k = c.intrinsics;
        let to_world = c.pose.inverse();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut pts = Vec::new();
        for y in 0..k.height {
            for x in 0..k.width {
                let z: f64 = rng.gen_range(0.5..20.0);
                let p_cam = Point3::new(z * (x as f64 - k.cx) / k.fx, z * (y as f64 - k.cy) / k.fy, z);
                pts.push(to_world.apply(&p_cam));
            }
        }
        let depth = render_zbuffer(&PointCloud::from_points(pts.clone()), &c);
        let back = backproject(&depth, None, &c).unwrap();
        assert_eq!(back.len(), pts.len());
        for (a, b) in back.points.iter().zip(&pts) {
            assert!((a - b).amax() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn project_backproject_round_trip(x in 0usize..64, y in 0usize..40, z in 0.01f64..150.0) {
            let c = tilted_cam();
            let mut d = DepthImage::zeros(64, 40);
            d.set(x, y, z);
            let p = backproject(&d, None, &c).unwrap().points[0];
            match project_point(&p, &c) {
                Projection::Visible { u, v, z: zz } => {
                    prop_assert!((u - x as f64).abs() < 1e-9);
                    prop_assert!((v - y as f64).abs() < 1e-9);
                    prop_assert!((zz - z).abs() < 1e-9);
                }
                Projection::BehindCamera => prop_assert!(false),
            }
        }

        #[test]
        fn zbuffer_is_permutation_invariant(seed in any::<u64>()) {
            let c = tilted_cam();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts: Vec<Point3> = (0..500)
                .map(|_| Point3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.3..0.3), rng.gen_range(1.0..3.0)))
                .collect();
            let a = render_zbuffer(&PointCloud::from_points(pts.clone()), &c);
            pts.reverse();
            pts.swap(3, 100);
            let b = render_zbuffer(&PointCloud::from_points(pts), &c);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn colorize_never_colors_behind_camera(z in -50.0f64..=0.0, x in -5.0f64..5.0) {
            let c = cam(640, 480);
            let img = RgbImage::filled(640, 480, ColorRgb8::WHITE);
            let out = colorize(&PointCloud::from_points(vec![Point3::new(x, 0.0, z)]), &img, &c).unwrap();
            prop_assert!(!out.colored[0]);
        }
    }
}
