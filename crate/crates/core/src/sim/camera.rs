use rayon::prelude::*;

use crate::color::ColorRgb8;
use crate::geom::Vec3;
use crate::image::{DepthImage, RgbImage};
use crate::projection::{SensorModel, Z_NEAR};
use crate::sim::scene::Scene;

/// Casts one ray through each pixel center with the scene posed at `t`;
/// returns the hit color and camera depth per pixel.
fn cast(scene: &Scene, cam: &SensorModel, t: f64) -> Vec<Option<(ColorRgb8, f64)>> {
    let k = &cam.intrinsics;
    let to_world = cam.pose.inverse();
    let origin = to_world.center();
    (0..k.height)
        .into_par_iter()
        .flat_map_iter(|y| {
            let to_world = &to_world;
            (0..k.width).map(move |x| {
                // Camera-frame direction with unit z, so the ray parameter is depth.
                let d_cam = Vec3::new((x as f64 - k.cx) / k.fx, (y as f64 - k.cy) / k.fy, 1.0);
                let d = to_world.apply_vector(&d_cam);
                scene.intersect(&origin, &d, Z_NEAR, f64::INFINITY, t).map(|hit| {
                    let p = origin + d * hit.t;
                    (scene.primitives[hit.primitive].color_at(&p, t), hit.t)
                })
            })
        })
        .collect()
}

/// Ideal pinhole render with flat primitive colors on a black background.
pub fn camera_frame(scene: &Scene, cam: &SensorModel, t: f64) -> RgbImage {
    let (w, h) = cam.dims();
    let pixels = cast(scene, cam, t)
        .into_iter()
        .map(|c| c.map_or(ColorRgb8::BLACK, |(c, _)| c))
        .collect();
    RgbImage::from_pixels(w, h, pixels).expect("one color per pixel")
}

/// True per-pixel depth of the same render; 0 where nothing is hit.
pub fn camera_depth(scene: &Scene, cam: &SensorModel, t: f64) -> DepthImage {
    let (w, h) = cam.dims();
    let depth = cast(scene, cam, t).into_iter().map(|c| c.map_or(0.0, |(_, z)| z)).collect();
    DepthImage::from_values(w, h, depth).expect("one depth per pixel")
}
