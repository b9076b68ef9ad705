//! RGB-guided joint bilateral upsampling of sparse depth.
//!
//! For every output pixel `p`:
//!
//! ```text
//! D(p) = Σ_q w_s(|p−q|) · w_r(|I(p)−I(q)|) · D(q)  /  Σ_q w_s · w_r
//! ```
//!
//! over valid samples `q` in the square window of radius `window_radius`,
//! with Gaussian spatial and range kernels. Pixels whose weight sum falls
//! below `min_weight` stay invalid. Only valid samples contribute, so the
//! filter walks per-row sample lists instead of scanning whole windows;
//! summation order is row-major within the window, and the result does not
//! depend on how rows are scheduled across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::color::ColorRgb8;
use crate::error::{Error, Result};
use crate::image::{DepthImage, RgbImage};
use crate::projection::{render_zbuffer, SensorModel};
use crate::stream::frame::RgbdFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BilateralParams {
    pub sigma_spatial: f64,
    /// Range sigma in 8-bit RGB units; `f64::INFINITY` disables the guide.
    pub sigma_range: f64,
    pub window_radius: usize,
    pub min_weight: f64,
}

impl Default for BilateralParams {
    fn default() -> Self {
        Self {
            sigma_spatial: 4.0,
            sigma_range: 20.0,
            window_radius: 8,
            min_weight: 1e-4,
        }
    }
}

impl BilateralParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_spatial > 0.0 && self.sigma_spatial.is_finite()) {
            return Err(Error::param("sigma_spatial must be positive"));
        }
        if !(self.sigma_range > 0.0) {
            return Err(Error::param("sigma_range must be positive"));
        }
        if self.window_radius < 1 {
            return Err(Error::param("window_radius must be at least 1"));
        }
        if !(self.min_weight >= 0.0) {
            return Err(Error::param("min_weight must be non-negative"));
        }
        Ok(())
    }
}

pub fn joint_bilateral_upsample(
    sparse: &DepthImage,
    guide: &RgbImage,
    params: &BilateralParams,
) -> Result<DepthImage> {
    params.validate()?;
    if sparse.dims() != guide.dims() {
        return Err(Error::param(format!(
            "sparse depth {:?} and guide {:?} differ in size",
            sparse.dims(),
            guide.dims()
        )));
    }
    let (w, h) = sparse.dims();
    let r = params.window_radius as isize;
    let side = 2 * params.window_radius + 1;

    let spatial: Vec<f64> = {
        let inv = -1.0 / (2.0 * params.sigma_spatial * params.sigma_spatial);
        let mut k = Vec::with_capacity(side * side);
        for dy in -r..=r {
            for dx in -r..=r {
                k.push(((dx * dx + dy * dy) as f64 * inv).exp());
            }
        }
        k
    };
    // The range kernel factors over channels, so a 256-entry table per
    // absolute channel difference covers it.
    let range: [f64; 256] = if params.sigma_range.is_finite() {
        let inv = -1.0 / (2.0 * params.sigma_range * params.sigma_range);
        std::array::from_fn(|d| ((d * d) as f64 * inv).exp())
    } else {
        [1.0; 256]
    };

    // Valid samples per row, as (column, depth, guide color).
    let samples: Vec<Vec<(usize, f64, ColorRgb8)>> = (0..h)
        .map(|y| {
            (0..w)
                .filter_map(|x| {
                    let d = sparse.depth[y * w + x];
                    (d > 0.0).then(|| (x, d, guide.pixels[y * w + x]))
                })
                .collect()
        })
        .collect();

    let rad = params.window_radius;
    let mut out = vec![0.0f64; w * h];
    out.par_chunks_mut(w.max(1)).enumerate().for_each(|(y, out_row)| {
        let centre = &guide.pixels[y * w..][..w];
        // Depths are accumulated relative to the first sample reaching each
        // pixel, so a window of equal depths reproduces that depth exactly.
        // NaN marks pixels no sample has reached yet.
        let mut base = vec![f64::NAN; w];
        let mut num = vec![0.0f64; w];
        let mut den = vec![0.0f64; w];
        // Each sample is spread over the pixels of this row whose window
        // holds it. Samples arrive in raster order, so every pixel sums its
        // window row-major, as a per-pixel gather would.
        for qy in y.saturating_sub(rad)..=(y + rad).min(h - 1) {
            let krow = &spatial[(qy + rad - y) * side..][..side];
            for &(qx, dq, c) in &samples[qy] {
                let lo = qx.saturating_sub(rad);
                let hi = (qx + rad).min(w - 1);
                let ks = &krow[lo + rad - qx..=hi + rad - qx];
                let cells = base[lo..=hi].iter_mut().zip(&mut num[lo..=hi]).zip(&mut den[lo..=hi]);
                // The spatial kernel is symmetric, so indexing it by p−q
                // gives the weight of q−p.
                for ((((b, n), d), &ws), gp) in cells.zip(ks).zip(&centre[lo..=hi]) {
                    if b.is_nan() {
                        *b = dq;
                    }
                    let wt = ws
                        * range[gp.r.abs_diff(c.r) as usize]
                        * range[gp.g.abs_diff(c.g) as usize]
                        * range[gp.b.abs_diff(c.b) as usize];
                    *n += wt * (dq - *b);
                    *d += wt;
                }
            }
        }
        for (x, slot) in out_row.iter_mut().enumerate() {
            let d = den[x];
            *slot = if !base[x].is_nan() && d >= params.min_weight && d > 0.0 { base[x] + num[x] / d } else { 0.0 };
        }
    });
    Ok(DepthImage {
        width: w,
        height: h,
        depth: out,
    })
}

/// Projects `cloud` into the camera, densifies it under `rgb`, and packages
/// the result as a frame stamped with the cloud's newest capture time.
pub fn densify_frame(
    cloud: &PointCloud,
    rgb: &RgbImage,
    cam: &SensorModel,
    params: &BilateralParams,
) -> Result<RgbdFrame> {
    if rgb.dims() != cam.dims() {
        return Err(Error::param("rgb image does not match camera dimensions"));
    }
    let sparse = render_zbuffer(cloud, cam);
    let dense = joint_bilateral_upsample(&sparse, rgb, params)?;
    RgbdFrame::new(rgb.clone(), dense, cloud.max_timestamp().unwrap_or(0), 0, 0)
}
