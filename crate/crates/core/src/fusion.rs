//! Flicker suppression over a three-scan window and occlusion culling by
//! depth consistency.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::cloud::{PointCloud, PointLabel};
use crate::error::{Error, Result};
use crate::image::{DepthImage, RgbImage};
use crate::projection::{render_zbuffer, SensorModel};

/// Number of scans (one per LiDAR in the unit) fused per output frame.
pub const WINDOW_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionParams {
    /// Max-channel absolute difference (8-bit units) above which a pixel is
    /// dynamic.
    pub diff_threshold: u8,
    /// Chebyshev radius of the dilation applied to the raw mask.
    pub dilation_radius: usize,
    /// Depth margin (m) a point may sit behind the z-buffer and survive.
    pub occlusion_margin: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            diff_threshold: 25,
            dilation_radius: 2,
            occlusion_margin: 0.10,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.occlusion_margin > 0.0 && self.occlusion_margin.is_finite()) {
            return Err(Error::param("occlusion_margin must be positive"));
        }
        Ok(())
    }
}

/// Per-pixel motion flags, `true` = dynamic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotionMask {
    pub width: usize,
    pub height: usize,
    pub dynamic: Vec<bool>,
}

impl MotionMask {
    pub fn all(width: usize, height: usize, dynamic: bool) -> Self {
        Self {
            width,
            height,
            dynamic: vec![dynamic; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.dynamic[y * self.width + x]
    }

    pub fn dynamic_count(&self) -> usize {
        self.dynamic.iter().filter(|&&d| d).count()
    }
}

pub fn motion_mask(prev: &RgbImage, curr: &RgbImage, params: &FusionParams) -> Result<MotionMask> {
    if prev.dims() != curr.dims() {
        return Err(Error::param(format!(
            "frame sizes differ: {:?} vs {:?}",
            prev.dims(),
            curr.dims()
        )));
    }
    let (w, h) = curr.dims();
    let raw: Vec<bool> = prev
        .pixels
        .iter()
        .zip(&curr.pixels)
        .map(|(a, b)| {
            let d = a.r.abs_diff(b.r).max(a.g.abs_diff(b.g)).max(a.b.abs_diff(b.b));
            d > params.diff_threshold
        })
        .collect();
    let r = params.dilation_radius;
    if r == 0 {
        return Ok(MotionMask {
            width: w,
            height: h,
            dynamic: raw,
        });
    }
    // Square dilation is separable: horizontal pass, then vertical.
    let mut horiz = vec![false; w * h];
    for y in 0..h {
        let row = &raw[y * w..(y + 1) * w];
        let mut last_set: Option<usize> = None;
        let mut next_set = vec![usize::MAX; w];
        let mut nxt = usize::MAX;
        for x in (0..w).rev() {
            if row[x] {
                nxt = x;
            }
            next_set[x] = nxt;
        }
        for x in 0..w {
            if row[x] {
                last_set = Some(x);
            }
            let left = last_set.is_some_and(|l| x - l <= r);
            let right = next_set[x] != usize::MAX && next_set[x] - x <= r;
            horiz[y * w + x] = left || right;
        }
    }
    let mut out = vec![false; w * h];
    for x in 0..w {
        let mut last_set: Option<usize> = None;
        let mut next_set = vec![usize::MAX; h];
        let mut nxt = usize::MAX;
        for y in (0..h).rev() {
            if horiz[y * w + x] {
                nxt = y;
            }
            next_set[y] = nxt;
        }
        for y in 0..h {
            if horiz[y * w + x] {
                last_set = Some(y);
            }
            let up = last_set.is_some_and(|l| y - l <= r);
            let down = next_set[y] != usize::MAX && next_set[y] - y <= r;
            out[y * w + x] = up || down;
        }
    }
    Ok(MotionMask {
        width: w,
        height: h,
        dynamic: out,
    })
}

/// Partition of a scan's point ids by motion label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Classification {
    pub static_ids: Vec<usize>,
    pub dynamic_ids: Vec<usize>,
    pub unobserved_ids: Vec<usize>,
}

pub fn point_labels(scan: &PointCloud, mask: &MotionMask, cam: &SensorModel) -> Result<Vec<PointLabel>> {
    if (mask.width, mask.height) != cam.dims() {
        return Err(Error::param("motion mask does not match camera dimensions"));
    }
    Ok(scan
        .points
        .iter()
        .map(|p| match cam.pixel_and_depth(p) {
            None => PointLabel::Unobserved,
            Some((x, y, _)) if mask.get(x, y) => PointLabel::Dynamic,
            Some(_) => PointLabel::Static,
        })
        .collect())
}

pub fn classify_points(scan: &PointCloud, mask: &MotionMask, cam: &SensorModel) -> Result<Classification> {
    let mut out = Classification::default();
    for (i, label) in point_labels(scan, mask, cam)?.into_iter().enumerate() {
        match label {
            PointLabel::Static => out.static_ids.push(i),
            PointLabel::Dynamic => out.dynamic_ids.push(i),
            PointLabel::Unobserved => out.unobserved_ids.push(i),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanEntry {
    pub cloud: PointCloud,
    pub timestamp_ns: u64,
    pub sensor_id: u8,
}

/// The latest scans, oldest first; at most one per sensor and at most
/// [`WINDOW_LEN`] in total.
#[derive(Debug, Clone, Default)]
pub struct ScanWindow {
    entries: VecDeque<ScanEntry>,
}

impl ScanWindow {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a scan, evicting any older scan from the same sensor and then
    /// the oldest scan if the window is over capacity. Timestamps must be
    /// strictly increasing.
    pub fn push(&mut self, entry: ScanEntry) -> Result<()> {
        if let Some(last) = self.entries.back() {
            if entry.timestamp_ns <= last.timestamp_ns {
                return Err(Error::param(format!(
                    "scan timestamp {} not after {}",
                    entry.timestamp_ns, last.timestamp_ns
                )));
            }
        }
        self.entries.retain(|e| e.sensor_id != entry.sensor_id);
        self.entries.push_back(entry);
        while self.entries.len() > WINDOW_LEN {
            self.entries.pop_front();
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &ScanEntry> {
        self.entries.iter()
    }

    pub fn newest(&self) -> Option<&ScanEntry> {
        self.entries.back()
    }
}

/// Fuses the window: static points from every scan, plus the dynamic and
/// unobserved points of the newest scan only. `masks[i]` and `cams[i]`
/// belong to the i-th window entry (oldest first). Output order is window
/// order, then point order; each point carries its label, sensor id and
/// capture time.
pub fn fuse_window(window: &ScanWindow, masks: &[MotionMask], cams: &[SensorModel]) -> Result<PointCloud> {
    if window.is_empty() {
        return Err(Error::param("cannot fuse an empty scan window"));
    }
    if masks.len() != window.len() || cams.len() != window.len() {
        return Err(Error::param(format!(
            "window has {} scans but {} masks and {} cameras",
            window.len(),
            masks.len(),
            cams.len()
        )));
    }
    let labels = window
        .entries()
        .enumerate()
        .map(|(i, entry)| point_labels(&entry.cloud, &masks[i], &cams[i]))
        .collect::<Result<Vec<_>>>()?;
    fuse_labeled(window, &labels)
}

/// [`fuse_window`] with the per-scan labels already computed.
pub fn fuse_labeled(window: &ScanWindow, scan_labels: &[Vec<PointLabel>]) -> Result<PointCloud> {
    if window.is_empty() {
        return Err(Error::param("cannot fuse an empty scan window"));
    }
    if scan_labels.len() != window.len() {
        return Err(Error::param(format!("window has {} scans but {} label sets", window.len(), scan_labels.len())));
    }
    let newest = window.len() - 1;
    let mut points = Vec::new();
    let mut colors = Vec::new();
    let mut keep_colors = true;
    let mut sensor_id = Vec::new();
    let mut timestamp_ns = Vec::new();
    let mut labels = Vec::new();
    for (i, entry) in window.entries().enumerate() {
        let scan_labels = &scan_labels[i];
        if scan_labels.len() != entry.cloud.len() {
            return Err(Error::param("label count does not match scan size"));
        }
        keep_colors &= entry.cloud.colors.is_some();
        for (j, &label) in scan_labels.iter().enumerate() {
            if i != newest && label != PointLabel::Static {
                continue;
            }
            points.push(entry.cloud.points[j]);
            if let Some(c) = &entry.cloud.colors {
                colors.push(c[j]);
            }
            sensor_id.push(entry.cloud.sensor_id.as_ref().map_or(entry.sensor_id, |s| s[j]));
            timestamp_ns.push(
                entry.cloud.timestamp_ns.as_ref().map_or(entry.timestamp_ns, |t| t[j]),
            );
            labels.push(label);
        }
    }
    Ok(PointCloud {
        points,
        colors: keep_colors.then_some(colors),
        sensor_id: Some(sensor_id),
        timestamp_ns: Some(timestamp_ns),
        labels: Some(labels),
    })
}

/// Per-point survival flags for [`occlusion_cull`].
pub fn occlusion_keep_mask(cloud: &PointCloud, cam: &SensorModel, margin: f64) -> Result<Vec<bool>> {
    if !(margin > 0.0) {
        return Err(Error::param(format!("occlusion margin must be positive, got {margin}")));
    }
    Ok(keep_against(cloud, cam, &render_zbuffer(cloud, cam), margin))
}

/// Survival flags against an already rendered z-buffer of `cloud`.
pub(crate) fn keep_against(cloud: &PointCloud, cam: &SensorModel, zbuf: &DepthImage, margin: f64) -> Vec<bool> {
    cloud
        .points
        .iter()
        .map(|p| match cam.pixel_and_depth(p) {
            Some((x, y, z)) => z - zbuf.get(x, y) <= margin,
            None => false,
        })
        .collect()
}

/// Drops points lying more than `margin` behind the nearest surface seen
/// through the same camera pixel, and points the camera cannot see at all.
pub fn occlusion_cull(cloud: &PointCloud, cam: &SensorModel, margin: f64) -> Result<PointCloud> {
    let keep = occlusion_keep_mask(cloud, cam, margin)?;
    let ids: Vec<usize> = (0..keep.len()).filter(|&i| keep[i]).collect();
    Ok(cloud.select(&ids))
}
