//! Static-cloud color adaptation.
//!
//! The static cloud's colors are moved toward the current illumination seen
//! in the live dynamic cloud by matching CIELAB per-channel mean and standard
//! deviation. Statistics come only from overlap pairs (a static point and its
//! nearest dynamic neighbor within `l`). A global map is fitted on all pairs
//! and a local map on the pairs of each k-means cluster of static positions;
//! the two corrected colors are blended as `global + alpha·(local − global)`.

pub mod kmeans;

use serde::{Deserialize, Serialize};

use crate::cloud::{PointCloud, PointLabel};
use crate::color::{lab_to_srgb, srgb_slice_to_lab, ColorLab};
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::index::NeighborIndex;

pub use kmeans::{kmeans, Clustering};

/// Source standard deviations at or below this are treated as zero; the
/// channel is then only mean-shifted.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl ChannelStats {
    pub fn mean_lab(&self) -> ColorLab {
        ColorLab::from_array(self.mean)
    }

    /// Largest absolute difference over all six moments.
    pub fn max_abs_diff(&self, other: &ChannelStats) -> f64 {
        (0..3)
            .map(|c| {
                (self.mean[c] - other.mean[c])
                    .abs()
                    .max((self.std[c] - other.std[c]).abs())
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferParams {
    /// Overlap distance threshold in meters.
    pub l: f64,
    pub k: usize,
    /// Weight of the per-cluster correction in the final blend.
    pub alpha: f64,
    pub min_pairs: usize,
    pub kmeans_seed: u64,
    pub kmeans_max_iter: usize,
}

impl Default for TransferParams {
    fn default() -> Self {
        Self {
            l: 0.15,
            k: 16,
            alpha: 0.5,
            min_pairs: 100,
            kmeans_seed: 0,
            kmeans_max_iter: 100,
        }
    }
}

impl TransferParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::param("l must be positive"));
        }
        if self.k < 1 {
            return Err(Error::param("k must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::param("alpha must lie in [0, 1]"));
        }
        if self.min_pairs < 1 {
            return Err(Error::param("min_pairs must be at least 1"));
        }
        if self.kmeans_max_iter < 1 {
            return Err(Error::param("kmeans_max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapPair {
    pub static_id: usize,
    pub dynamic_id: usize,
    pub distance: f64,
}

/// One pair per static point that has a dynamic neighbor within `l`, sorted
/// by static id.
pub type OverlapPairs = Vec<OverlapPair>;

fn require_colors(cloud: &PointCloud, what: &str) -> Result<()> {
    if cloud.colors.is_none() {
        return Err(Error::param(format!("{what} cloud has no colors")));
    }
    Ok(())
}

/// Pairs each static point with its nearest dynamic point within `l` (ties
/// toward the lower dynamic id). Dynamic points labeled as moving are not
/// eligible.
pub fn find_overlap_pairs(static_cloud: &PointCloud, dynamic: &PointCloud, l: f64) -> Result<OverlapPairs> {
    require_colors(static_cloud, "static")?;
    require_colors(dynamic, "dynamic")?;
    overlap_pairs_for_points(&static_cloud.points, dynamic, l)
}

fn overlap_pairs_for_points(static_points: &[Point3], dynamic: &PointCloud, l: f64) -> Result<OverlapPairs> {
    let eligible: Vec<usize> = match &dynamic.labels {
        Some(labels) => (0..dynamic.len())
            .filter(|&i| labels[i] != PointLabel::Dynamic)
            .collect(),
        None => (0..dynamic.len()).collect(),
    };
    let pts: Vec<Point3> = eligible.iter().map(|&i| dynamic.points[i]).collect();
    let index = NeighborIndex::build(&pts, l)?;
    Ok(static_points
        .iter()
        .enumerate()
        .filter_map(|(s, p)| {
            index.nearest_within(p).map(|(j, distance)| OverlapPair {
                static_id: s,
                dynamic_id: eligible[j],
                distance,
            })
        })
        .collect())
}

fn stats_over(labs: &[ColorLab], ids: impl IntoIterator<Item = usize>) -> Result<ChannelStats> {
    // Welford's single-pass update.
    let mut n = 0usize;
    let mut mean = [0.0f64; 3];
    let mut m2 = [0.0f64; 3];
    for i in ids {
        n += 1;
        let v = labs[i].to_array();
        for c in 0..3 {
            let delta = v[c] - mean[c];
            mean[c] += delta / n as f64;
            m2[c] += delta * (v[c] - mean[c]);
        }
    }
    if n == 0 {
        return Err(Error::InsufficientSamples { required: 1, got: 0 });
    }
    Ok(ChannelStats {
        mean,
        std: m2.map(|s| (s / n as f64).max(0.0).sqrt()),
    })
}

/// Population mean and standard deviation of the selected points' Lab colors.
pub fn lab_stats(cloud: &PointCloud, ids: &[usize]) -> Result<ChannelStats> {
    require_colors(cloud, "input")?;
    if ids.is_empty() {
        return Err(Error::InsufficientSamples { required: 1, got: 0 });
    }
    let colors = cloud.colors.as_ref().unwrap();
    let labs: Vec<ColorLab> = ids.iter().map(|&i| crate::color::srgb_to_lab(colors[i])).collect();
    stats_over(&labs, 0..labs.len())
}

/// Lab statistics of an explicit color list.
pub fn lab_stats_of(labs: &[ColorLab]) -> Result<ChannelStats> {
    stats_over(labs, 0..labs.len())
}

/// Per-channel affine map taking `src` moments to `dst` moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentMap {
    scale: [f64; 3],
    src_mean: [f64; 3],
    dst_mean: [f64; 3],
}

impl MomentMap {
    pub fn new(src: &ChannelStats, dst: &ChannelStats) -> Self {
        let scale = std::array::from_fn(|c| {
            if src.std[c] <= STD_FLOOR {
                1.0
            } else {
                dst.std[c] / src.std[c]
            }
        });
        Self {
            scale,
            src_mean: src.mean,
            dst_mean: dst.mean,
        }
    }

    #[inline]
    pub fn apply(&self, c: ColorLab) -> ColorLab {
        let v = c.to_array();
        ColorLab::from_array(std::array::from_fn(|i| {
            (v[i] - self.src_mean[i]) * self.scale[i] + self.dst_mean[i]
        }))
    }
}

pub fn global_transfer(colors: &[ColorLab], src: &ChannelStats, dst: &ChannelStats) -> Vec<ColorLab> {
    let map = MomentMap::new(src, dst);
    colors.iter().map(|&c| map.apply(c)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub points: usize,
    pub pairs: usize,
    /// Whether the cluster had enough pairs for its own correction.
    pub local: bool,
    pub source: Option<ChannelStats>,
    pub target: Option<ChannelStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub pair_count: usize,
    pub params: TransferParams,
    /// Static pair members before transfer.
    pub before: ChannelStats,
    /// Static pair members after transfer (pre-quantization).
    pub after: ChannelStats,
    /// Dynamic pair members.
    pub target: ChannelStats,
    pub clusters: Vec<ClusterReport>,
    pub kmeans_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabTransfer {
    pub lab: Vec<ColorLab>,
    pub pairs: OverlapPairs,
    pub assignment: Vec<usize>,
    pub report: TransferReport,
}

/// Transfers colors for static points given directly in Lab. Re-applying
/// with the output colors against the same dynamic cloud is a fixed point
/// when `alpha` is 0 or 1 (or `k` = 1) and every cluster gets its own
/// correction.
pub fn transfer_lab(
    static_points: &[Point3],
    static_lab: &[ColorLab],
    dynamic: &PointCloud,
    params: &TransferParams,
) -> Result<LabTransfer> {
    params.validate()?;
    if static_points.len() != static_lab.len() {
        return Err(Error::param("static positions and colors differ in length"));
    }
    require_colors(dynamic, "dynamic")?;
    let pairs = overlap_pairs_for_points(static_points, dynamic, params.l)?;
    if pairs.len() < params.min_pairs {
        return Err(Error::InsufficientOverlap {
            pairs: pairs.len(),
            required: params.min_pairs,
        });
    }
    let dyn_lab = srgb_slice_to_lab(dynamic.colors.as_ref().unwrap());

    let src = stats_over(static_lab, pairs.iter().map(|p| p.static_id))?;
    let dst = stats_over(&dyn_lab, pairs.iter().map(|p| p.dynamic_id))?;
    let global = MomentMap::new(&src, &dst);

    let clustering = kmeans(static_points, params.k, params.kmeans_seed, params.kmeans_max_iter)?;
    let k = clustering.k();
    let mut cluster_pairs: Vec<Vec<&OverlapPair>> = vec![Vec::new(); k];
    for p in &pairs {
        cluster_pairs[clustering.assignment[p.static_id]].push(p);
    }
    let mut cluster_points = vec![0usize; k];
    for &c in &clustering.assignment {
        cluster_points[c] += 1;
    }

    let mut local_maps: Vec<Option<MomentMap>> = Vec::with_capacity(k);
    let mut clusters = Vec::with_capacity(k);
    for (c, cp) in cluster_pairs.iter().enumerate() {
        if cp.len() >= params.min_pairs {
            let s = stats_over(static_lab, cp.iter().map(|p| p.static_id))?;
            let d = stats_over(&dyn_lab, cp.iter().map(|p| p.dynamic_id))?;
            local_maps.push(Some(MomentMap::new(&s, &d)));
            clusters.push(ClusterReport {
                points: cluster_points[c],
                pairs: cp.len(),
                local: true,
                source: Some(s),
                target: Some(d),
            });
        } else {
            local_maps.push(None);
            clusters.push(ClusterReport {
                points: cluster_points[c],
                pairs: cp.len(),
                local: false,
                source: None,
                target: None,
            });
        }
    }

    let alpha = params.alpha;
    let lab: Vec<ColorLab> = static_lab
        .iter()
        .zip(&clustering.assignment)
        .map(|(&c, &cl)| {
            let g = global.apply(c);
            match &local_maps[cl] {
                Some(m) if alpha != 0.0 => {
                    let loc = m.apply(c);
                    let (ga, la) = (g.to_array(), loc.to_array());
                    ColorLab::from_array(std::array::from_fn(|i| ga[i] + alpha * (la[i] - ga[i])))
                }
                _ => g,
            }
        })
        .collect();

    let after = stats_over(&lab, pairs.iter().map(|p| p.static_id))?;
    let report = TransferReport {
        pair_count: pairs.len(),
        params: *params,
        before: src,
        after,
        target: dst,
        clusters,
        kmeans_iterations: clustering.iterations,
    };
    Ok(LabTransfer {
        lab,
        pairs,
        assignment: clustering.assignment,
        report,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transferred {
    /// Static cloud with quantized sRGB colors; geometry untouched.
    pub cloud: PointCloud,
    /// Transferred colors before sRGB quantization.
    pub lab: Vec<ColorLab>,
    pub report: TransferReport,
}

pub fn transfer_colors(static_cloud: &PointCloud, dynamic: &PointCloud, params: &TransferParams) -> Result<Transferred> {
    require_colors(static_cloud, "static")?;
    let static_lab = srgb_slice_to_lab(static_cloud.colors.as_ref().unwrap());
    let out = transfer_lab(&static_cloud.points, &static_lab, dynamic, params)?;
    let mut cloud = static_cloud.clone();
    cloud.colors = Some(out.lab.iter().map(|&c| lab_to_srgb(c)).collect());
    Ok(Transferred {
        cloud,
        lab: out.lab,
        report: out.report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::{srgb_to_lab, ColorRgb8};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> PointCloud {
        let pts = (0..n)
            .map(|_| Point3::new(rng.gen_range(0.0..extent), rng.gen_range(0.0..extent), rng.gen_range(0.0..extent)))
            .collect();
        let cols = (0..n).map(|_| ColorRgb8::new(rng.gen(), rng.gen(), rng.gen())).collect();
        PointCloud::with_colors(pts, cols).unwrap()
    }

    #[test]
    fn identical_clouds_pair_with_themselves() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = random_cloud(&mut rng, 200, 3.0);
        let pairs = find_overlap_pairs(&c, &c, 1e-3).unwrap();
        assert_eq!(pairs.len(), 200);
        for (i, p) in pairs.iter().enumerate() {
            assert_eq!((p.static_id, p.dynamic_id, p.distance), (i, i, 0.0));
        }
    }

    #[test]
    fn distant_clouds_do_not_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_cloud(&mut rng, 100, 1.0);
        let mut b = random_cloud(&mut rng, 100, 1.0);
        for p in &mut b.points {
            p.x += 10.0;
        }
        assert!(find_overlap_pairs(&a, &b, 1.0).unwrap().is_empty());
    }

    #[test]
    fn pairs_match_brute_force_nearest_neighbor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_cloud(&mut rng, 500, 4.0);
        let d = random_cloud(&mut rng, 500, 4.0);
        let pairs = find_overlap_pairs(&s, &d, 0.3).unwrap();
        let mut want = Vec::new();
        for (i, p) in s.points.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for (j, q) in d.points.iter().enumerate() {
                let dist = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2)).sqrt();
                if dist <= 0.3 && best.is_none_or(|(_, bd)| dist < bd) {
                    best = Some((j, dist));
                }
            }
            if let Some((j, dist)) = best {
                want.push((i, j, dist));
            }
        }
        assert!(want.len() > 50);
        assert_eq!(pairs.len(), want.len());
        for (p, w) in pairs.iter().zip(&want) {
            assert_eq!((p.static_id, p.dynamic_id), (w.0, w.1));
            assert!((p.distance - w.2).abs() < 1e-12);
            assert!(p.distance <= 0.3);
        }
    }

    #[test]
    fn moving_points_are_not_paired() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_cloud(&mut rng, 50, 1.0);
        let mut d = s.clone();
        d.labels = Some(vec![PointLabel::Dynamic; 50]);
        assert!(find_overlap_pairs(&s, &d, 0.01).unwrap().is_empty());
        assert!(find_overlap_pairs(&PointCloud::from_points(vec![]), &d, 0.1).is_err());
    }

    #[test]
    fn stats_single_point_and_gray_endpoints() {
        let c = PointCloud::with_colors(
            vec![Point3::origin(), Point3::origin()],
            vec![ColorRgb8::BLACK, ColorRgb8::WHITE],
        )
        .unwrap();
        let one = lab_stats(&c, &[1]).unwrap();
        assert_eq!(one.std, [0.0; 3]);
        let both = lab_stats(&c, &[0, 1]).unwrap();
        assert!((both.mean[0] - 50.0).abs() < 1e-9);
        assert!((both.std[0] - 50.0).abs() < 1e-9);
        assert!(both.mean[1].abs() < 1e-9 && both.mean[2].abs() < 1e-9);
        assert!(matches!(lab_stats(&c, &[]), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn stats_match_two_pass_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = random_cloud(&mut rng, 1_000, 1.0);
        let ids: Vec<usize> = (0..1_000).collect();
        let got = lab_stats(&c, &ids).unwrap();
        let labs: Vec<[f64; 3]> = c.colors.as_ref().unwrap().iter().map(|&x| srgb_to_lab(x).to_array()).collect();
        for ch in 0..3 {
            let mean = labs.iter().map(|v| v[ch]).sum::<f64>() / 1000.0;
            let var = labs.iter().map(|v| (v[ch] - mean).powi(2)).sum::<f64>() / 1000.0;
            assert!((got.mean[ch] - mean).abs() < 1e-9);
            assert!((got.std[ch] - var.sqrt()).abs() < 1e-9);
        }
    }

    fn stats(mean: [f64; 3], std: [f64; 3]) -> ChannelStats {
        ChannelStats { mean, std }
    }

    #[test]
    fn affine_substitution() {
        let src = stats([10.0, 0.0, 0.0], [2.0, 1.0, 1.0]);
        let dst = stats([20.0, 0.0, 0.0], [4.0, 1.0, 1.0]);
        let out = global_transfer(&[ColorLab::new(12.0, 0.0, 0.0)], &src, &dst);
        assert_eq!(out[0].l, 24.0);
        let out = global_transfer(&[src.mean_lab()], &src, &dst);
        assert_eq!(out[0], dst.mean_lab());
    }

    #[test]
    fn equal_stats_are_identity() {
        let s = stats([41.0, -3.5, 12.25], [7.0, 2.0, 0.5]);
        let cols = vec![ColorLab::new(1.0, 2.0, 3.0), ColorLab::new(99.0, -50.0, 70.0)];
        let out = global_transfer(&cols, &s, &s);
        for (a, b) in out.iter().zip(&cols) {
            for (x, y) in a.to_array().iter().zip(b.to_array()) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_source_std_is_mean_shift() {
        let src = stats([50.0, 0.0, 0.0], [0.0, 1e-7, 1.0]);
        let dst = stats([60.0, 5.0, 0.0], [3.0, 3.0, 1.0]);
        let out = global_transfer(&[ColorLab::new(50.0, 1.0, 0.0)], &src, &dst);
        assert_eq!(out[0].l, 60.0);
        assert_eq!(out[0].a, 6.0);
    }

    proptest! {
        #[test]
        fn global_transfer_matches_moments_and_preserves_rank(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cols: Vec<ColorLab> = (0..200)
                .map(|_| ColorLab::new(rng.gen_range(0.0..100.0), rng.gen_range(-80.0..80.0), rng.gen_range(-80.0..80.0)))
                .collect();
            let src = lab_stats_of(&cols).unwrap();
            let dst = stats(
                [rng.gen_range(0.0..100.0), rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)],
                [rng.gen_range(0.5..30.0), rng.gen_range(0.5..30.0), rng.gen_range(0.5..30.0)],
            );
            let out = global_transfer(&cols, &src, &dst);
            prop_assert!(lab_stats_of(&out).unwrap().max_abs_diff(&dst) < 1e-6);
            for ch in 0..3 {
                for i in 1..cols.len() {
                    let (a, b) = (cols[i - 1].to_array()[ch], cols[i].to_array()[ch]);
                    let (oa, ob) = (out[i - 1].to_array()[ch], out[i].to_array()[ch]);
                    prop_assert_eq!(a.partial_cmp(&b), oa.partial_cmp(&ob));
                }
            }
        }
    }

    /// Static and dynamic clouds on the same sample points, dynamic colors
    /// darkened and tinted.
    fn scene_pair(rng: &mut ChaCha8Rng, n: usize) -> (PointCloud, PointCloud) {
        let s = random_cloud(rng, n, 5.0);
        let mut d = s.clone();
        for c in d.colors.as_mut().unwrap() {
            c.r = (c.r as f64 * 0.7) as u8;
            c.g = (c.g as f64 * 0.8 + 10.0) as u8;
        }
        (s, d)
    }

    #[test]
    fn insufficient_overlap_reports_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (s, d) = scene_pair(&mut rng, 50);
        let p = TransferParams { min_pairs: 51, ..Default::default() };
        match transfer_colors(&s, &d, &p) {
            Err(Error::InsufficientOverlap { pairs, required }) => assert_eq!((pairs, required), (50, 51)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn alpha_zero_and_single_cluster_equal_global() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (s, d) = scene_pair(&mut rng, 3_000);
        let base = TransferParams { l: 0.05, min_pairs: 50, ..Default::default() };
        let global = {
            let p = TransferParams { k: 1, alpha: 0.0, ..base };
            transfer_colors(&s, &d, &p).unwrap().lab
        };
        for p in [
            TransferParams { k: 1, alpha: 0.7, ..base },
            TransferParams { k: 1, alpha: 1.0, ..base },
            TransferParams { k: 8, alpha: 0.0, ..base },
        ] {
            let lab = transfer_colors(&s, &d, &p).unwrap().lab;
            for (a, b) in lab.iter().zip(&global) {
                for (x, y) in a.to_array().iter().zip(b.to_array()) {
                    assert!((x - y).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn pairs_take_on_dynamic_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (s, d) = scene_pair(&mut rng, 2_000);
        let p = TransferParams { l: 0.05, k: 4, alpha: 1.0, min_pairs: 50, ..Default::default() };
        let out = transfer_colors(&s, &d, &p).unwrap();
        assert!(out.report.after.max_abs_diff(&out.report.target) < 1e-6);
        assert_eq!(out.report.clusters.iter().map(|c| c.pairs).sum::<usize>(), out.report.pair_count);
        assert_eq!(out.cloud.points, s.points);
    }

    #[test]
    fn reapplying_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (s, d) = scene_pair(&mut rng, 2_000);
        for p in [
            TransferParams { l: 0.05, k: 4, alpha: 1.0, min_pairs: 50, ..Default::default() },
            TransferParams { l: 0.05, k: 4, alpha: 0.0, min_pairs: 50, ..Default::default() },
            TransferParams { l: 0.05, k: 1, alpha: 0.5, min_pairs: 50, ..Default::default() },
        ] {
            let lab0 = srgb_slice_to_lab(s.colors.as_ref().unwrap());
            let once = transfer_lab(&s.points, &lab0, &d, &p).unwrap();
            let twice = transfer_lab(&s.points, &once.lab, &d, &p).unwrap();
            for (a, b) in once.lab.iter().zip(&twice.lab) {
                for (x, y) in a.to_array().iter().zip(b.to_array()) {
                    assert!((x - y).abs() < 1e-6, "{p:?}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (s, d) = scene_pair(&mut rng, 100);
        for p in [
            TransferParams { l: 0.0, ..Default::default() },
            TransferParams { k: 0, ..Default::default() },
            TransferParams { alpha: 1.5, ..Default::default() },
        ] {
            assert!(matches!(transfer_colors(&s, &d, &p), Err(Error::Param(_))));
        }
        let p = TransferParams { k: 101, l: 0.01, min_pairs: 1, ..Default::default() };
        assert!(matches!(transfer_colors(&s, &d, &p), Err(Error::Param(_))));
    }
}
