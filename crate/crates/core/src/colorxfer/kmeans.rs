//! Seeded Lloyd k-means over 3D positions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{Point3, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Point3>,
    pub iterations: usize,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Sum of squared distances from points to their centroids.
    pub fn inertia(&self, points: &[Point3]) -> f64 {
        points
            .iter()
            .zip(&self.assignment)
            .map(|(p, &c)| (p - self.centroids[c]).norm_squared())
            .sum()
    }
}

#[inline]
fn nearest(p: &Point3, centroids: &[Point3]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d2 = (p - c).norm_squared();
        if d2 < best.1 {
            best = (j, d2);
        }
    }
    best
}

fn kmeans_pp(points: &[Point3], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point3> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)]);
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| (p - centroids[0]).norm_squared())
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // Every point coincides with a centroid already; any choice works.
            rng.gen_range(0..n)
        };
        let c = points[next];
        centroids.push(c);
        for (di, p) in d2.iter_mut().zip(points) {
            *di = di.min((p - c).norm_squared());
        }
    }
    centroids
}

/// Partitions `points` into `k` clusters with k-means++ seeding and Lloyd
/// iterations. Stops at an assignment fixpoint or after `max_iter` updates.
/// A cluster that empties is re-seeded at the point farthest from its
/// current centroid. Deterministic for a given `seed`.
pub fn kmeans(points: &[Point3], k: usize, seed: u64, max_iter: usize) -> Result<Clustering> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if k > points.len() {
        return Err(Error::param(format!(
            "k = {k} exceeds the {} available points",
            points.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp(points, k, &mut rng);
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;
        let mut sums = vec![Vec3::zeros(); k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignment) {
            sums[c] += p.coords;
            counts[c] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = Point3::from(sums[j] / counts[j] as f64);
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                let (far, _) = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, (p - centroids[assignment[i]]).norm_squared()))
                    .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
                centroids[j] = points[far];
                assignment[far] = j;
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }

    Ok(Clustering {
        assignment,
        centroids,
        iterations,
    })
}
