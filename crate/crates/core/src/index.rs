//! Uniform voxel-hash index for fixed-radius neighbor queries.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geom::Point3;

type CellKey = [i64; 3];

/// Immutable radius index; cell edge equals the query radius so every
/// neighbor lies in the 27 cells around the query.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Vec<Point3>,
    radius: f64,
    inv_cell: f64,
    cells: HashMap<CellKey, Vec<u32>>,
}

impl NeighborIndex {
    pub fn build(points: &[Point3], radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param(format!("radius must be positive, got {radius}")));
        }
        let inv_cell = 1.0 / radius;
        let mut cells: HashMap<CellKey, Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(cell_of(p, inv_cell)).or_default().push(i as u32);
        }
        Ok(Self {
            points: points.to_vec(),
            radius,
            inv_cell,
            cells,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn for_each_candidate(&self, p: &Point3, mut f: impl FnMut(usize, f64)) {
        let r2 = self.radius * self.radius;
        let [cx, cy, cz] = cell_of(p, self.inv_cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = self.cells.get(&[cx + dx, cy + dy, cz + dz]) else {
                        continue;
                    };
                    for &j in bucket {
                        let d2 = (self.points[j as usize] - p).norm_squared();
                        if d2 <= r2 {
                            f(j as usize, d2);
                        }
                    }
                }
            }
        }
    }

    /// Ids of all points within `radius` of `p` (inclusive), ascending.
    pub fn query_radius(&self, p: &Point3) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_candidate(p, |j, _| out.push(j));
        out.sort_unstable();
        out
    }

    /// Nearest point within `radius`, ties broken toward the lower id.
    pub fn nearest_within(&self, p: &Point3) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        self.for_each_candidate(p, |j, d2| match best {
            Some((bj, bd2)) if d2 > bd2 || (d2 == bd2 && j > bj) => {}
            _ => best = Some((j, d2)),
        });
        best.map(|(j, d2)| (j, d2.sqrt()))
    }
}

#[inline]
fn cell_of(p: &Point3, inv_cell: f64) -> CellKey {
    [
        (p.x * inv_cell).floor() as i64,
        (p.y * inv_cell).floor() as i64,
        (p.z * inv_cell).floor() as i64,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(points: &[Point3], p: &Point3, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, q) in points.iter().enumerate() {
            let d = q - p;
            if d.x * d.x + d.y * d.y + d.z * d.z <= r * r {
                out.push(i);
            }
        }
        out
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-extent..extent),
                    rng.gen_range(-extent..extent),
                    rng.gen_range(-extent..extent),
                )
            })
            .collect()
    }

    #[test]
    fn rejects_non_positive_radius() {
        assert!(NeighborIndex::build(&[], 0.0).is_err());
        assert!(NeighborIndex::build(&[], -1.0).is_err());
        assert!(NeighborIndex::build(&[], f64::NAN).is_err());
    }

    #[test]
    fn empty_index_returns_nothing() {
        let idx = NeighborIndex::build(&[], 0.5).unwrap();
        assert!(idx.query_radius(&Point3::origin()).is_empty());
        assert!(idx.nearest_within(&Point3::origin()).is_none());
    }

    #[test]
    fn query_at_existing_point_finds_it() {
        let pts = vec![Point3::new(3.3, -1.0, 7.0), Point3::new(0.0, 0.0, 0.0)];
        let idx = NeighborIndex::build(&pts, 1e-9).unwrap();
        assert_eq!(idx.query_radius(&pts[0]), vec![0]);
    }

    #[test]
    fn thousand_points_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_points(&mut rng, 1_000, 5.0);
        let idx = NeighborIndex::build(&pts, 0.8).unwrap();
        for _ in 0..100 {
            let q = random_points(&mut rng, 1, 5.5)[0];
            assert_eq!(idx.query_radius(&q), brute_force(&pts, &q, 0.8));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn radius_query_equals_brute_force(seed in any::<u64>(), r in 0.05f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = random_points(&mut rng, 300, 4.0);
            let idx = NeighborIndex::build(&pts, r).unwrap();
            for _ in 0..20 {
                let q = random_points(&mut rng, 1, 4.0)[0];
                prop_assert_eq!(idx.query_radius(&q), brute_force(&pts, &q, r));
            }
        }
    }
}
