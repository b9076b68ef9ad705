use crate::color::ColorRgb8;
use crate::error::{Error, Result};
use crate::geom::{is_finite, Point3, Pose};

/// Motion label assigned by flicker suppression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointLabel {
    Static,
    Dynamic,
    /// Outside the camera frustum or behind it; motion could not be judged.
    Unobserved,
}

/// Positions plus optional parallel per-point attributes.
///
/// Every attribute vector that is present has exactly `points.len()` entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub colors: Option<Vec<ColorRgb8>>,
    pub sensor_id: Option<Vec<u8>>,
    pub timestamp_ns: Option<Vec<u64>>,
    pub labels: Option<Vec<PointLabel>>,
}

impl PointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: Vec<Point3>) -> Self {
        Self {
            points,
            ..Self::default()
        }
    }

    pub fn with_colors(points: Vec<Point3>, colors: Vec<ColorRgb8>) -> Result<Self> {
        let cloud = Self {
            points,
            colors: Some(colors),
            ..Self::default()
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_colored(&self) -> bool {
        self.colors.is_some()
    }

    /// Checks the parallel-array and finiteness invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        let check = |name: &str, len: Option<usize>| match len {
            Some(m) if m != n => Err(Error::param(format!(
                "{name} has {m} entries for {n} points"
            ))),
            _ => Ok(()),
        };
        check("colors", self.colors.as_ref().map(Vec::len))?;
        check("sensor_id", self.sensor_id.as_ref().map(Vec::len))?;
        check("timestamp_ns", self.timestamp_ns.as_ref().map(Vec::len))?;
        check("labels", self.labels.as_ref().map(Vec::len))?;
        if let Some(i) = self.points.iter().position(|p| !is_finite(p)) {
            return Err(Error::param(format!("point {i} is not finite")));
        }
        Ok(())
    }

    /// Copies the points selected by `ids`, in order, with all attributes.
    pub fn select(&self, ids: &[usize]) -> PointCloud {
        fn pick<T: Copy>(v: &Option<Vec<T>>, ids: &[usize]) -> Option<Vec<T>> {
            v.as_ref().map(|v| ids.iter().map(|&i| v[i]).collect())
        }
        PointCloud {
            points: ids.iter().map(|&i| self.points[i]).collect(),
            colors: pick(&self.colors, ids),
            sensor_id: pick(&self.sensor_id, ids),
            timestamp_ns: pick(&self.timestamp_ns, ids),
            labels: pick(&self.labels, ids),
        }
    }

    /// Appends `other`. An attribute survives only if both sides carry it,
    /// except when `self` is empty, in which case `other`'s layout is adopted.
    pub fn extend(&mut self, other: &PointCloud) {
        if self.points.is_empty() {
            *self = other.clone();
            return;
        }
        fn join<T: Copy>(a: &mut Option<Vec<T>>, b: &Option<Vec<T>>) {
            match (a.as_mut(), b) {
                (Some(a), Some(b)) => a.extend_from_slice(b),
                _ => *a = None,
            }
        }
        if other.points.is_empty() {
            return;
        }
        self.points.extend_from_slice(&other.points);
        join(&mut self.colors, &other.colors);
        join(&mut self.sensor_id, &other.sensor_id);
        join(&mut self.timestamp_ns, &other.timestamp_ns);
        join(&mut self.labels, &other.labels);
    }

    pub fn max_timestamp(&self) -> Option<u64> {
        self.timestamp_ns.as_ref().and_then(|t| t.iter().copied().max())
    }
}

/// Maps every point through `pose`; attributes are copied unchanged.
pub fn transform(cloud: &PointCloud, pose: &Pose) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| pose.apply(p)).collect(),
        ..cloud.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use std::f64::consts::FRAC_PI_2;

    fn sample() -> PointCloud {
        PointCloud {
            points: vec![Point3::new(1.5, -2.25, 3.0), Point3::new(0.1, 0.2, 0.3)],
            colors: Some(vec![ColorRgb8::new(1, 2, 3), ColorRgb8::new(4, 5, 6)]),
            sensor_id: Some(vec![0, 2]),
            timestamp_ns: Some(vec![10, 20]),
            labels: None,
        }
    }

    #[test]
    fn identity_transform_is_bit_identical() {
        let c = sample();
        assert_eq!(transform(&c, &Pose::identity()), c);
    }

    #[test]
    fn inverse_transform_restores_points() {
        let c = sample();
        let pose = Pose::from_axis_angle(Vec3::new(0.3, -1.0, 0.2), 1.1, Vec3::new(4.0, -7.0, 2.0));
        let back = transform(&transform(&c, &pose), &pose.inverse());
        for (a, b) in back.points.iter().zip(&c.points) {
            assert!((a - b).amax() < 1e-9);
        }
        assert_eq!(back.colors, c.colors);
        assert_eq!(back.sensor_id, c.sensor_id);
    }

    #[test]
    fn quarter_turn_about_z() {
        let c = PointCloud::from_points(vec![Point3::new(1.0, 0.0, 0.0)]);
        let pose = Pose::from_axis_angle(Vec3::z(), FRAC_PI_2, Vec3::zeros());
        let out = transform(&c, &pose);
        assert!((out.points[0] - Point3::new(0.0, 1.0, 0.0)).amax() < 1e-12);
    }

    #[test]
    fn validate_rejects_ragged_attributes() {
        let mut c = sample();
        c.sensor_id = Some(vec![0]);
        assert!(c.validate().is_err());
        let mut c = sample();
        c.points[1].x = f64::NAN;
        assert!(c.validate().is_err());
    }

    #[test]
    fn extend_drops_attributes_missing_on_one_side() {
        let mut a = sample();
        let mut b = sample();
        b.timestamp_ns = None;
        a.extend(&b);
        assert_eq!(a.len(), 4);
        assert!(a.timestamp_ns.is_none());
        assert_eq!(a.colors.as_ref().unwrap().len(), 4);
    }
}
