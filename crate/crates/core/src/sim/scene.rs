//! Scene primitives, rigid motion and ray intersection.

use serde::{Deserialize, Serialize};

use crate::color::ColorRgb8;
use crate::error::{Error, Result};
use crate::geom::{Point3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Axis-aligned box.
    Box { center: Point3, half_extents: Vec3 },
    /// Finite plane spanning `center ± u ± v`; `u` and `v` are orthogonal
    /// half-axis vectors.
    Rect { center: Point3, u: Vec3, v: Vec3 },
    Sphere { center: Point3, radius: f64 },
}

impl Shape {
    pub fn center(&self) -> Point3 {
        match *self {
            Shape::Box { center, .. } | Shape::Rect { center, .. } | Shape::Sphere { center, .. } => center,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Box { center, half_extents } => {
                crate::geom::is_finite(&center) && half_extents.iter().all(|&h| h > 0.0 && h.is_finite())
            }
            Shape::Rect { center, u, v } => {
                let (nu, nv) = (u.norm(), v.norm());
                crate::geom::is_finite(&center)
                    && nu > 0.0
                    && nv > 0.0
                    && nu.is_finite()
                    && nv.is_finite()
                    && u.dot(&v).abs() <= 1e-9 * nu * nv
            }
            Shape::Sphere { center, radius } => crate::geom::is_finite(&center) && radius > 0.0 && radius.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Scene(format!("degenerate primitive {self:?}")))
        }
    }

    fn translated(&self, d: Vec3) -> Shape {
        match *self {
            Shape::Box { center, half_extents } => Shape::Box {
                center: center + d,
                half_extents,
            },
            Shape::Rect { center, u, v } => Shape::Rect { center: center + d, u, v },
            Shape::Sphere { center, radius } => Shape::Sphere {
                center: center + d,
                radius,
            },
        }
    }

    /// Smallest ray parameter in `[t_min, t_max]` where `o + t·d` meets the
    /// surface. `d` need not be normalized.
    pub fn intersect(&self, o: &Point3, d: &Vec3, t_min: f64, t_max: f64) -> Option<f64> {
        let within = |t: f64| (t >= t_min && t <= t_max).then_some(t);
        match *self {
            Shape::Sphere { center, radius } => {
                let oc = o - center;
                let a = d.dot(d);
                let half_b = oc.dot(d);
                let c = oc.dot(&oc) - radius * radius;
                let disc = half_b * half_b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                within((-half_b - s) / a).or_else(|| within((-half_b + s) / a))
            }
            Shape::Box { center, half_extents } => {
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                for k in 0..3 {
                    let lo = center[k] - half_extents[k];
                    let hi = center[k] + half_extents[k];
                    if d[k] == 0.0 {
                        if o[k] < lo || o[k] > hi {
                            return None;
                        }
                        continue;
                    }
                    let inv = 1.0 / d[k];
                    let (a, b) = ((lo - o[k]) * inv, (hi - o[k]) * inv);
                    let (a, b) = if a <= b { (a, b) } else { (b, a) };
                    t0 = t0.max(a);
                    t1 = t1.min(b);
                }
                if t0 > t1 {
                    return None;
                }
                within(t0).or_else(|| within(t1))
            }
            Shape::Rect { center, u, v } => {
                let n = u.cross(&v);
                let denom = d.dot(&n);
                if denom == 0.0 {
                    return None;
                }
                let t = (center - o).dot(&n) / denom;
                let t = within(t)?;
                let rel = o + d * t - center;
                let a = rel.dot(&u) / u.norm_squared();
                let b = rel.dot(&v) / v.norm_squared();
                (a.abs() <= 1.0 && b.abs() <= 1.0).then_some(t)
            }
        }
    }

    /// Euclidean distance from `p` to the surface.
    pub fn surface_distance(&self, p: &Point3) -> f64 {
        match *self {
            Shape::Sphere { center, radius } => ((p - center).norm() - radius).abs(),
            Shape::Box { center, half_extents } => {
                let q = (p - center).abs() - half_extents;
                let outside = q.map(|x| x.max(0.0)).norm();
                let inside = q.max().min(0.0);
                (outside + inside).abs()
            }
            Shape::Rect { center, u, v } => {
                let rel = p - center;
                let (nu, nv) = (u.norm(), v.norm());
                let a = (rel.dot(&u) / nu).clamp(-nu, nu);
                let b = (rel.dot(&v) / nv).clamp(-nv, nv);
                let closest = center + u * (a / nu) + v * (b / nv);
                (p - closest).norm()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Motion {
    #[default]
    Static,
    /// Displacement `velocity · t`.
    Linear { velocity: [f64; 3] },
    /// Displacement `amplitude · sin(2πt / period)`.
    Oscillate { amplitude: [f64; 3], period: f64 },
}

impl Motion {
    pub fn offset(&self, t: f64) -> Vec3 {
        match *self {
            Motion::Static => Vec3::zeros(),
            Motion::Linear { velocity } => Vec3::from(velocity) * t,
            Motion::Oscillate { amplitude, period } => {
                Vec3::from(amplitude) * (std::f64::consts::TAU * t / period).sin()
            }
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Motion::Static)
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Motion::Static => true,
            Motion::Linear { velocity } => velocity.iter().all(|x| x.is_finite()),
            Motion::Oscillate { amplitude, period } => {
                amplitude.iter().all(|x| x.is_finite()) && period > 0.0 && period.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Scene(format!("invalid motion {self:?}")))
        }
    }
}

/// Per-channel affine color change `gain · c + offset`, rounded and clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Illumination {
    pub gain: [f64; 3],
    pub offset: [f64; 3],
}

impl Default for Illumination {
    fn default() -> Self {
        Self {
            gain: [1.0; 3],
            offset: [0.0; 3],
        }
    }
}

impl Illumination {
    pub fn apply(&self, c: ColorRgb8) -> ColorRgb8 {
        let v = c.to_array();
        ColorRgb8::from_array(std::array::from_fn(|i| {
            (self.gain[i] * v[i] as f64 + self.offset[i]).round().clamp(0.0, 255.0) as u8
        }))
    }
}

/// Two-color checker on a rect, squares measured from the `-u -v` corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checker {
    pub square: f64,
    pub color: ColorRgb8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub name: String,
    pub shape: Shape,
    pub color: ColorRgb8,
    pub checker: Option<Checker>,
    pub motion: Motion,
    /// Color change for the alternate lighting condition.
    pub variant: Option<Illumination>,
}

impl Primitive {
    pub fn new(name: impl Into<String>, shape: Shape, color: ColorRgb8) -> Self {
        Self {
            name: name.into(),
            shape,
            color,
            checker: None,
            motion: Motion::Static,
            variant: None,
        }
    }

    pub fn with_motion(mut self, motion: Motion) -> Self {
        self.motion = motion;
        self
    }

    pub fn with_checker(mut self, checker: Checker) -> Self {
        self.checker = Some(checker);
        self
    }

    pub fn with_variant(mut self, variant: Illumination) -> Self {
        self.variant = Some(variant);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        self.motion.validate()?;
        if let Some(ch) = &self.checker {
            if !matches!(self.shape, Shape::Rect { .. }) {
                return Err(Error::Scene(format!("{}: checker texture needs a rect", self.name)));
            }
            if !(ch.square > 0.0 && ch.square.is_finite()) {
                return Err(Error::Scene(format!("{}: checker square must be positive", self.name)));
            }
        }
        Ok(())
    }

    pub fn shape_at(&self, t: f64) -> Shape {
        if self.motion.is_static() {
            self.shape
        } else {
            self.shape.translated(self.motion.offset(t))
        }
    }

    /// Surface color at world point `p` on the primitive's pose at time `t`.
    pub fn color_at(&self, p: &Point3, t: f64) -> ColorRgb8 {
        match (&self.checker, self.shape_at(t)) {
            (Some(ch), Shape::Rect { center, u, v }) => {
                let rel = p - center;
                let (nu, nv) = (u.norm(), v.norm());
                let a = rel.dot(&u) / nu + nu;
                let b = rel.dot(&v) / nv + nv;
                let parity = (a / ch.square).floor() as i64 + (b / ch.square).floor() as i64;
                if parity.rem_euclid(2) == 0 {
                    self.color
                } else {
                    ch.color
                }
            }
            _ => self.color,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Ray parameter (distance for unit directions).
    pub t: f64,
    pub primitive: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
    pub seed: u64,
}

impl Scene {
    pub fn new(primitives: Vec<Primitive>, seed: u64) -> Result<Self> {
        let s = Self { primitives, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.primitives.iter().try_for_each(Primitive::validate)
    }

    pub fn is_static(&self) -> bool {
        self.primitives.iter().all(|p| p.motion.is_static())
    }

    /// Nearest surface along `o + t·d` for `t` in `[t_min, t_max]` with the
    /// scene posed at time `time`. Ties go to the lower primitive index.
    pub fn intersect(&self, o: &Point3, d: &Vec3, t_min: f64, t_max: f64, time: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (i, p) in self.primitives.iter().enumerate() {
            let limit = best.map_or(t_max, |b| b.t);
            if let Some(t) = p.shape_at(time).intersect(o, d, t_min, limit) {
                if best.is_none_or(|b| t < b.t) {
                    best = Some(Hit { t, primitive: i });
                }
            }
        }
        best
    }

    /// The same geometry under the alternate lighting: every primitive with a
    /// variant has its colors passed through it.
    pub fn illumination_variant(&self) -> Scene {
        let mut out = self.clone();
        for p in &mut out.primitives {
            if let Some(v) = p.variant {
                p.color = v.apply(p.color);
                if let Some(ch) = &mut p.checker {
                    ch.color = v.apply(ch.color);
                }
            }
        }
        out
    }

    /// Distance from `p` to the nearest primitive surface at time `t`.
    pub fn surface_distance(&self, p: &Point3, t: f64) -> f64 {
        self.primitives
            .iter()
            .map(|q| q.shape_at(t).surface_distance(p))
            .fold(f64::INFINITY, f64::min)
    }
}
