//! TOML scene description.
//!
//! ```toml
//! version = 1
//! seed = 7
//!
//! [[primitive]]
//! name = "wall"
//! kind = "rect"            # "box", "rect" or "sphere"
//! center = [0.0, 0.0, 8.0]
//! u = [4.0, 0.0, 0.0]      # rect half-axes
//! v = [0.0, 2.0, 0.0]
//! color = [200, 180, 160]
//! checker = { square = 0.5, color = [40, 40, 40] }   # optional, rects only
//! variant = { gain = [0.8, 0.8, 0.9], offset = [0.0, 0.0, 10.0] }  # optional
//! motion = { kind = "linear", velocity = [0.5, 0.0, 0.0] }          # optional
//!
//! [[primitive]]
//! kind = "box"
//! center = [1.0, 1.0, 5.0]
//! half_extents = [0.3, 0.9, 0.2]
//! color = [30, 60, 200]
//! motion = { kind = "oscillate", amplitude = [1.0, 0.0, 0.0], period = 4.0 }
//!
//! [[primitive]]
//! kind = "sphere"
//! center = [-2.0, 0.5, 6.0]
//! radius = 0.7
//! color = [20, 160, 40]
//! ```
//!
//! Coordinates are meters in the world frame (x right, y down, z forward).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::color::ColorRgb8;
use crate::error::{Error, Result};
use crate::geom::{Point3, Vec3};
use crate::sim::scene::{Checker, Illumination, Motion, Primitive, Scene, Shape};

pub const SCENE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, rename = "primitive")]
    pub primitives: Vec<PrimitiveDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveDef {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub shape: ShapeDef,
    pub color: ColorRgb8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checker: Option<Checker>,
    #[serde(default, skip_serializing_if = "Motion::is_static")]
    pub motion: Motion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Illumination>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeDef {
    Box { center: [f64; 3], half_extents: [f64; 3] },
    Rect { center: [f64; 3], u: [f64; 3], v: [f64; 3] },
    Sphere { center: [f64; 3], radius: f64 },
}

impl From<ShapeDef> for Shape {
    fn from(s: ShapeDef) -> Self {
        match s {
            ShapeDef::Box { center, half_extents } => Shape::Box {
                center: Point3::from(center),
                half_extents: Vec3::from(half_extents),
            },
            ShapeDef::Rect { center, u, v } => Shape::Rect {
                center: Point3::from(center),
                u: Vec3::from(u),
                v: Vec3::from(v),
            },
            ShapeDef::Sphere { center, radius } => Shape::Sphere {
                center: Point3::from(center),
                radius,
            },
        }
    }
}

impl From<Shape> for ShapeDef {
    fn from(s: Shape) -> Self {
        match s {
            Shape::Box { center, half_extents } => ShapeDef::Box {
                center: center.coords.into(),
                half_extents: half_extents.into(),
            },
            Shape::Rect { center, u, v } => ShapeDef::Rect {
                center: center.coords.into(),
                u: u.into(),
                v: v.into(),
            },
            Shape::Sphere { center, radius } => ShapeDef::Sphere {
                center: center.coords.into(),
                radius,
            },
        }
    }
}

impl SceneFile {
    pub fn into_scene(self) -> Result<Scene> {
        if self.version != SCENE_VERSION {
            return Err(Error::Scene(format!(
                "unsupported scene version {} (expected {SCENE_VERSION})",
                self.version
            )));
        }
        let primitives = self
            .primitives
            .into_iter()
            .enumerate()
            .map(|(i, p)| Primitive {
                name: p.name.unwrap_or_else(|| format!("primitive{i}")),
                shape: p.shape.into(),
                color: p.color,
                checker: p.checker,
                motion: p.motion,
                variant: p.variant,
            })
            .collect();
        Scene::new(primitives, self.seed)
    }

    pub fn from_scene(scene: &Scene) -> Self {
        Self {
            version: SCENE_VERSION,
            seed: scene.seed,
            primitives: scene
                .primitives
                .iter()
                .map(|p| PrimitiveDef {
                    name: Some(p.name.clone()),
                    shape: p.shape.into(),
                    color: p.color,
                    checker: p.checker,
                    motion: p.motion,
                    variant: p.variant,
                })
                .collect(),
        }
    }
}

pub fn parse_scene(text: &str) -> Result<Scene> {
    let file: SceneFile = toml::from_str(text).map_err(|e| Error::Scene(e.to_string()))?;
    file.into_scene()
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Scene(format!("{}: {e}", path.display())))?;
    parse_scene(&text).map_err(|e| match e {
        Error::Scene(msg) => Error::Scene(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn scene_to_toml(scene: &Scene) -> String {
    toml::to_string(&SceneFile::from_scene(scene)).expect("scene files always serialize")
}
