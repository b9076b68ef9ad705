//! sRGB (D65) ⇄ CIELAB conversion.
//!
//! The forward path linearizes through a 256-entry table; the inverse path
//! evaluates the transfer curve directly and clamps out-of-gamut channels to
//! `[0, 255]` before rounding.

use std::sync::LazyLock;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// 8-bit sRGB; serialized as `[r, g, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "[u8; 3]", into = "[u8; 3]")]
pub struct ColorRgb8 {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl ColorRgb8 {
    pub const BLACK: Self = Self::new(0, 0, 0);
    pub const WHITE: Self = Self::new(255, 255, 255);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    pub fn to_array(self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }

    pub fn from_array(c: [u8; 3]) -> Self {
        Self::new(c[0], c[1], c[2])
    }
}

impl From<[u8; 3]> for ColorRgb8 {
    fn from(c: [u8; 3]) -> Self {
        Self::from_array(c)
    }
}

impl From<ColorRgb8> for [u8; 3] {
    fn from(c: ColorRgb8) -> Self {
        c.to_array()
    }
}

/// CIELAB color. `l` is nominally in `[0, 100]`; transferred colors may leave
/// that range before they are mapped back to sRGB.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ColorLab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl ColorLab {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.l, self.a, self.b]
    }

    pub fn from_array(c: [f64; 3]) -> Self {
        Self::new(c[0], c[1], c[2])
    }
}

/// Linear sRGB → XYZ (D65).
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

struct Tables {
    to_xyz: Matrix3<f64>,
    to_linear: Matrix3<f64>,
    /// Reference white, taken as the image of linear (1,1,1) so that sRGB
    /// white maps to a = b = 0 exactly.
    white: Vector3<f64>,
    linear: [f64; 256],
}

static TABLES: LazyLock<Tables> = LazyLock::new(|| {
    let to_xyz = Matrix3::from_fn(|r, c| SRGB_TO_XYZ[r][c]);
    let to_linear = to_xyz.try_inverse().expect("sRGB matrix is invertible");
    let white = to_xyz * Vector3::repeat(1.0);
    let mut linear = [0.0; 256];
    for (i, v) in linear.iter_mut().enumerate() {
        *v = srgb_decode(i as f64 / 255.0);
    }
    Tables {
        to_xyz,
        to_linear,
        white,
        linear,
    }
});

fn srgb_decode(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

fn srgb_encode(v: f64) -> f64 {
    if v <= 0.003_130_8 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.cbrt()
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

fn lab_f_inv(f: f64) -> f64 {
    let f3 = f * f * f;
    if f3 > LAB_EPSILON {
        f3
    } else {
        (116.0 * f - 16.0) / LAB_KAPPA
    }
}

pub fn srgb_to_lab(c: ColorRgb8) -> ColorLab {
    let t = &*TABLES;
    let lin = Vector3::new(
        t.linear[c.r as usize],
        t.linear[c.g as usize],
        t.linear[c.b as usize],
    );
    let xyz = t.to_xyz * lin;
    let fx = lab_f(xyz.x / t.white.x);
    let fy = lab_f(xyz.y / t.white.y);
    let fz = lab_f(xyz.z / t.white.z);
    ColorLab {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

pub fn lab_to_srgb(c: ColorLab) -> ColorRgb8 {
    let t = &*TABLES;
    let fy = (c.l + 16.0) / 116.0;
    let fx = fy + c.a / 500.0;
    let fz = fy - c.b / 200.0;
    let xyz = Vector3::new(
        lab_f_inv(fx) * t.white.x,
        lab_f_inv(fy) * t.white.y,
        lab_f_inv(fz) * t.white.z,
    );
    let lin = t.to_linear * xyz;
    let q = |v: f64| -> u8 {
        let s = srgb_encode(v) * 255.0;
        // NaN falls through to 0.
        if s >= 255.0 {
            255
        } else if s > 0.0 {
            s.round() as u8
        } else {
            0
        }
    };
    ColorRgb8::new(q(lin.x), q(lin.y), q(lin.z))
}

pub fn srgb_slice_to_lab(colors: &[ColorRgb8]) -> Vec<ColorLab> {
    colors.iter().map(|&c| srgb_to_lab(c)).collect()
}
