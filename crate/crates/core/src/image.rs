//! Row-major color and depth rasters.

use crate::color::ColorRgb8;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<ColorRgb8>,
}

impl RgbImage {
    pub fn filled(width: usize, height: usize, color: ColorRgb8) -> Self {
        Self {
            width,
            height,
            pixels: vec![color; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<ColorRgb8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::param(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> ColorRgb8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: ColorRgb8) {
        self.pixels[y * self.width + x] = c;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Interleaved RGB bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|c| c.to_array()).collect()
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * 3 {
            return Err(Error::param(format!(
                "{} bytes for a {width}x{height} RGB image",
                bytes.len()
            )));
        }
        let pixels = bytes
            .chunks_exact(3)
            .map(|c| ColorRgb8::new(c[0], c[1], c[2]))
            .collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }
}

/// Depth in meters; `0.0` marks a pixel with no return.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
}

impl DepthImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            depth: vec![0.0; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, depth: Vec<f64>) -> Result<Self> {
        if depth.len() != width * height {
            return Err(Error::param(format!(
                "{} depth values for a {width}x{height} image",
                depth.len()
            )));
        }
        if let Some(i) = depth.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::param(format!("depth value {i} is negative or not finite")));
        }
        Ok(Self {
            width,
            height,
            depth,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.depth[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, d: f64) {
        self.depth[y * self.width + x] = d;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|&&d| d > 0.0).count()
    }
}
