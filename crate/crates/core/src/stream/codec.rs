//! Binary RGB-D frame encoding.
//!
//! An encoded frame is a fixed 44-byte little-endian header followed by the
//! rgb payload and the depth payload:
//!
//! | offset | size | field        |
//! |--------|------|--------------|
//! | 0      | 4    | magic `PSF1` |
//! | 4      | 1    | version (1)  |
//! | 5      | 1    | camera_id    |
//! | 6      | 2    | flags        |
//! | 8      | 8    | frame_seq    |
//! | 16     | 8    | capture_ts_ns|
//! | 24     | 4    | width        |
//! | 28     | 4    | height       |
//! | 32     | 4    | rgb_len      |
//! | 36     | 4    | depth_len    |
//! | 40     | 4    | crc32        |
//!
//! Each payload starts with a codec id byte (0 = stored, 1 = deflate). The
//! rgb payload decodes to interleaved RGB bytes, the depth payload to
//! little-endian `u16` depth codes. The CRC-32 (IEEE) covers both payloads,
//! rgb first.

use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::image::{DepthImage, RgbImage};
use crate::stream::frame::RgbdFrame;

pub const MAGIC: [u8; 4] = *b"PSF1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 44;

pub const FLAG_DEFOCUSED: u16 = 1 << 0;
pub const FLAG_DEPTH_PRESENT: u16 = 1 << 1;
/// Depth codes count quarter millimeters instead of millimeters.
pub const FLAG_QUARTER_MM: u16 = 1 << 2;
const KNOWN_FLAGS: u16 = FLAG_DEFOCUSED | FLAG_DEPTH_PRESENT | FLAG_QUARTER_MM;

/// Depth code reserved for returns at or beyond the representable range.
pub const DEPTH_SATURATED: u16 = u16::MAX;

/// Upper bound on decoded pixels per frame (8K UHD is 33 Mpx).
pub const MAX_PIXELS: u64 = 1 << 26;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported frame version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown flag bits {0:#06x}")]
    UnknownFlags(u16),
    #[error("unknown codec id {0}")]
    UnknownCodec(u8),
    #[error("crc mismatch: header {expected:#010x}, payload {actual:#010x}")]
    CrcMismatch { expected: u32, actual: u32 },
    #[error("truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("frame length {declared} disagrees with header total {expected}")]
    LengthMismatch { declared: usize, expected: usize },
    #[error("{what} payload decodes to {actual} bytes, expected {expected}")]
    PayloadSize { what: &'static str, expected: usize, actual: usize },
    #[error("frame of {width}x{height} exceeds the size limit")]
    TooLarge { width: u32, height: u32 },
    #[error("decompression failed: {0}")]
    Decompress(String),
    #[error("transport error: {0}")]
    Transport(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Codec {
    Store,
    #[default]
    Deflate,
}

impl Codec {
    pub fn id(self) -> u8 {
        match self {
            Codec::Store => 0,
            Codec::Deflate => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Codec::Store),
            1 => Some(Codec::Deflate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthScale {
    /// 1 mm steps, range up to 65.534 m.
    #[default]
    Millimeter,
    /// 0.25 mm steps, range up to 16.3835 m.
    QuarterMillimeter,
}

impl DepthScale {
    pub fn steps_per_meter(self) -> f64 {
        match self {
            DepthScale::Millimeter => 1000.0,
            DepthScale::QuarterMillimeter => 4000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodeOptions {
    pub codec: Codec,
    pub depth_scale: DepthScale,
    /// Sets the defocused flag; the blur itself is applied by the caller.
    pub defocused: bool,
}

/// Quantizes a depth in meters. Zero stays zero, depths too small to reach
/// one step also become zero (invalid), and depths at or beyond the top code
/// saturate.
#[inline]
pub fn quantize_depth(d: f64, scale: DepthScale) -> u16 {
    if d <= 0.0 {
        return 0;
    }
    let q = (d * scale.steps_per_meter()).round();
    if q >= DEPTH_SATURATED as f64 {
        DEPTH_SATURATED
    } else {
        q as u16
    }
}

#[inline]
pub fn dequantize_depth(q: u16, scale: DepthScale) -> f64 {
    q as f64 / scale.steps_per_meter()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub version: u8,
    pub camera_id: u8,
    pub flags: u16,
    pub frame_seq: u64,
    pub capture_ts_ns: u64,
    pub width: u32,
    pub height: u32,
    pub rgb_len: u32,
    pub depth_len: u32,
    pub crc32: u32,
}

impl FrameHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4] = self.version;
        b[5] = self.camera_id;
        b[6..8].copy_from_slice(&self.flags.to_le_bytes());
        b[8..16].copy_from_slice(&self.frame_seq.to_le_bytes());
        b[16..24].copy_from_slice(&self.capture_ts_ns.to_le_bytes());
        b[24..28].copy_from_slice(&self.width.to_le_bytes());
        b[28..32].copy_from_slice(&self.height.to_le_bytes());
        b[32..36].copy_from_slice(&self.rgb_len.to_le_bytes());
        b[36..40].copy_from_slice(&self.depth_len.to_le_bytes());
        b[40..44].copy_from_slice(&self.crc32.to_le_bytes());
        b
    }

    /// Parses and structurally validates a header. Payloads are not checked.
    pub fn parse(b: &[u8]) -> Result<Self, DecodeError> {
        if b.len() < HEADER_LEN {
            return Err(DecodeError::Truncated {
                needed: HEADER_LEN,
                available: b.len(),
            });
        }
        let magic: [u8; 4] = b[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(DecodeError::BadMagic(magic));
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let h = FrameHeader {
            version: b[4],
            camera_id: b[5],
            flags: u16::from_le_bytes([b[6], b[7]]),
            frame_seq: u64_at(8),
            capture_ts_ns: u64_at(16),
            width: u32_at(24),
            height: u32_at(28),
            rgb_len: u32_at(32),
            depth_len: u32_at(36),
            crc32: u32_at(40),
        };
        if h.version != VERSION {
            return Err(DecodeError::UnsupportedVersion(h.version));
        }
        if h.flags & !KNOWN_FLAGS != 0 {
            return Err(DecodeError::UnknownFlags(h.flags));
        }
        if h.width as u64 * h.height as u64 > MAX_PIXELS {
            return Err(DecodeError::TooLarge {
                width: h.width,
                height: h.height,
            });
        }
        Ok(h)
    }

    /// Header plus both payloads.
    pub fn total_len(&self) -> usize {
        HEADER_LEN + self.rgb_len as usize + self.depth_len as usize
    }

    pub fn depth_scale(&self) -> DepthScale {
        if self.flags & FLAG_QUARTER_MM != 0 {
            DepthScale::QuarterMillimeter
        } else {
            DepthScale::Millimeter
        }
    }
}

fn compress(raw: &[u8], codec: Codec) -> Vec<u8> {
    let mut out = Vec::with_capacity(raw.len() / 2 + 16);
    out.push(codec.id());
    match codec {
        Codec::Store => out.extend_from_slice(raw),
        Codec::Deflate => {
            let mut enc = DeflateEncoder::new(out, Compression::fast());
            enc.write_all(raw).expect("writing to a Vec cannot fail");
            out = enc.finish().expect("writing to a Vec cannot fail");
        }
    }
    out
}

fn decompress(payload: &[u8], expected: usize, what: &'static str) -> Result<Vec<u8>, DecodeError> {
    let (&id, body) = payload.split_first().ok_or(DecodeError::Truncated {
        needed: 1,
        available: 0,
    })?;
    let raw = match Codec::from_id(id).ok_or(DecodeError::UnknownCodec(id))? {
        Codec::Store => body.to_vec(),
        Codec::Deflate => {
            let mut raw = Vec::with_capacity(expected);
            // One byte past the expected size is enough to detect overruns.
            DeflateDecoder::new(body)
                .take(expected as u64 + 1)
                .read_to_end(&mut raw)
                .map_err(|e| DecodeError::Decompress(e.to_string()))?;
            raw
        }
    };
    if raw.len() != expected {
        return Err(DecodeError::PayloadSize {
            what,
            expected,
            actual: raw.len(),
        });
    }
    Ok(raw)
}

pub fn encode_frame(frame: &RgbdFrame, opts: &EncodeOptions) -> Result<Vec<u8>> {
    let (w, h) = frame.dims();
    if frame.depth.dims() != (w, h) {
        return Err(Error::param("rgb and depth dimensions differ"));
    }
    let (width, height) = match (u32::try_from(w), u32::try_from(h)) {
        (Ok(a), Ok(b)) if a as u64 * b as u64 <= MAX_PIXELS => (a, b),
        _ => return Err(Error::param(format!("frame of {w}x{h} exceeds the size limit"))),
    };
    let rgb = compress(&frame.rgb.to_bytes(), opts.codec);
    let mut depth_raw = Vec::with_capacity(w * h * 2);
    for &d in &frame.depth.depth {
        depth_raw.extend_from_slice(&quantize_depth(d, opts.depth_scale).to_le_bytes());
    }
    let depth = compress(&depth_raw, opts.codec);

    let mut flags = FLAG_DEPTH_PRESENT;
    if opts.defocused {
        flags |= FLAG_DEFOCUSED;
    }
    if opts.depth_scale == DepthScale::QuarterMillimeter {
        flags |= FLAG_QUARTER_MM;
    }
    let mut crc = crc32fast::Hasher::new();
    crc.update(&rgb);
    crc.update(&depth);
    let header = FrameHeader {
        version: VERSION,
        camera_id: frame.camera_id,
        flags,
        frame_seq: frame.frame_seq,
        capture_ts_ns: frame.capture_ts_ns,
        width,
        height,
        rgb_len: rgb.len() as u32,
        depth_len: depth.len() as u32,
        crc32: crc.finalize(),
    };
    let mut out = Vec::with_capacity(header.total_len());
    out.extend_from_slice(&header.to_bytes());
    out.extend_from_slice(&rgb);
    out.extend_from_slice(&depth);
    Ok(out)
}

/// Decodes one frame occupying all of `bytes`.
pub fn decode_frame(bytes: &[u8]) -> Result<RgbdFrame, DecodeError> {
    decode_frame_with_header(bytes).map(|(_, f)| f)
}

pub fn decode_frame_with_header(bytes: &[u8]) -> Result<(FrameHeader, RgbdFrame), DecodeError> {
    let h = FrameHeader::parse(bytes)?;
    let total = h.total_len();
    if bytes.len() < total {
        return Err(DecodeError::Truncated {
            needed: total,
            available: bytes.len(),
        });
    }
    if bytes.len() > total {
        return Err(DecodeError::LengthMismatch {
            declared: bytes.len(),
            expected: total,
        });
    }
    let rgb_end = HEADER_LEN + h.rgb_len as usize;
    let rgb_payload = &bytes[HEADER_LEN..rgb_end];
    let depth_payload = &bytes[rgb_end..total];
    let mut crc = crc32fast::Hasher::new();
    crc.update(rgb_payload);
    crc.update(depth_payload);
    let actual = crc.finalize();
    if actual != h.crc32 {
        return Err(DecodeError::CrcMismatch {
            expected: h.crc32,
            actual,
        });
    }

    let (w, hh) = (h.width as usize, h.height as usize);
    let rgb_raw = decompress(rgb_payload, w * hh * 3, "rgb")?;
    let rgb = RgbImage::from_bytes(w, hh, &rgb_raw).expect("size checked by decompress");
    let depth = if h.flags & FLAG_DEPTH_PRESENT != 0 {
        let raw = decompress(depth_payload, w * hh * 2, "depth")?;
        let scale = h.depth_scale();
        let values = raw
            .chunks_exact(2)
            .map(|c| dequantize_depth(u16::from_le_bytes([c[0], c[1]]), scale))
            .collect();
        DepthImage::from_values(w, hh, values).expect("dequantized depths are finite")
    } else {
        if !depth_payload.is_empty() {
            return Err(DecodeError::PayloadSize {
                what: "depth",
                expected: 0,
                actual: depth_payload.len(),
            });
        }
        DepthImage::zeros(w, hh)
    };
    let frame = RgbdFrame {
        rgb,
        depth,
        capture_ts_ns: h.capture_ts_ns,
        camera_id: h.camera_id,
        frame_seq: h.frame_seq,
    };
    Ok((h, frame))
}
