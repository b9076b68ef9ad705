//! PLY point-cloud I/O.
//!
//! Writes `binary_little_endian 1.0` with a single `vertex` element carrying
//! `float x, y, z` and, for colored clouds, `uchar red, green, blue`. Reads
//! binary little-endian and ASCII files whose only element is `vertex`; extra
//! scalar vertex properties are skipped.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::cloud::PointCloud;
use crate::color::ColorRgb8;
use crate::geom::Point3;

pub const GENERATOR: &str = concat!("generator pointstream ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlyErrorKind {
    MalformedHeader(String),
    UnsupportedLayout(String),
    TruncatedBody,
    MalformedBody(String),
}

impl fmt::Display for PlyErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlyErrorKind::MalformedHeader(m) => write!(f, "malformed header: {m}"),
            PlyErrorKind::UnsupportedLayout(m) => write!(f, "unsupported element layout: {m}"),
            PlyErrorKind::TruncatedBody => f.write_str("truncated body"),
            PlyErrorKind::MalformedBody(m) => write!(f, "malformed body: {m}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("ply parse error at byte {offset}: {kind}")]
    Parse { kind: PlyErrorKind, offset: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl PlyError {
    fn at(offset: usize, kind: PlyErrorKind) -> Self {
        PlyError::Parse { kind, offset }
    }

    pub fn kind(&self) -> Option<&PlyErrorKind> {
        match self {
            PlyError::Parse { kind, .. } => Some(kind),
            PlyError::Io(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
struct Header {
    format: Format,
    vertex_count: usize,
    properties: Vec<(String, Scalar)>,
    body_offset: usize,
}

#[derive(Debug, Default)]
struct Slots {
    xyz: [Option<usize>; 3],
    rgb: [Option<usize>; 3],
}

fn parse_header(data: &[u8]) -> Result<Header, PlyError> {
    let mut offset = 0usize;
    let next_line = |offset: &mut usize| -> Result<(usize, String), PlyError> {
        let start = *offset;
        let rest = &data[start..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            return Err(PlyError::at(
                start,
                PlyErrorKind::MalformedHeader("missing end_header".into()),
            ));
        };
        *offset = start + nl + 1;
        let line = std::str::from_utf8(&rest[..nl]).map_err(|_| {
            PlyError::at(start, PlyErrorKind::MalformedHeader("non-UTF-8 header line".into()))
        })?;
        Ok((start, line.trim_end_matches('\r').to_string()))
    };

    let (_, magic) = next_line(&mut offset)?;
    if magic != "ply" {
        return Err(PlyError::at(
            0,
            PlyErrorKind::MalformedHeader("missing 'ply' magic".into()),
        ));
    }

    let mut format = None;
    let mut vertex_count = None;
    let mut properties = Vec::new();
    let mut in_vertex = false;
    loop {
        let (at, line) = next_line(&mut offset)?;
        let mut tok = line.split_whitespace();
        let head = tok.next().unwrap_or("");
        let bad = |m: &str| PlyError::at(at, PlyErrorKind::MalformedHeader(m.to_string()));
        let unsupported = |m: String| PlyError::at(at, PlyErrorKind::UnsupportedLayout(m));
        match head {
            "" | "comment" | "obj_info" => {}
            "format" => {
                let kind = tok.next().ok_or_else(|| bad("format without type"))?;
                let version = tok.next().ok_or_else(|| bad("format without version"))?;
                if version != "1.0" {
                    return Err(unsupported(format!("format version {version}")));
                }
                format = Some(match kind {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::BinaryLe,
                    other => return Err(unsupported(format!("format {other}"))),
                });
            }
            "element" => {
                let name = tok.next().ok_or_else(|| bad("element without name"))?;
                let count: usize = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| bad("element count is not an integer"))?;
                if name != "vertex" {
                    return Err(unsupported(format!("element '{name}'")));
                }
                if vertex_count.is_some() {
                    return Err(unsupported("duplicate vertex element".into()));
                }
                vertex_count = Some(count);
                in_vertex = true;
            }
            "property" => {
                if !in_vertex {
                    return Err(bad("property before any element"));
                }
                let ty = tok.next().ok_or_else(|| bad("property without type"))?;
                if ty == "list" {
                    return Err(unsupported("list property".into()));
                }
                let scalar =
                    Scalar::parse(ty).ok_or_else(|| bad(&format!("unknown property type {ty}")))?;
                let name = tok.next().ok_or_else(|| bad("property without name"))?;
                properties.push((name.to_string(), scalar));
            }
            "end_header" => break,
            other => return Err(bad(&format!("unexpected keyword '{other}'"))),
        }
    }

    let format = format.ok_or_else(|| {
        PlyError::at(0, PlyErrorKind::MalformedHeader("missing format line".into()))
    })?;
    Ok(Header {
        format,
        vertex_count: vertex_count.unwrap_or(0),
        properties,
        body_offset: offset,
    })
}

fn resolve_slots(header: &Header) -> Result<Slots, PlyError> {
    let mut slots = Slots::default();
    for (i, (name, ty)) in header.properties.iter().enumerate() {
        let slot = match name.as_str() {
            "x" => &mut slots.xyz[0],
            "y" => &mut slots.xyz[1],
            "z" => &mut slots.xyz[2],
            "red" => &mut slots.rgb[0],
            "green" => &mut slots.rgb[1],
            "blue" => &mut slots.rgb[2],
            _ => continue,
        };
        if matches!(name.as_str(), "red" | "green" | "blue") && *ty != Scalar::U8 {
            return Err(PlyError::at(
                0,
                PlyErrorKind::UnsupportedLayout(format!("color property {name} must be uchar")),
            ));
        }
        *slot = Some(i);
    }
    if slots.xyz.iter().any(Option::is_none) {
        return Err(PlyError::at(
            0,
            PlyErrorKind::UnsupportedLayout("vertex element lacks x/y/z".into()),
        ));
    }
    let n_rgb = slots.rgb.iter().filter(|s| s.is_some()).count();
    if n_rgb != 0 && n_rgb != 3 {
        return Err(PlyError::at(
            0,
            PlyErrorKind::UnsupportedLayout("partial red/green/blue properties".into()),
        ));
    }
    Ok(slots)
}

pub fn parse_ply(data: &[u8]) -> Result<PointCloud, PlyError> {
    let header = parse_header(data)?;
    let slots = resolve_slots(&header)?;
    let n = header.vertex_count;
    let nprops = header.properties.len();
    let mut values = vec![0.0f64; nprops];
    let mut points = Vec::with_capacity(n);
    let colored = slots.rgb[0].is_some();
    let mut colors = Vec::with_capacity(if colored { n } else { 0 });

    let emit = |values: &[f64], points: &mut Vec<Point3>, colors: &mut Vec<ColorRgb8>| {
        let [x, y, z] = slots.xyz.map(|s| values[s.unwrap()]);
        points.push(Point3::new(x, y, z));
        if colored {
            let [r, g, b] = slots.rgb.map(|s| values[s.unwrap()] as u8);
            colors.push(ColorRgb8::new(r, g, b));
        }
    };

    match header.format {
        Format::BinaryLe => {
            let stride: usize = header.properties.iter().map(|(_, t)| t.size()).sum();
            let mut pos = header.body_offset;
            for _ in 0..n {
                if data.len() < pos + stride {
                    return Err(PlyError::at(data.len(), PlyErrorKind::TruncatedBody));
                }
                let mut p = pos;
                for (v, (_, ty)) in values.iter_mut().zip(&header.properties) {
                    *v = ty.read_le(&data[p..]);
                    p += ty.size();
                }
                emit(&values, &mut points, &mut colors);
                pos += stride;
            }
        }
        Format::Ascii => {
            let body = &data[header.body_offset..];
            let mut pos = 0usize;
            let mut read_vertex = 0usize;
            while read_vertex < n {
                if pos >= body.len() {
                    return Err(PlyError::at(data.len(), PlyErrorKind::TruncatedBody));
                }
                let end = body[pos..]
                    .iter()
                    .position(|&b| b == b'\n')
                    .map_or(body.len(), |e| pos + e);
                let line_at = header.body_offset + pos;
                let line = std::str::from_utf8(&body[pos..end]).map_err(|_| {
                    PlyError::at(line_at, PlyErrorKind::MalformedBody("non-UTF-8 line".into()))
                })?;
                pos = end + 1;
                let mut fields = line.split_whitespace();
                if line.trim().is_empty() {
                    continue;
                }
                for (v, (name, _)) in values.iter_mut().zip(&header.properties) {
                    let tok = fields.next().ok_or_else(|| {
                        PlyError::at(
                            line_at,
                            PlyErrorKind::MalformedBody(format!("missing value for {name}")),
                        )
                    })?;
                    *v = tok.parse().map_err(|_| {
                        PlyError::at(
                            line_at,
                            PlyErrorKind::MalformedBody(format!("bad number '{tok}'")),
                        )
                    })?;
                }
                emit(&values, &mut points, &mut colors);
                read_vertex += 1;
            }
        }
    }

    if let Some(i) = points.iter().position(|p| !crate::geom::is_finite(p)) {
        return Err(PlyError::at(
            header.body_offset,
            PlyErrorKind::MalformedBody(format!("vertex {i} is not finite")),
        ));
    }

    Ok(PointCloud {
        points,
        colors: colored.then_some(colors),
        ..PointCloud::default()
    })
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud, PlyError> {
    let data = fs::read(path)?;
    parse_ply(&data)
}

/// Serializes `cloud` as binary little-endian PLY. Positions are narrowed to
/// `f32`; attributes other than color are not written.
pub fn encode_ply(cloud: &PointCloud) -> Vec<u8> {
    let colored = cloud.colors.is_some();
    let stride = if colored { 15 } else { 12 };
    let mut out = Vec::with_capacity(256 + cloud.len() * stride);
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\ncomment {GENERATOR}\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n",
        cloud.len()
    )
    .unwrap();
    if colored {
        out.extend_from_slice(
            b"property uchar red\nproperty uchar green\nproperty uchar blue\n",
        );
    }
    out.extend_from_slice(b"end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        for v in [p.x, p.y, p.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        if let Some(colors) = &cloud.colors {
            out.extend_from_slice(&colors[i].to_array());
        }
    }
    out
}

pub fn write_ply(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<(), PlyError> {
    fs::write(path, encode_ply(cloud))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind(e: PlyError) -> (PlyErrorKind, usize) {
        match e {
            PlyError::Parse { kind, offset } => (kind, offset),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn offset_of(hay: &[u8], needle: &[u8]) -> usize {
        hay.windows(needle.len()).position(|w| w == needle).unwrap()
    }

    #[test]
    fn empty_cloud_round_trips() {
        let bytes = encode_ply(&PointCloud::new());
        let back = parse_ply(&bytes).unwrap();
        assert!(back.is_empty());
        assert!(String::from_utf8_lossy(&bytes).contains("comment generator pointstream"));
    }

    #[test]
    fn colored_cloud_round_trips() {
        let cloud = PointCloud::with_colors(
            vec![
                Point3::new(0.5, -1.25, 3.0),
                Point3::new(100.125, 0.0, -7.5),
                Point3::new(1e-3, 2e-3, 3e-3),
            ],
            vec![
                ColorRgb8::new(255, 0, 0),
                ColorRgb8::new(0, 128, 7),
                ColorRgb8::new(9, 9, 250),
            ],
        )
        .unwrap();
        let back = parse_ply(&encode_ply(&cloud)).unwrap();
        assert_eq!(back.colors, cloud.colors);
        for (a, b) in back.points.iter().zip(&cloud.points) {
            assert_eq!(a.x, b.x as f32 as f64);
            assert_eq!(a.y, b.y as f32 as f64);
            assert_eq!(a.z, b.z as f32 as f64);
        }
    }

    #[test]
    fn ascii_fixture_parses() {
        let text = "ply\nformat ascii 1.0\ncomment hand written\nelement vertex 2\n\
                    property float x\nproperty float y\nproperty float z\n\
                    property uchar red\nproperty uchar green\nproperty uchar blue\n\
                    end_header\n1.5 -2 0.25 10 20 30\n-4 8.125 16 255 0 1\n";
        let cloud = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(cloud.points, vec![Point3::new(1.5, -2.0, 0.25), Point3::new(-4.0, 8.125, 16.0)]);
        assert_eq!(
            cloud.colors.unwrap(),
            vec![ColorRgb8::new(10, 20, 30), ColorRgb8::new(255, 0, 1)]
        );
    }

    #[test]
    fn extra_properties_are_skipped() {
        let mut data = b"ply\nformat binary_little_endian 1.0\nelement vertex 1\n\
            property double x\nproperty float intensity\nproperty double y\nproperty double z\nend_header\n"
            .to_vec();
        for v in [1.0f64] {
            data.extend_from_slice(&v.to_le_bytes());
        }
        data.extend_from_slice(&9.0f32.to_le_bytes());
        data.extend_from_slice(&2.0f64.to_le_bytes());
        data.extend_from_slice(&3.0f64.to_le_bytes());
        let cloud = parse_ply(&data).unwrap();
        assert_eq!(cloud.points, vec![Point3::new(1.0, 2.0, 3.0)]);
        assert!(cloud.colors.is_none());
    }

    #[test]
    fn truncated_body_names_offset() {
        let cloud = PointCloud::from_points(vec![Point3::new(1.0, 2.0, 3.0); 4]);
        let mut bytes = encode_ply(&cloud);
        bytes.truncate(bytes.len() - 5);
        let (k, off) = kind(parse_ply(&bytes).unwrap_err());
        assert_eq!(k, PlyErrorKind::TruncatedBody);
        assert_eq!(off, bytes.len());
    }

    #[test]
    fn malformed_header_is_reported() {
        let (k, off) = kind(parse_ply(b"plx\nformat ascii 1.0\nend_header\n").unwrap_err());
        assert!(matches!(k, PlyErrorKind::MalformedHeader(_)));
        assert_eq!(off, 0);

        let data = b"ply\nformat ascii 1.0\nelement vertex two\nend_header\n";
        let (k, off) = kind(parse_ply(data).unwrap_err());
        assert!(matches!(k, PlyErrorKind::MalformedHeader(_)));
        assert_eq!(off, offset_of(data, b"element vertex two"));

        let (k, _) = kind(parse_ply(b"ply\nformat ascii 1.0\nelement vertex 0\n").unwrap_err());
        assert!(matches!(k, PlyErrorKind::MalformedHeader(_)));
    }

    #[test]
    fn faces_and_lists_are_unsupported() {
        let data = b"ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\n\
            property float y\nproperty float z\nelement face 0\n\
            property list uchar int vertex_indices\nend_header\n";
        let (k, off) = kind(parse_ply(data).unwrap_err());
        assert!(matches!(k, PlyErrorKind::UnsupportedLayout(_)));
        assert_eq!(off, offset_of(data, b"element face"));

        let data = b"ply\nformat binary_big_endian 1.0\nend_header\n";
        let (k, _) = kind(parse_ply(data).unwrap_err());
        assert!(matches!(k, PlyErrorKind::UnsupportedLayout(_)));
    }

    #[test]
    fn write_and_read_through_filesystem() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        let cloud = PointCloud::from_points(vec![Point3::new(1.0, 2.0, 3.0)]);
        write_ply(&cloud, &path).unwrap();
        assert_eq!(read_ply(&path).unwrap().points, cloud.points);
        assert!(matches!(read_ply(dir.path().join("missing.ply")), Err(PlyError::Io(_))));
    }
}
