//! PLY reading and writing for colored point clouds.
//!
//! Reads ASCII and binary little-endian files with arbitrary elements; only
//! the `vertex` element is kept. Writes `double` coordinates so that a
//! write/parse round trip is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::{CloudLabel, Point3, PointCloud};

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("header line {line}: {msg}")]
    Header { line: usize, msg: String },
    #[error("body line {line}: {msg}")]
    Ascii { line: usize, msg: String },
    #[error("body byte offset {offset}: {msg}")]
    Binary { offset: usize, msg: String },
    #[error("binary_big_endian PLY is not supported")]
    BigEndian,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

const LABEL_COMMENT: &str = "reconopt-label";

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

    fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { ty: Scalar, name: String },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Column positions of the properties we care about within a vertex record.
#[derive(Debug, Default)]
struct VertexLayout {
    xyz: [Option<(usize, Scalar)>; 3],
    rgb: [Option<(usize, Scalar)>; 3],
}

impl VertexLayout {
    fn from_element(el: &Element, header_line: usize) -> Result<Self, PlyError> {
        let mut layout = VertexLayout::default();
        for (i, p) in el.props.iter().enumerate() {
            if let Property::Scalar { ty, name } = p {
                let slot = match name.as_str() {
                    "x" => &mut layout.xyz[0],
                    "y" => &mut layout.xyz[1],
                    "z" => &mut layout.xyz[2],
                    "red" | "r" => &mut layout.rgb[0],
                    "green" | "g" => &mut layout.rgb[1],
                    "blue" | "b" => &mut layout.rgb[2],
                    _ => continue,
                };
                *slot = Some((i, *ty));
            }
        }
        if layout.xyz.iter().any(Option::is_none) {
            return Err(PlyError::Header {
                line: header_line,
                msg: "vertex element lacks x, y or z property".into(),
            });
        }
        Ok(layout)
    }

    fn build(&self, values: &[f64]) -> Result<Point3, String> {
        let coord = |k: usize| values[self.xyz[k].unwrap().0];
        let (x, y, z) = (coord(0), coord(1), coord(2));
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(format!("non-finite coordinate ({x}, {y}, {z})"));
        }
        let mut color = Point3::WHITE;
        if self.rgb.iter().all(Option::is_some) {
            for (c, slot) in color.iter_mut().zip(&self.rgb) {
                let (idx, ty) = slot.unwrap();
                let v = values[idx];
                let v = if ty.is_float() { v * 255.0 } else { v };
                *c = v.round().clamp(0.0, 255.0) as u8;
            }
        }
        Ok(Point3 { x, y, z, color })
    }
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    label: CloudLabel,
    body_start: usize,
    body_first_line: usize,
}

fn header_err(line: usize, msg: impl Into<String>) -> PlyError {
    PlyError::Header { line, msg: msg.into() }
}

fn parse_header(bytes: &[u8]) -> Result<Header, PlyError> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut label = CloudLabel::Full;

    loop {
        let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(header_err(line_no + 1, "missing end_header"));
        };
        line_no += 1;
        let raw = &bytes[pos..pos + nl];
        pos += nl + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| header_err(line_no, "header is not valid UTF-8"))?
            .trim_end_matches('\r');
        let mut tok = line.split_whitespace();
        let Some(keyword) = tok.next() else { continue };

        if line_no == 1 {
            if keyword != "ply" {
                return Err(header_err(1, "file does not start with 'ply'"));
            }
            continue;
        }
        match keyword {
            "format" => {
                format = Some(match tok.next() {
                    Some("ascii") => PlyFormat::Ascii,
                    Some("binary_little_endian") => PlyFormat::BinaryLittleEndian,
                    Some("binary_big_endian") => return Err(PlyError::BigEndian),
                    other => return Err(header_err(line_no, format!("unknown format {other:?}"))),
                });
            }
            "comment" => {
                if tok.next() == Some(LABEL_COMMENT) {
                    label = match tok.next() {
                        Some("foreground") => CloudLabel::Foreground,
                        Some("background") => CloudLabel::Background,
                        _ => CloudLabel::Full,
                    };
                }
            }
            "obj_info" => {}
            "element" => {
                let name = tok.next().ok_or_else(|| header_err(line_no, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| header_err(line_no, "element count is not a non-negative integer"))?;
                elements.push(Element { name: name.to_string(), count, props: Vec::new() });
            }
            "property" => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| header_err(line_no, "property before any element"))?;
                let ty = tok.next().ok_or_else(|| header_err(line_no, "property without type"))?;
                let prop = if ty == "list" {
                    let count = tok.next().and_then(Scalar::parse);
                    let item = tok.next().and_then(Scalar::parse);
                    match (count, item) {
                        (Some(count), Some(item)) if !count.is_float() => Property::List { count, item },
                        _ => return Err(header_err(line_no, "malformed list property")),
                    }
                } else {
                    let ty = Scalar::parse(ty)
                        .ok_or_else(|| header_err(line_no, format!("unknown property type '{ty}'")))?;
                    let name = tok.next().ok_or_else(|| header_err(line_no, "property without name"))?;
                    Property::Scalar { ty, name: name.to_string() }
                };
                el.props.push(prop);
            }
            "end_header" => break,
            other => return Err(header_err(line_no, format!("unexpected keyword '{other}'"))),
        }
    }

    let format = format.ok_or_else(|| header_err(line_no, "missing format line"))?;
    Ok(Header { format, elements, label, body_start: pos, body_first_line: line_no + 1 })
}

/// Parse a PLY file held in memory.
pub fn parse_ply(bytes: &[u8]) -> Result<PointCloud, PlyError> {
    let header = parse_header(bytes)?;
    let vertex_idx = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| header_err(header.body_first_line - 1, "no vertex element"))?;
    let layout = VertexLayout::from_element(&header.elements[vertex_idx], header.body_first_line - 1)?;
    let body = &bytes[header.body_start..];
    let points = match header.format {
        PlyFormat::Ascii => read_ascii(body, &header, vertex_idx, &layout)?,
        PlyFormat::BinaryLittleEndian => read_binary(body, &header, vertex_idx, &layout)?,
    };
    Ok(PointCloud::new(points, header.label))
}

fn read_ascii(
    body: &[u8],
    header: &Header,
    vertex_idx: usize,
    layout: &VertexLayout,
) -> Result<Vec<Point3>, PlyError> {
    let text = std::str::from_utf8(body).map_err(|e| PlyError::Ascii {
        line: header.body_first_line,
        msg: format!("body is not valid UTF-8: {e}"),
    })?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (header.body_first_line + i, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let mut last_line = header.body_first_line;
    let mut points = Vec::new();

    for (ei, el) in header.elements.iter().enumerate() {
        if ei == vertex_idx {
            points.reserve(el.count);
        }
        for n in 0..el.count {
            let Some((line, content)) = lines.next() else {
                return Err(PlyError::Ascii {
                    line: last_line + 1,
                    msg: format!("expected {} '{}' entries, body ends after {n}", el.count, el.name),
                });
            };
            last_line = line;
            let err = |msg: String| PlyError::Ascii { line, msg };
            let mut tok = content.split_whitespace();
            let mut next = |what: &str| -> Result<f64, PlyError> {
                let t = tok.next().ok_or_else(|| err(format!("missing value for {what}")))?;
                t.parse::<f64>().map_err(|_| err(format!("'{t}' is not a number")))
            };
            let mut values = Vec::with_capacity(el.props.len());
            for p in &el.props {
                match p {
                    Property::Scalar { name, .. } => values.push(next(name)?),
                    Property::List { .. } => {
                        let k = next("list length")?;
                        if k < 0.0 || k.fract() != 0.0 {
                            return Err(err(format!("bad list length {k}")));
                        }
                        for _ in 0..k as usize {
                            next("list item")?;
                        }
                        values.push(f64::NAN);
                    }
                }
            }
            if tok.next().is_some() {
                return Err(err("too many values on line".into()));
            }
            if ei == vertex_idx {
                points.push(layout.build(&values).map_err(err)?);
            }
        }
    }
    if let Some((line, _)) = lines.next() {
        return Err(PlyError::Ascii { line, msg: "data after the last declared element".into() });
    }
    Ok(points)
}

fn read_binary(
    body: &[u8],
    header: &Header,
    vertex_idx: usize,
    layout: &VertexLayout,
) -> Result<Vec<Point3>, PlyError> {
    let body_offset = header.body_start;
    let mut pos = 0usize;
    let mut points = Vec::new();
    let take = |pos: &mut usize, ty: Scalar, el: &Element, n: usize| -> Result<f64, PlyError> {
        let end = *pos + ty.size();
        if end > body.len() {
            return Err(PlyError::Binary {
                offset: body_offset + *pos,
                msg: format!("expected {} '{}' entries, body ends inside entry {n}", el.count, el.name),
            });
        }
        let v = ty.read_le(&body[*pos..end]);
        *pos = end;
        Ok(v)
    };

    for (ei, el) in header.elements.iter().enumerate() {
        if ei == vertex_idx {
            points.reserve(el.count);
        }
        for n in 0..el.count {
            let entry_start = pos;
            let mut values = Vec::with_capacity(el.props.len());
            for p in &el.props {
                match p {
                    Property::Scalar { ty, .. } => values.push(take(&mut pos, *ty, el, n)?),
                    Property::List { count, item } => {
                        let k = take(&mut pos, *count, el, n)?;
                        if k < 0.0 {
                            return Err(PlyError::Binary {
                                offset: body_offset + pos,
                                msg: format!("negative list length {k}"),
                            });
                        }
                        for _ in 0..k as usize {
                            take(&mut pos, *item, el, n)?;
                        }
                        values.push(f64::NAN);
                    }
                }
            }
            if ei == vertex_idx {
                let p = layout.build(&values).map_err(|msg| PlyError::Binary {
                    offset: body_offset + entry_start,
                    msg,
                })?;
                points.push(p);
            }
        }
    }
    if pos != body.len() {
        return Err(PlyError::Binary {
            offset: body_offset + pos,
            msg: format!("{} trailing bytes after the last declared element", body.len() - pos),
        });
    }
    Ok(points)
}

/// Serialize a cloud. Coordinates are written as `double`, colors as `uchar`.
pub fn write_ply(cloud: &PointCloud, format: PlyFormat) -> Vec<u8> {
    let label = match cloud.label {
        CloudLabel::Foreground => "foreground",
        CloudLabel::Background => "background",
        CloudLabel::Full => "full",
    };
    let format_name = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut header = String::new();
    let _ = write!(
        header,
        "ply\nformat {format_name} 1.0\ncomment {LABEL_COMMENT} {label}\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        cloud.len()
    );
    let mut out = header.into_bytes();
    match format {
        PlyFormat::Ascii => {
            let mut body = String::with_capacity(cloud.len() * 48);
            for p in &cloud.points {
                // `Debug` for f64 is the shortest exact round trip and uses
                // exponents for tiny or huge values.
                let _ = writeln!(body, "{:?} {:?} {:?} {} {} {}", p.x, p.y, p.z, p.color[0], p.color[1], p.color[2]);
            }
            out.extend_from_slice(body.as_bytes());
        }
        PlyFormat::BinaryLittleEndian => {
            out.reserve(cloud.len() * 27);
            for p in &cloud.points {
                out.extend_from_slice(&p.x.to_le_bytes());
                out.extend_from_slice(&p.y.to_le_bytes());
                out.extend_from_slice(&p.z.to_le_bytes());
                out.extend_from_slice(&p.color);
            }
        }
    }
    out
}

pub fn read_ply_file(path: impl AsRef<Path>) -> Result<PointCloud, PlyError> {
    parse_ply(&std::fs::read(path)?)
}

pub fn write_ply_file(path: impl AsRef<Path>, cloud: &PointCloud, format: PlyFormat) -> Result<(), PlyError> {
    std::fs::write(path, write_ply(cloud, format))?;
    Ok(())
}
