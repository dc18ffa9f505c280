//! PLY point clouds: ASCII and binary little-endian, vertex element only.
//!
//! Coordinates and normals are written as `double`. Reading accepts any
//! scalar property type for the vertex element and ignores properties other
//! than `x y z nx ny nz`. A missing normal is stored as the zero vector.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use forestmap_core::registration::PointCloud;
use forestmap_core::Vec3;
use thiserror::Error;

use crate::output::write_atomic;

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("malformed PLY header (line {line}): {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("truncated PLY body: header declares {expected} vertices, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("unsupported PLY {what}: {detail}")]
    Unsupported { what: &'static str, detail: String },
    #[error("bad value in PLY body (vertex {vertex}): {reason}")]
    BadValue { vertex: usize, reason: String },
    #[error("invalid point cloud: {0}")]
    Cloud(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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
    fn parse(name: &str) -> Option<Scalar> {
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

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

struct Header {
    format: PlyFormat,
    vertices: usize,
    properties: Vec<(String, Scalar)>,
}

impl Header {
    fn index(&self, name: &str) -> Option<usize> {
        self.properties.iter().position(|(n, _)| n == name)
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> PlyError {
    PlyError::MalformedHeader {
        line,
        reason: reason.into(),
    }
}

fn read_header<R: BufRead>(r: &mut R) -> Result<Header, PlyError> {
    let mut line_no = 0;
    let mut next_line = |r: &mut R| -> Result<Option<String>, PlyError> {
        let mut buf = Vec::new();
        if r.read_until(b'\n', &mut buf)? == 0 {
            return Ok(None);
        }
        line_no += 1;
        let s = String::from_utf8(buf).map_err(|_| malformed(line_no, "header is not text"))?;
        Ok(Some(s.trim_end_matches(['\n', '\r']).to_string()))
    };

    match next_line(r)? {
        Some(l) if l.trim() == "ply" => {}
        _ => return Err(malformed(1, "missing 'ply' magic")),
    }
    let mut format = None;
    let mut vertices = None;
    let mut properties = Vec::new();
    // element currently being described; properties of other elements are rejected
    let mut in_vertex = false;
    let mut line = 1;
    loop {
        let Some(l) = next_line(r)? else {
            return Err(malformed(line + 1, "header ends before 'end_header'"));
        };
        line += 1;
        let tokens: Vec<&str> = l.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["end_header"] => break,
            ["format", kind, version] => {
                if *version != "1.0" {
                    return Err(PlyError::Unsupported {
                        what: "format version",
                        detail: version.to_string(),
                    });
                }
                format = Some(match *kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => {
                        return Err(PlyError::Unsupported {
                            what: "format",
                            detail: other.to_string(),
                        })
                    }
                });
            }
            ["element", name, count] => {
                let count: usize = count.parse().map_err(|_| malformed(line, format!("bad element count '{count}'")))?;
                if *name == "vertex" {
                    if vertices.is_some() {
                        return Err(malformed(line, "duplicate vertex element"));
                    }
                    vertices = Some(count);
                    in_vertex = true;
                } else if count > 0 {
                    return Err(PlyError::Unsupported {
                        what: "element",
                        detail: format!("{name} ({count} entries)"),
                    });
                } else {
                    in_vertex = false;
                }
            }
            ["property", "list", ..] => {
                return Err(PlyError::Unsupported {
                    what: "property type",
                    detail: "list".to_string(),
                })
            }
            ["property", ty, name] => {
                let Some(scalar) = Scalar::parse(ty) else {
                    return Err(PlyError::Unsupported {
                        what: "property type",
                        detail: ty.to_string(),
                    });
                };
                if in_vertex {
                    properties.push((name.to_string(), scalar));
                }
            }
            _ => return Err(malformed(line, format!("unrecognized line '{l}'"))),
        }
    }
    let format = format.ok_or_else(|| malformed(line, "missing format line"))?;
    let vertices = vertices.ok_or_else(|| malformed(line, "missing vertex element"))?;
    let header = Header {
        format,
        vertices,
        properties,
    };
    for axis in ["x", "y", "z"] {
        if header.index(axis).is_none() {
            return Err(malformed(line, format!("vertex element has no '{axis}' property")));
        }
    }
    let normals = ["nx", "ny", "nz"].iter().filter(|n| header.index(n).is_some()).count();
    if normals != 0 && normals != 3 {
        return Err(malformed(line, "normals need all of nx, ny, nz"));
    }
    Ok(header)
}

/// Reads a PLY file.
pub fn read_ply(path: &Path) -> Result<PointCloud, PlyError> {
    let mut r = BufReader::new(File::open(path)?);
    read_ply_from(&mut r)
}

pub fn read_ply_from<R: BufRead>(r: &mut R) -> Result<PointCloud, PlyError> {
    let header = read_header(r)?;
    let n = header.vertices;
    let idx = |name| header.index(name);
    let (ix, iy, iz) = (idx("x").unwrap(), idx("y").unwrap(), idx("z").unwrap());
    let normal_idx = idx("nx").map(|nx| (nx, idx("ny").unwrap(), idx("nz").unwrap()));
    let mut values = vec![0.0; header.properties.len()];
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(if normal_idx.is_some() { n } else { 0 });

    let mut push = |values: &[f64], points: &mut Vec<Vec3>| {
        points.push(Vec3::new(values[ix], values[iy], values[iz]));
        if let Some((a, b, c)) = normal_idx {
            let v = Vec3::new(values[a], values[b], values[c]);
            normals.push(if v == Vec3::ZERO { None } else { Some(v) });
        }
    };

    match header.format {
        PlyFormat::Ascii => {
            let mut line = String::new();
            while points.len() < n {
                line.clear();
                if r.read_line(&mut line)? == 0 {
                    return Err(PlyError::Truncated {
                        expected: n,
                        found: points.len(),
                    });
                }
                let tokens: Vec<&str> = line.split_whitespace().collect();
                if tokens.is_empty() {
                    continue;
                }
                if tokens.len() != values.len() {
                    return Err(PlyError::BadValue {
                        vertex: points.len(),
                        reason: format!("expected {} values, got {}", values.len(), tokens.len()),
                    });
                }
                for (v, t) in values.iter_mut().zip(&tokens) {
                    *v = t.parse().map_err(|_| PlyError::BadValue {
                        vertex: points.len(),
                        reason: format!("not a number: '{t}'"),
                    })?;
                }
                push(&values, &mut points);
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let stride: usize = header.properties.iter().map(|(_, s)| s.size()).sum();
            let mut record = vec![0u8; stride];
            while points.len() < n {
                if let Err(e) = r.read_exact(&mut record) {
                    return Err(if e.kind() == io::ErrorKind::UnexpectedEof {
                        PlyError::Truncated {
                            expected: n,
                            found: points.len(),
                        }
                    } else {
                        e.into()
                    });
                }
                let mut at = 0;
                for (v, (_, s)) in values.iter_mut().zip(&header.properties) {
                    *v = s.decode_le(&record[at..at + s.size()]);
                    at += s.size();
                }
                push(&values, &mut points);
            }
        }
    }

    let cloud = PointCloud::new(points);
    if normal_idx.is_some() {
        cloud.with_normals(normals).map_err(|e| PlyError::Cloud(e.to_string()))
    } else {
        Ok(cloud)
    }
}

/// Formats with 9 significant digits.
pub(crate) fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn write_ply_to(cloud: &PointCloud, format: PlyFormat, w: &mut dyn Write) -> io::Result<()> {
    let normals = cloud.normals();
    let kind = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply")?;
    writeln!(w, "format {kind} 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for name in ["x", "y", "z"] {
        writeln!(w, "property double {name}")?;
    }
    if normals.is_some() {
        for name in ["nx", "ny", "nz"] {
            writeln!(w, "property double {name}")?;
        }
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points().iter().enumerate() {
        let mut row = vec![p.x, p.y, p.z];
        if let Some(ns) = normals {
            let n = ns[i].unwrap_or(Vec3::ZERO);
            row.extend([n.x, n.y, n.z]);
        }
        match format {
            PlyFormat::Ascii => {
                let text: Vec<String> = row.iter().map(|v| sig9(*v)).collect();
                writeln!(w, "{}", text.join(" "))?;
            }
            PlyFormat::BinaryLittleEndian => {
                for v in row {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

/// Writes `cloud` atomically.
pub fn write_ply(cloud: &PointCloud, path: &Path, ascii: bool) -> Result<(), PlyError> {
    let format = if ascii { PlyFormat::Ascii } else { PlyFormat::BinaryLittleEndian };
    write_atomic(path, |w| write_ply_to(cloud, format, w))?;
    Ok(())
}
