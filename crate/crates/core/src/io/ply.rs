//! PLY vertex clouds, ASCII or binary little-endian.
//!
//! Reading accepts any scalar property types and picks out `x`, `y`, `z`,
//! and optionally `ring` and `label`. Other properties and elements are
//! skipped.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Label, Point3};
use crate::labeling::LabeledCloud;

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
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
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

    fn decode(self, b: &[u8]) -> f64 {
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

#[derive(Debug)]
enum Prop {
    Scalar(String, Scalar),
    List(Scalar, Scalar),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Prop>,
}

/// Vertices read from a PLY file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlyCloud {
    pub points: Vec<Point3>,
    pub rings: Option<Vec<u16>>,
    pub labels: Option<Vec<Label>>,
}

pub fn read_ply(path: &Path) -> Result<PlyCloud> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let perr = |line: usize, m: &str| Error::parse(path, line, m);

    let mut header_lines = 0usize;
    let mut next_line = |r: &mut BufReader<std::fs::File>| -> Result<String> {
        let mut s = String::new();
        let n = r.read_line(&mut s).map_err(|e| Error::io(path, e))?;
        header_lines += 1;
        if n == 0 {
            return Err(Error::parse(path, header_lines, "unexpected end of header"));
        }
        Ok(s.trim_end().to_string())
    };
    if next_line(&mut r)? != "ply" {
        return Err(perr(1, "missing `ply` magic"));
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut lineno = 1;
    loop {
        let line = next_line(&mut r)?;
        lineno += 1;
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.first().copied() {
            Some("format") => {
                binary = Some(match tok.get(1).copied() {
                    Some("ascii") => false,
                    Some("binary_little_endian") => true,
                    other => return Err(perr(lineno, &format!("unsupported format {other:?}"))),
                });
            }
            Some("element") => {
                let (Some(name), Some(count)) = (tok.get(1), tok.get(2).and_then(|c| c.parse().ok())) else {
                    return Err(perr(lineno, "malformed element line"));
                };
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let Some(el) = elements.last_mut() else {
                    return Err(perr(lineno, "property before element"));
                };
                let prop = if tok.get(1) == Some(&"list") {
                    match (tok.get(2).and_then(|s| Scalar::parse(s)), tok.get(3).and_then(|s| Scalar::parse(s))) {
                        (Some(c), Some(v)) => Prop::List(c, v),
                        _ => return Err(perr(lineno, "bad list property")),
                    }
                } else {
                    match (tok.get(1).and_then(|s| Scalar::parse(s)), tok.get(2)) {
                        (Some(t), Some(n)) => Prop::Scalar(n.to_string(), t),
                        _ => return Err(perr(lineno, "bad property")),
                    }
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(perr(lineno, &format!("unknown header keyword `{other}`"))),
        }
    }
    let binary = binary.ok_or_else(|| perr(lineno, "missing format line"))?;

    let mut out = PlyCloud::default();
    let mut rings = Vec::new();
    let mut labels = Vec::new();
    let mut ascii_rest = String::new();
    let mut ascii_tokens: Vec<&str> = Vec::new();
    let mut ti = 0usize;
    if !binary {
        r.read_to_string(&mut ascii_rest).map_err(|e| Error::io(path, e))?;
        ascii_tokens = ascii_rest.split_ascii_whitespace().collect();
    }
    let mut buf = [0u8; 8];
    let mut read_scalar = |t: Scalar, r: &mut BufReader<std::fs::File>, ti: &mut usize| -> Result<f64> {
        if binary {
            r.read_exact(&mut buf[..t.size()])
                .map_err(|_| Error::parse(path, lineno, "truncated binary body"))?;
            Ok(t.decode(&buf))
        } else {
            let tok = ascii_tokens
                .get(*ti)
                .ok_or_else(|| Error::parse(path, lineno, "truncated ascii body"))?;
            *ti += 1;
            tok.parse::<f64>()
                .map_err(|_| Error::parse(path, lineno, format!("bad value `{tok}`")))
        }
    };

    for el in &elements {
        let names: Vec<Option<&str>> = el
            .props
            .iter()
            .map(|p| match p {
                Prop::Scalar(n, _) => Some(n.as_str()),
                Prop::List(..) => None,
            })
            .collect();
        let is_vertex = el.name == "vertex";
        if is_vertex {
            for need in ["x", "y", "z"] {
                if !names.contains(&Some(need)) {
                    return Err(perr(lineno, &format!("vertex element lacks `{need}`")));
                }
            }
        }
        let has_ring = names.contains(&Some("ring"));
        let has_label = names.contains(&Some("label"));
        for _ in 0..el.count {
            let mut xyz = [0.0; 3];
            let mut ring = 0.0;
            let mut label = 0.0;
            for p in &el.props {
                match p {
                    Prop::Scalar(name, t) => {
                        let v = read_scalar(*t, &mut r, &mut ti)?;
                        match name.as_str() {
                            "x" => xyz[0] = v,
                            "y" => xyz[1] = v,
                            "z" => xyz[2] = v,
                            "ring" => ring = v,
                            "label" => label = v,
                            _ => {}
                        }
                    }
                    Prop::List(ct, vt) => {
                        let n = read_scalar(*ct, &mut r, &mut ti)? as usize;
                        for _ in 0..n {
                            read_scalar(*vt, &mut r, &mut ti)?;
                        }
                    }
                }
            }
            if is_vertex {
                out.points.push(Point3::new(xyz[0], xyz[1], xyz[2]));
                if has_ring {
                    if !(0.0..=u16::MAX as f64).contains(&ring) {
                        return Err(perr(lineno, &format!("ring {ring} out of range")));
                    }
                    rings.push(ring as u16);
                }
                if has_label {
                    let l = Label::from_byte(label as u8)
                        .filter(|_| label.fract() == 0.0 && (0.0..256.0).contains(&label))
                        .ok_or_else(|| perr(lineno, &format!("unknown label value {label}")))?;
                    labels.push(l);
                }
            }
        }
        if is_vertex {
            out.rings = has_ring.then_some(std::mem::take(&mut rings));
            out.labels = has_label.then_some(std::mem::take(&mut labels));
        }
    }
    Ok(out)
}

/// Binary little-endian PLY with double coordinates, plus `ushort ring` and
/// `uchar label` when given.
pub fn write_ply(path: &Path, points: &[Point3], rings: Option<&[u16]>, labels: Option<&[Label]>) -> Result<()> {
    let mut buf = Vec::with_capacity(points.len() * 27 + 256);
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n",
        points.len()
    );
    if rings.is_some() {
        header.push_str("property ushort ring\n");
    }
    if labels.is_some() {
        header.push_str("property uchar label\n");
    }
    header.push_str("end_header\n");
    buf.extend_from_slice(header.as_bytes());
    for (i, p) in points.iter().enumerate() {
        for v in [p.x, p.y, p.z] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(r) = rings {
            buf.extend_from_slice(&r[i].to_le_bytes());
        }
        if let Some(l) = labels {
            buf.push(l[i].as_byte());
        }
    }
    write_file(path, &buf)
}

/// Labeled cloud as binary PLY with float coordinates and a `uchar label`.
pub fn write_labeled_cloud(path: &Path, cloud: &LabeledCloud) -> Result<()> {
    let mut buf = Vec::with_capacity(cloud.len() * 13 + 256);
    let header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nproperty uchar label\nend_header\n",
        cloud.len()
    );
    buf.extend_from_slice(header.as_bytes());
    for p in &cloud.points {
        for v in [p.position.x, p.position.y, p.position.z] {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        buf.push(p.label.as_byte());
    }
    write_file(path, &buf)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ply");
        let pts = vec![Point3::new(1.0, -2.5, 3.25), Point3::new(0.1, 0.2, 0.3)];
        write_ply(&p, &pts, Some(&[3, 31]), Some(&[Label::Wall, Label::Door])).unwrap();
        let c = read_ply(&p).unwrap();
        assert_eq!(c.points, pts);
        assert_eq!(c.rings, Some(vec![3, 31]));
        assert_eq!(c.labels, Some(vec![Label::Wall, Label::Door]));
    }

    #[test]
    fn ascii_with_extra_properties() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ply");
        std::fs::write(
            &p,
            "ply\nformat ascii 1.0\ncomment x\nelement vertex 2\nproperty float intensity\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n9 1 2 3\n9 4 5 6\n3 0 1 1\n",
        )
        .unwrap();
        let c = read_ply(&p).unwrap();
        assert_eq!(c.points[1], Point3::new(4.0, 5.0, 6.0));
        assert!(c.rings.is_none() && c.labels.is_none());
    }

    #[test]
    fn truncated_body_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ply");
        std::fs::write(&p, "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n").unwrap();
        assert!(matches!(read_ply(&p), Err(Error::Parse { .. })));
    }
}
