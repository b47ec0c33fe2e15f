//! ASCII OFF meshes.

use crate::error::{Error, Result};
use crate::types::Point;

/// A triangle mesh with in-range face indices and finite vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(index) = vertices
            .iter()
            .position(|v| v.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::NonFiniteCoordinate { index });
        }
        if let Some(&bad) = faces.iter().flatten().find(|&&i| i >= vertices.len()) {
            return Err(Error::OutOfRange {
                what: "face vertex index",
                value: bad,
                min: 0,
                max: vertices.len().saturating_sub(1),
            });
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn triangle(&self, face: usize) -> [Point; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_counts(line_no: usize, line: &str) -> Result<(usize, usize)> {
    let counts: Vec<usize> = line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::parse(line_no, format!("bad counts line {line:?}")))?;
    match counts.as_slice() {
        [v, f] | [v, f, _] => Ok((*v, *f)),
        _ => Err(Error::parse(line_no, "expected \"V F E\" counts")),
    }
}

/// Parses an ASCII OFF mesh. Quads are fan-triangulated as (0,1,2), (0,2,3).
pub fn parse_off(text: &str) -> Result<TriangleMesh> {
    let mut lines = content_lines(text);
    let total_lines = text.lines().count();
    let (header_no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing OFF header"))?;
    let rest = header
        .strip_prefix("OFF")
        .ok_or_else(|| Error::parse(header_no, "header must start with OFF"))?
        .trim();
    let (vertex_count, face_count) = if rest.is_empty() {
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(header_no + 1, "missing counts line"))?;
        parse_counts(no, line)?
    } else {
        parse_counts(header_no, rest)?
    };

    let mut vertices = Vec::with_capacity(vertex_count);
    for v in 0..vertex_count {
        let (no, line) = lines.next().ok_or_else(|| {
            Error::parse(
                total_lines + 1,
                format!("missing vertex line {} of {vertex_count}", v + 1),
            )
        })?;
        let coords: Vec<f32> = line
            .split_whitespace()
            .take(3)
            .map(|t| t.parse::<f32>())
            .collect::<Result<_, _>>()
            .map_err(|_| Error::parse(no, format!("bad vertex {line:?}")))?;
        if coords.len() < 3 {
            return Err(Error::parse(no, "vertex needs three coordinates"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::parse(no, "non-finite vertex coordinate"));
        }
        vertices.push([coords[0], coords[1], coords[2]]);
    }

    let mut faces = Vec::with_capacity(face_count);
    for f in 0..face_count {
        let (no, line) = lines.next().ok_or_else(|| {
            Error::parse(
                total_lines + 1,
                format!("missing face line {} of {face_count}", f + 1),
            )
        })?;
        let mut tokens = line.split_whitespace();
        let arity: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(no, "bad face arity"))?;
        if !(3..=4).contains(&arity) {
            return Err(Error::parse(
                no,
                format!("face arity {arity} unsupported (3 or 4 required)"),
            ));
        }
        let idx: Vec<usize> = tokens
            .take(arity)
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| Error::parse(no, format!("bad face {line:?}")))?;
        if idx.len() != arity {
            return Err(Error::parse(no, "face has fewer indices than its arity"));
        }
        if let Some(bad) = idx.iter().find(|&&i| i >= vertex_count) {
            return Err(Error::parse(no, format!("face index {bad} out of range")));
        }
        faces.push([idx[0], idx[1], idx[2]]);
        if arity == 4 {
            faces.push([idx[0], idx[2], idx[3]]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

pub fn write_off(mesh: &TriangleMesh) -> String {
    let mut out = format!("OFF\n{} {} 0\n", mesh.vertices.len(), mesh.faces.len());
    for v in &mesh.vertices {
        out.push_str(&format!("{} {} {}\n", v[0], v[1], v[2]));
    }
    for f in &mesh.faces {
        out.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
    }
    out
}
