//! Whitespace-separated XYZ text: one point per line, extra columns ignored.

use crate::error::{Error, Result};
use crate::types::PointCloud;

pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let coords: Vec<f32> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .take(3)
            .map(|t| t.parse::<f32>())
            .collect::<Result<_, _>>()
            .map_err(|_| Error::parse(i + 1, format!("non-numeric field in {line:?}")))?;
        if coords.len() < 3 {
            return Err(Error::parse(
                i + 1,
                format!("expected 3 numeric fields, found {}", coords.len()),
            ));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::parse(i + 1, "non-finite coordinate"));
        }
        points.push([coords[0], coords[1], coords[2]]);
    }
    PointCloud::new(points)
}

pub fn write_xyz(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 48);
    for p in cloud.points() {
        super::ply::push_float(&mut out, p[0]);
        out.push(' ');
        super::ply::push_float(&mut out, p[1]);
        out.push(' ');
        super::ply::push_float(&mut out, p[2]);
        out.push('\n');
    }
    out
}
