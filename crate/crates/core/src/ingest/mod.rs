//! Dataset ingestion: file formats and cloud preparation.

mod off;
mod ply;
mod sampling;
mod xyz;

use std::path::Path;

pub use off::{parse_off, write_off, TriangleMesh};
pub use ply::{parse_ply, write_ply, CloudData};
pub use sampling::{
    equalize, equalize_indices, farthest_point_sample, normalize_unit_sphere, sample_surface,
};
pub use xyz::{parse_xyz, write_xyz};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Contents of a shape file: either points or a mesh to be sampled.
#[derive(Clone, Debug)]
pub enum Shape {
    Cloud(CloudData),
    Mesh(TriangleMesh),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileKind {
    Ply,
    Xyz,
    Off,
}

impl FileKind {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "ply" => Some(FileKind::Ply),
            "xyz" | "txt" | "pts" => Some(FileKind::Xyz),
            "off" => Some(FileKind::Off),
            _ => None,
        }
    }
}

pub fn is_shape_file(path: &Path) -> bool {
    FileKind::from_path(path).is_some()
}

/// Reads a `.ply`, `.xyz`/`.txt`/`.pts` or `.off` file.
pub fn read_shape(path: &Path) -> Result<Shape> {
    let wrap = |e: Error| e.in_file(path);
    let kind = FileKind::from_path(path).ok_or_else(|| {
        wrap(Error::UnsupportedFormat(format!(
            "unknown extension on {}",
            path.display()
        )))
    })?;
    let text = std::fs::read_to_string(path).map_err(|e| wrap(e.into()))?;
    match kind {
        FileKind::Ply => parse_ply(&text).map(Shape::Cloud),
        FileKind::Xyz => parse_xyz(&text).map(|c| Shape::Cloud(CloudData::new(c))),
        FileKind::Off => parse_off(&text).map(Shape::Mesh),
    }
    .map_err(wrap)
}

/// Reads a file as a point cloud, sampling `mesh_points` surface points from meshes.
pub fn read_cloud(path: &Path, mesh_points: usize, rng: &mut RngStream) -> Result<CloudData> {
    match read_shape(path)? {
        Shape::Cloud(data) => Ok(data),
        Shape::Mesh(mesh) => sample_surface(&mesh, mesh_points, rng)
            .map(CloudData::new)
            .map_err(|e| e.in_file(path)),
    }
}

/// Writes a cloud as PLY or XYZ according to the path's extension.
pub fn write_cloud(path: &Path, data: &CloudData) -> Result<()> {
    let text = match FileKind::from_path(path) {
        Some(FileKind::Xyz) => write_xyz(&data.cloud),
        Some(FileKind::Ply) => write_ply(
            &data.cloud,
            data.part_labels.as_ref(),
            data.saliency.as_ref(),
        )?,
        _ => {
            return Err(Error::UnsupportedFormat(format!(
                "cannot write point clouds to {}",
                path.display()
            )))
        }
    };
    std::fs::write(path, text).map_err(|e| Error::from(e).in_file(path))
}

/// Equalizes to `num_points` and normalizes to the unit sphere, carrying
/// per-point attributes along.
pub fn prepare(data: &CloudData, num_points: usize, rng: &mut RngStream) -> Result<CloudData> {
    let indices = equalize_indices(&data.cloud, num_points, rng)?;
    let mut out = data.select(&indices)?;
    out.cloud = normalize_unit_sphere(&out.cloud)?;
    Ok(out)
}
