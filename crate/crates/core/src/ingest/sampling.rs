//! Mesh surface sampling, farthest point sampling, size equalization and
//! unit-sphere normalization.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::types::{Point, PointCloud};

use super::TriangleMesh;

fn sub(a: Point, b: Point) -> [f64; 3] {
    [
        a[0] as f64 - b[0] as f64,
        a[1] as f64 - b[1] as f64,
        a[2] as f64 - b[2] as f64,
    ]
}

pub(crate) fn triangle_area(tri: [Point; 3]) -> f64 {
    let u = sub(tri[1], tri[0]);
    let v = sub(tri[2], tri[0]);
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    0.5 * (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt()
}

/// Area-weighted uniform sampling of `num_points` points on the mesh surface.
pub fn sample_surface(
    mesh: &TriangleMesh,
    num_points: usize,
    rng: &mut RngStream,
) -> Result<PointCloud> {
    if num_points == 0 {
        return Err(Error::InvalidParameter(
            "num_points must be at least 1".into(),
        ));
    }
    let mut cumulative = Vec::with_capacity(mesh.faces().len());
    let mut total = 0.0;
    for face in 0..mesh.faces().len() {
        total += triangle_area(mesh.triangle(face));
        cumulative.push(total);
    }
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Degenerate("mesh has zero surface area".into()));
    }
    let last = cumulative.len() - 1;
    let mut points = Vec::with_capacity(num_points);
    for _ in 0..num_points {
        let target = rng.uniform() * total;
        let face = cumulative.partition_point(|&c| c <= target).min(last);
        let [a, b, c] = mesh.triangle(face);
        let (mut u, mut v) = (rng.uniform(), rng.uniform());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let (ab, ac) = (sub(b, a), sub(c, a));
        points.push([
            (a[0] as f64 + u * ab[0] + v * ac[0]) as f32,
            (a[1] as f64 + u * ab[1] + v * ac[1]) as f32,
            (a[2] as f64 + u * ab[2] + v * ac[2]) as f32,
        ]);
    }
    PointCloud::new(points)
}

fn squared_distance(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Greedy farthest point sampling from `start`; ties go to the smaller index.
pub fn farthest_point_sample(
    cloud: &PointCloud,
    num_points: usize,
    start: usize,
) -> Result<Vec<usize>> {
    let n = cloud.len();
    if num_points < 1 || num_points > n {
        return Err(Error::OutOfRange {
            what: "sample count",
            value: num_points,
            min: 1,
            max: n,
        });
    }
    if start >= n {
        return Err(Error::OutOfRange {
            what: "start index",
            value: start,
            min: 0,
            max: n - 1,
        });
    }
    let points = cloud.points();
    let mut nearest = vec![f64::INFINITY; n];
    let mut picked = Vec::with_capacity(num_points);
    let mut current = start;
    loop {
        picked.push(current);
        nearest[current] = f64::NEG_INFINITY;
        if picked.len() == num_points {
            return Ok(picked);
        }
        let anchor = points[current];
        let mut best = usize::MAX;
        let mut best_dist = f64::NEG_INFINITY;
        for (i, slot) in nearest.iter_mut().enumerate() {
            if *slot == f64::NEG_INFINITY {
                continue;
            }
            let d = squared_distance(points[i], anchor);
            if d < *slot {
                *slot = d;
            }
            if *slot > best_dist {
                best_dist = *slot;
                best = i;
            }
        }
        current = best;
    }
}

/// Indices realizing [`equalize`]: FPS from a random start when shrinking,
/// all originals plus uniform resamples when growing.
pub fn equalize_indices(
    cloud: &PointCloud,
    num_points: usize,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    let n = cloud.len();
    if num_points == 0 {
        return Err(Error::InvalidParameter(
            "num_points must be at least 1".into(),
        ));
    }
    if n == num_points {
        Ok((0..n).collect())
    } else if n > num_points {
        let start = rng.below(n);
        farthest_point_sample(cloud, num_points, start)
    } else {
        let mut indices: Vec<usize> = (0..n).collect();
        indices.extend((n..num_points).map(|_| rng.below(n)));
        Ok(indices)
    }
}

/// Resizes a cloud to exactly `num_points` points drawn from its own points.
pub fn equalize(cloud: &PointCloud, num_points: usize, rng: &mut RngStream) -> Result<PointCloud> {
    let indices = equalize_indices(cloud, num_points, rng)?;
    cloud.select(&indices)
}

/// Translates the centroid to the origin and scales the farthest point to norm 1.
pub fn normalize_unit_sphere(cloud: &PointCloud) -> Result<PointCloud> {
    let n = cloud.len() as f64;
    let mut centroid = [0.0f64; 3];
    for p in cloud.points() {
        for d in 0..3 {
            centroid[d] += p[d] as f64;
        }
    }
    for c in &mut centroid {
        *c /= n;
    }
    let centered: Vec<[f64; 3]> = cloud
        .points()
        .iter()
        .map(|p| {
            [
                p[0] as f64 - centroid[0],
                p[1] as f64 - centroid[1],
                p[2] as f64 - centroid[2],
            ]
        })
        .collect();
    let radius = centered
        .iter()
        .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
        .fold(0.0, f64::max);
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::Degenerate(
            "all points coincide; unit-sphere scale is undefined".into(),
        ));
    }
    PointCloud::new(
        centered
            .iter()
            .map(|p| {
                [
                    (p[0] / radius) as f32,
                    (p[1] / radius) as f32,
                    (p[2] / radius) as f32,
                ]
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f32]) -> PointCloud {
        PointCloud::new(xs.iter().map(|&x| [x, 0.0, 0.0]).collect()).unwrap()
    }

    #[test]
    fn fps_collinear() {
        let cloud = line(&[0.0, 1.0, 10.0]);
        assert_eq!(farthest_point_sample(&cloud, 2, 0).unwrap(), vec![0, 2]);
        assert_eq!(farthest_point_sample(&cloud, 3, 0).unwrap(), vec![0, 2, 1]);
        assert!(farthest_point_sample(&cloud, 4, 0).is_err());
        assert!(farthest_point_sample(&cloud, 0, 0).is_err());
        assert!(farthest_point_sample(&cloud, 1, 3).is_err());
    }

    #[test]
    fn fps_duplicates_never_repeat_indices() {
        let cloud = line(&[0.0, 0.0, 0.0, 1.0]);
        let picks = farthest_point_sample(&cloud, 4, 1).unwrap();
        assert_eq!(picks, vec![1, 3, 0, 2]);
    }

    #[test]
    fn normalize_two_points() {
        let cloud = line(&[1.0, 3.0]);
        let out = normalize_unit_sphere(&cloud).unwrap();
        assert_eq!(out.points(), &[[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
    }

    #[test]
    fn normalize_degenerate() {
        let cloud = PointCloud::new(vec![[2.0, 2.0, 2.0]; 3]).unwrap();
        assert!(matches!(
            normalize_unit_sphere(&cloud),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn equalize_identity_and_padding() {
        let cloud = line(&[0.0, 1.0, 2.0]);
        let mut rng = RngStream::seed_from(1);
        assert_eq!(equalize(&cloud, 3, &mut rng).unwrap(), cloud);
        let padded = equalize_indices(&cloud, 7, &mut rng).unwrap();
        assert_eq!(&padded[..3], &[0, 1, 2]);
        assert_eq!(padded.len(), 7);
        assert!(padded.iter().all(|&i| i < 3));
    }

    #[test]
    fn zero_area_mesh_is_rejected() {
        let mesh = TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let mut rng = RngStream::seed_from(0);
        assert!(matches!(
            sample_surface(&mesh, 10, &mut rng),
            Err(Error::Degenerate(_))
        ));
    }
}
