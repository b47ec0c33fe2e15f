//! kd-tree k-nearest-neighbour queries over a point cloud.
//!
//! Results are ordered by `(distance, original index)` with the query center
//! always first, so the output does not depend on the tree layout.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::types::{Point, PointCloud};

const LEAF_SIZE: usize = 16;

#[derive(Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Immutable spatial index retaining original point indices.
#[derive(Debug)]
pub struct SpatialIndex {
    points: Vec<[f64; 3]>,
    /// Original indices permuted into leaf order.
    order: Vec<usize>,
    root: Node,
}

#[inline]
fn squared_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn widen(p: Point) -> [f64; 3] {
    [p[0] as f64, p[1] as f64, p[2] as f64]
}

/// Candidate ordered by (center-first, distance, index); the heap keeps the worst on top.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    not_center: bool,
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.not_center
            .cmp(&other.not_center)
            .then(self.dist2.total_cmp(&other.dist2))
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> Self {
        let points: Vec<[f64; 3]> = cloud.points().iter().map(|&p| widen(p)).collect();
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = build_node(&points, &mut order, 0);
        Self {
            points,
            order,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` points nearest to point `center`, center first.
    pub fn knn(&self, center: usize, k: usize) -> Result<Vec<usize>> {
        let n = self.points.len();
        if center >= n {
            return Err(Error::OutOfRange {
                what: "center index",
                value: center,
                min: 0,
                max: n - 1,
            });
        }
        if k < 1 || k > n {
            return Err(Error::OutOfRange {
                what: "k",
                value: k,
                min: 1,
                max: n,
            });
        }
        let query = self.points[center];
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(&self.root, &query, center, k, &mut heap);
        let mut found = heap.into_vec();
        found.sort();
        Ok(found.into_iter().map(|c| c.index).collect())
    }

    fn search(
        &self,
        node: &Node,
        query: &[f64; 3],
        center: usize,
        k: usize,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match node {
            Node::Leaf { start, end } => {
                for &index in &self.order[*start..*end] {
                    let candidate = Candidate {
                        not_center: index != center,
                        dist2: squared_distance(query, &self.points[index]),
                        index,
                    };
                    if heap.len() < k {
                        heap.push(candidate);
                    } else if candidate < *heap.peek().expect("heap holds k > 0 items") {
                        heap.pop();
                        heap.push(candidate);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[*axis] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, query, center, k, heap);
                // Equal distances must still be visited: a smaller index may sit across the plane.
                let visit_far =
                    heap.len() < k || diff * diff <= heap.peek().map_or(f64::INFINITY, |c| c.dist2);
                if visit_far {
                    self.search(far, query, center, k, heap);
                }
            }
        }
    }
}

fn build_node(points: &[[f64; 3]], order: &mut [usize], offset: usize) -> Node {
    let len = order.len();
    if len <= LEAF_SIZE {
        return Node::Leaf {
            start: offset,
            end: offset + len,
        };
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        for d in 0..3 {
            lo[d] = lo[d].min(points[i][d]);
            hi[d] = hi[d].max(points[i][d]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    if hi[axis] - lo[axis] == 0.0 {
        // All points coincide.
        return Node::Leaf {
            start: offset,
            end: offset + len,
        };
    }
    let mid = len / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
    });
    let value = points[order[mid]][axis];
    let (left, right) = order.split_at_mut(mid);
    // Left holds coordinates <= value, right >= value.
    Node::Split {
        axis,
        value,
        left: Box::new(build_node(points, left, offset)),
        right: Box::new(build_node(points, right, offset + mid)),
    }
}

pub fn build_index(cloud: &PointCloud) -> SpatialIndex {
    SpatialIndex::build(cloud)
}

pub fn knn(index: &SpatialIndex, center: usize, k: usize) -> Result<Vec<usize>> {
    index.knn(center, k)
}

#[cfg(test)]
fn knn_brute_force(cloud: &PointCloud, center: usize, k: usize) -> Vec<usize> {
    let query = widen(cloud.point(center));
    let mut all: Vec<Candidate> = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(index, &p)| Candidate {
            not_center: index != center,
            dist2: squared_distance(&query, &widen(p)),
            index,
        })
        .collect();
    all.sort();
    all.truncate(k);
    all.into_iter().map(|c| c.index).collect()
}
