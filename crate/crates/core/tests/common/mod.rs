#![allow(dead_code)]

use pointcutmix::{PointCloud, RngStream};

/// `n` points with coordinates uniform in [-1, 1).
pub fn random_cloud(n: usize, rng: &mut RngStream) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| {
                [
                    (2.0 * rng.uniform() - 1.0) as f32,
                    (2.0 * rng.uniform() - 1.0) as f32,
                    (2.0 * rng.uniform() - 1.0) as f32,
                ]
            })
            .collect(),
    )
    .unwrap()
}

pub fn euclid(p: [f32; 3], q: [f32; 3]) -> f64 {
    p.iter()
        .zip(&q)
        .map(|(&a, &b)| {
            let d = f64::from(a) - f64::from(b);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Advances `perm` to the next lexicographic permutation; false after the last.
fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Exhaustive minimum over all bijections; the lexicographically smallest
/// minimizer is returned on ties.
pub fn brute_force_assignment(a: &PointCloud, b: &PointCloud) -> (Vec<usize>, f64) {
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = (perm.clone(), f64::INFINITY);
    loop {
        let cost: f64 = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| euclid(a.point(i), b.point(j)))
            .sum();
        if cost < best.1 {
            best = (perm.clone(), cost);
        }
        if !next_permutation(&mut perm) {
            return best;
        }
    }
}

/// Linear-scan k nearest neighbours: center first, then by (squared distance, index).
pub fn brute_force_knn(cloud: &PointCloud, center: usize, k: usize) -> Vec<usize> {
    let c = cloud.point(center);
    let mut order: Vec<(bool, f64, usize)> = (0..cloud.len())
        .map(|i| {
            let p = cloud.point(i);
            let exact_d2: f64 = (0..3)
                .map(|k| {
                    let d = f64::from(c[k]) - f64::from(p[k]);
                    d * d
                })
                .sum();
            (i != center, exact_d2, i)
        })
        .collect();
    order.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2)));
    order.into_iter().take(k).map(|t| t.2).collect()
}
