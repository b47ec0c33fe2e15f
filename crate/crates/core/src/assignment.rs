//! Optimal point-to-point assignment between two equal-size clouds and the
//! Earth Mover's Distance it induces.
//!
//! Ground cost is the unsquared Euclidean distance. Small problems are solved
//! exactly with a shortest-augmenting-path (Jonker-Volgenant family) solver;
//! larger ones with an ε-scaling forward auction whose result is within
//! `N * epsilon_final` of the optimum.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::types::{check_len, Assignment, Point, PointCloud};

/// Above this size the auction solver evaluates costs on demand instead of
/// materializing the N x N matrix.
pub const DENSE_COST_LIMIT: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Largest N solved exactly (inclusive).
    pub exact_threshold: usize,
    /// Final bidding increment; bounds the per-point suboptimality.
    pub epsilon_final: f64,
    pub epsilon_scaling_factor: f64,
    /// Cap on the total number of bids across all scaling phases.
    pub max_auction_rounds: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            exact_threshold: 256,
            epsilon_final: 1e-4,
            epsilon_scaling_factor: 4.0,
            max_auction_rounds: 10_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.exact_threshold < 1 {
            return Err(Error::InvalidParameter(
                "exact_threshold must be at least 1".into(),
            ));
        }
        if !(self.epsilon_final > 0.0 && self.epsilon_final.is_finite()) {
            return Err(Error::InvalidParameter(
                "epsilon_final must be positive".into(),
            ));
        }
        if !(self.epsilon_scaling_factor > 1.0 && self.epsilon_scaling_factor.is_finite()) {
            return Err(Error::InvalidParameter(
                "epsilon_scaling_factor must exceed 1".into(),
            ));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn distance(p: Point, q: Point) -> f64 {
    let dx = p[0] as f64 - q[0] as f64;
    let dy = p[1] as f64 - q[1] as f64;
    let dz = p[2] as f64 - q[2] as f64;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Euclidean distance between `x1[i]` and `x2[j]`.
pub fn cost(x1: &PointCloud, i: usize, x2: &PointCloud, j: usize) -> Result<f64> {
    for (what, index, len) in [
        ("index into x1", i, x1.len()),
        ("index into x2", j, x2.len()),
    ] {
        if index >= len {
            return Err(Error::OutOfRange {
                what,
                value: index,
                min: 0,
                max: len - 1,
            });
        }
    }
    Ok(distance(x1.point(i), x2.point(j)))
}

/// Sum of `||x1_i - x2_mapping[i]||`, accumulated in ascending order so the
/// result does not depend on which cloud is listed first.
pub fn assignment_cost(x1: &PointCloud, x2: &PointCloud, mapping: &[usize]) -> f64 {
    let mut terms: Vec<f64> = mapping
        .iter()
        .enumerate()
        .map(|(i, &j)| distance(x1.point(i), x2.point(j)))
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

enum Costs<'a> {
    Dense { n: usize, data: Vec<f64> },
    OnDemand { a: &'a [Point], b: &'a [Point] },
}

impl<'a> Costs<'a> {
    fn new(x1: &'a PointCloud, x2: &'a PointCloud, dense: bool) -> Self {
        let (a, b) = (x1.points(), x2.points());
        if dense {
            Costs::Dense {
                n: a.len(),
                data: dense_costs(a, b),
            }
        } else {
            Costs::OnDemand { a, b }
        }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Costs::Dense { n, data } => data[i * n + j],
            Costs::OnDemand { a, b } => distance(a[i], b[j]),
        }
    }

    fn max(&self, n: usize) -> f64 {
        match self {
            Costs::Dense { data, .. } => data.iter().copied().fold(0.0, f64::max),
            Costs::OnDemand { .. } => {
                let mut m: f64 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        m = m.max(self.get(i, j));
                    }
                }
                m
            }
        }
    }
}

fn dense_costs(a: &[Point], b: &[Point]) -> Vec<f64> {
    let mut data = Vec::with_capacity(a.len() * b.len());
    for &p in a {
        data.extend(b.iter().map(|&q| distance(p, q)));
    }
    data
}

fn check_sizes(x1: &PointCloud, x2: &PointCloud) -> Result<()> {
    check_len("cloud sizes", x1.len(), x2.len())
}

/// Exact minimum-cost assignment, O(N^3) time and N^2 memory.
pub fn solve_exact(x1: &PointCloud, x2: &PointCloud) -> Result<Assignment> {
    check_sizes(x1, x2)?;
    let n = x1.len();
    let mapping = shortest_augmenting_path(n, &dense_costs(x1.points(), x2.points()));
    Ok(Assignment {
        total_cost: assignment_cost(x1, x2, &mapping),
        mapping,
        is_exact: true,
    })
}

/// Row-by-row shortest augmenting paths with Dijkstra over reduced costs.
/// `costs` is row-major N x N. Returns `row -> column`.
fn shortest_augmenting_path(n: usize, costs: &[f64]) -> Vec<usize> {
    const NONE: usize = usize::MAX;
    // Column potentials and row potentials; columns are 1-based with 0 as a
    // virtual source column.
    let mut row_pot = vec![0.0f64; n + 1];
    let mut col_pot = vec![0.0f64; n + 1];
    let mut col_owner = vec![NONE; n + 1];
    let mut prev_col = vec![0usize; n + 1];
    let mut min_slack = vec![f64::INFINITY; n + 1];
    let mut visited = vec![false; n + 1];

    for row in 0..n {
        col_owner[0] = row;
        let mut col = 0usize;
        min_slack.fill(f64::INFINITY);
        visited.fill(false);

        loop {
            visited[col] = true;
            let r = col_owner[col];
            let row_costs = &costs[r * n..(r + 1) * n];
            let mut delta = f64::INFINITY;
            let mut next = 0usize;
            for j in 1..=n {
                if visited[j] {
                    continue;
                }
                let reduced = row_costs[j - 1] - row_pot[r] - col_pot[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    prev_col[j] = col;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    next = j;
                }
            }
            for j in 0..=n {
                if visited[j] {
                    row_pot[col_owner[j]] += delta;
                    col_pot[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            col = next;
            if col_owner[col] == NONE {
                break;
            }
        }

        // Flip the alternating path back to the source column.
        while col != 0 {
            let p = prev_col[col];
            col_owner[col] = col_owner[p];
            col = p;
        }
    }

    let mut mapping = vec![0usize; n];
    for j in 1..=n {
        mapping[col_owner[j]] = j - 1;
    }
    mapping
}

/// Approximate assignment by ε-scaling forward auction.
///
/// The returned cost exceeds the optimum by at most `N * epsilon_final`. Each
/// phase ends with an assignment satisfying ε-complementary slackness; the
/// solve also stops early once the primal/dual gap certifies that bound.
pub fn solve_auction(
    x1: &PointCloud,
    x2: &PointCloud,
    config: &SolverConfig,
) -> Result<Assignment> {
    check_sizes(x1, x2)?;
    config.validate()?;
    let n = x1.len();
    let costs = Costs::new(x1, x2, n <= DENSE_COST_LIMIT);
    let mapping = auction(n, &costs, config)?;
    Ok(Assignment {
        total_cost: assignment_cost(x1, x2, &mapping),
        mapping,
        is_exact: false,
    })
}

const UNASSIGNED: usize = usize::MAX;

fn auction(n: usize, costs: &Costs<'_>, config: &SolverConfig) -> Result<Vec<usize>> {
    if n == 1 {
        return Ok(vec![0]);
    }
    let max_cost = costs.max(n);
    if max_cost == 0.0 {
        // Every point coincides; all bijections cost zero.
        return Ok((0..n).collect());
    }
    let target_gap = n as f64 * config.epsilon_final;

    let mut prices = vec![0.0f64; n];
    let mut person_to_object = vec![UNASSIGNED; n];
    let mut object_to_person = vec![UNASSIGNED; n];
    let mut queue = VecDeque::with_capacity(n);
    let mut bids: u64 = 0;
    let mut epsilon = (max_cost / 4.0).max(config.epsilon_final);

    let mut row_min = vec![0.0f64; n];
    queue.extend(0..n);

    loop {
        while let Some(person) = queue.pop_front() {
            bids += 1;
            if bids > config.max_auction_rounds {
                return Err(Error::NoConvergence {
                    bids: config.max_auction_rounds,
                });
            }
            let (best_obj, best, second) = match costs {
                Costs::Dense { data, .. } => {
                    cheapest_two(data[person * n..(person + 1) * n].iter().copied(), &prices)
                }
                Costs::OnDemand { a, b } => {
                    let p = a[person];
                    cheapest_two(b.iter().map(|&q| distance(p, q)), &prices)
                }
            };
            // Raise the price until the runner-up is as attractive, plus ε.
            prices[best_obj] += second - best + epsilon;
            let previous = object_to_person[best_obj];
            if previous != UNASSIGNED {
                person_to_object[previous] = UNASSIGNED;
                queue.push_back(previous);
            }
            object_to_person[best_obj] = person;
            person_to_object[person] = best_obj;
        }

        if epsilon <= config.epsilon_final
            || duality_gap(costs, &prices, &person_to_object, &mut row_min) <= target_gap
        {
            break;
        }
        epsilon = (epsilon / config.epsilon_scaling_factor).max(config.epsilon_final);
        // Pairs still within the tighter ε of their row minimum keep their
        // objects; everyone else bids again.
        for (person, object) in person_to_object.iter_mut().enumerate() {
            if costs.get(person, *object) + prices[*object] > row_min[person] + epsilon {
                object_to_person[*object] = UNASSIGNED;
                *object = UNASSIGNED;
                queue.push_back(person);
            }
        }
    }
    log::trace!("auction n={n} bids={bids} final_epsilon={epsilon:e}");
    Ok(person_to_object)
}

/// Lowest and second-lowest `cost + price` with the argmin (lowest index on ties).
#[inline]
fn cheapest_two(row: impl Iterator<Item = f64>, prices: &[f64]) -> (usize, f64, f64) {
    let mut best_obj = 0;
    let mut best = f64::INFINITY;
    let mut second = f64::INFINITY;
    for (j, (c, &p)) in row.zip(prices).enumerate() {
        let t = c + p;
        if t < second {
            if t < best {
                second = best;
                best = t;
                best_obj = j;
            } else {
                second = t;
            }
        }
    }
    (best_obj, best, second)
}

/// Primal cost minus the dual bound implied by the current prices. Leaves
/// each row's minimum reduced cost in `row_min`.
fn duality_gap(costs: &Costs<'_>, prices: &[f64], mapping: &[usize], row_min: &mut [f64]) -> f64 {
    let mut primal = 0.0;
    let mut dual = -prices.iter().sum::<f64>();
    for (i, &j) in mapping.iter().enumerate() {
        primal += costs.get(i, j);
        let mut m = f64::INFINITY;
        for (k, &p) in prices.iter().enumerate() {
            m = m.min(costs.get(i, k) + p);
        }
        row_min[i] = m;
        dual += m;
    }
    primal - dual
}

/// Exact below or at `config.exact_threshold`, auction above it.
pub fn optimal_assignment(
    x1: &PointCloud,
    x2: &PointCloud,
    config: &SolverConfig,
) -> Result<Assignment> {
    check_sizes(x1, x2)?;
    config.validate()?;
    if x1.len() <= config.exact_threshold {
        solve_exact(x1, x2)
    } else {
        solve_auction(x1, x2, config)
    }
}

/// Mean displacement under the optimal assignment.
pub fn emd(x1: &PointCloud, x2: &PointCloud, config: &SolverConfig) -> Result<f64> {
    let assignment = optimal_assignment(x1, x2, config)?;
    Ok(assignment.total_cost / x1.len() as f64)
}
