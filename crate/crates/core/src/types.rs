//! Value types shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f32; 3];

/// An ordered, non-empty set of finite 3D points. Index `i` identifies point `P_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        validate_points(&points)?;
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false for a constructed cloud; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    /// Gathers `indices` into a new cloud. Panics on an out-of-range index.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.points[i]).collect())
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }
}

/// Checks the point cloud invariants, reporting the first violation.
pub fn validate_points(points: &[Point]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if let Some(index) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
        return Err(Error::NonFiniteCoordinate { index });
    }
    Ok(())
}

pub fn validate_cloud(cloud: &PointCloud) -> Result<()> {
    validate_points(cloud.points())
}

/// Dense class-weight vector summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    weights: Vec<f64>,
}

pub const LABEL_SUM_TOLERANCE: f64 = 1e-9;

impl LabelDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidLabel("no classes".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidLabel(
                "weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > LABEL_SUM_TOLERANCE {
            return Err(Error::InvalidLabel(format!("weights sum to {sum}")));
        }
        Ok(Self { weights })
    }

    pub fn one_hot(class_index: usize, num_classes: usize) -> Result<Self> {
        if num_classes == 0 || class_index >= num_classes {
            return Err(Error::OutOfRange {
                what: "class index",
                value: class_index,
                min: 0,
                max: num_classes.saturating_sub(1),
            });
        }
        let mut weights = vec![0.0; num_classes];
        weights[class_index] = 1.0;
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    /// Index of the largest weight, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > self.weights[best] {
                best = i;
            }
        }
        best
    }

    /// `ratio * self + (1 - ratio) * other`.
    pub(crate) fn blend(&self, other: &Self, ratio: f64) -> Self {
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| ratio * a + (1.0 - ratio) * b)
            .collect();
        Self { weights }
    }
}

pub fn one_hot(class_index: usize, num_classes: usize) -> Result<LabelDistribution> {
    LabelDistribution::one_hot(class_index, num_classes)
}

/// Per-point part ids aligned with a cloud.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartLabels(pub Vec<i32>);

impl PartLabels {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_aligned(&self, cloud: &PointCloud) -> Result<()> {
        check_len("part labels vs cloud", self.len(), cloud.len())
    }
}

/// Externally computed per-point importance scores.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyWeights(Vec<f64>);

impl SaliencyWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteWeight { index });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A bijection `mapping[i] = φ*(i)` from the first cloud's indices to the second's.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub mapping: Vec<usize>,
    pub total_cost: f64,
    pub is_exact: bool,
}

impl Assignment {
    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn is_permutation(&self) -> bool {
        is_permutation(&self.mapping)
    }

    /// The assignment from the second cloud back to the first.
    pub fn inverse(&self) -> Self {
        let mut mapping = vec![0; self.mapping.len()];
        for (i, &j) in self.mapping.iter().enumerate() {
            mapping[j] = i;
        }
        Self {
            mapping,
            total_cost: self.total_cost,
            is_exact: self.is_exact,
        }
    }
}

pub fn is_permutation(mapping: &[usize]) -> bool {
    let mut seen = vec![false; mapping.len()];
    for &j in mapping {
        if j >= seen.len() || seen[j] {
            return false;
        }
        seen[j] = true;
    }
    true
}

/// The diagonal of the replacement matrix: `keep[i]` selects the first cloud's point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplacementMask {
    keep: Vec<bool>,
    n_kept: usize,
}

impl ReplacementMask {
    pub fn from_bits(keep: Vec<bool>) -> Self {
        let n_kept = keep.iter().filter(|&&b| b).count();
        Self { keep, n_kept }
    }

    pub fn all(len: usize, value: bool) -> Self {
        Self::from_bits(vec![value; len])
    }

    pub fn from_kept_indices(len: usize, kept: &[usize]) -> Self {
        let mut keep = vec![false; len];
        for &i in kept {
            keep[i] = true;
        }
        Self::from_bits(keep)
    }

    pub fn bits(&self) -> &[bool] {
        &self.keep
    }

    pub fn keeps(&self, i: usize) -> bool {
        self.keep[i]
    }

    pub fn n_kept(&self) -> usize {
        self.n_kept
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn kept_indices(&self) -> Vec<usize> {
        (0..self.keep.len()).filter(|&i| self.keep[i]).collect()
    }

    pub fn complement(&self) -> Self {
        Self::from_bits(self.keep.iter().map(|b| !b).collect())
    }
}

/// Replacement strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MixMode {
    /// Uniformly random kept subset.
    #[serde(rename = "r")]
    Random,
    /// Random center plus its nearest neighbours.
    #[serde(rename = "k")]
    Knn,
    /// Like `Knn`, with the center drawn by saliency.
    #[serde(rename = "s")]
    Saliency,
}

impl fmt::Display for MixMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MixMode::Random => "r",
            MixMode::Knn => "k",
            MixMode::Saliency => "s",
        })
    }
}

impl FromStr for MixMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r" | "random" => Ok(MixMode::Random),
            "k" | "knn" => Ok(MixMode::Knn),
            "s" | "saliency" => Ok(MixMode::Saliency),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixParams {
    pub beta: f64,
    /// The sampled mix ratio.
    pub lambda: f64,
    /// Kept-point count, `floor(lambda * N)`.
    pub n: usize,
    pub mode: MixMode,
    /// Center of the kept patch in modes K and S.
    pub center: Option<usize>,
    /// False when the augmentation gate stayed closed.
    pub mixed: bool,
}

impl MixParams {
    pub fn lambda_effective(&self, num_points: usize) -> f64 {
        self.n as f64 / num_points as f64
    }
}

/// Kept-point count for a mix ratio.
pub fn kept_count(lambda: f64, num_points: usize) -> usize {
    ((lambda * num_points as f64).floor() as usize).min(num_points)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentPolicy {
    pub beta: f64,
    pub rho: f64,
    pub mode: MixMode,
    pub seed: u64,
}

impl AugmentPolicy {
    pub fn new(beta: f64, rho: f64, mode: MixMode, seed: u64) -> Result<Self> {
        let policy = Self {
            beta,
            rho,
            mode,
            seed,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!(
                "rho must lie in [0, 1], got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// An augmented cloud with its fused label and the provenance needed to re-derive it.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedSample {
    pub cloud: PointCloud,
    pub label: LabelDistribution,
    pub part_labels: Option<PartLabels>,
    pub mask: ReplacementMask,
    pub params: MixParams,
    /// Absent when the gate stayed closed.
    pub assignment: Option<Assignment>,
    pub source_ids: (String, Option<String>),
}

impl MixedSample {
    pub fn lambda_effective(&self) -> f64 {
        self.mask.n_kept() as f64 / self.mask.len() as f64
    }
}

pub(crate) fn check_len(what: &'static str, left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::SizeMismatch { what, left, right });
    }
    Ok(())
}
