//! Cut-and-paste mixing of two assigned point clouds.
//!
//! Output point `i` is `x1[i]` where the mask keeps it and `x2[φ*(i)]`
//! otherwise. The fused label weights the first source by the realized kept
//! fraction `n_kept / N`.

use crate::assignment::{optimal_assignment, SolverConfig};
use crate::error::{Error, Result};
use crate::neighbors::SpatialIndex;
use crate::rng::RngStream;
use crate::types::{
    check_len, kept_count, Assignment, AugmentPolicy, LabelDistribution, MixMode, MixParams,
    MixedSample, PartLabels, PointCloud, ReplacementMask, SaliencyWeights,
};

const SALIENCY_FLOOR: f64 = 1e-12;

/// λ ~ Beta(beta, beta), drawn as a ratio of two Gamma(beta, 1) variates.
pub fn sample_lambda(beta: f64, rng: &mut RngStream) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let g1 = rng.gamma(beta)?;
    let g2 = rng.gamma(beta)?;
    let total = g1 + g2;
    if total > 0.0 && total.is_finite() {
        Ok((g1 / total).clamp(0.0, 1.0))
    } else {
        // Both draws underflowed (tiny beta): the law collapses onto {0, 1}.
        Ok(if rng.uniform() < 0.5 { 0.0 } else { 1.0 })
    }
}

/// Keeps a uniformly random subset of `n` out of `num_points` indices.
pub fn mask_random(num_points: usize, n: usize, rng: &mut RngStream) -> Result<ReplacementMask> {
    if n > num_points {
        return Err(Error::OutOfRange {
            what: "kept count",
            value: n,
            min: 0,
            max: num_points,
        });
    }
    let mut indices: Vec<usize> = (0..num_points).collect();
    for i in 0..n {
        let j = i + rng.below(num_points - i);
        indices.swap(i, j);
    }
    Ok(ReplacementMask::from_kept_indices(
        num_points,
        &indices[..n],
    ))
}

/// Keeps the `n` nearest neighbours of `center` (the center included).
pub fn mask_knn(
    cloud: &PointCloud,
    n: usize,
    center: usize,
    index: &SpatialIndex,
) -> Result<ReplacementMask> {
    check_len("spatial index vs cloud", index.len(), cloud.len())?;
    let kept = index.knn(center, n)?;
    Ok(ReplacementMask::from_kept_indices(cloud.len(), &kept))
}

/// Draws a patch center with probability proportional to `w_i - min(w) + 1e-12`.
pub fn choose_center_saliency(weights: &SaliencyWeights, rng: &mut RngStream) -> Result<usize> {
    let values = weights.values();
    if values.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteWeight { index });
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Ok(rng.below(values.len()));
    }
    let shifted: Vec<f64> = values.iter().map(|v| v - min + SALIENCY_FLOOR).collect();
    let total: f64 = shifted.iter().sum();
    let target = rng.uniform() * total;
    let mut acc = 0.0;
    for (i, w) in shifted.iter().enumerate() {
        acc += w;
        if target < acc {
            return Ok(i);
        }
    }
    // Rounding left `target` past the final partial sum.
    Ok(shifted.len() - 1)
}

fn check_mix_inputs(
    x1: &PointCloud,
    y1: &LabelDistribution,
    x2: &PointCloud,
    y2: &LabelDistribution,
    assignment: &Assignment,
    mask: &ReplacementMask,
) -> Result<()> {
    check_len("cloud sizes", x1.len(), x2.len())?;
    check_len("mask vs cloud", mask.len(), x1.len())?;
    check_len("assignment vs cloud", assignment.len(), x1.len())?;
    check_len("class counts", y1.num_classes(), y2.num_classes())?;
    if !assignment.is_permutation() {
        return Err(Error::InvalidParameter(
            "assignment is not a permutation".into(),
        ));
    }
    Ok(())
}

/// Composes the mixed cloud and fused label.
///
/// The recorded params describe the mask alone (`lambda = n_kept / N`, mode R);
/// [`pointcutmix`] replaces them with the sampling context.
pub fn apply_mix(
    x1: &PointCloud,
    y1: &LabelDistribution,
    x2: &PointCloud,
    y2: &LabelDistribution,
    assignment: &Assignment,
    mask: &ReplacementMask,
) -> Result<MixedSample> {
    check_mix_inputs(x1, y1, x2, y2, assignment, mask)?;
    let points = (0..x1.len())
        .map(|i| {
            if mask.keeps(i) {
                x1.point(i)
            } else {
                x2.point(assignment.mapping[i])
            }
        })
        .collect();
    let lambda_eff = mask.n_kept() as f64 / mask.len() as f64;
    Ok(MixedSample {
        cloud: PointCloud::new(points)?,
        label: y1.blend(y2, lambda_eff),
        part_labels: None,
        mask: mask.clone(),
        params: MixParams {
            beta: 1.0,
            lambda: lambda_eff,
            n: mask.n_kept(),
            mode: MixMode::Random,
            center: None,
            mixed: true,
        },
        assignment: Some(assignment.clone()),
        source_ids: ("a".into(), Some("b".into())),
    })
}

/// [`apply_mix`] that also carries per-point part labels with their points.
#[allow(clippy::too_many_arguments)]
pub fn apply_mix_segmentation(
    x1: &PointCloud,
    parts1: &PartLabels,
    y1: &LabelDistribution,
    x2: &PointCloud,
    parts2: &PartLabels,
    y2: &LabelDistribution,
    assignment: &Assignment,
    mask: &ReplacementMask,
) -> Result<MixedSample> {
    parts1.check_aligned(x1)?;
    parts2.check_aligned(x2)?;
    let mut sample = apply_mix(x1, y1, x2, y2, assignment, mask)?;
    let parts = (0..x1.len())
        .map(|i| {
            if mask.keeps(i) {
                parts1.0[i]
            } else {
                parts2.0[assignment.mapping[i]]
            }
        })
        .collect();
    sample.part_labels = Some(PartLabels(parts));
    Ok(sample)
}

/// One labelled input to a mix.
#[derive(Clone, Copy, Debug)]
pub struct Source<'a> {
    pub cloud: &'a PointCloud,
    pub label: &'a LabelDistribution,
    /// Per-point part labels; segmentation mixing runs when both sources have them.
    pub parts: Option<&'a PartLabels>,
}

impl<'a> Source<'a> {
    pub fn new(cloud: &'a PointCloud, label: &'a LabelDistribution) -> Self {
        Self {
            cloud,
            label,
            parts: None,
        }
    }

    pub fn with_parts(mut self, parts: &'a PartLabels) -> Self {
        self.parts = Some(parts);
        self
    }
}

fn check_sources(a: &Source<'_>, b: &Source<'_>) -> Result<()> {
    check_len("cloud sizes", a.cloud.len(), b.cloud.len())?;
    check_len("class counts", a.label.num_classes(), b.label.num_classes())?;
    match (a.parts, b.parts) {
        (Some(p1), Some(p2)) => {
            p1.check_aligned(a.cloud)?;
            p2.check_aligned(b.cloud)
        }
        (None, None) => Ok(()),
        _ => Err(Error::InvalidParameter(
            "part labels must be given for both sources or neither".into(),
        )),
    }
}

/// Full augmentation step: the ρ gate, then λ ~ Beta(β, β), the optimal
/// assignment, the mode's mask and the composition.
///
/// A closed gate returns the first source unchanged and consumes exactly one draw.
pub fn pointcutmix(
    a: Source<'_>,
    b: Source<'_>,
    policy: &AugmentPolicy,
    rng: &mut RngStream,
    saliency: Option<&SaliencyWeights>,
    config: &SolverConfig,
) -> Result<MixedSample> {
    policy.validate()?;
    check_sources(&a, &b)?;
    check_saliency(policy.mode, saliency, a.cloud)?;

    if rng.uniform() >= policy.rho {
        return Ok(unmixed(a, policy));
    }
    let lambda = sample_lambda(policy.beta, rng)?;
    let mut sample = mix_at_ratio(a, b, lambda, policy.mode, rng, saliency, config)?;
    sample.params.beta = policy.beta;
    Ok(sample)
}

fn check_saliency(
    mode: MixMode,
    saliency: Option<&SaliencyWeights>,
    cloud: &PointCloud,
) -> Result<()> {
    match (mode, saliency) {
        (MixMode::Saliency, None) => Err(Error::InvalidParameter(
            "saliency mode requires saliency weights".into(),
        )),
        (_, Some(w)) => check_len("saliency vs cloud", w.len(), cloud.len()),
        _ => Ok(()),
    }
}

fn unmixed(a: Source<'_>, policy: &AugmentPolicy) -> MixedSample {
    let n = a.cloud.len();
    MixedSample {
        cloud: a.cloud.clone(),
        label: a.label.clone(),
        part_labels: a.parts.cloned(),
        mask: ReplacementMask::all(n, true),
        params: MixParams {
            beta: policy.beta,
            lambda: 1.0,
            n,
            mode: policy.mode,
            center: None,
            mixed: false,
        },
        assignment: None,
        source_ids: ("a".into(), None),
    }
}

/// Mixes at a fixed ratio, bypassing the gate and the Beta draw.
pub fn mix_at_ratio(
    a: Source<'_>,
    b: Source<'_>,
    lambda: f64,
    mode: MixMode,
    rng: &mut RngStream,
    saliency: Option<&SaliencyWeights>,
    config: &SolverConfig,
) -> Result<MixedSample> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    check_sources(&a, &b)?;
    check_saliency(mode, saliency, a.cloud)?;
    let num_points = a.cloud.len();
    let n = kept_count(lambda, num_points);
    let assignment = optimal_assignment(a.cloud, b.cloud, config)?;

    let (mask, center) = match mode {
        MixMode::Random => (mask_random(num_points, n, rng)?, None),
        _ if n == 0 => (ReplacementMask::all(num_points, false), None),
        MixMode::Knn => {
            let center = rng.below(num_points);
            let index = SpatialIndex::build(a.cloud);
            (mask_knn(a.cloud, n, center, &index)?, Some(center))
        }
        MixMode::Saliency => {
            let weights = saliency.expect("checked above");
            let center = choose_center_saliency(weights, rng)?;
            let index = SpatialIndex::build(a.cloud);
            (mask_knn(a.cloud, n, center, &index)?, Some(center))
        }
    };

    let mut sample = match (a.parts, b.parts) {
        (Some(p1), Some(p2)) => apply_mix_segmentation(
            a.cloud,
            p1,
            a.label,
            b.cloud,
            p2,
            b.label,
            &assignment,
            &mask,
        )?,
        _ => apply_mix(a.cloud, a.label, b.cloud, b.label, &assignment, &mask)?,
    };
    sample.params = MixParams {
        beta: sample.params.beta,
        lambda,
        n,
        mode,
        center,
        mixed: true,
    };
    Ok(sample)
}
