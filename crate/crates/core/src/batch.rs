//! Offline batch augmentation over a class-per-folder dataset.
//!
//! Every output sample owns an RNG stream derived from the base seed, its
//! epoch and its sample index, so results do not depend on scheduling or on
//! the number of worker threads.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assignment::SolverConfig;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::{self, write_ply, CloudData};
use crate::mixer::{pointcutmix, Source};
use crate::rng::{mix64, RngStream};
use crate::types::{one_hot, AugmentPolicy, LabelDistribution, MixMode, MixedSample};

const PAIR_DOMAIN: u64 = 0xA076_1D64_78BD_642F;
const PREP_DOMAIN: u64 = 0xE703_7ED1_A0B4_28DB;

/// Seed of the stream that drives the gate, λ and mask of one output sample.
pub fn stream_seed(base: u64, epoch: usize, sample_index: usize) -> u64 {
    mix64(base, epoch as u64, sample_index as u64)
}

fn partner_seed(base: u64, epoch: usize, sample_index: usize) -> u64 {
    mix64(base ^ PAIR_DOMAIN, epoch as u64, sample_index as u64)
}

/// Seed of the stream that samples and equalizes the `file_ordinal`-th input.
pub fn prep_seed(base: u64, file_ordinal: usize) -> u64 {
    mix64(base ^ PREP_DOMAIN, u64::MAX, file_ordinal as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    /// Uniformly random distinct partner per sample per epoch.
    Random,
    /// Partner `(i + 1 + epoch mod (M - 1)) mod M`.
    RoundRobin,
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pairing::Random => "random",
            Pairing::RoundRobin => "roundrobin",
        })
    }
}

impl FromStr for Pairing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Pairing::Random),
            "roundrobin" | "round-robin" => Ok(Pairing::RoundRobin),
            other => Err(Error::InvalidParameter(format!(
                "unknown pairing {other:?}"
            ))),
        }
    }
}

impl Pairing {
    fn partner(self, base_seed: u64, epoch: usize, index: usize, count: usize) -> usize {
        debug_assert!(count > 1);
        match self {
            Pairing::Random => {
                let mut rng = RngStream::seed_from(partner_seed(base_seed, epoch, index));
                let j = rng.below(count - 1);
                if j >= index {
                    j + 1
                } else {
                    j
                }
            }
            Pairing::RoundRobin => (index + 1 + epoch % (count - 1)) % count,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AugmentConfig {
    pub mode: MixMode,
    pub beta: f64,
    pub rho: f64,
    pub seed: u64,
    pub num_points: usize,
    pub epochs: usize,
    pub pairing: Pairing,
    /// Carry per-point part labels through the mix.
    pub segmentation: bool,
    pub solver: SolverConfig,
}

impl AugmentConfig {
    pub fn policy(&self) -> Result<AugmentPolicy> {
        AugmentPolicy::new(self.beta, self.rho, self.mode, self.seed)
    }
}

/// A prepared (equalized, normalized) dataset sample.
#[derive(Clone, Debug)]
pub struct DatasetSample {
    /// Path relative to the dataset root, `/`-separated.
    pub id: String,
    pub class_index: usize,
    pub data: CloudData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    /// Class names in index order (alphabetical folder names).
    pub classes: Vec<String>,
    pub samples: Vec<DatasetSample>,
    pub skipped: Vec<SkippedFile>,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)
        .map_err(|e| Error::from(e).in_file(dir))?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::from(e).in_file(dir))?;
    entries.sort();
    Ok(entries)
}

fn relative_id(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Loads a class-per-folder dataset, preparing each sample to `num_points`.
/// Unreadable files are skipped with a warning and reported in `skipped`.
pub fn load_dataset(
    root: &Path,
    num_points: usize,
    base_seed: u64,
    exec: &Execution,
) -> Result<Dataset> {
    let mut classes = Vec::new();
    let mut files = Vec::new();
    for class_dir in sorted_entries(root)? {
        if !class_dir.is_dir() {
            continue;
        }
        let class_index = classes.len();
        classes.push(
            class_dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
        );
        for file in sorted_entries(&class_dir)? {
            if file.is_file() && ingest::is_shape_file(&file) {
                files.push((class_index, file));
            }
        }
    }

    let loaded = exec.map_indexed(files.len(), |ordinal| {
        let (class_index, path) = &files[ordinal];
        let mut rng = RngStream::seed_from(prep_seed(base_seed, ordinal));
        let data = ingest::read_cloud(path, num_points, &mut rng).and_then(|raw| {
            ingest::prepare(&raw, num_points, &mut rng).map_err(|e| e.in_file(path))
        });
        (relative_id(root, path), *class_index, data)
    });

    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for (id, class_index, data) in loaded {
        match data {
            Ok(data) => samples.push(DatasetSample {
                id,
                class_index,
                data,
            }),
            Err(e) => {
                log::warn!("skipping {id}: {e}");
                skipped.push(SkippedFile {
                    path: id,
                    reason: e.to_string(),
                });
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no readable samples under {}",
            root.display()
        )));
    }
    Ok(Dataset {
        classes,
        samples,
        skipped,
    })
}

/// One emitted sample with everything needed to re-derive it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub output_file: String,
    pub source_a_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_b_id: Option<String>,
    pub mode: MixMode,
    pub mixed: bool,
    /// The sampled ratio; absent when the gate stayed closed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub lambda_effective: f64,
    pub n_kept: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<usize>,
    /// Nonzero class weights keyed by class name.
    pub label_weights: BTreeMap<String, f64>,
    pub epoch: usize,
    pub sample_index: usize,
    /// Seed of this sample's RNG stream.
    pub seed: u64,
}

impl ManifestEntry {
    pub fn from_sample(
        sample: &MixedSample,
        classes: &[String],
        output_file: String,
        epoch: usize,
        sample_index: usize,
        seed: u64,
    ) -> Self {
        let label_weights = sample
            .label
            .weights()
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(c, &w)| (classes[c].clone(), w))
            .collect();
        Self {
            output_file,
            source_a_id: sample.source_ids.0.clone(),
            source_b_id: sample.source_ids.1.clone(),
            mode: sample.params.mode,
            mixed: sample.params.mixed,
            lambda: sample.params.mixed.then_some(sample.params.lambda),
            lambda_effective: sample.lambda_effective(),
            n_kept: sample.mask.n_kept(),
            center: sample.params.center,
            label_weights,
            epoch,
            sample_index,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub mode: MixMode,
    pub beta: f64,
    pub rho: f64,
    pub base_seed: u64,
    pub num_points: usize,
    pub epochs: usize,
    pub pairing: Pairing,
    pub segmentation: bool,
    pub classes: Vec<String>,
    pub entries: Vec<ManifestEntry>,
    pub skipped: Vec<SkippedFile>,
}

impl Manifest {
    pub fn mixed_count(&self) -> usize {
        self.entries.iter().filter(|e| e.mixed).count()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(path))
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn check_dataset(dataset: &Dataset, config: &AugmentConfig) -> Result<()> {
    if dataset.samples.is_empty() {
        return Err(Error::InvalidParameter("dataset is empty".into()));
    }
    if config.rho > 0.0 && dataset.samples.len() < 2 {
        return Err(Error::InvalidParameter(
            "mixing needs at least two samples".into(),
        ));
    }
    for s in &dataset.samples {
        if s.data.cloud.len() != config.num_points {
            return Err(Error::SizeMismatch {
                what: "prepared sample size",
                left: s.data.cloud.len(),
                right: config.num_points,
            });
        }
        if config.segmentation && s.data.part_labels.is_none() {
            return Err(Error::InvalidParameter(format!(
                "{} has no per-point label property",
                s.id
            )));
        }
        if config.mode == MixMode::Saliency && s.data.saliency.is_none() {
            return Err(Error::InvalidParameter(format!(
                "{} has no saliency property (required by mode s)",
                s.id
            )));
        }
    }
    Ok(())
}

/// Segmentation carries part labels; classification ignores them.
fn source<'a>(
    s: &'a DatasetSample,
    label: &'a LabelDistribution,
    segmentation: bool,
) -> Source<'a> {
    let src = Source::new(&s.data.cloud, label);
    match (&s.data.part_labels, segmentation) {
        (Some(parts), true) => src.with_parts(parts),
        _ => src,
    }
}

/// Produces the sample for `(epoch, sample_index)` without touching the filesystem.
pub fn augment_one(
    dataset: &Dataset,
    config: &AugmentConfig,
    epoch: usize,
    sample_index: usize,
) -> Result<MixedSample> {
    let policy = config.policy()?;
    let count = dataset.samples.len();
    let a = &dataset.samples[sample_index];
    let partner = if count > 1 {
        config
            .pairing
            .partner(config.seed, epoch, sample_index, count)
    } else {
        sample_index
    };
    let b = &dataset.samples[partner];
    let num_classes = dataset.classes.len();
    let (ya, yb) = (
        one_hot(a.class_index, num_classes)?,
        one_hot(b.class_index, num_classes)?,
    );
    let (src_a, src_b) = (
        source(a, &ya, config.segmentation),
        source(b, &yb, config.segmentation),
    );
    let mut rng = RngStream::seed_from(stream_seed(config.seed, epoch, sample_index));
    let mut sample = pointcutmix(
        src_a,
        src_b,
        &policy,
        &mut rng,
        a.data
            .saliency
            .as_ref()
            .filter(|_| config.mode == MixMode::Saliency),
        &config.solver,
    )?;
    sample.source_ids = (a.id.clone(), sample.params.mixed.then(|| b.id.clone()));
    Ok(sample)
}

fn output_name(epoch: usize, class: &str, sample_index: usize, id: &str) -> String {
    let stem = Path::new(id)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sample".into());
    format!("epoch_{epoch:03}/{class}/{sample_index:05}_{stem}.ply")
}

/// Emits `epochs` augmented copies of the dataset under `out_dir` and writes
/// `manifest.json`. Output bytes are independent of `exec`.
pub fn run_augment(
    dataset: &Dataset,
    config: &AugmentConfig,
    out_dir: &Path,
    exec: &Execution,
) -> Result<Manifest> {
    config.policy()?;
    config.solver.validate()?;
    check_dataset(dataset, config)?;
    let count = dataset.samples.len();
    for epoch in 0..config.epochs {
        for class in &dataset.classes {
            let dir = out_dir.join(format!("epoch_{epoch:03}")).join(class);
            std::fs::create_dir_all(&dir).map_err(|e| Error::from(e).in_file(&dir))?;
        }
    }

    let results = exec.map_indexed(config.epochs * count, |task| {
        let (epoch, sample_index) = (task / count, task % count);
        let sample = augment_one(dataset, config, epoch, sample_index)?;
        let a = &dataset.samples[sample_index];
        let rel = output_name(epoch, &dataset.classes[a.class_index], sample_index, &a.id);
        let text = write_ply(&sample.cloud, sample.part_labels.as_ref(), None)?;
        let path = out_dir.join(&rel);
        std::fs::write(&path, text).map_err(|e| Error::from(e).in_file(&path))?;
        Ok(ManifestEntry::from_sample(
            &sample,
            &dataset.classes,
            rel,
            epoch,
            sample_index,
            stream_seed(config.seed, epoch, sample_index),
        ))
    });
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;

    let manifest = Manifest {
        mode: config.mode,
        beta: config.beta,
        rho: config.rho,
        base_seed: config.seed,
        num_points: config.num_points,
        epochs: config.epochs,
        pairing: config.pairing,
        segmentation: config.segmentation,
        classes: dataset.classes.clone(),
        entries,
        skipped: dataset.skipped.clone(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_json()?).map_err(|e| Error::from(e).in_file(&path))?;
    Ok(manifest)
}

/// Re-derives a manifest entry's sample from the dataset alone.
pub fn replay_entry(
    dataset: &Dataset,
    config: &AugmentConfig,
    entry: &ManifestEntry,
) -> Result<MixedSample> {
    let sample = augment_one(dataset, config, entry.epoch, entry.sample_index)?;
    if sample.source_ids.0 != entry.source_a_id || sample.source_ids.1 != entry.source_b_id {
        return Err(Error::InvalidParameter(format!(
            "manifest entry {} does not match the dataset",
            entry.output_file
        )));
    }
    Ok(sample)
}
