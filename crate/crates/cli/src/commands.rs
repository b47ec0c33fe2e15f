use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pointcutmix::batch::{
    load_dataset, prep_seed, run_augment, stream_seed, AugmentConfig, ManifestEntry,
};
use pointcutmix::ingest::{
    equalize, normalize_unit_sphere, prepare, read_cloud, read_shape, sample_surface, write_cloud,
    write_ply, CloudData, Shape,
};
use pointcutmix::mixer::{mix_at_ratio, pointcutmix, Source};
use pointcutmix::{
    one_hot, optimal_assignment, AugmentPolicy, Error, Execution, Result, RngStream,
    SaliencyWeights, SolverConfig,
};

use crate::args::{Command, DatasetArgs, EmdArgs, MixArgs, SampleArgs};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Emd(args) => emd(args),
        Command::Mix(args) => mix(args),
        Command::Augment(args) => augment(args.common, args.rho, false),
        Command::SegmentAugment(args) => augment(args.common, args.rho, true),
        Command::Sample(args) => sample(args),
    }
}

fn emd(args: EmdArgs) -> Result<()> {
    // Meshes are sampled at the requested size, or 1024 points.
    let mesh_points = args.equalize.unwrap_or(1024);
    let mut clouds = Vec::with_capacity(2);
    for (ordinal, path) in [&args.file_a, &args.file_b].into_iter().enumerate() {
        let mut rng = RngStream::seed_from(prep_seed(args.seed, ordinal));
        let cloud = read_cloud(path, mesh_points, &mut rng)?.cloud;
        clouds.push(match args.equalize {
            Some(n) => equalize(&cloud, n, &mut rng)?,
            None => cloud,
        });
    }
    let (a, b) = (&clouds[0], &clouds[1]);
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            what: "cloud sizes (pass --equalize N)",
            left: a.len(),
            right: b.len(),
        });
    }
    let assignment = optimal_assignment(a, b, &SolverConfig::default())?;
    log::info!(
        "{} assignment over {} points",
        if assignment.is_exact {
            "exact"
        } else {
            "approximate"
        },
        a.len()
    );
    println!("{:.6}", assignment.total_cost / a.len() as f64);
    if let Some(path) = &args.dump_assignment {
        let mut text = String::with_capacity(assignment.mapping.len() * 5);
        for j in &assignment.mapping {
            writeln!(text, "{j}").expect("infallible");
        }
        std::fs::write(path, text).map_err(|e| Error::from(e).in_file(path))?;
    }
    Ok(())
}

/// Weights from a PLY `saliency` property or a plain list of numbers.
fn read_saliency(path: &Path) -> Result<SaliencyWeights> {
    let is_ply = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    if is_ply {
        return match read_shape(path)? {
            Shape::Cloud(CloudData {
                saliency: Some(s), ..
            }) => Ok(s),
            _ => Err(Error::UnsupportedFormat("no saliency property".into()).in_file(path)),
        };
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = line.parse::<f64>().map_err(|_| {
            Error::Parse {
                line: i + 1,
                message: format!("expected a number, got {line:?}"),
            }
            .in_file(path)
        })?;
        values.push(v);
    }
    SaliencyWeights::new(values).map_err(|e| e.in_file(path))
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn mix(args: MixArgs) -> Result<()> {
    if !args
        .out
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("ply"))
    {
        return Err(Error::UnsupportedFormat(format!(
            "mix writes PLY; got {}",
            args.out.display()
        )));
    }
    let mut rng_a = RngStream::seed_from(prep_seed(args.seed, 0));
    let mut raw_a = read_cloud(&args.file_a, args.num_points, &mut rng_a)?;
    raw_a.saliency = match &args.saliency {
        Some(path) => {
            let weights = read_saliency(path)?;
            if weights.len() != raw_a.cloud.len() {
                return Err(Error::SizeMismatch {
                    what: "saliency weights vs first cloud",
                    left: weights.len(),
                    right: raw_a.cloud.len(),
                }
                .in_file(path));
            }
            Some(weights)
        }
        None => None,
    };
    let a = prepare(&raw_a, args.num_points, &mut rng_a).map_err(|e| e.in_file(&args.file_a))?;
    let b = {
        let mut rng = RngStream::seed_from(prep_seed(args.seed, 1));
        let raw = read_cloud(&args.file_b, args.num_points, &mut rng)?;
        prepare(&raw, args.num_points, &mut rng).map_err(|e| e.in_file(&args.file_b))?
    };

    let num_classes = args
        .num_classes
        .unwrap_or(args.label_a.max(args.label_b) + 1);
    let (ya, yb) = (
        one_hot(args.label_a, num_classes)?,
        one_hot(args.label_b, num_classes)?,
    );
    let (mut src_a, mut src_b) = (Source::new(&a.cloud, &ya), Source::new(&b.cloud, &yb));
    if let (Some(pa), Some(pb)) = (&a.part_labels, &b.part_labels) {
        log::info!("both inputs carry part labels; mixing them too");
        src_a = src_a.with_parts(pa);
        src_b = src_b.with_parts(pb);
    }

    let seed = stream_seed(args.seed, 0, 0);
    let mut rng = RngStream::seed_from(seed);
    let config = SolverConfig::default();
    let saliency = a.saliency.as_ref();
    let mut sample = match args.lambda {
        Some(lambda) => {
            let mut s = mix_at_ratio(src_a, src_b, lambda, args.mode, &mut rng, saliency, &config)?;
            s.params.beta = args.beta;
            s
        }
        None => {
            let policy = AugmentPolicy::new(args.beta, 1.0, args.mode, args.seed)?;
            pointcutmix(src_a, src_b, &policy, &mut rng, saliency, &config)?
        }
    };
    sample.source_ids = (
        args.file_a.display().to_string(),
        Some(args.file_b.display().to_string()),
    );

    let text = write_ply(&sample.cloud, sample.part_labels.as_ref(), None)?;
    std::fs::write(&args.out, text).map_err(|e| Error::from(e).in_file(&args.out))?;
    let classes: Vec<String> = (0..num_classes).map(|c| c.to_string()).collect();
    let output_file = args
        .out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let entry = ManifestEntry::from_sample(&sample, &classes, output_file, 0, 0, seed);
    let sidecar = sidecar_path(&args.out);
    let json = serde_json::to_string_pretty(&entry)? + "\n";
    std::fs::write(&sidecar, json).map_err(|e| Error::from(e).in_file(&sidecar))?;
    println!(
        "kept {} of {} points (lambda {:.6})",
        sample.mask.n_kept(),
        sample.cloud.len(),
        sample.params.lambda
    );
    Ok(())
}

fn augment(args: DatasetArgs, rho: f64, segmentation: bool) -> Result<()> {
    let config = AugmentConfig {
        mode: args.mode,
        beta: args.beta,
        rho,
        seed: args.seed,
        num_points: args.num_points,
        epochs: args.epochs,
        pairing: args.pairs,
        segmentation,
        solver: SolverConfig::default(),
    };
    config.policy()?;
    let exec = Execution::with_jobs(args.jobs)?;
    log::info!("running with {} job(s)", exec.jobs());
    let dataset = load_dataset(&args.dataset_dir, args.num_points, args.seed, &exec)?;
    log::info!(
        "{} samples in {} classes ({} skipped)",
        dataset.samples.len(),
        dataset.classes.len(),
        dataset.skipped.len()
    );
    std::fs::create_dir_all(&args.out).map_err(|e| Error::from(e).in_file(&args.out))?;
    let manifest = run_augment(&dataset, &config, &args.out, &exec)?;
    println!(
        "wrote {} samples ({} mixed) to {}",
        manifest.entries.len(),
        manifest.mixed_count(),
        args.out.display()
    );
    Ok(())
}

fn sample(args: SampleArgs) -> Result<()> {
    let mesh = match read_shape(&args.mesh_file)? {
        Shape::Mesh(mesh) => mesh,
        Shape::Cloud(_) => {
            return Err(Error::UnsupportedFormat(format!(
                "{} is not a mesh",
                args.mesh_file.display()
            )))
        }
    };
    let mut rng = RngStream::seed_from(args.seed);
    let wrap = |e: Error| e.in_file(&args.mesh_file);
    let mut cloud = sample_surface(&mesh, args.num_points, &mut rng).map_err(wrap)?;
    if args.normalize {
        cloud = normalize_unit_sphere(&cloud).map_err(wrap)?;
    }
    write_cloud(&args.out, &CloudData::new(cloud))
}
