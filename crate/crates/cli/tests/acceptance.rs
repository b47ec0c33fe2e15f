//! Acceptance criteria, one line each. Run with `cargo test --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{brute_force_assignment, brute_force_knn, random_cloud};
use pointcutmix::assignment::{solve_auction, solve_exact};
use pointcutmix::batch::{prep_seed, Manifest, ManifestEntry, MANIFEST_FILE};
use pointcutmix::ingest::{parse_ply, prepare, read_cloud, write_ply};
use pointcutmix::mixer::{
    choose_center_saliency, mix_at_ratio, pointcutmix, sample_lambda, Source,
};
use pointcutmix::{
    one_hot, optimal_assignment, AugmentPolicy, MixMode, MixedSample, PartLabels, PointCloud,
    RngStream, SaliencyWeights, SolverConfig,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure!(
        elapsed.as_secs_f64() < limit_s,
        "took {:.2}s, limit {limit_s}s",
        elapsed.as_secs_f64()
    );
    Ok(())
}

fn exact_emd(a: &PointCloud, b: &PointCloud) -> f64 {
    solve_exact(a, b).unwrap().total_cost / a.len() as f64
}

fn exact_assignment_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = RngStream::seed_from(1);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let n = 2 + k % 7;
        let (a, b) = (random_cloud(n, &mut rng), random_cloud(n, &mut rng));
        let (_, oracle) = brute_force_assignment(&a, &b);
        let got = solve_exact(&a, &b).unwrap().total_cost;
        let rel = (got - oracle).abs() / oracle.max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        ensure!(
            rel <= 1e-9,
            "instance {k} (N={n}): {got} vs oracle {oracle}"
        );
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!(
        "1000 instances, N in 2..=8, worst relative error {worst:.1e}"
    ))
}

fn auction_gap_certificate() -> Outcome {
    let start = Instant::now();
    let config = SolverConfig::default();
    let mut rng = RngStream::seed_from(2);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..210 {
        let n = [16, 32, 64][k % 3];
        let (a, b) = (random_cloud(n, &mut rng), random_cloud(n, &mut rng));
        let auction = solve_auction(&a, &b, &config).unwrap().total_cost;
        let exact = solve_exact(&a, &b).unwrap().total_cost;
        let gap = auction - exact;
        worst = worst.max(gap / n as f64);
        ensure!(
            gap <= n as f64 * config.epsilon_final,
            "instance {k} (N={n}): gap {gap:.3e}"
        );
    }
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "210 instances, N in {{16,32,64}}, worst gap/N {worst:.2e}"
    ))
}

fn emd_metric_properties() -> Outcome {
    let mut rng = RngStream::seed_from(3);
    for k in 0..500 {
        let n = 1 + k % 8;
        let (a, b, c) = (
            random_cloud(n, &mut rng),
            random_cloud(n, &mut rng),
            random_cloud(n, &mut rng),
        );
        let (ab, ba, bc, ac) = (
            exact_emd(&a, &b),
            exact_emd(&b, &a),
            exact_emd(&b, &c),
            exact_emd(&a, &c),
        );
        ensure!(ab >= 0.0, "negative distance {ab}");
        ensure!((ab - ba).abs() <= 1e-12, "asymmetric: {ab} vs {ba}");
        ensure!(ac <= ab + bc + 1e-9, "triangle violated on triple {k}");
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.below(i + 1));
        }
        let shuffled = a.select(&order).unwrap();
        ensure!(
            exact_emd(&a, &shuffled) == 0.0,
            "permuted copy at nonzero distance"
        );
    }
    Ok("500 triples, N <= 8".into())
}

fn random_saliency(n: usize, rng: &mut RngStream) -> SaliencyWeights {
    SaliencyWeights::new((0..n).map(|_| rng.uniform()).collect()).unwrap()
}

/// Every point from its declared source; object label fused by the kept fraction.
fn check_composition(
    sample: &MixedSample,
    a: &PointCloud,
    b: &PointCloud,
    class_a: usize,
) -> Result<(), String> {
    let n = a.len();
    let mapping = &sample
        .assignment
        .as_ref()
        .ok_or("missing assignment")?
        .mapping;
    for (i, &j) in mapping.iter().enumerate() {
        let expected = if sample.mask.keeps(i) {
            a.point(i)
        } else {
            b.point(j)
        };
        ensure!(
            sample.cloud.point(i).map(f32::to_bits) == expected.map(f32::to_bits),
            "point {i} does not match its source"
        );
    }
    let weights = sample.label.weights();
    ensure!(
        weights[class_a] == sample.mask.n_kept() as f64 / n as f64,
        "label weight {} vs n_kept/N",
        weights[class_a]
    );
    ensure!(
        (weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9,
        "label does not sum to 1"
    );
    Ok(())
}

fn structural_suite() -> Outcome {
    let config = SolverConfig::default();
    let mut rng = RngStream::seed_from(4);
    let modes = [MixMode::Random, MixMode::Knn, MixMode::Saliency];
    for k in 0..10_000 {
        let n = 8 + rng.below(57);
        let mode = modes[k % 3];
        let (a, b) = (random_cloud(n, &mut rng), random_cloud(n, &mut rng));
        let (ca, cb) = (rng.below(5), rng.below(5));
        let (ya, yb) = (one_hot(ca, 5).unwrap(), one_hot(cb, 5).unwrap());
        let saliency = random_saliency(n, &mut rng);
        let policy = AugmentPolicy::new(1.0, 1.0, mode, 0).unwrap();
        let sample = pointcutmix(
            Source::new(&a, &ya),
            Source::new(&b, &yb),
            &policy,
            &mut rng,
            Some(&saliency),
            &config,
        )
        .map_err(|e| e.to_string())?;
        if ca != cb {
            check_composition(&sample, &a, &b, ca).map_err(|e| format!("mix {k} ({mode}): {e}"))?;
        }
    }
    Ok("10000 mixes across r/k/s, N in 8..=64".into())
}

fn knn_neighbourhoods() -> Outcome {
    let config = SolverConfig::default();
    let mut rng = RngStream::seed_from(5);
    let (ya, yb) = (one_hot(0, 2).unwrap(), one_hot(1, 2).unwrap());
    for k in 0..1000 {
        let n = 2 + rng.below(255);
        let (a, b) = (random_cloud(n, &mut rng), random_cloud(n, &mut rng));
        let lambda = rng.uniform();
        let sample = mix_at_ratio(
            Source::new(&a, &ya),
            Source::new(&b, &yb),
            lambda,
            MixMode::Knn,
            &mut rng,
            None,
            &config,
        )
        .map_err(|e| e.to_string())?;
        let kept = sample.mask.kept_indices();
        if kept.is_empty() {
            continue;
        }
        let center = sample.params.center.ok_or("no center recorded")?;
        let mut oracle = brute_force_knn(&a, center, kept.len());
        oracle.sort_unstable();
        ensure!(
            kept == oracle,
            "mix {k} (N={n}): kept set differs from linear scan"
        );
    }
    Ok("1000 mode-K mixes, N <= 256".into())
}

fn beta_and_gate_statistics() -> Outcome {
    let mut rng = RngStream::seed_from(6);
    let mut draws: Vec<f64> = (0..10_000)
        .map(|_| sample_lambda(1.0, &mut rng).unwrap())
        .collect();
    draws.sort_by(f64::total_cmp);
    let m = draws.len() as f64;
    let ks = draws
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / m).max((i + 1) as f64 / m - x))
        .fold(0.0, f64::max);
    let critical = 1.628 / m.sqrt();
    ensure!(ks < critical, "KS statistic {ks:.4} >= {critical:.4}");

    let config = SolverConfig::default();
    let policy = AugmentPolicy::new(1.0, 0.5, MixMode::Random, 0).unwrap();
    let (a, b) = (random_cloud(8, &mut rng), random_cloud(8, &mut rng));
    let (ya, yb) = (one_hot(0, 2).unwrap(), one_hot(1, 2).unwrap());
    let mut mixed = 0;
    for _ in 0..10_000 {
        let s = pointcutmix(
            Source::new(&a, &ya),
            Source::new(&b, &yb),
            &policy,
            &mut rng,
            None,
            &config,
        )
        .map_err(|e| e.to_string())?;
        mixed += s.params.mixed as usize;
    }
    let fraction = mixed as f64 / 10_000.0;
    ensure!((fraction - 0.5).abs() <= 0.02, "mixed fraction {fraction}");
    Ok(format!(
        "KS D={ks:.4} (< {critical:.4}), mixed fraction {fraction:.4}"
    ))
}

fn saliency_center_law() -> Outcome {
    let mut rng = RngStream::seed_from(7);
    let draws = 100_000;
    let weights = SaliencyWeights::new(vec![1.0, 2.0, 3.0]).unwrap();
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        counts[choose_center_saliency(&weights, &mut rng).unwrap()] += 1;
    }
    let freq = counts.map(|c| c as f64 / draws as f64);
    for (f, e) in freq.iter().zip([0.0, 1.0 / 3.0, 2.0 / 3.0]) {
        ensure!((f - e).abs() <= 0.01, "frequencies {freq:?}");
    }
    let equal = SaliencyWeights::new(vec![2.5; 4]).unwrap();
    let mut counts = [0usize; 4];
    for _ in 0..draws {
        counts[choose_center_saliency(&equal, &mut rng).unwrap()] += 1;
    }
    let uniform = counts.map(|c| c as f64 / draws as f64);
    ensure!(
        uniform.iter().all(|f| (f - 0.25).abs() <= 0.01),
        "equal weights gave {uniform:?}"
    );
    Ok(format!("[1,2,3] -> {freq:.4?}; equal -> {uniform:.3?}"))
}

fn segmentation_provenance() -> Outcome {
    let config = SolverConfig::default();
    let mut rng = RngStream::seed_from(8);
    const B_TAG: i32 = 1_000_000;
    for k in 0..1000 {
        let n = 4 + rng.below(61);
        let (a, b) = (random_cloud(n, &mut rng), random_cloud(n, &mut rng));
        let pa = PartLabels((0..n as i32).collect());
        let pb = PartLabels((0..n as i32).map(|j| B_TAG + j).collect());
        let (ca, cb) = (k % 3, (k % 3 + 1) % 3);
        let (ya, yb) = (one_hot(ca, 3).unwrap(), one_hot(cb, 3).unwrap());
        let mode = [MixMode::Random, MixMode::Knn][k % 2];
        let policy = AugmentPolicy::new(1.0, 1.0, mode, 0).unwrap();
        let sample = pointcutmix(
            Source::new(&a, &ya).with_parts(&pa),
            Source::new(&b, &yb).with_parts(&pb),
            &policy,
            &mut rng,
            None,
            &config,
        )
        .map_err(|e| e.to_string())?;
        let labels = &sample.part_labels.as_ref().ok_or("labels dropped")?.0;
        for (i, &tag) in labels.iter().enumerate() {
            let expected = if tag >= B_TAG {
                b.point((tag - B_TAG) as usize)
            } else {
                a.point(tag as usize)
            };
            ensure!(
                sample.cloud.point(i).map(f32::to_bits) == expected.map(f32::to_bits),
                "mix {k}: point {i} does not carry its source's part label"
            );
            ensure!(
                (tag < B_TAG) == sample.mask.keeps(i),
                "mix {k}: tag at {i} disagrees with mask"
            );
        }
        check_composition(&sample, &a, &b, ca).map_err(|e| format!("mix {k}: {e}"))?;
    }
    Ok("1000 tagged segmentation mixes".into())
}

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_pointcutmix")
}

fn run_binary(args: &[&str]) -> Result<String, String> {
    let out = Command::new(binary())
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr).trim()
    );
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn make_dataset(root: &Path, samples: usize, n: usize) {
    let mut rng = RngStream::seed_from(9);
    let classes = ["bottle", "chair", "lamp", "sofa"];
    for k in 0..samples {
        let class = classes[k % classes.len()];
        let dir = root.join(class);
        fs::create_dir_all(&dir).unwrap();
        // Vary the raw size so both down- and up-sampling are exercised.
        let cloud = random_cloud(n - 100 + rng.below(200), &mut rng);
        fs::write(
            dir.join(format!("{class}_{k:03}.ply")),
            write_ply(&cloud, None, None).unwrap(),
        )
        .unwrap();
    }
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn parallel_invariance() -> Outcome {
    let data = tempfile::tempdir().map_err(|e| e.to_string())?;
    make_dataset(data.path(), 40, 1024);
    let mut trees = Vec::new();
    for jobs in ["1", "8"] {
        let out = tempfile::tempdir().map_err(|e| e.to_string())?;
        run_binary(&[
            "augment",
            s(data.path()),
            "--rho",
            "0.8",
            "--epochs",
            "2",
            "--seed",
            "2024",
            "--jobs",
            jobs,
            "--out",
            s(out.path()),
        ])?;
        trees.push(tree(out.path()));
    }
    ensure!(
        trees[0].len() == 81,
        "expected 80 outputs + manifest, got {}",
        trees[0].len()
    );
    ensure!(
        trees[0] == trees[1],
        "output trees differ between --jobs 1 and --jobs 8"
    );
    Ok("40 samples x 2 epochs, --jobs 1 == --jobs 8 byte-for-byte".into())
}

fn performance_floor() -> Outcome {
    let config = SolverConfig::default();
    let mut rng = RngStream::seed_from(10);
    let mut slowest = Duration::ZERO;
    for _ in 0..3 {
        let (a, b) = (random_cloud(1024, &mut rng), random_cloud(1024, &mut rng));
        let start = Instant::now();
        let assignment = optimal_assignment(&a, &b, &config).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        ensure!(!assignment.is_exact, "N=1024 should take the auction path");
    }
    within(slowest, 1.0)?;

    let data = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    make_dataset(data.path(), 40, 1024);
    let start = Instant::now();
    run_binary(&[
        "augment",
        s(data.path()),
        "--rho",
        "1",
        "--jobs",
        "4",
        "--seed",
        "5",
        "--out",
        s(out.path()),
    ])?;
    let elapsed = start.elapsed().as_secs_f64();
    let manifest = Manifest::read(&out.path().join(MANIFEST_FILE)).map_err(|e| e.to_string())?;
    let rate = manifest.mixed_count() as f64 / elapsed;
    ensure!(rate >= 10.0, "{rate:.1} mixed samples/s");
    Ok(format!(
        "auction N=1024 worst {:.0} ms; augment {rate:.1} mixed samples/s with --jobs 4",
        slowest.as_secs_f64() * 1e3
    ))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn qualitative_fixture() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let seed = 3;
    let mut rng = RngStream::seed_from(prep_seed(seed, 0));
    let raw = read_cloud(&fixture("chair.ply"), 1024, &mut rng).map_err(|e| e.to_string())?;
    let chair = prepare(&raw, 1024, &mut rng)
        .map_err(|e| e.to_string())?
        .cloud;
    let n = chair.len();
    let mut summary = Vec::new();
    for mode in ["r", "k"] {
        for lambda in ["0", "0.2", "0.4", "0.6", "0.8", "1.0"] {
            let out = dir
                .path()
                .join(format!("chair_airplane_{mode}_{lambda}.ply"));
            run_binary(&[
                "mix",
                s(&fixture("chair.ply")),
                "0",
                s(&fixture("airplane.ply")),
                "1",
                "--mode",
                mode,
                "--lambda",
                lambda,
                "--seed",
                "3",
                "--out",
                s(&out),
            ])?;
            let mixed = parse_ply(&fs::read_to_string(&out).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?
                .cloud;
            let entry: ManifestEntry = serde_json::from_str(
                &fs::read_to_string(out.with_extension("json")).map_err(|e| e.to_string())?,
            )
            .map_err(|e| e.to_string())?;
            let expected = (lambda.parse::<f64>().unwrap() * n as f64).floor() as usize;
            let kept = (0..n)
                .filter(|&i| mixed.point(i).map(f32::to_bits) == chair.point(i).map(f32::to_bits))
                .count();
            ensure!(
                mixed.len() == n,
                "{mode} λ={lambda}: {} points",
                mixed.len()
            );
            ensure!(
                kept == expected && entry.n_kept == expected,
                "{mode} λ={lambda}: kept {kept} (manifest {}), expected {expected}",
                entry.n_kept
            );
            if mode == "k" {
                summary.push(format!("{kept}/{}", n - kept));
            }
        }
    }
    Ok(format!("kept/replaced per λ: {}", summary.join(" ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (
            "exact assignment matches permutation oracle",
            exact_assignment_oracle,
        ),
        ("auction within N*epsilon of exact", auction_gap_certificate),
        ("EMD metric properties", emd_metric_properties),
        ("mix composition and label fusion", structural_suite),
        ("mode-K neighbourhoods", knn_neighbourhoods),
        ("Beta(1,1) and gate statistics", beta_and_gate_statistics),
        ("saliency center law", saliency_center_law),
        ("segmentation label provenance", segmentation_provenance),
        ("augment output independent of --jobs", parallel_invariance),
        ("performance floor", performance_floor),
        ("chair/airplane ratio sweep", qualitative_fixture),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (number, (name, check)) in criteria.iter().enumerate() {
        let number = number + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &number.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {number:>2} {name}: {detail} [{secs:.2}s]"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {number:>2} {name}: {reason} [{secs:.2}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
