//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use thermoprint::classifier::{one_hot, train, MlpModel, TrainConfig};
use thermoprint::features::{load_features_csv, split_dataset, SWEEP_GRIDS};
use thermoprint::minutiae::{classify_pixel, PixelClass};
use thermoprint::perfusion::{erode, medial_axis, StructuringElement};
use thermoprint::pipeline::{extract, extract_batch, PipelineConfig};
use thermoprint::segmentation::label_components_8;
use thermoprint::synth::{generate_dataset, generate_sample, load_manifest, IdentitySpec};

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed < budget, || {
        format!("took {elapsed:.2?}, budget {budget:?}")
    })
}

fn c1_rule_table() -> Outcome {
    let grid = |rows: [[u8; 3]; 3]| rows.map(|r| r.map(|v| v == 1));
    let reference = [
        ([[0, 0, 1], [0, 1, 0], [0, 0, 0]], PixelClass::Termination),
        ([[1, 1, 0], [1, 1, 0], [0, 0, 0]], PixelClass::Bifurcation),
        ([[0, 1, 0], [0, 1, 1], [0, 0, 0]], PixelClass::Normal),
    ];
    for (rows, want) in reference {
        let got = classify_pixel(&grid(rows));
        ensure(got == want, || {
            format!("{rows:?} gave {got:?}, want {want:?}")
        })?;
    }
    for bits in 0..512u16 {
        let got = match classify_pixel(&window_from_bits(bits)) {
            PixelClass::Background => RuleClass::Background,
            PixelClass::Termination => RuleClass::Termination,
            PixelClass::Normal => RuleClass::Normal,
            PixelClass::Bifurcation => RuleClass::Bifurcation,
            PixelClass::Other => RuleClass::Other,
        };
        ensure(got == rule_oracle(bits), || {
            format!("window {bits:09b} gave {got:?}")
        })?;
    }
    Ok("3 reference windows, 512/512 table entries".into())
}

fn c2_labeling() -> Outcome {
    let mut rng = rng(2);
    for i in 0..200 {
        let density = [0.3, 0.45, 0.55, 0.7][i % 4];
        let img = random_binary(&mut rng, 64, 64, density);
        let (labels, sizes) = flood_fill_labels(&img);
        let lbl = label_components_8(&img);
        ensure(lbl.component_count() == sizes.len(), || {
            format!("image {i}: component count")
        })?;
        ensure(lbl.component_sizes() == sizes.as_slice(), || {
            format!("image {i}: sizes")
        })?;
        ensure(lbl.labels() == labels.as_slice(), || {
            format!("image {i}: partition")
        })?;
    }
    Ok("200 images match the flood fill".into())
}

fn c3_erosion() -> Outcome {
    let mut rng = rng(3);
    let elements = [StructuringElement::Cross3, StructuringElement::Square3];
    for i in 0..100 {
        let img = random_binary(&mut rng, 32, 32, 0.75);
        let (se, n) = (elements[i % 2], 1 + i % 3);
        ensure(erode(&img, se, n) == erode_oracle(&img, se, n), || {
            format!("image {i} ({se}, {n})")
        })?;
    }
    for i in 0..100 {
        let a = random_binary(&mut rng, 32, 32, 0.6);
        let extra = random_binary(&mut rng, 32, 32, 0.3);
        let mut b = a.clone();
        for (r, c) in extra.foreground() {
            b.set(r, c, true);
        }
        let se = elements[i % 2];
        let (ea, eb) = (erode(&a, se, 1), erode(&b, se, 1));
        ensure(ea.is_subset_of(&a), || {
            format!("pair {i}: not anti-extensive")
        })?;
        ensure(ea.is_subset_of(&eb), || format!("pair {i}: not monotone"))?;
    }
    Ok("100 oracle images, 100 law pairs".into())
}

fn c4_skeleton() -> Outcome {
    let mut rng = rng(4);
    let mut shapes: Vec<(String, thermoprint::image::BinaryImage)> = (0..50)
        .map(|i| (format!("blob {i}"), random_blob(&mut rng, 48)))
        .collect();
    shapes.push(("bar".into(), bar()));
    shapes.push(("disk".into(), disk(10)));
    shapes.push(("Y".into(), thick_y()));
    for (name, img) in &shapes {
        let skel = medial_axis(img);
        ensure(skel.is_subset_of(img), || {
            format!("{name}: skeleton leaves the input")
        })?;
        let (before, after) = (component_count(img), component_count(&skel));
        ensure(before == after, || {
            format!("{name}: {before} components became {after}")
        })?;
        let blocks = full_2x2_blocks(&skel);
        ensure(blocks == 0, || format!("{name}: {blocks} full 2x2 blocks"))?;
        ensure(!skel.is_empty() || img.is_empty(), || {
            format!("{name}: skeleton vanished")
        })?;
    }
    Ok(format!("{} shapes", shapes.len()))
}

fn c5_gradients() -> Outcome {
    let mut rng = rng(5);
    let dims = MlpModel::standard_dims(64, 6);
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let model = MlpModel::random(&dims, 0.1, seed).map_err(|e| e.to_string())?;
        let x = random_input(&mut rng, 64);
        let target = one_hot(rng.gen_range(0..6), 6);
        worst = worst.max(gradient_check(&model, &x, &target, 1e-5, GRADIENT_FLOOR));
    }
    ensure(worst < 1e-5, || format!("max relative error {worst:.3e}"))?;
    Ok(format!("max relative error {worst:.2e} over 10 models"))
}

fn c6_determinism() -> Outcome {
    let dirs = [tempfile::tempdir(), tempfile::tempdir()];
    let [a, b] = dirs.map(|d| d.expect("temp dir"));
    generate_dataset(2, 3, 11, a.path()).map_err(|e| e.to_string())?;
    generate_dataset(2, 3, 11, b.path()).map_err(|e| e.to_string())?;
    for entry in fs::read_dir(a.path()).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        let same = fs::read(a.path().join(&name)).ok() == fs::read(b.path().join(&name)).ok();
        ensure(same, || format!("synth output {name:?} differs"))?;
    }

    let mut rng = rng(6);
    let vectors: Vec<_> = (0..30)
        .map(|i| thermoprint::features::FeatureVector {
            grid: 2,
            counts: (0..4).map(|_| rng.gen_range(0..5)).collect(),
            label: Some(i % 3),
        })
        .collect();
    let split = |seed| split_dataset(&vectors, 0.5, seed).map_err(|e| e.to_string());
    ensure(split(7)? == split(7)?, || "split differs".into())?;

    let cfg = TrainConfig {
        epochs: 100,
        ..TrainConfig::default()
    };
    let run = || train(&split(7)?.train, 3, &cfg).map_err(|e| e.to_string());
    ensure(run()? == run()?, || "trained models differ".into())?;
    Ok("synth bytes, split and trained model repeat exactly".into())
}

fn bin(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_thermoprint"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn c7_end_to_end(work: &Path) -> Outcome {
    let start = Instant::now();
    let img = work.join("img");
    let (features, train_csv, test_csv, model) = (
        work.join("features.csv"),
        work.join("train.csv"),
        work.join("test.csv"),
        work.join("model.txt"),
    );
    bin(&["synth", "-n", "6", "-k", "34", "--seed", "1", "-o", p(&img)])?;
    bin(&["features", p(&img), "-o", p(&features), "--grid", "8"])?;
    bin(&[
        "split",
        p(&features),
        "--train-out",
        p(&train_csv),
        "--test-out",
        p(&test_csv),
        "--seed",
        "7",
    ])?;
    bin(&["train", p(&train_csv), "-o", p(&model)])?;
    let report = bin(&["evaluate", p(&test_csv), "--model", p(&model)])?;
    let accuracy: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("accuracy "))
        .and_then(|v| v.trim_end_matches('%').parse().ok())
        .ok_or("no accuracy line")?;
    ensure(accuracy >= 90.0, || {
        format!("test accuracy {accuracy:.2}% < 90%")
    })?;

    let sweep = bin(&["evaluate", p(&img), "--sweep"])?;
    let rows: Vec<&str> = sweep
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("No of Block"))
        .collect();
    let grids: Vec<&str> = rows.iter().filter_map(|r| r.split('\t').next()).collect();
    ensure(grids == ["8x8", "16x16", "32x32"], || {
        format!("sweep rows {rows:?}")
    })?;
    within(start.elapsed(), Duration::from_secs(180))?;
    Ok(format!(
        "test accuracy {accuracy:.2}%, sweep [{}], {:.1?}",
        rows.join(", ").replace('\t', " "),
        start.elapsed()
    ))
}

fn c8_throughput() -> Outcome {
    let sample = generate_sample(&IdentitySpec::new(8), 0).map_err(|e| e.to_string())?;
    let (w, h) = (sample.image.width(), sample.image.height());
    ensure((w, h) == (416, 544), || format!("sample is {w}x{h}"))?;
    let cfg = PipelineConfig::default();
    let start = Instant::now();
    let ex = extract(&sample.image, &cfg).map_err(|e| e.to_string())?;
    ex.features(cfg.grid).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("{w}x{h} extracted in {elapsed:.1?}"))
}

fn c9_conservation(work: &Path) -> Outcome {
    let img = work.join("img");
    let manifest = load_manifest(img.join("manifest.csv")).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::default();
    let batch = extract_batch(&img, &manifest, &cfg);
    ensure(batch.rejects.is_empty(), || {
        format!("{} images rejected", batch.rejects.len())
    })?;
    for grid in SWEEP_GRIDS {
        let vectors = batch.features(grid).map_err(|e| e.to_string())?;
        for (v, img) in vectors.iter().zip(&batch.accepted) {
            ensure(v.total() == img.minutiae.len() as u64, || {
                format!("grid {grid}: sum differs")
            })?;
        }
    }
    let (_, rows) = load_features_csv(work.join("features.csv")).map_err(|e| e.to_string())?;
    ensure(rows.len() == manifest.len(), || {
        format!("{} CSV rows for {} images", rows.len(), manifest.len())
    })?;
    for (row, img) in rows.iter().zip(&batch.accepted) {
        ensure(row.total() == img.minutiae.len() as u64, || {
            "CSV row sum differs from minutiae count".into()
        })?;
    }
    Ok(format!(
        "{} images at grids 8/16/32 and in the CSV",
        manifest.len()
    ))
}

fn main() -> ExitCode {
    let work: PathBuf = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = fs::remove_dir_all(&work);
    fs::create_dir_all(&work).expect("scratch directory");

    // Name, check and time budget in seconds.
    let criteria: Vec<(&str, Check, u64)> = vec![
        ("rule table exactness", Box::new(c1_rule_table), 1),
        ("labeling vs flood fill", Box::new(c2_labeling), 5),
        ("erosion oracle and laws", Box::new(c3_erosion), 5),
        ("skeleton invariants", Box::new(c4_skeleton), 10),
        ("gradient check", Box::new(c5_gradients), 30),
        ("determinism", Box::new(c6_determinism), 60),
        (
            "end-to-end synthetic experiment",
            Box::new(|| c7_end_to_end(&work)),
            180,
        ),
        ("single-image throughput", Box::new(c8_throughput), 1),
        (
            "feature conservation",
            Box::new(|| c9_conservation(&work)),
            60,
        ),
    ];

    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()))
            .and_then(|detail| {
                within(start.elapsed(), Duration::from_secs(*budget)).map(|_| detail)
            });
        let elapsed = start.elapsed();
        match result {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail} ({elapsed:.2?})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why} ({elapsed:.2?})", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
