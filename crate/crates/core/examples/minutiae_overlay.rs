// Finds terminations and bifurcations on a skeleton, prunes spurious ones
// and writes the points plus an overlay image.
//
// `cargo run --example minutiae_overlay -- OUTDIR` keeps the files;
// without an argument they go to a temporary directory.

use std::path::PathBuf;

use thermoprint::image::save_pgm;
use thermoprint::minutiae::{
    extract_minutiae, overlay, prune_minutiae, save_minutiae, MinutiaKind, PruneConfig,
};
use thermoprint::perfusion::{extract_perfusion, PerfusionConfig};
use thermoprint::segmentation::segment_face;
use thermoprint::synth::{generate_sample, IdentitySpec};

fn summarize(label: &str, points: &[thermoprint::minutiae::MinutiaPoint]) {
    let t = points
        .iter()
        .filter(|p| p.kind == MinutiaKind::Termination)
        .count();
    println!(
        "{label}: {} points (T {t}, B {})",
        points.len(),
        points.len() - t
    );
}

fn run(outdir: Option<PathBuf>) -> thermoprint::Result<()> {
    let tmp = tempfile::tempdir().map_err(|e| thermoprint::Error::Io {
        path: std::env::temp_dir(),
        source: e,
    })?;
    let outdir = outdir.unwrap_or_else(|| tmp.path().to_path_buf());

    let sample = generate_sample(&IdentitySpec::new(3), 0)?;
    let (mask, _) = segment_face(&sample.image)?;
    let skeleton = extract_perfusion(&mask, &PerfusionConfig::default())?;

    let raw = extract_minutiae(&skeleton);
    let kept = prune_minutiae(
        &raw,
        skeleton.width(),
        skeleton.height(),
        &PruneConfig::default(),
    );
    summarize("raw", &raw);
    summarize("pruned", &kept);

    save_minutiae(outdir.join("minutiae.txt"), &kept)?;
    save_pgm(outdir.join("overlay.pgm"), &overlay(&skeleton, &kept))?;
    println!("wrote minutiae.txt and overlay.pgm to {}", outdir.display());
    Ok(())
}

pub fn run_example() -> thermoprint::Result<()> {
    run(None)
}

fn main() {
    if let Err(e) = run(std::env::args().nth(1).map(PathBuf::from)) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
