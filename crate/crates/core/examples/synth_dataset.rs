// Writes a small labeled synthetic dataset and checks each identity's
// ground truth against what the pipeline recovers.
//
// `cargo run --example synth_dataset -- OUTDIR` keeps the images.

use std::path::PathBuf;

use thermoprint::pipeline::{extract, PipelineConfig};
use thermoprint::synth::{dataset_specs, generate_dataset, generate_sample, load_manifest};

fn run(outdir: Option<PathBuf>) -> thermoprint::Result<()> {
    let tmp = tempfile::tempdir().map_err(|e| thermoprint::Error::Io {
        path: std::env::temp_dir(),
        source: e,
    })?;
    let outdir = outdir.unwrap_or_else(|| tmp.path().to_path_buf());

    let manifest = generate_dataset(3, 2, 1, &outdir)?;
    let entries = load_manifest(&manifest)?;
    println!("{} images listed in {}", entries.len(), manifest.display());

    let cfg = PipelineConfig::default();
    for (label, spec) in dataset_specs(3, 1).iter().enumerate() {
        let sample = generate_sample(spec, 0)?;
        let ex = extract(&sample.image, &cfg)?;
        println!(
            "identity {label} (seed {:#x}): {} ground-truth points, {} extracted",
            spec.identity_seed,
            sample.ground_truth.len(),
            ex.minutiae.len()
        );
    }
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
