// End-to-end run: synthesize, extract, split, train and report accuracy
// for each grid size.
//
// `cargo run --release --example sweep_experiment -- 6 34` reproduces the
// full-size experiment; the defaults keep it quick.

use thermoprint::features::SWEEP_GRIDS;
use thermoprint::pipeline::{extract_batch, sweep, sweep_table, PipelineConfig};
use thermoprint::synth::{generate_dataset, load_manifest};

fn run(identities: usize, samples: usize) -> thermoprint::Result<()> {
    let tmp = tempfile::tempdir().map_err(|e| thermoprint::Error::Io {
        path: std::env::temp_dir(),
        source: e,
    })?;
    let manifest = generate_dataset(identities, samples, 1, tmp.path())?;

    let cfg = PipelineConfig {
        num_classes: identities,
        ..PipelineConfig::default()
    };
    let batch = extract_batch(tmp.path(), &load_manifest(&manifest)?, &cfg);
    println!(
        "{} images extracted, {} rejected",
        batch.accepted.len(),
        batch.rejects.len()
    );

    let results = sweep(&batch, &SWEEP_GRIDS, &cfg)?;
    for r in &results {
        println!(
            "grid {:>2}: train {} test {}",
            r.grid,
            r.train_eval.percent(),
            r.test_eval.percent()
        );
    }
    print!("{}", sweep_table(&results));
    Ok(())
}

pub fn run_example() -> thermoprint::Result<()> {
    run(3, 6)
}

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().ok());
    let identities = args.next().flatten().unwrap_or(3);
    let samples = args.next().flatten().unwrap_or(6);
    if let Err(e) = run(identities, samples) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
