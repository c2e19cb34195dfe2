// Counts minutiae per cell at each sweep grid size. The vector length
// depends only on the grid, so crops of any size feed the same network.

use thermoprint::features::SWEEP_GRIDS;
use thermoprint::pipeline::{extract, PipelineConfig};
use thermoprint::synth::{generate_sample, IdentitySpec};

pub fn run_example() -> thermoprint::Result<()> {
    let cfg = PipelineConfig::default();
    for index in 0..2 {
        let sample = generate_sample(&IdentitySpec::new(11), index)?;
        let ex = extract(&sample.image, &cfg)?;
        println!(
            "sample {index}: crop {}x{}, {} minutiae",
            ex.skeleton.width(),
            ex.skeleton.height(),
            ex.minutiae.len()
        );
        for grid in SWEEP_GRIDS {
            let fv = ex.features(grid)?;
            let busy = fv.counts.iter().filter(|&&c| c > 0).count();
            println!(
                "  {grid:>2}x{grid:<2} {} features, {busy} non-empty cells, sum {}",
                fv.len(),
                fv.total()
            );
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
