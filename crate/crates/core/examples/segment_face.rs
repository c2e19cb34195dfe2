// Thresholds a synthetic thermogram at its mean, keeps the largest
// 8-connected region and crops to it.

use thermoprint::segmentation::{binarize_mean, crop_to_face, label_components_8};
use thermoprint::synth::{generate_sample, IdentitySpec};

pub fn run_example() -> thermoprint::Result<()> {
    let sample = generate_sample(&IdentitySpec::new(42), 0)?;
    let img = &sample.image;

    let binary = binarize_mean(img);
    let labels = label_components_8(&binary);
    let largest = labels.component_sizes().iter().max().copied().unwrap_or(0);
    println!(
        "{}x{} image, {} foreground pixels in {} components (largest {largest})",
        img.width(),
        img.height(),
        binary.count_ones(),
        labels.component_count()
    );

    let (mask, rect) = crop_to_face(&binary)?;
    println!("{rect}");
    println!(
        "face mask {}x{}, {} pixels",
        mask.width(),
        mask.height(),
        mask.count_ones()
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
