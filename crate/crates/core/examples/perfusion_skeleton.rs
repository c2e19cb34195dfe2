// Erodes a face mask and thins it to a one-pixel skeleton, comparing the
// two structuring elements.

use thermoprint::perfusion::{
    count_full_blocks, extract_perfusion, PerfusionConfig, StructuringElement,
};
use thermoprint::segmentation::{label_components_8, segment_face};
use thermoprint::synth::{generate_sample, IdentitySpec};

pub fn run_example() -> thermoprint::Result<()> {
    let sample = generate_sample(&IdentitySpec::new(7), 0)?;
    let (mask, _) = segment_face(&sample.image)?;

    for se in [StructuringElement::Cross3, StructuringElement::Square3] {
        let cfg = PerfusionConfig {
            erosion_iterations: 1,
            structuring_element: se,
        };
        let skeleton = extract_perfusion(&mask, &cfg)?;
        println!(
            "{se}: {} skeleton pixels, {} components, {} full 2x2 blocks",
            skeleton.count_ones(),
            label_components_8(&skeleton).component_count(),
            count_full_blocks(&skeleton)
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
