// Trains the 100-50-10 tanh network on a toy count dataset, evaluates it
// and round-trips the model through its text format.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermoprint::classifier::{evaluate, parse_model, train, write_model, TrainConfig};
use thermoprint::features::{split_dataset, FeatureVector};

/// Three classes, each with a hot region of the 16-cell grid.
fn toy_dataset() -> Vec<FeatureVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    (0..3)
        .flat_map(|label| (0..10).map(move |_| label))
        .map(|label| {
            let counts = (0..16)
                .map(|cell| {
                    let base = if cell / 6 == label { 3 } else { 0 };
                    base + rng.gen_range(0..2)
                })
                .collect();
            FeatureVector {
                grid: 4,
                counts,
                label: Some(label),
            }
        })
        .collect()
}

pub fn run_example() -> thermoprint::Result<()> {
    let split = split_dataset(&toy_dataset(), 0.5, 1)?;
    let cfg = TrainConfig {
        epochs: 300,
        ..TrainConfig::default()
    };
    let outcome = train(&split.train, 3, &cfg)?;
    let first = outcome.loss_history[0];
    let last = outcome.loss_history[outcome.loss_history.len() - 1];
    println!("loss {first:.4} -> {last:.4} over {} epochs", cfg.epochs);

    let eval = evaluate(&outcome.model, &split.test)?;
    println!("test accuracy {}", eval.percent());
    print!("{}", eval.confusion_table());

    let restored = parse_model(&write_model(&outcome.model))?;
    assert_eq!(restored, outcome.model);
    println!("model text round-trips exactly");
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
