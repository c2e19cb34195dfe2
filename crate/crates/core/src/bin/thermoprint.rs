use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use thermoprint::classifier::{evaluate, load_model, save_model, train};
use thermoprint::features::{load_features_csv, save_features_csv, split_dataset, SWEEP_GRIDS};
use thermoprint::image::{load_binary_pgm, load_pgm, save_binary_pgm, save_pgm};
use thermoprint::minutiae::{
    extract_minutiae, overlay, prune_minutiae, save_minutiae, MinutiaKind, MinutiaPoint,
};
use thermoprint::perfusion::extract_perfusion;
use thermoprint::pipeline::{extract_batch, run_experiment, sweep, sweep_table, PipelineConfig};
use thermoprint::segmentation::{binarize_mean, segment_face};
use thermoprint::synth::{generate_dataset, load_manifest, MANIFEST_NAME};
use thermoprint::{Error, Result};

#[derive(Parser)]
#[command(
    name = "thermoprint",
    version,
    about = "Minutiae-based thermal face recognition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigFlags {
    /// Cells per side of the feature grid (8, 16, 32, or any N >= 2).
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long = "erode-iters")]
    erode_iters: Option<usize>,
    /// Structuring element: cross3 or square3.
    #[arg(long)]
    se: Option<String>,
    #[arg(long = "border-margin")]
    border_margin: Option<usize>,
    #[arg(long = "min-sep")]
    min_sep: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "train-fraction")]
    train_fraction: Option<f64>,
    /// Plain `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigFlags {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags: [(&str, Option<String>); 10] = [
            ("grid", self.grid.map(|v| v.to_string())),
            ("erode_iters", self.erode_iters.map(|v| v.to_string())),
            ("se", self.se.clone()),
            ("border_margin", self.border_margin.map(|v| v.to_string())),
            ("min_sep", self.min_sep.map(|v| v.to_string())),
            ("lr", self.lr.map(|v| v.to_string())),
            ("momentum", self.momentum.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("train_fraction", self.train_fraction.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(value) = value {
                cfg.set(key, &value)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Threshold a grayscale image at its mean intensity.
    Binarize {
        input: PathBuf,
        #[arg(short)]
        o: PathBuf,
    },
    /// Largest 8-connected component, cropped to its bounding box.
    Segment {
        input: PathBuf,
        #[arg(short)]
        o: PathBuf,
    },
    /// Erode a face mask and thin it to the perfusion skeleton.
    Perfusion {
        input: PathBuf,
        #[arg(short)]
        o: PathBuf,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Terminations and bifurcations of a skeleton image.
    Minutiae {
        input: PathBuf,
        #[arg(short)]
        o: PathBuf,
        #[arg(long)]
        overlay: Option<PathBuf>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Full extraction over a directory of images listed in a manifest.
    Features {
        dir: PathBuf,
        #[arg(short)]
        o: PathBuf,
        /// Defaults to DIR/manifest.csv.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Where to list images that failed extraction.
        #[arg(long)]
        rejects: Option<PathBuf>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Stratified train/test split of a feature CSV.
    Split {
        features: PathBuf,
        #[arg(long = "train-out")]
        train_out: PathBuf,
        #[arg(long = "test-out")]
        test_out: PathBuf,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Train the network on every row of a feature CSV.
    Train {
        features: PathBuf,
        #[arg(short)]
        o: PathBuf,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Predict a class per feature row.
    Predict {
        model: PathBuf,
        features: PathBuf,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Accuracy and confusion matrix. Without --model, splits, trains and
    /// scores the held-out part; with --sweep, INPUT is an image directory.
    Evaluate {
        input: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        sweep: bool,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Generate a synthetic labeled dataset.
    Synth {
        #[arg(short = 'n', value_parser = clap::value_parser!(u64).range(1..))]
        identities: u64,
        #[arg(short = 'k', value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short)]
        o: PathBuf,
    },
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn kind_counts(points: &[MinutiaPoint]) -> (usize, usize) {
    let t = points
        .iter()
        .filter(|p| p.kind == MinutiaKind::Termination)
        .count();
    (t, points.len() - t)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Binarize { input, o } => {
            let mask = binarize_mean(&load_pgm(&input)?);
            save_binary_pgm(&o, &mask)?;
            println!(
                "{}x{} foreground {}",
                mask.width(),
                mask.height(),
                mask.count_ones()
            );
        }
        Command::Segment { input, o } => {
            let (mask, rect) = segment_face(&load_pgm(&input)?)?;
            save_binary_pgm(&o, &mask)?;
            println!("{rect}");
            println!(
                "{}x{} foreground {}",
                mask.width(),
                mask.height(),
                mask.count_ones()
            );
        }
        Command::Perfusion { input, o, flags } => {
            let cfg = flags.resolve()?;
            let skeleton = extract_perfusion(&load_binary_pgm(&input)?, &cfg.perfusion)?;
            save_binary_pgm(&o, &skeleton)?;
            println!(
                "{}x{} foreground {}",
                skeleton.width(),
                skeleton.height(),
                skeleton.count_ones()
            );
        }
        Command::Minutiae {
            input,
            o,
            overlay: overlay_path,
            flags,
        } => {
            let cfg = flags.resolve()?;
            let skeleton = load_binary_pgm(&input)?;
            let (w, h) = (skeleton.width(), skeleton.height());
            cfg.prune.validate(w, h)?;
            let raw = extract_minutiae(&skeleton);
            let points = prune_minutiae(&raw, w, h, &cfg.prune);
            save_minutiae(&o, &points)?;
            if let Some(path) = overlay_path {
                save_pgm(path, &overlay(&skeleton, &points))?;
            }
            let (t, b) = kind_counts(&points);
            println!(
                "{w}x{h} minutiae {} (T {t}, B {b}) raw {}",
                points.len(),
                raw.len()
            );
        }
        Command::Features {
            dir,
            o,
            manifest,
            rejects,
            flags,
        } => {
            let cfg = flags.resolve()?;
            let manifest = load_manifest(manifest.unwrap_or_else(|| dir.join(MANIFEST_NAME)))?;
            let batch = extract_batch(&dir, &manifest, &cfg);
            save_features_csv(&o, &batch.features(cfg.grid)?, cfg.grid)?;
            if let Some(path) = rejects {
                write_text(&path, &batch.rejects_report())?;
            }
            for r in &batch.rejects {
                eprintln!("rejected {}: {}", r.filename, r.reason);
            }
            println!(
                "{} rows x {} features, {} rejected",
                batch.accepted.len(),
                cfg.grid * cfg.grid,
                batch.rejects.len()
            );
            if batch.too_many_rejects() {
                return Err(Error::Config(format!(
                    "{} of {} images failed extraction",
                    batch.rejects.len(),
                    batch.total()
                )));
            }
        }
        Command::Split {
            features,
            train_out,
            test_out,
            flags,
        } => {
            let cfg = flags.resolve()?;
            let (grid, vectors) = load_features_csv(&features)?;
            let split = split_dataset(&vectors, cfg.train_fraction, cfg.split_seed)?;
            save_features_csv(&train_out, &split.train, grid)?;
            save_features_csv(&test_out, &split.test, grid)?;
            println!("train {} test {}", split.train.len(), split.test.len());
        }
        Command::Train { features, o, flags } => {
            let cfg = flags.resolve()?;
            let (_, vectors) = load_features_csv(&features)?;
            let outcome = train(&vectors, cfg.num_classes, &cfg.train)?;
            save_model(&o, &outcome.model)?;
            let last = outcome.loss_history.last().copied().unwrap_or(f64::NAN);
            println!("trained on {} samples, final loss {last:.6}", vectors.len());
        }
        Command::Predict { model, features, o } => {
            let model = load_model(&model)?;
            let (_, vectors) = load_features_csv(&features)?;
            let mut out = String::new();
            for v in &vectors {
                out.push_str(&format!("{}\n", model.predict(&v.counts)?));
            }
            match o {
                Some(path) => write_text(&path, &out)?,
                None => print!("{out}"),
            }
        }
        Command::Evaluate {
            input,
            model,
            sweep: do_sweep,
            flags,
        } => {
            let cfg = flags.resolve()?;
            println!("# effective config");
            for line in cfg.to_string().lines() {
                println!("# {line}");
            }
            if do_sweep {
                let manifest = load_manifest(input.join(MANIFEST_NAME))?;
                let batch = extract_batch(&input, &manifest, &cfg);
                if batch.too_many_rejects() {
                    return Err(Error::Config(format!(
                        "{} of {} images failed extraction",
                        batch.rejects.len(),
                        batch.total()
                    )));
                }
                print!("{}", sweep_table(&sweep(&batch, &SWEEP_GRIDS, &cfg)?));
            } else if let Some(model_path) = model {
                let model = load_model(&model_path)?;
                let (_, vectors) = load_features_csv(&input)?;
                let eval = evaluate(&model, &vectors)?;
                println!("accuracy {}", eval.percent());
                print!("{}", eval.confusion_table());
            } else {
                let (_, vectors) = load_features_csv(&input)?;
                let result = run_experiment(&vectors, &cfg)?;
                println!("train accuracy {}", result.train_eval.percent());
                println!("accuracy {}", result.test_eval.percent());
                print!("{}", result.test_eval.confusion_table());
            }
        }
        Command::Synth {
            identities,
            samples,
            seed,
            o,
        } => {
            generate_dataset(identities as usize, samples as usize, seed, &o)?;
            println!("wrote {} images to {}", identities * samples, o.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
