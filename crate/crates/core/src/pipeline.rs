//! End-to-end extraction (gray image to feature vector), batch processing
//! over a manifest, and the block-size sweep.

use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::classifier::{evaluate, train, Evaluation, TrainConfig, DEFAULT_CLASSES};
use crate::error::{Error, Result};
use crate::features::{block_features, split_dataset, FeatureVector, SWEEP_GRIDS};
use crate::image::{load_pgm, BinaryImage, GrayImage};
use crate::minutiae::{extract_minutiae, prune_minutiae, MinutiaPoint, PruneConfig};
use crate::perfusion::{extract_perfusion, PerfusionConfig};
use crate::segmentation::{segment_face, CropRect};
use crate::synth::ManifestEntry;

/// Fraction of a batch allowed to fail extraction before the run is an error.
pub const MAX_REJECT_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub perfusion: PerfusionConfig,
    pub prune: PruneConfig,
    pub grid: usize,
    pub train: TrainConfig,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub num_classes: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            perfusion: PerfusionConfig::default(),
            prune: PruneConfig::default(),
            grid: 8,
            train: TrainConfig {
                seed: 7,
                ..TrainConfig::default()
            },
            train_fraction: 0.5,
            split_seed: 7,
            num_classes: DEFAULT_CLASSES,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.perfusion.validate()?;
        self.train.validate()?;
        if self.grid < 2 {
            return Err(Error::Config(format!(
                "grid {} must be at least 2",
                self.grid
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction {} is not in (0, 1)",
                self.train_fraction
            )));
        }
        if self.num_classes == 0 {
            return Err(Error::Config("num_classes must be positive".into()));
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
        }
        match key {
            "grid" => self.grid = num(key, value)?,
            "erode_iters" => self.perfusion.erosion_iterations = num(key, value)?,
            "se" => self.perfusion.structuring_element = value.parse()?,
            "border_margin" => self.prune.border_margin = num(key, value)?,
            "min_sep" => self.prune.min_separation = num(key, value)?,
            "lr" => self.train.learning_rate = num(key, value)?,
            "momentum" => self.train.momentum = num(key, value)?,
            "epochs" => self.train.epochs = num(key, value)?,
            "init_scale" => self.train.init_scale = num(key, value)?,
            "batch_mode" => self.train.batch_mode = value.parse()?,
            "seed" => {
                let seed = num(key, value)?;
                self.train.seed = seed;
                self.split_seed = seed;
            }
            "train_fraction" => self.train_fraction = num(key, value)?,
            "classes" => self.num_classes = num(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a plain `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }
}

impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "grid = {}", self.grid)?;
        writeln!(f, "erode_iters = {}", self.perfusion.erosion_iterations)?;
        writeln!(f, "se = {}", self.perfusion.structuring_element)?;
        writeln!(f, "border_margin = {}", self.prune.border_margin)?;
        writeln!(f, "min_sep = {}", self.prune.min_separation)?;
        writeln!(f, "lr = {}", self.train.learning_rate)?;
        writeln!(f, "momentum = {}", self.train.momentum)?;
        writeln!(f, "epochs = {}", self.train.epochs)?;
        writeln!(f, "init_scale = {}", self.train.init_scale)?;
        writeln!(f, "batch_mode = {}", self.train.batch_mode)?;
        writeln!(f, "seed = {}", self.split_seed)?;
        writeln!(f, "train_fraction = {}", self.train_fraction)?;
        write!(f, "classes = {}", self.num_classes)
    }
}

/// Every intermediate product of a single-image run.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub crop: CropRect,
    pub mask: BinaryImage,
    pub skeleton: BinaryImage,
    pub raw_minutiae: Vec<MinutiaPoint>,
    /// Minutiae that survived pruning, in crop coordinates.
    pub minutiae: Vec<MinutiaPoint>,
}

impl Extraction {
    /// Block counts over the cropped plane; checks that no point is lost.
    pub fn features(&self, grid: usize) -> Result<FeatureVector> {
        let fv = block_features(
            &self.minutiae,
            self.skeleton.width(),
            self.skeleton.height(),
            grid,
        )?;
        if fv.total() != self.minutiae.len() as u64 {
            return Err(Error::Config(format!(
                "feature total {} differs from {} retained minutiae",
                fv.total(),
                self.minutiae.len()
            )));
        }
        Ok(fv)
    }
}

/// segment → erode → thin → minutiae → prune.
pub fn extract(img: &GrayImage, cfg: &PipelineConfig) -> Result<Extraction> {
    let (mask, crop) = segment_face(img)?;
    let skeleton = extract_perfusion(&mask, &cfg.perfusion)?;
    let raw_minutiae = extract_minutiae(&skeleton);
    cfg.prune.validate(skeleton.width(), skeleton.height())?;
    let minutiae = prune_minutiae(
        &raw_minutiae,
        skeleton.width(),
        skeleton.height(),
        &cfg.prune,
    );
    Ok(Extraction {
        crop,
        mask,
        skeleton,
        raw_minutiae,
        minutiae,
    })
}

#[derive(Debug, Clone)]
pub struct Reject {
    pub filename: String,
    pub reason: String,
}

/// Retained minutiae of one image, with the crop they were found in.
#[derive(Debug, Clone)]
pub struct AcceptedImage {
    pub label: usize,
    pub width: usize,
    pub height: usize,
    pub minutiae: Vec<MinutiaPoint>,
}

/// Per-image minutiae for a whole manifest, in manifest order.
#[derive(Debug, Clone)]
pub struct BatchExtraction {
    pub accepted: Vec<AcceptedImage>,
    pub rejects: Vec<Reject>,
}

impl BatchExtraction {
    pub fn total(&self) -> usize {
        self.accepted.len() + self.rejects.len()
    }

    pub fn reject_fraction(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.rejects.len() as f64 / self.total() as f64
        }
    }

    pub fn too_many_rejects(&self) -> bool {
        self.reject_fraction() > MAX_REJECT_FRACTION
    }

    pub fn features(&self, grid: usize) -> Result<Vec<FeatureVector>> {
        self.accepted
            .iter()
            .map(|img| {
                let fv = block_features(&img.minutiae, img.width, img.height, grid)?;
                debug_assert_eq!(fv.total(), img.minutiae.len() as u64);
                Ok(fv.with_label(img.label))
            })
            .collect()
    }

    pub fn rejects_report(&self) -> String {
        self.rejects
            .iter()
            .map(|r| format!("{}\t{}\n", r.filename, r.reason))
            .collect()
    }
}

/// Runs [`extract`] over every manifest entry (in parallel); failures are
/// collected rather than aborting the batch.
pub fn extract_batch(
    dir: &Path,
    manifest: &[ManifestEntry],
    cfg: &PipelineConfig,
) -> BatchExtraction {
    let results: Vec<Result<AcceptedImage>> = manifest
        .par_iter()
        .map(|entry| {
            let img = load_pgm(dir.join(&entry.filename))?;
            let ex = extract(&img, cfg)?;
            // Conservation check at the configured grid.
            ex.features(cfg.grid)?;
            Ok(AcceptedImage {
                label: entry.label,
                width: ex.skeleton.width(),
                height: ex.skeleton.height(),
                minutiae: ex.minutiae,
            })
        })
        .collect();
    let mut batch = BatchExtraction {
        accepted: Vec::new(),
        rejects: Vec::new(),
    };
    for (entry, result) in manifest.iter().zip(results) {
        match result {
            Ok(item) => batch.accepted.push(item),
            Err(e) => batch.rejects.push(Reject {
                filename: entry.filename.clone(),
                reason: e.to_string(),
            }),
        }
    }
    batch
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub grid: usize,
    pub train_eval: Evaluation,
    pub test_eval: Evaluation,
    pub final_loss: f64,
}

/// Split, train and evaluate on labeled vectors.
pub fn run_experiment(vectors: &[FeatureVector], cfg: &PipelineConfig) -> Result<ExperimentResult> {
    let grid = vectors
        .first()
        .map(|v| v.grid)
        .ok_or_else(|| Error::Config("no feature vectors".into()))?;
    let split = split_dataset(vectors, cfg.train_fraction, cfg.split_seed)?;
    let outcome = train(&split.train, cfg.num_classes, &cfg.train)?;
    Ok(ExperimentResult {
        grid,
        train_eval: evaluate(&outcome.model, &split.train)?,
        test_eval: evaluate(&outcome.model, &split.test)?,
        final_loss: outcome.loss_history.last().copied().unwrap_or(f64::NAN),
    })
}

/// One experiment per grid in `grids`, sharing the extracted minutiae.
pub fn sweep(
    batch: &BatchExtraction,
    grids: &[usize],
    cfg: &PipelineConfig,
) -> Result<Vec<ExperimentResult>> {
    grids
        .iter()
        .map(|&grid| {
            let cfg = PipelineConfig {
                grid,
                ..cfg.clone()
            };
            run_experiment(&batch.features(grid)?, &cfg)
        })
        .collect()
}

pub fn default_sweep_grids() -> &'static [usize] {
    &SWEEP_GRIDS
}

/// Two-column table: block configuration and performance rate.
pub fn sweep_table(results: &[ExperimentResult]) -> String {
    let mut out = String::from("No of Block\tPerformance Rate\n");
    for r in results {
        out.push_str(&format!("{0}x{0}\t{1}\n", r.grid, r.test_eval.percent()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_text("# comment\ngrid = 16\nse = square3 # trailing\nseed=3\n\nlr = 0.05\n")
            .unwrap();
        assert_eq!(cfg.grid, 16);
        assert_eq!(cfg.perfusion.structuring_element.to_string(), "square3");
        assert_eq!((cfg.split_seed, cfg.train.seed), (3, 3));
        assert_eq!(cfg.train.learning_rate, 0.05);
        assert!(cfg.apply_text("bogus = 1").is_err());
        assert!(cfg.apply_text("grid 8").is_err());
        assert!(cfg.apply_text("grid = x").is_err());
    }

    #[test]
    fn config_display_reparses() {
        let cfg = PipelineConfig {
            grid: 32,
            train: TrainConfig {
                momentum: 0.5,
                ..PipelineConfig::default().train
            },
            ..PipelineConfig::default()
        };
        let mut back = PipelineConfig::default();
        back.apply_text(&cfg.to_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        let cfg = PipelineConfig {
            grid: 1,
            ..PipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sweep_table_shape() {
        let eval = Evaluation {
            correct: 1,
            total: 2,
            confusion: vec![vec![1, 0], vec![1, 0]],
        };
        let results: Vec<_> = [8, 16, 32]
            .iter()
            .map(|&grid| ExperimentResult {
                grid,
                train_eval: eval.clone(),
                test_eval: eval.clone(),
                final_loss: 0.0,
            })
            .collect();
        let table = sweep_table(&results);
        let lines: Vec<_> = table.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "8x8\t50.00%");
        assert_eq!(lines[3], "32x32\t50.00%");
    }
}
