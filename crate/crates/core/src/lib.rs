//! Minutiae-based thermal face recognition.
//!
//! A grayscale thermogram is thresholded at its mean intensity, reduced to
//! its largest 8-connected region and cropped. The face mask is eroded and
//! thinned into a one-pixel skeleton (the "blood perfusion" image), whose
//! terminations and bifurcations are counted over a `B`x`B` grid. The counts
//! feed a 100-50-10 hidden-layer tanh network trained with momentum.
//!
//! ```no_run
//! use thermoprint::{image, pipeline};
//!
//! let img = image::load_pgm("face.pgm")?;
//! let cfg = pipeline::PipelineConfig::default();
//! let ex = pipeline::extract(&img, &cfg)?;
//! let fv = ex.features(cfg.grid)?;
//! println!("{} minutiae, {} features", ex.minutiae.len(), fv.len());
//! # Ok::<(), thermoprint::Error>(())
//! ```

pub mod classifier;
pub mod error;
pub mod features;
pub mod image;
pub mod minutiae;
pub mod perfusion;
pub mod pipeline;
pub mod segmentation;
pub mod synth;

pub use error::{Error, Result};
