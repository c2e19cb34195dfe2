//! Minutiae from a one-pixel-thin skeleton, classified by how many of the
//! eight neighbors are set, and a simple spurious-point filter.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{BinaryImage, GrayImage};

/// Classification of a single skeleton pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PixelClass {
    Background,
    /// Exactly one set neighbor.
    Termination,
    /// Exactly two set neighbors.
    Normal,
    /// Exactly three set neighbors.
    Bifurcation,
    /// Isolated, or four or more set neighbors.
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MinutiaKind {
    Termination,
    Bifurcation,
}

impl MinutiaKind {
    pub fn code(self) -> char {
        match self {
            MinutiaKind::Termination => 'T',
            MinutiaKind::Bifurcation => 'B',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MinutiaPoint {
    pub row: usize,
    pub col: usize,
    pub kind: MinutiaKind,
}

impl fmt::Display for MinutiaPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.row, self.col, self.kind.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PruneConfig {
    pub border_margin: usize,
    pub min_separation: usize,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            border_margin: 2,
            min_separation: 4,
        }
    }
}

impl PruneConfig {
    pub const DISABLED: PruneConfig = PruneConfig {
        border_margin: 0,
        min_separation: 0,
    };

    /// Both values must fit within half the smaller image side.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let limit = width.min(height) / 2;
        if self.border_margin > limit || self.min_separation > limit {
            return Err(Error::Config(format!(
                "prune parameters ({}, {}) exceed {limit} for a {width}x{height} image",
                self.border_margin, self.min_separation
            )));
        }
        Ok(())
    }
}

pub fn classify_pixel(window: &[[bool; 3]; 3]) -> PixelClass {
    if !window[1][1] {
        return PixelClass::Background;
    }
    let n = window.iter().flatten().filter(|&&v| v).count() - 1;
    match n {
        1 => PixelClass::Termination,
        2 => PixelClass::Normal,
        3 => PixelClass::Bifurcation,
        _ => PixelClass::Other,
    }
}

/// Terminations and bifurcations in raster order.
pub fn extract_minutiae(skeleton: &BinaryImage) -> Vec<MinutiaPoint> {
    skeleton
        .foreground()
        .filter_map(|(row, col)| {
            let kind = match classify_pixel(&skeleton.window(row, col)) {
                PixelClass::Termination => MinutiaKind::Termination,
                PixelClass::Bifurcation => MinutiaKind::Bifurcation,
                _ => return None,
            };
            Some(MinutiaPoint { row, col, kind })
        })
        .collect()
}

/// Drops points near the image border, then drops both members of every
/// pair closer than `min_separation` (Chebyshev distance).
pub fn prune_minutiae(
    points: &[MinutiaPoint],
    width: usize,
    height: usize,
    cfg: &PruneConfig,
) -> Vec<MinutiaPoint> {
    let m = cfg.border_margin;
    let mut kept: Vec<MinutiaPoint> = points
        .iter()
        .copied()
        .filter(|p| p.row >= m && p.col >= m && p.row + m < height && p.col + m < width)
        .collect();
    kept.sort_by_key(|p| (p.row, p.col, p.kind));

    let mut marked = vec![false; kept.len()];
    for i in 0..kept.len() {
        for j in i + 1..kept.len() {
            // Sorted by row, so later rows only get farther away.
            if kept[j].row - kept[i].row >= cfg.min_separation {
                break;
            }
            if kept[i].col.abs_diff(kept[j].col) < cfg.min_separation {
                marked[i] = true;
                marked[j] = true;
            }
        }
    }
    kept.into_iter()
        .zip(marked)
        .filter_map(|(p, m)| (!m).then_some(p))
        .collect()
}

/// One `row col kind` line per point.
pub fn write_minutiae(points: &[MinutiaPoint]) -> String {
    points.iter().map(|p| format!("{p}\n")).collect()
}

pub fn parse_minutiae(text: &str) -> Result<Vec<MinutiaPoint>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let bad = || Error::parse("minutiae list", format!("line {}: {line:?}", n + 1));
            let mut fields = line.split_whitespace();
            let row = fields.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let col = fields.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let kind = match fields.next() {
                Some("T") => MinutiaKind::Termination,
                Some("B") => MinutiaKind::Bifurcation,
                _ => return Err(bad()),
            };
            if fields.next().is_some() {
                return Err(bad());
            }
            Ok(MinutiaPoint { row, col, kind })
        })
        .collect()
}

pub fn save_minutiae(path: impl AsRef<Path>, points: &[MinutiaPoint]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_minutiae(points)).map_err(|e| Error::io(path, e))
}

pub const OVERLAY_SKELETON: u8 = 96;
pub const OVERLAY_TERMINATION: u8 = 255;
pub const OVERLAY_BIFURCATION: u8 = 176;

/// Grayscale debug rendering: skeleton in mid-gray, terminations and
/// bifurcations as 3x3 squares at distinct intensities.
pub fn overlay(skeleton: &BinaryImage, points: &[MinutiaPoint]) -> GrayImage {
    let (w, h) = (skeleton.width(), skeleton.height());
    let data = skeleton
        .data()
        .iter()
        .map(|&v| if v != 0 { OVERLAY_SKELETON } else { 0 })
        .collect();
    let mut img = GrayImage::new(w, h, data).expect("skeleton dimensions are valid");
    for p in points {
        let value = match p.kind {
            MinutiaKind::Termination => OVERLAY_TERMINATION,
            MinutiaKind::Bifurcation => OVERLAY_BIFURCATION,
        };
        for r in p.row.saturating_sub(1)..=(p.row + 1).min(h - 1) {
            for c in p.col.saturating_sub(1)..=(p.col + 1).min(w - 1) {
                img.set(r, c, value);
            }
        }
    }
    img
}
