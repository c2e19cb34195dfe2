//! Blood-perfusion image: erosion of the face mask followed by a
//! topology-preserving medial-axis thinning.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::BinaryImage;

pub const MAX_EROSION_ITERATIONS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StructuringElement {
    /// Center plus its 4-neighbors.
    #[default]
    Cross3,
    /// Full 3x3 square.
    Square3,
}

impl StructuringElement {
    pub fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            StructuringElement::Cross3 => &[(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)],
            StructuringElement::Square3 => &[
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 0),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ],
        }
    }
}

impl fmt::Display for StructuringElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StructuringElement::Cross3 => "cross3",
            StructuringElement::Square3 => "square3",
        })
    }
}

impl FromStr for StructuringElement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross3" => Ok(StructuringElement::Cross3),
            "square3" => Ok(StructuringElement::Square3),
            other => Err(Error::Config(format!(
                "unknown structuring element {other:?} (expected cross3 or square3)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerfusionConfig {
    pub erosion_iterations: usize,
    pub structuring_element: StructuringElement,
}

impl Default for PerfusionConfig {
    fn default() -> Self {
        Self {
            erosion_iterations: 1,
            structuring_element: StructuringElement::Cross3,
        }
    }
}

impl PerfusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.erosion_iterations > MAX_EROSION_ITERATIONS {
            return Err(Error::Config(format!(
                "erosion_iterations {} exceeds {MAX_EROSION_ITERATIONS}",
                self.erosion_iterations
            )));
        }
        Ok(())
    }
}

/// Binary erosion with background padding, applied `iterations` times.
pub fn erode(img: &BinaryImage, se: StructuringElement, iterations: usize) -> BinaryImage {
    let mut current = img.clone();
    let offsets = se.offsets();
    for _ in 0..iterations {
        let mut next = BinaryImage::zeros(img.width(), img.height());
        for (r, c) in current.foreground() {
            let fits = offsets
                .iter()
                .all(|&(dr, dc)| current.get_padded(r as isize + dr, c as isize + dc));
            if fits {
                next.set(r, c, true);
            }
        }
        current = next;
    }
    current
}

// Ring order P2..P9: N, NE, E, SE, S, SW, W, NW.
const RING: [(isize, isize); 8] = [
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
];

fn ring(img: &BinaryImage, r: usize, c: usize) -> [bool; 8] {
    let mut p = [false; 8];
    for (slot, &(dr, dc)) in p.iter_mut().zip(RING.iter()) {
        *slot = img.get_padded(r as isize + dr, c as isize + dc);
    }
    p
}

/// Yokoi 8-connectivity number. A foreground pixel can be removed without
/// changing the image topology iff this is 1.
fn connectivity_number(p: &[bool; 8]) -> u32 {
    let x = |k: usize| u32::from(!p[k % 8]);
    [0, 2, 4, 6]
        .iter()
        .map(|&k| x(k) - x(k) * x(k + 1) * x(k + 2))
        .sum()
}

fn is_simple(img: &BinaryImage, r: usize, c: usize) -> bool {
    let p = ring(img, r, c);
    let neighbors = p.iter().filter(|&&v| v).count();
    neighbors >= 2 && connectivity_number(&p) == 1
}

fn zhang_suen_deletable(p: &[bool; 8], first_pass: bool) -> bool {
    let b = p.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let transitions = (0..8).filter(|&k| !p[k] && p[(k + 1) % 8]).count();
    if transitions != 1 {
        return false;
    }
    let [n, _, e, _, s, _, w, _] = *p;
    if first_pass {
        !(n && e && s) && !(e && s && w)
    } else {
        !(n && e && w) && !(n && s && w)
    }
}

/// True when (r, c) is the top-left corner of a fully set 2x2 block.
fn block_at(img: &BinaryImage, r: usize, c: usize) -> bool {
    r + 1 < img.height()
        && c + 1 < img.width()
        && img.get(r, c)
        && img.get(r, c + 1)
        && img.get(r + 1, c)
        && img.get(r + 1, c + 1)
}

fn in_full_block(img: &BinaryImage, r: usize, c: usize) -> bool {
    (r.saturating_sub(1)..=r).any(|br| (c.saturating_sub(1)..=c).any(|bc| block_at(img, br, bc)))
}

/// Number of fully set 2x2 blocks.
pub fn count_full_blocks(img: &BinaryImage) -> usize {
    let mut n = 0;
    for r in 0..img.height().saturating_sub(1) {
        for c in 0..img.width().saturating_sub(1) {
            if block_at(img, r, c) {
                n += 1;
            }
        }
    }
    n
}

/// Zhang-Suen thinning followed by removal of redundant pixels in 2x2 blocks.
///
/// Each sub-iteration marks pixels against the image as it stood at the start
/// of the sub-iteration; marked pixels are then removed in raster order, each
/// re-checked as a simple point so no component can vanish or split (plain
/// Zhang-Suen erases 2x2 squares outright).
pub fn medial_axis(img: &BinaryImage) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    let mut out = img.clone();
    let mut queued = vec![false; w * h];
    let mut candidates: Vec<usize> = Vec::new();

    for (r, c) in img.foreground() {
        if ring(img, r, c).iter().any(|&v| !v) {
            queued[r * w + c] = true;
            candidates.push(r * w + c);
        }
    }

    let mut idle_passes = 0;
    let mut first_pass = true;
    while idle_passes < 2 && !candidates.is_empty() {
        let mut marked: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&i| zhang_suen_deletable(&ring(&out, i / w, i % w), first_pass))
            .collect();
        marked.sort_unstable();

        let mut removed = Vec::new();
        for i in marked {
            let (r, c) = (i / w, i % w);
            if is_simple(&out, r, c) {
                out.set(r, c, false);
                removed.push(i);
            }
        }

        if removed.is_empty() {
            idle_passes += 1;
        } else {
            idle_passes = 0;
            candidates.retain(|&i| out.data()[i] != 0);
            for &i in &removed {
                queued[i] = false;
                let (r, c) = ((i / w) as isize, (i % w) as isize);
                for &(dr, dc) in &RING {
                    let (nr, nc) = (r + dr, c + dc);
                    if out.get_padded(nr, nc) {
                        let j = nr as usize * w + nc as usize;
                        if !queued[j] {
                            queued[j] = true;
                            candidates.push(j);
                        }
                    }
                }
            }
        }
        first_pass = !first_pass;
    }

    remove_block_redundancy(&mut out);
    out
}

fn remove_block_redundancy(img: &mut BinaryImage) {
    loop {
        let mut changed = false;
        for r in 0..img.height() {
            for c in 0..img.width() {
                if img.get(r, c) && in_full_block(img, r, c) && is_simple(img, r, c) {
                    img.set(r, c, false);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// Erodes the face mask and thins what remains.
pub fn extract_perfusion(mask: &BinaryImage, cfg: &PerfusionConfig) -> Result<BinaryImage> {
    cfg.validate()?;
    let eroded = erode(mask, cfg.structuring_element, cfg.erosion_iterations);
    if eroded.is_empty() {
        return Err(Error::ErodedToEmpty {
            iterations: cfg.erosion_iterations,
        });
    }
    Ok(medial_axis(&eroded))
}
