//! Face-mask extraction: mean-threshold binarization, 8-connected labeling,
//! largest-component selection and bounding-box crop.

use crate::error::{Error, Result};
use crate::image::{BinaryImage, GrayImage};

/// Component labels, 0 for background and 1..=K for components.
///
/// Ids follow the raster order of each component's first pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    /// `component_sizes[k - 1]` is the pixel count of component `k`.
    component_sizes: Vec<usize>,
}

impl LabelImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    pub fn component_count(&self) -> usize {
        self.component_sizes.len()
    }

    /// Size of component `id` (1-based).
    pub fn size_of(&self, id: u32) -> usize {
        self.component_sizes[id as usize - 1]
    }

    pub fn component_sizes(&self) -> &[usize] {
        &self.component_sizes
    }
}

/// Inclusive bounding rectangle of a crop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropRect {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl CropRect {
    pub fn width(&self) -> usize {
        self.right - self.left + 1
    }

    pub fn height(&self) -> usize {
        self.bottom - self.top + 1
    }
}

impl std::fmt::Display for CropRect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "crop {} {} {} {}",
            self.top, self.bottom, self.left, self.right
        )
    }
}

/// Sets a pixel iff its intensity is strictly above the image mean.
///
/// The comparison is done as `pixel * N > sum` so no rounding is involved.
pub fn binarize_mean(img: &GrayImage) -> BinaryImage {
    let n = img.data().len() as u64;
    let sum: u64 = img.data().iter().map(|&v| u64::from(v)).sum();
    let data = img
        .data()
        .iter()
        .map(|&v| u8::from(u64::from(v) * n > sum))
        .collect();
    BinaryImage::new(img.width(), img.height(), data).expect("dimensions come from a valid image")
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Two-pass 8-connected labeling with union-find.
pub fn label_components_8(img: &BinaryImage) -> LabelImage {
    let (w, h) = (img.width(), img.height());
    let mut provisional = vec![0u32; w * h];
    let mut sets = DisjointSet { parent: vec![0] };

    for r in 0..h {
        for c in 0..w {
            if !img.get(r, c) {
                continue;
            }
            // Already-visited neighbors: W, NW, N, NE.
            let mut neighbors = [0u32; 4];
            let mut k = 0;
            if c > 0 && provisional[r * w + c - 1] != 0 {
                neighbors[k] = provisional[r * w + c - 1];
                k += 1;
            }
            if r > 0 {
                let up = (r - 1) * w;
                if c > 0 && provisional[up + c - 1] != 0 {
                    neighbors[k] = provisional[up + c - 1];
                    k += 1;
                }
                if provisional[up + c] != 0 {
                    neighbors[k] = provisional[up + c];
                    k += 1;
                }
                if c + 1 < w && provisional[up + c + 1] != 0 {
                    neighbors[k] = provisional[up + c + 1];
                    k += 1;
                }
            }
            let label = if k == 0 {
                let id = sets.parent.len() as u32;
                sets.parent.push(id);
                id
            } else {
                let first = neighbors[0];
                for &other in &neighbors[1..k] {
                    sets.union(first, other);
                }
                first
            };
            provisional[r * w + c] = label;
        }
    }

    // Final ids in raster order of first appearance.
    let mut remap = vec![0u32; sets.parent.len()];
    let mut sizes = Vec::new();
    let mut labels = provisional;
    for slot in labels.iter_mut() {
        if *slot == 0 {
            continue;
        }
        let root = sets.find(*slot) as usize;
        if remap[root] == 0 {
            sizes.push(0);
            remap[root] = sizes.len() as u32;
        }
        let id = remap[root];
        sizes[id as usize - 1] += 1;
        *slot = id;
    }

    LabelImage {
        width: w,
        height: h,
        labels,
        component_sizes: sizes,
    }
}

/// Keeps only the biggest component; ties go to the smallest id.
pub fn largest_component(lbl: &LabelImage) -> Result<BinaryImage> {
    let (best, _) = lbl
        .component_sizes
        .iter()
        .enumerate()
        .fold(
            None,
            |best: Option<(usize, usize)>, (i, &size)| match best {
                Some((_, s)) if s >= size => best,
                _ => Some((i, size)),
            },
        )
        .ok_or(Error::NoFace)?;
    let keep = best as u32 + 1;
    let data = lbl.labels.iter().map(|&l| u8::from(l == keep)).collect();
    BinaryImage::new(lbl.width, lbl.height, data)
}

/// Bounding box of the foreground, or `None` when the image is empty.
pub fn bounding_box(mask: &BinaryImage) -> Option<CropRect> {
    let mut rect: Option<CropRect> = None;
    for (r, c) in mask.foreground() {
        let b = rect.get_or_insert(CropRect {
            top: r,
            bottom: r,
            left: c,
            right: c,
        });
        b.bottom = r;
        b.left = b.left.min(c);
        b.right = b.right.max(c);
    }
    rect
}

/// Copies the inclusive rectangle out of `img`.
pub fn crop(img: &BinaryImage, rect: CropRect) -> BinaryImage {
    let mut out = BinaryImage::zeros(rect.width(), rect.height());
    for r in rect.top..=rect.bottom {
        for c in rect.left..=rect.right {
            if img.get(r, c) {
                out.set(r - rect.top, c - rect.left, true);
            }
        }
    }
    out
}

/// Crops to the tight bounding box of the foreground.
pub fn crop_to_face(mask: &BinaryImage) -> Result<(BinaryImage, CropRect)> {
    let rect = bounding_box(mask).ok_or(Error::NoFace)?;
    Ok((crop(mask, rect), rect))
}

/// binarize → label → largest component → crop.
pub fn segment_face(img: &GrayImage) -> Result<(BinaryImage, CropRect)> {
    let binary = binarize_mean(img);
    let labels = label_components_8(&binary);
    let face = largest_component(&labels)?;
    crop_to_face(&face)
}
