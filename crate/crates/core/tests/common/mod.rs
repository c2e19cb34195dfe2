//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls the library routine it checks.

#![allow(dead_code)]

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermoprint::classifier::MlpModel;
use thermoprint::image::BinaryImage;
use thermoprint::perfusion::StructuringElement;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_binary(
    rng: &mut ChaCha8Rng,
    width: usize,
    height: usize,
    density: f64,
) -> BinaryImage {
    let data = (0..width * height)
        .map(|_| u8::from(rng.gen_bool(density)))
        .collect();
    BinaryImage::new(width, height, data).unwrap()
}

/// Breadth-first flood fill; labels follow the raster order of each
/// component's first pixel. Returns (labels, sizes).
pub fn flood_fill_labels(img: &BinaryImage) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = (img.width(), img.height());
    let mut labels = vec![0u32; w * h];
    let mut sizes = Vec::new();
    for start in 0..w * h {
        if !img.get(start / w, start % w) || labels[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        let mut size = 0;
        let mut queue = VecDeque::from([start]);
        labels[start] = id;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                        continue;
                    }
                    let j = nr as usize * w + nc as usize;
                    if img.get(nr as usize, nc as usize) && labels[j] == 0 {
                        labels[j] = id;
                        queue.push_back(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

pub fn component_count(img: &BinaryImage) -> usize {
    flood_fill_labels(img).1.len()
}

/// Erosion straight from the definition: a pixel survives iff every cell the
/// element covers is inside the image and set.
pub fn erode_oracle(img: &BinaryImage, se: StructuringElement, iterations: usize) -> BinaryImage {
    let cross: &[(isize, isize)] = &[(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)];
    let square: Vec<(isize, isize)> = (-1..=1)
        .flat_map(|r| (-1..=1).map(move |c| (r, c)))
        .collect();
    let element: &[(isize, isize)] = match se {
        StructuringElement::Cross3 => cross,
        StructuringElement::Square3 => &square,
    };
    let mut cur = img.clone();
    for _ in 0..iterations {
        let (w, h) = (cur.width() as isize, cur.height() as isize);
        let mut next = BinaryImage::zeros(cur.width(), cur.height());
        for r in 0..h {
            for c in 0..w {
                let keep = element.iter().all(|&(dr, dc)| {
                    let (y, x) = (r + dr, c + dc);
                    y >= 0 && x >= 0 && y < h && x < w && cur.get(y as usize, x as usize)
                });
                next.set(r as usize, c as usize, keep);
            }
        }
        cur = next;
    }
    cur
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleClass {
    Background,
    Termination,
    Normal,
    Bifurcation,
    Other,
}

/// The rule table, transcribed from its prose: a set center with one set
/// neighbor ends a ridge, with two continues it, with three splits it.
pub fn rule_oracle(bits: u16) -> RuleClass {
    if bits & (1 << 4) == 0 {
        return RuleClass::Background;
    }
    let neighbours = (bits & !(1 << 4)).count_ones();
    match neighbours {
        1 => RuleClass::Termination,
        2 => RuleClass::Normal,
        3 => RuleClass::Bifurcation,
        _ => RuleClass::Other,
    }
}

/// Bit `3 * r + c` of `bits` is cell (r, c).
pub fn window_from_bits(bits: u16) -> [[bool; 3]; 3] {
    let mut w = [[false; 3]; 3];
    for (i, cell) in w.iter_mut().flatten().enumerate() {
        *cell = bits & (1 << i) != 0;
    }
    w
}

/// Zero-padded 2x2 all-foreground block count.
pub fn full_2x2_blocks(img: &BinaryImage) -> usize {
    let mut n = 0;
    for r in 0..img.height().saturating_sub(1) {
        for c in 0..img.width().saturating_sub(1) {
            if img.get(r, c) && img.get(r + 1, c) && img.get(r, c + 1) && img.get(r + 1, c + 1) {
                n += 1;
            }
        }
    }
    n
}

/// Union of a few random disks and rectangles on a blank canvas.
pub fn random_blob(rng: &mut ChaCha8Rng, size: usize) -> BinaryImage {
    let mut img = BinaryImage::zeros(size, size);
    let shapes = rng.gen_range(1..=4);
    for _ in 0..shapes {
        let (cr, cc) = (
            rng.gen_range(4..size - 4) as f64,
            rng.gen_range(4..size - 4) as f64,
        );
        if rng.gen_bool(0.5) {
            let radius = rng.gen_range(2.0..size as f64 / 4.0);
            for r in 0..size {
                for c in 0..size {
                    if (r as f64 - cr).hypot(c as f64 - cc) <= radius {
                        img.set(r, c, true);
                    }
                }
            }
        } else {
            let (hr, hc) = (rng.gen_range(1..size / 4), rng.gen_range(1..size / 4));
            for r in (cr as usize).saturating_sub(hr)..(cr as usize + hr).min(size) {
                for c in (cc as usize).saturating_sub(hc)..(cc as usize + hc).min(size) {
                    img.set(r, c, true);
                }
            }
        }
    }
    img
}

/// Filled disk of the given radius centred in a square canvas.
pub fn disk(radius: usize) -> BinaryImage {
    let size = 2 * radius + 5;
    let centre = (size / 2) as f64;
    let mut img = BinaryImage::zeros(size, size);
    for r in 0..size {
        for c in 0..size {
            if (r as f64 - centre).hypot(c as f64 - centre) <= radius as f64 {
                img.set(r, c, true);
            }
        }
    }
    img
}

/// 20x3 bar centred in a 24x7 canvas.
pub fn bar() -> BinaryImage {
    let mut img = BinaryImage::zeros(24, 7);
    for r in 2..5 {
        for c in 2..22 {
            img.set(r, c, true);
        }
    }
    img
}

/// Thick "Y": two diagonal arms meeting a vertical stem, three pixels wide.
pub fn thick_y() -> BinaryImage {
    let mut img = BinaryImage::zeros(31, 31);
    let mut paint = |r: isize, c: isize| {
        for dr in -1..=1 {
            for dc in -1..=1 {
                img.set((r + dr) as usize, (c + dc) as usize, true);
            }
        }
    };
    for i in 0..12 {
        paint(3 + i, 3 + i);
        paint(3 + i, 27 - i);
        paint(15 + i, 15);
    }
    img
}

/// Forward pass written out as plain loops over the public weights.
pub fn forward_oracle(model: &MlpModel, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for layer in model.layers() {
        let mut next = vec![0.0; layer.fan_out];
        for (o, slot) in next.iter_mut().enumerate() {
            let mut z = layer.biases[o];
            for (i, &xi) in a.iter().enumerate() {
                z += layer.weights[o * layer.fan_in + i] * xi;
            }
            *slot = z.tanh();
        }
        a = next;
    }
    a
}

pub fn loss_oracle(model: &MlpModel, x: &[f64], target: &[f64]) -> f64 {
    forward_oracle(model, x)
        .iter()
        .zip(target)
        .map(|(o, t)| 0.5 * (o - t) * (o - t))
        .sum()
}

/// Parameter `k` of layer `li`, weights first and then biases.
fn param_mut(model: &mut MlpModel, li: usize, k: usize) -> &mut f64 {
    let layer = &mut model.layers_mut()[li];
    let n_w = layer.weights.len();
    if k < n_w {
        &mut layer.weights[k]
    } else {
        &mut layer.biases[k - n_w]
    }
}

/// Below this magnitude a central difference cannot resolve a gradient to
/// 1e-5 relative: on a loss near 3 with h = 1e-5, rounding alone moves the
/// quotient by about 1e-10. Smaller components are held to 1e-5 of the floor
/// instead, i.e. an absolute error of 1e-9.
pub const GRADIENT_FLOOR: f64 = 1e-4;

/// Largest relative error between `backward` and central differences over
/// every parameter. Components where both values are below `floor` in
/// magnitude are compared against `floor` instead.
pub fn gradient_check(model: &MlpModel, x: &[f64], target: &[f64], h: f64, floor: f64) -> f64 {
    let (grads, _) = model.backward(x, target).unwrap();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (li, g_layer) in grads.layers.iter().enumerate() {
        let n_w = g_layer.weights.len();
        for k in 0..n_w + g_layer.biases.len() {
            let analytic = if k < n_w {
                g_layer.weights[k]
            } else {
                g_layer.biases[k - n_w]
            };
            let original = *param_mut(&mut probe, li, k);
            *param_mut(&mut probe, li, k) = original + h;
            let up = loss_oracle(&probe, x, target);
            *param_mut(&mut probe, li, k) = original - h;
            let down = loss_oracle(&probe, x, target);
            *param_mut(&mut probe, li, k) = original;
            let numeric = (up - down) / (2.0 * h);
            let denom = analytic.abs().max(numeric.abs()).max(floor);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}

pub fn random_input(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(0.0..1.0)).collect()
}
