//! Synthetic thermal faces: a bright elliptical face on a dark background
//! with a branching tree of darker vessel-like strokes.
//!
//! Each identity fixes the face shape and the tree topology; each sample of
//! that identity re-jitters the tree nodes and the pixel noise. The tree's
//! endpoints and branch points are returned as ground-truth minutiae.
//!
//! Randomness comes from ChaCha8 seeded with the identity seed; sample `i`
//! draws from stream `i + 1` and the topology from stream 0, so output bytes
//! are identical on every platform.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{save_pgm, GrayImage};
use crate::minutiae::{MinutiaKind, MinutiaPoint};

pub const BACKGROUND_LEVEL: u8 = 30;
pub const RIDGE_LEVEL: u8 = 120;
pub const FACE_LEVEL: u8 = 200;
/// Uniform pixel noise amplitude around each level.
pub const NOISE_AMPLITUDE: i32 = 8;
const RIDGE_HALF_WIDTH: f64 = 1.5;
/// Strokes that are not joined must stay at least this far apart.
const STROKE_CLEARANCE: f64 = 12.0;
/// Tree nodes stay inside this fraction of the face ellipse.
const TREE_REACH: f64 = 0.72;
const SPECKLES: usize = 6;
const PLACEMENT_ATTEMPTS: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct IdentitySpec {
    pub identity_seed: u64,
    /// Number of fork events; each adds two arms at an existing tip.
    pub branch_count: usize,
    pub arm_length_range: (f64, f64),
    /// Per-sample displacement bound for every tree node, in pixels.
    pub jitter: f64,
    pub width: usize,
    pub height: usize,
}

impl IdentitySpec {
    pub fn new(identity_seed: u64) -> Self {
        Self {
            identity_seed,
            branch_count: 6,
            arm_length_range: (15.0, 40.0),
            jitter: 2.0,
            width: 416,
            height: 544,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    row: f64,
    col: f64,
}

impl Point {
    fn dist(self, other: Point) -> f64 {
        (self.row - other.row).hypot(self.col - other.col)
    }
}

/// Identity-level geometry shared by all samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    center: Point,
    semi_rows: f64,
    semi_cols: f64,
    nodes: Vec<Point>,
    /// Arms as node index pairs.
    edges: Vec<(usize, usize)>,
}

impl Topology {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arm_count(&self) -> usize {
        self.edges.len()
    }

    fn degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == node || b == node)
            .count()
    }

    /// Degree-1 nodes are terminations, degree-3 nodes bifurcations.
    pub fn ground_truth_kinds(&self) -> Vec<Option<MinutiaKind>> {
        (0..self.nodes.len())
            .map(|n| match self.degree(n) {
                1 => Some(MinutiaKind::Termination),
                3 => Some(MinutiaKind::Bifurcation),
                _ => None,
            })
            .collect()
    }

    fn inside_reach(&self, p: Point, margin: f64) -> bool {
        let dr = (p.row - self.center.row) / (self.semi_rows * TREE_REACH - margin);
        let dc = (p.col - self.center.col) / (self.semi_cols * TREE_REACH - margin);
        dr * dr + dc * dc <= 1.0
    }
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (vr, vc) = (b.row - a.row, b.col - a.col);
    let len2 = vr * vr + vc * vc;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.row - a.row) * vr + (p.col - a.col) * vc) / len2).clamp(0.0, 1.0)
    };
    p.dist(Point {
        row: a.row + t * vr,
        col: a.col + t * vc,
    })
}

fn segments_distance(a: Point, b: Point, c: Point, d: Point) -> f64 {
    // Sampled along the shorter pair of endpoints; exact enough for spacing.
    let steps = 16;
    (0..=steps)
        .map(|i| {
            let t = i as f64 / steps as f64;
            let p = Point {
                row: a.row + t * (b.row - a.row),
                col: a.col + t * (b.col - a.col),
            };
            segment_distance(p, c, d)
        })
        .fold(f64::INFINITY, f64::min)
        .min(segment_distance(c, a, b))
        .min(segment_distance(d, a, b))
}

fn check_geometry(spec: &IdentitySpec) -> Result<()> {
    let (lo, hi) = spec.arm_length_range;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::Geometry(format!(
            "invalid arm length range {lo}..{hi}"
        )));
    }
    if !(spec.jitter >= 0.0 && spec.jitter.is_finite()) {
        return Err(Error::Geometry(format!("invalid jitter {}", spec.jitter)));
    }
    let reach = 0.46 * spec.width.min(spec.height) as f64 * TREE_REACH;
    if spec.branch_count > 0 && reach < 2.0 * hi + STROKE_CLEARANCE {
        return Err(Error::Geometry(format!(
            "{}x{} canvas is too small for arms up to {hi} px",
            spec.width, spec.height
        )));
    }
    Ok(())
}

/// Grows the identity's face and vessel tree from stream 0 of its seed.
pub fn topology(spec: &IdentitySpec) -> Result<Topology> {
    check_geometry(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.identity_seed);
    let (w, h) = (spec.width as f64, spec.height as f64);
    let mut topo = Topology {
        center: Point {
            row: h / 2.0 + rng.gen_range(-0.02..0.02) * h,
            col: w / 2.0 + rng.gen_range(-0.02..0.02) * w,
        },
        semi_rows: h * rng.gen_range(0.43..0.47),
        semi_cols: w * rng.gen_range(0.43..0.47),
        nodes: Vec::new(),
        edges: Vec::new(),
    };
    if spec.branch_count == 0 {
        return Ok(topo);
    }

    let (lo, hi) = spec.arm_length_range;
    let clearance_ok = |topo: &Topology, from: usize, to: Point| {
        topo.inside_reach(to, 0.0)
            && topo.edges.iter().all(|&(a, b)| {
                if a == from || b == from {
                    // Arms sharing the fork node only need their far ends apart.
                    let other = if a == from { b } else { a };
                    to.dist(topo.nodes[other]) >= STROKE_CLEARANCE
                        && segment_distance(to, topo.nodes[a], topo.nodes[b]) >= STROKE_CLEARANCE
                } else {
                    segments_distance(topo.nodes[from], to, topo.nodes[a], topo.nodes[b])
                        >= STROKE_CLEARANCE
                }
            })
    };

    // Trunk.
    let root = loop {
        let p = Point {
            row: topo.center.row + rng.gen_range(-0.35..0.35) * topo.semi_rows,
            col: topo.center.col + rng.gen_range(-0.35..0.35) * topo.semi_cols,
        };
        if topo.inside_reach(p, hi) {
            break p;
        }
    };
    topo.nodes.push(root);
    let mut placed = false;
    for _ in 0..PLACEMENT_ATTEMPTS {
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let len = rng.gen_range(lo..=hi);
        let tip = Point {
            row: root.row + len * angle.sin(),
            col: root.col + len * angle.cos(),
        };
        if topo.inside_reach(tip, 0.0) {
            topo.nodes.push(tip);
            topo.edges.push((0, 1));
            placed = true;
            break;
        }
    }
    if !placed {
        return Err(Error::Geometry("cannot place the trunk".into()));
    }

    for fork in 0..spec.branch_count {
        let mut done = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let tips: Vec<usize> = (0..topo.nodes.len())
                .filter(|&n| topo.degree(n) == 1)
                .collect();
            let at = tips[rng.gen_range(0..tips.len())];
            let parent = topo
                .edges
                .iter()
                .find_map(|&(a, b)| match (a == at, b == at) {
                    (true, _) => Some(b),
                    (_, true) => Some(a),
                    _ => None,
                })
                .expect("tips have one arm");
            let (from, base) = (topo.nodes[at], topo.nodes[parent]);
            let heading = (from.row - base.row).atan2(from.col - base.col);
            let spread = rng.gen_range(0.45..0.95);
            let skew = rng.gen_range(-0.3..0.3);
            let ends: Vec<Point> = [-1.0, 1.0]
                .iter()
                .map(|side| {
                    let a = heading + skew + side * spread;
                    let len = rng.gen_range(lo..=hi);
                    Point {
                        row: from.row + len * a.sin(),
                        col: from.col + len * a.cos(),
                    }
                })
                .collect();
            if ends[0].dist(ends[1]) < STROKE_CLEARANCE {
                continue;
            }
            if !clearance_ok(&topo, at, ends[0]) || !clearance_ok(&topo, at, ends[1]) {
                continue;
            }
            for &end in &ends {
                topo.nodes.push(end);
                topo.edges.push((at, topo.nodes.len() - 1));
            }
            done = true;
            break;
        }
        if !done {
            return Err(Error::Geometry(format!("cannot place fork {}", fork + 1)));
        }
    }
    Ok(topo)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: GrayImage,
    /// Tree endpoints and branch points in canvas coordinates.
    pub ground_truth: Vec<MinutiaPoint>,
}

fn draw_ellipse(img: &mut GrayImage, topo: &Topology, level: u8) {
    for r in 0..img.height() {
        let dr = (r as f64 + 0.5 - topo.center.row) / topo.semi_rows;
        if dr.abs() > 1.0 {
            continue;
        }
        let half = topo.semi_cols * (1.0 - dr * dr).sqrt();
        let c0 = (topo.center.col - half).ceil().max(0.0) as usize;
        let c1 = ((topo.center.col + half).floor() as usize).min(img.width() - 1);
        for c in c0..=c1 {
            img.set(r, c, level);
        }
    }
}

fn draw_stroke(img: &mut GrayImage, a: Point, b: Point, level: u8) {
    let pad = RIDGE_HALF_WIDTH + 1.0;
    let r0 = (a.row.min(b.row) - pad).floor().max(0.0) as usize;
    let r1 = ((a.row.max(b.row) + pad).ceil() as usize).min(img.height() - 1);
    let c0 = (a.col.min(b.col) - pad).floor().max(0.0) as usize;
    let c1 = ((a.col.max(b.col) + pad).ceil() as usize).min(img.width() - 1);
    for r in r0..=r1 {
        for c in c0..=c1 {
            let p = Point {
                row: r as f64,
                col: c as f64,
            };
            if segment_distance(p, a, b) <= RIDGE_HALF_WIDTH {
                img.set(r, c, level);
            }
        }
    }
}

/// Renders sample `index` of the identity.
pub fn generate_sample(spec: &IdentitySpec, index: u64) -> Result<Sample> {
    let topo = topology(spec)?;
    render(spec, &topo, index)
}

/// Renders a sample from a precomputed topology.
pub fn render(spec: &IdentitySpec, topo: &Topology, index: u64) -> Result<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.identity_seed);
    rng.set_stream(index.wrapping_add(1));

    let mut img = GrayImage::filled(spec.width, spec.height, BACKGROUND_LEVEL)?;
    draw_ellipse(&mut img, topo, FACE_LEVEL);

    let nodes: Vec<Point> = topo
        .nodes
        .iter()
        .map(|p| Point {
            row: p.row + rng.gen_range(-1.0..=1.0) * spec.jitter,
            col: p.col + rng.gen_range(-1.0..=1.0) * spec.jitter,
        })
        .collect();
    for &(a, b) in &topo.edges {
        draw_stroke(&mut img, nodes[a], nodes[b], RIDGE_LEVEL);
    }

    // A few bright specks in the corners, off the face.
    for _ in 0..SPECKLES {
        let r = rng.gen_range(0..spec.height / 12);
        let c = rng.gen_range(0..spec.width / 12);
        let (r, c) = match rng.gen_range(0..4) {
            0 => (r, c),
            1 => (r, spec.width - 1 - c),
            2 => (spec.height - 1 - r, c),
            _ => (spec.height - 1 - r, spec.width - 1 - c),
        };
        for dr in 0..2 {
            for dc in 0..2 {
                if r + dr < spec.height && c + dc < spec.width {
                    img.set(r + dr, c + dc, FACE_LEVEL);
                }
            }
        }
    }

    let noisy = img
        .data()
        .iter()
        .map(|&v| {
            let n = rng.gen_range(-NOISE_AMPLITUDE..=NOISE_AMPLITUDE);
            (i32::from(v) + n).clamp(0, 255) as u8
        })
        .collect();
    let image = GrayImage::new(spec.width, spec.height, noisy)?;

    let mut ground_truth: Vec<MinutiaPoint> = topo
        .ground_truth_kinds()
        .into_iter()
        .zip(&nodes)
        .filter_map(|(kind, p)| {
            kind.map(|kind| MinutiaPoint {
                row: p.row.round().clamp(0.0, (spec.height - 1) as f64) as usize,
                col: p.col.round().clamp(0.0, (spec.width - 1) as f64) as usize,
                kind,
            })
        })
        .collect();
    ground_truth.sort_by_key(|p| (p.row, p.col));
    Ok(Sample {
        image,
        ground_truth,
    })
}

/// Derives `count` identity seeds from a master seed.
pub fn identity_seeds(master_seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    (0..count).map(|_| rng.next_u64()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub filename: String,
    pub label: usize,
}

pub const MANIFEST_NAME: &str = "manifest.csv";

pub fn write_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = String::from("filename,label\n");
    for e in entries {
        out.push_str(&format!("{},{}\n", e.filename, e.label));
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    text.lines()
        .enumerate()
        .filter(|(i, l)| !l.trim().is_empty() && !(*i == 0 && l.trim() == "filename,label"))
        .map(|(i, line)| {
            let (filename, label) = line
                .rsplit_once(',')
                .ok_or_else(|| Error::parse("manifest", format!("line {}: {line:?}", i + 1)))?;
            let label = label.trim().parse().map_err(|_| {
                Error::parse("manifest", format!("line {}: bad label {label:?}", i + 1))
            })?;
            Ok(ManifestEntry {
                filename: filename.trim().to_string(),
                label,
            })
        })
        .collect()
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

pub fn sample_filename(identity: usize, index: usize) -> String {
    format!("id{identity:03}_s{index:03}.pgm")
}

/// Specs for every identity of a dataset, with default geometry.
pub fn dataset_specs(num_identities: usize, master_seed: u64) -> Vec<IdentitySpec> {
    identity_seeds(master_seed, num_identities)
        .into_iter()
        .map(IdentitySpec::new)
        .collect()
}

/// Writes `num_identities * samples_each` P5 images plus `manifest.csv` into
/// `outdir`, returning the manifest path.
pub fn generate_dataset(
    num_identities: usize,
    samples_each: usize,
    master_seed: u64,
    outdir: impl AsRef<Path>,
) -> Result<PathBuf> {
    use rayon::prelude::*;

    let outdir = outdir.as_ref();
    fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let specs = dataset_specs(num_identities, master_seed);
    let topologies = specs.iter().map(topology).collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..num_identities)
        .flat_map(|id| (0..samples_each).map(move |k| (id, k)))
        .collect();
    jobs.par_iter().try_for_each(|&(id, k)| -> Result<()> {
        let sample = render(&specs[id], &topologies[id], k as u64)?;
        save_pgm(outdir.join(sample_filename(id, k)), &sample.image)
    })?;

    let entries: Vec<ManifestEntry> = jobs
        .iter()
        .map(|&(id, k)| ManifestEntry {
            filename: sample_filename(id, k),
            label: id,
        })
        .collect();
    let manifest = outdir.join(MANIFEST_NAME);
    fs::write(&manifest, write_manifest(&entries)).map_err(|e| Error::io(&manifest, e))?;
    Ok(manifest)
}
