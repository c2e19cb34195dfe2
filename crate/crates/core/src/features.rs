//! Block-count feature vectors, the feature CSV, and stratified splitting.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::minutiae::MinutiaPoint;

/// Grid sizes evaluated by the block sweep.
pub const SWEEP_GRIDS: [usize; 3] = [8, 16, 32];

/// Minutiae counts over a `grid`×`grid` partition of the image, raster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    pub grid: usize,
    pub counts: Vec<u32>,
    pub label: Option<usize>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }
}

/// Counts points per cell; point (r, c) falls in cell
/// `(r * grid / height, c * grid / width)`.
pub fn block_features(
    points: &[MinutiaPoint],
    width: usize,
    height: usize,
    grid: usize,
) -> Result<FeatureVector> {
    if grid == 0 || width < grid || height < grid {
        return Err(Error::Config(format!(
            "a {grid}x{grid} grid does not fit a {width}x{height} image"
        )));
    }
    let mut counts = vec![0u32; grid * grid];
    for p in points {
        if p.row >= height || p.col >= width {
            return Err(Error::OutOfBounds {
                row: p.row,
                col: p.col,
                width,
                height,
            });
        }
        let cell_row = p.row * grid / height;
        let cell_col = p.col * grid / width;
        counts[cell_row * grid + cell_col] += 1;
    }
    Ok(FeatureVector {
        grid,
        counts,
        label: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<FeatureVector>,
    pub test: Vec<FeatureVector>,
    pub seed: u64,
    pub train_fraction: f64,
}

/// Number of training samples drawn from a class of `n`.
///
/// `ceil(fraction * n)`, held to `[1, n - 1]` so both halves see the class.
pub fn train_count(n: usize, train_fraction: f64) -> usize {
    let k = (train_fraction * n as f64).ceil() as usize;
    k.clamp(1, n - 1)
}

/// Stratified, seeded split. Each half keeps the input order.
pub fn split_dataset(
    vectors: &[FeatureVector],
    train_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} is not in (0, 1)"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, v) in vectors.iter().enumerate() {
        let label = v
            .label
            .ok_or_else(|| Error::Config(format!("sample {i} has no label")))?;
        by_class.entry(label).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; vectors.len()];
    for (&label, members) in &by_class {
        if members.len() < 2 {
            return Err(Error::InsufficientData {
                label,
                count: members.len(),
            });
        }
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for &i in &shuffled[..train_count(members.len(), train_fraction)] {
            in_train[i] = true;
        }
    }

    let (train, test): (Vec<_>, Vec<_>) = vectors.iter().zip(&in_train).partition(|(_, &t)| t);
    Ok(DatasetSplit {
        train: train.into_iter().map(|(v, _)| v.clone()).collect(),
        test: test.into_iter().map(|(v, _)| v.clone()).collect(),
        seed,
        train_fraction,
    })
}

/// Header `label,n=<len>` followed by `label,c0,...` rows. Unlabeled rows
/// leave the label field empty.
pub fn write_features_csv(vectors: &[FeatureVector], grid: usize) -> String {
    let mut out = format!("label,n={}\n", grid * grid);
    for v in vectors {
        if let Some(label) = v.label {
            out.push_str(&label.to_string());
        }
        for c in &v.counts {
            out.push(',');
            out.push_str(&c.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn parse_features_csv(text: &str) -> Result<(usize, Vec<FeatureVector>)> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .map(|(_, l)| l.trim())
        .ok_or_else(|| Error::parse("feature CSV", "missing header"))?;
    let n: usize = header
        .strip_prefix("label,n=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse("feature CSV", format!("bad header {header:?}")))?;
    let grid = (n as f64).sqrt().round() as usize;
    if grid * grid != n || grid == 0 {
        return Err(Error::parse(
            "feature CSV",
            format!("{n} is not a square grid size"),
        ));
    }

    let mut vectors = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::parse("feature CSV", format!("line {}: {msg}", lineno + 1));
        let mut fields = line.split(',');
        let label_field = fields.next().unwrap_or_default().trim();
        let label = if label_field.is_empty() {
            None
        } else {
            Some(
                label_field
                    .parse()
                    .map_err(|_| bad(format!("bad label {label_field:?}")))?,
            )
        };
        let counts = fields
            .map(|f| {
                f.trim()
                    .parse::<u32>()
                    .map_err(|_| bad(format!("bad count {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if counts.len() != n {
            return Err(Error::Shape {
                expected: n,
                got: counts.len(),
            });
        }
        vectors.push(FeatureVector {
            grid,
            counts,
            label,
        });
    }
    Ok((grid, vectors))
}

pub fn load_features_csv(path: impl AsRef<Path>) -> Result<(usize, Vec<FeatureVector>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_features_csv(&text)
}

pub fn save_features_csv(
    path: impl AsRef<Path>,
    vectors: &[FeatureVector],
    grid: usize,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_features_csv(vectors, grid)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minutiae::MinutiaKind;

    fn pt(row: usize, col: usize) -> MinutiaPoint {
        MinutiaPoint {
            row,
            col,
            kind: MinutiaKind::Termination,
        }
    }

    fn labeled(label: usize, tag: u32) -> FeatureVector {
        FeatureVector {
            grid: 1,
            counts: vec![tag],
            label: Some(label),
        }
    }

    #[test]
    fn empty_points() {
        let fv = block_features(&[], 100, 80, 8).unwrap();
        assert_eq!(fv.counts, vec![0; 64]);
    }

    #[test]
    fn origin_lands_in_first_cell() {
        let fv = block_features(&[pt(0, 0)], 37, 53, 8).unwrap();
        assert_eq!(fv.counts[0], 1);
        assert_eq!(fv.total(), 1);
    }

    #[test]
    fn quadrants() {
        let pts = [pt(3, 3), pt(3, 12), pt(12, 3), pt(12, 12)];
        assert_eq!(
            block_features(&pts, 16, 16, 2).unwrap().counts,
            vec![1, 1, 1, 1]
        );
    }

    #[test]
    fn remainders_go_to_last_cells() {
        // 10 rows over 3 cells: rows 0..=3 -> 0, 4..=6 -> 1, 7..=9 -> 2
        let pts = [pt(3, 0), pt(4, 0), pt(6, 0), pt(7, 0), pt(9, 9)];
        let fv = block_features(&pts, 10, 10, 3).unwrap();
        assert_eq!(fv.counts, vec![1, 0, 0, 2, 0, 0, 1, 0, 1]);
    }

    #[test]
    fn out_of_bounds_point() {
        let err = block_features(&[pt(10, 0)], 10, 10, 2).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { row: 10, .. }));
        assert!(block_features(&[], 4, 4, 8).is_err());
    }

    #[test]
    fn six_by_thirty_four_split() {
        let data: Vec<_> = (0..6)
            .flat_map(|c| (0..34).map(move |i| labeled(c, i)))
            .collect();
        let split = split_dataset(&data, 0.5, 7).unwrap();
        for c in 0..6 {
            assert_eq!(
                split.train.iter().filter(|v| v.label == Some(c)).count(),
                17
            );
            assert_eq!(split.test.iter().filter(|v| v.label == Some(c)).count(), 17);
        }
        assert_eq!(split, split_dataset(&data, 0.5, 7).unwrap());
        assert_ne!(split.train, split_dataset(&data, 0.5, 8).unwrap().train);
    }

    #[test]
    fn split_rejects_singleton_class() {
        let data = vec![labeled(0, 0), labeled(0, 1), labeled(1, 2)];
        let err = split_dataset(&data, 0.5, 1).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientData { label: 1, count: 1 }
        ));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let data = vec![labeled(0, 0), labeled(0, 1)];
        assert!(split_dataset(&data, 1.0, 1).is_err());
        assert!(split_dataset(&data, 0.0, 1).is_err());
    }

    #[test]
    fn train_count_rounds_up_and_keeps_a_test_sample() {
        assert_eq!(train_count(34, 0.5), 17);
        assert_eq!(train_count(5, 0.5), 3);
        assert_eq!(train_count(2, 0.9), 1);
    }

    #[test]
    fn csv_round_trip() {
        let vectors = vec![
            FeatureVector {
                grid: 2,
                counts: vec![1, 0, 3, 2],
                label: Some(4),
            },
            FeatureVector {
                grid: 2,
                counts: vec![0, 0, 0, 9],
                label: None,
            },
        ];
        let text = write_features_csv(&vectors, 2);
        assert!(text.starts_with("label,n=4\n4,1,0,3,2\n,0,0,0,9\n"));
        assert_eq!(parse_features_csv(&text).unwrap(), (2, vectors));
    }

    #[test]
    fn csv_errors() {
        assert!(parse_features_csv("").is_err());
        assert!(parse_features_csv("label,n=5\n").is_err());
        assert!(matches!(
            parse_features_csv("label,n=4\n1,2,3\n"),
            Err(Error::Shape {
                expected: 4,
                got: 2
            })
        ));
        assert!(parse_features_csv("label,n=1\nx,3\n").is_err());
    }
}
