//! Grayscale and binary rasters, plus PGM (P2/P5) encoding.
//!
//! Binary images are persisted as 0/255 grayscale so every intermediate
//! stage opens in an ordinary image viewer.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAX_SIDE: usize = 1 << 16;

/// Row-major 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.data[row * self.width + col] = value;
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }
}

/// Row-major raster of {0, 1}; 1 is foreground (face / ridge).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if let Some(index) = data.iter().position(|&v| v > 1) {
            return Err(Error::InvalidImage(format!(
                "binary value {} at index {index}",
                data[index]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn ones(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![1; width * height],
        }
    }

    /// Builds an image from rows of `0`/`1` characters; any other character
    /// counts as background. Handy for fixtures.
    pub fn from_rows(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut img = Self::zeros(width, height);
        for (r, line) in rows.iter().enumerate() {
            assert_eq!(line.len(), width, "ragged fixture row {r}");
            for (c, ch) in line.bytes().enumerate() {
                if ch == b'1' || ch == b'#' {
                    img.set(r, c, true);
                }
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] != 0
    }

    /// Reads with background padding outside the raster.
    #[inline]
    pub fn get_padded(&self, row: isize, col: isize) -> bool {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            return false;
        }
        self.data[row as usize * self.width + col as usize] != 0
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = u8::from(value);
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// True when every foreground pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        self.width == other.width
            && self.height == other.height
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(&a, &b)| a == 0 || b != 0)
    }

    /// Foreground coordinates in raster order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(move |(i, _)| (i / w, i % w))
    }

    /// The 3x3 neighborhood centered on (row, col), background-padded.
    pub fn window(&self, row: usize, col: usize) -> [[bool; 3]; 3] {
        let mut out = [[false; 3]; 3];
        for (dr, line) in out.iter_mut().enumerate() {
            for (dc, cell) in line.iter_mut().enumerate() {
                *cell = self.get_padded(
                    row as isize + dr as isize - 1,
                    col as isize + dc as isize - 1,
                );
            }
        }
        out
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!(
            "empty dimensions {width}x{height}"
        )));
    }
    if width > MAX_SIDE || height > MAX_SIDE {
        return Err(Error::InvalidImage(format!(
            "dimensions {width}x{height} exceed {MAX_SIDE} per side"
        )));
    }
    if len != width * height {
        return Err(Error::InvalidImage(format!(
            "data length {len} does not match {width}x{height}"
        )));
    }
    Ok(())
}

/// Maps 1 to 255 and 0 to 0.
pub fn binary_to_gray(img: &BinaryImage) -> GrayImage {
    GrayImage {
        width: img.width,
        height: img.height,
        data: img
            .data
            .iter()
            .map(|&v| if v != 0 { 255 } else { 0 })
            .collect(),
    }
}

/// Inverse of [`binary_to_gray`]; rejects any intensity other than 0 or 255.
pub fn gray_to_binary_lossless(img: &GrayImage) -> Result<BinaryImage> {
    let data = img
        .data
        .iter()
        .enumerate()
        .map(|(index, &value)| match value {
            0 => Ok(0),
            255 => Ok(1),
            _ => Err(Error::NotBinary { index, value }),
        })
        .collect::<Result<Vec<u8>>>()?;
    Ok(BinaryImage {
        width: img.width,
        height: img.height,
        data,
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace(&mut self, allow_comments: bool) -> Result<()> {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                if !allow_comments {
                    return Err(Error::Format("comment inside raster".into()));
                }
                while let Some(&b) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
        Ok(())
    }

    /// Reads an unsigned decimal token; `None` at end of input.
    fn number(&mut self) -> Result<Option<u32>> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return match self.bytes.get(self.pos) {
                None => Ok(None),
                Some(&b) => Err(Error::Format(format!(
                    "unexpected byte 0x{b:02x} at offset {}",
                    self.pos
                ))),
            };
        }
        if let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_whitespace() && b != b'#' {
                return Err(Error::Format(format!(
                    "unexpected byte 0x{b:02x} at offset {}",
                    self.pos
                )));
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse::<u32>()
            .map(Some)
            .map_err(|_| Error::Format(format!("number {text} out of range")))
    }

    fn header_field(&mut self, name: &str) -> Result<u32> {
        self.skip_whitespace(true)?;
        self.number()?
            .ok_or_else(|| Error::Format(format!("missing {name}")))
    }
}

/// Parses a P2 (ASCII) or P5 (binary) PGM with maxval at most 255.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let ascii = match bytes.get(..2) {
        Some(b"P2") => true,
        Some(b"P5") => false,
        _ => return Err(Error::Format("magic is not P2 or P5".into())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    match cur.bytes.get(2) {
        Some(b) if b.is_ascii_whitespace() || *b == b'#' => {}
        _ => return Err(Error::Format("missing separator after magic".into())),
    }
    let width = cur.header_field("width")? as usize;
    let height = cur.header_field("height")? as usize;
    let maxval = cur.header_field("maxval")?;
    if maxval == 0 {
        return Err(Error::Format("maxval must be positive".into()));
    }
    if maxval > 255 {
        return Err(Error::UnsupportedDepth(maxval));
    }
    if width == 0 || height == 0 || width > MAX_SIDE || height > MAX_SIDE {
        return Err(Error::Format(format!(
            "invalid dimensions {width}x{height}"
        )));
    }
    let expected = width * height;
    let mut data = Vec::with_capacity(expected);

    if ascii {
        loop {
            cur.skip_whitespace(false)?;
            if data.len() == expected {
                break;
            }
            match cur.number()? {
                Some(v) if v > maxval => {
                    return Err(Error::Format(format!("sample {v} exceeds maxval {maxval}")))
                }
                Some(v) => data.push(v as u8),
                None => break,
            }
        }
        if data.len() < expected {
            return Err(Error::Truncated {
                expected,
                found: data.len(),
            });
        }
    } else {
        match cur.bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            Some(_) => return Err(Error::Format("maxval not followed by whitespace".into())),
            None => return Err(Error::Truncated { expected, found: 0 }),
        }
        let raster = &cur.bytes[cur.pos..];
        if raster.len() < expected {
            return Err(Error::Truncated {
                expected,
                found: raster.len(),
            });
        }
        if let Some(&v) = raster[..expected].iter().find(|&&v| u32::from(v) > maxval) {
            return Err(Error::Format(format!("sample {v} exceeds maxval {maxval}")));
        }
        data.extend_from_slice(&raster[..expected]);
    }
    GrayImage::new(width, height, data)
}

/// Encodes with maxval 255, as P5 when `binary` is set and P2 otherwise.
pub fn write_pgm(img: &GrayImage, binary: bool) -> Vec<u8> {
    let magic = if binary { "P5" } else { "P2" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    if binary {
        out.extend_from_slice(&img.data);
    } else {
        for row in img.data.chunks(img.width) {
            let line = row
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            out.extend_from_slice(line.as_bytes());
            out.push(b'\n');
        }
    }
    out
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_pgm(&bytes)
}

pub fn save_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_pgm(img, true)).map_err(|e| Error::io(path, e))
}

pub fn load_binary_pgm(path: impl AsRef<Path>) -> Result<BinaryImage> {
    gray_to_binary_lossless(&load_pgm(path)?)
}

pub fn save_binary_pgm(path: impl AsRef<Path>, img: &BinaryImage) -> Result<()> {
    save_pgm(path, &binary_to_gray(img))
}
