//! Grayscale frames, boolean masks, and binary PGM (P5) reading/writing.
//!
//! Only 8-bit P5 files are supported. Header comments (`#` to end of line)
//! are skipped. Masks are written with `true -> 255`, `false -> 0`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// A row-major 8-bit luminance image with a sequence ordinal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u8>,
    index: usize,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(
                "frame dimensions",
                format!("{width}x{height} is empty"),
            ));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "frame {width}x{height} needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
            index: 0,
        })
    }

    /// A frame with every sample set to `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.data[row * self.width + col] = value;
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn same_dims(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Read-only pixel access used by the sensor readout path.
///
/// Implemented by [`Frame`]; tests implement it with access counters to
/// check that only ON pixels are ever sampled.
pub trait PixelSource {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn sample(&self, row: usize, col: usize) -> u8;
}

impl PixelSource for Frame {
    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn sample(&self, row: usize, col: usize) -> u8 {
        self.get(row, col)
    }
}

/// A row-major boolean image; `true` marks changed (foreground) elements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "mask {width}x{height} needs {} elements, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn same_dims(&self, other: &Mask) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Renders the mask as a frame with values in {0, 255}.
    pub fn to_frame(&self) -> Result<Frame> {
        Frame::new(
            self.width,
            self.height,
            self.data.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        )
    }

    /// Thresholds a frame: samples `>= threshold` become `true`.
    pub fn from_frame(frame: &Frame, threshold: u8) -> Self {
        Self {
            width: frame.width,
            height: frame.height,
            data: frame.data.iter().map(|&v| v >= threshold).collect(),
        }
    }
}

/// Parses a binary PGM image held in memory. `path` is used only for error
/// messages.
pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<Frame> {
    let mut pos = 0usize;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while let Some(b) = bytes.get(pos) {
            if b.is_ascii_whitespace() || *b == b'#' {
                break;
            }
            pos += 1;
        }
        if start == pos {
            return Err(Error::PgmHeader {
                path: path.to_path_buf(),
                token: "<end of file>".into(),
            });
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }

    let header_err = |token: &str| Error::PgmHeader {
        path: path.to_path_buf(),
        token: token.to_string(),
    };
    if tokens[0] != "P5" {
        return Err(header_err(&tokens[0]));
    }
    let parse_dim = |tok: &str| -> Result<usize> {
        match tok.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(header_err(tok)),
        }
    };
    let width = parse_dim(&tokens[1])?;
    let height = parse_dim(&tokens[2])?;
    let maxval: u32 = tokens[3].parse().map_err(|_| header_err(&tokens[3]))?;
    if maxval == 0 || maxval > 65535 {
        return Err(header_err(&tokens[3]));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("maxval {maxval} (only 255 is supported)"),
        });
    }

    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                expected: width * height,
                found: 0,
            })
        }
    }
    let expected = width * height;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: raster.len(),
        });
    }
    Frame::new(width, height, raster[..expected].to_vec())
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes, path)
}

pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", frame.width, frame.height);
    let mut out = Vec::with_capacity(header.len() + frame.data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&frame.data);
    out
}

pub fn write_pgm(frame: &Frame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(frame)).map_err(|e| Error::io(path, e))
}

pub fn write_mask_pgm(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    write_pgm(&mask.to_frame()?, path)
}

/// Trailing run of ASCII digits in the file stem, used as the sort key.
fn numeric_key(name: &str) -> Option<u64> {
    let stem = name.rsplit_once('.').map_or(name, |(s, _)| s);
    let digits: String = stem
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    if digits.is_empty() {
        // fall back to the first digit run anywhere in the stem
        let first: String = stem
            .chars()
            .skip_while(|c| !c.is_ascii_digit())
            .take_while(|c| c.is_ascii_digit())
            .collect();
        return first.parse().ok();
    }
    digits.parse().ok()
}

/// Lists the files in `dir` whose names match `pattern`, in numeric order.
pub fn sequence_paths(dir: impl AsRef<Path>, pattern: &str) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let matcher = glob::Pattern::new(pattern)
        .map_err(|e| Error::invalid("pattern", format!("`{pattern}`: {e}")))?;
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut named = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let is_file = entry.file_type().map(|t| t.is_file()).unwrap_or(false);
        let name = entry.file_name().to_string_lossy().into_owned();
        if is_file && matcher.matches(&name) {
            named.push((numeric_key(&name), name, entry.path()));
        }
    }
    if named.is_empty() {
        return Err(Error::EmptySequence {
            dir: dir.to_path_buf(),
            pattern: pattern.to_string(),
        });
    }
    // numbered files first, by number, then by name
    named.sort_by(|a, b| (a.0.is_none(), a.0, &a.1).cmp(&(b.0.is_none(), b.0, &b.1)));
    Ok(named.into_iter().map(|(_, _, p)| p).collect())
}

/// Loads every matching frame in `dir`, ordered by the numeric component of
/// the file name. Indices are assigned `0, 1, 2, ...` in that order.
pub fn load_sequence(dir: impl AsRef<Path>, pattern: &str) -> Result<Vec<Frame>> {
    let paths = sequence_paths(dir, pattern)?;
    let mut frames: Vec<Frame> = Vec::with_capacity(paths.len());
    for (index, path) in paths.iter().enumerate() {
        let frame = read_pgm(path)?.with_index(index);
        if let Some(first) = frames.first() {
            if !first.same_dims(&frame) {
                return Err(Error::DimensionMismatch(format!(
                    "{} is {}x{}, expected {}x{} (from {})",
                    path.display(),
                    frame.width,
                    frame.height,
                    first.width,
                    first.height,
                    paths[0].display()
                )));
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}
