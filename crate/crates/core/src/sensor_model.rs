//! Pixel-array box topology, analog readout, and ADC quantization.
//!
//! The array is tiled into `n x n` boxes. Only the center pixel of each box
//! (ON) is connected to the readout; the other `n - 1` pixels in its column
//! are Disconnected by the row-select signal and the remaining `n^2 - n`
//! pixels sit in unpowered columns (OFF).
//!
//! Centers start at `n / 2` (0-based) and repeat every `n` pixels in both
//! directions. Boxes that run off the right or bottom edge are clipped but
//! still count, so a 600x600 array with `n = 7` has 86 x 86 = 7396 centers.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame_io::PixelSource;

/// ADC bit-width. Codes are the top `bits` bits of the 8-bit sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Precision(u8);

impl Precision {
    pub fn new(bits: u8) -> Result<Self> {
        if (1..=8).contains(&bits) {
            Ok(Self(bits))
        } else {
            Err(Error::invalid(
                "precision",
                format!("{bits} bits is outside 1..=8"),
            ))
        }
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    /// Truncating quantization: `intensity >> (8 - bits)`.
    #[inline]
    pub fn code(self, intensity: u8) -> u8 {
        intensity >> (8 - self.0)
    }

    /// Number of distinct codes, `2^bits`.
    pub fn levels(self) -> u16 {
        1u16 << self.0
    }
}

/// Returns the top `precision` bits of an 8-bit sample.
pub fn quantize(intensity: u8, precision: u8) -> Result<u8> {
    Ok(Precision::new(precision)?.code(intensity))
}

/// Per-box pixel census for a full (unclipped) box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BoxCensus {
    pub on: usize,
    pub disconnect: usize,
    pub off: usize,
}

impl BoxCensus {
    pub fn for_box_size(n: usize) -> Self {
        Self {
            on: 1,
            disconnect: n - 1,
            off: n * n - n,
        }
    }

    pub fn total(&self) -> usize {
        self.on + self.disconnect + self.off
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxGrid {
    box_size: usize,
    width: usize,
    height: usize,
    center_rows: Vec<usize>,
    center_cols: Vec<usize>,
}

fn centers_along(extent: usize, n: usize) -> Vec<usize> {
    (n / 2..extent).step_by(n).collect()
}

impl BoxGrid {
    pub fn new(width: usize, height: usize, box_size: usize) -> Result<Self> {
        if box_size == 0 || box_size.is_multiple_of(2) {
            return Err(Error::invalid(
                "box_size",
                format!("{box_size} must be odd and positive"),
            ));
        }
        Ok(Self {
            box_size,
            width,
            height,
            center_rows: centers_along(height, box_size),
            center_cols: centers_along(width, box_size),
        })
    }

    pub fn box_size(&self) -> usize {
        self.box_size
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Pixel-row coordinates of the center rows, ascending.
    pub fn center_rows(&self) -> &[usize] {
        &self.center_rows
    }

    pub fn center_cols(&self) -> &[usize] {
        &self.center_cols
    }

    /// Total number of centers (ON pixels).
    pub fn len(&self) -> usize {
        self.center_rows.len() * self.center_cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Centers as `(row, col)` pixel coordinates, row-major.
    pub fn centers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.center_rows
            .iter()
            .flat_map(move |&r| self.center_cols.iter().map(move |&c| (r, c)))
    }

    pub fn census(&self) -> BoxCensus {
        BoxCensus::for_box_size(self.box_size)
    }

    /// Half-open pixel bounds `(rows, cols)` of the box around a center,
    /// clipped to the array.
    pub fn box_bounds(
        &self,
        center_row: usize,
        center_col: usize,
    ) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let half = self.box_size / 2;
        let r0 = center_row.saturating_sub(half);
        let c0 = center_col.saturating_sub(half);
        let r1 = (center_row + half + 1).min(self.height);
        let c1 = (center_col + half + 1).min(self.width);
        (r0..r1, c0..c1)
    }

    /// Index into `center_rows` for a pixel row, if it is a center row.
    pub fn center_row_index(&self, pixel_row: usize) -> Option<usize> {
        self.center_rows.binary_search(&pixel_row).ok()
    }

    fn check_source<S: PixelSource + ?Sized>(&self, frame: &S) -> Result<()> {
        if frame.width() != self.width || frame.height() != self.height {
            return Err(Error::DimensionMismatch(format!(
                "frame is {}x{}, grid is {}x{}",
                frame.width(),
                frame.height(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }
}

pub fn build_box_grid(width: usize, height: usize, box_size: usize) -> Result<BoxGrid> {
    BoxGrid::new(width, height, box_size)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizedReadout {
    pub precision: Precision,
    /// One code per center, in `BoxGrid::centers` order.
    pub codes: Vec<u8>,
}

/// Reads and quantizes every ON pixel. OFF and Disconnected pixels are never
/// sampled.
pub fn capture_centers<S: PixelSource + ?Sized>(
    frame: &S,
    grid: &BoxGrid,
    precision: Precision,
) -> Result<QuantizedReadout> {
    grid.check_source(frame)?;
    let codes = grid
        .centers()
        .map(|(r, c)| precision.code(frame.sample(r, c)))
        .collect();
    Ok(QuantizedReadout { precision, codes })
}

/// Reads and quantizes the ON pixels of one center row (by index into
/// `grid.center_rows()`), appending the codes to `out`.
pub fn capture_row<S: PixelSource + ?Sized>(
    frame: &S,
    grid: &BoxGrid,
    row_index: usize,
    precision: Precision,
    out: &mut Vec<u8>,
) {
    let r = grid.center_rows[row_index];
    out.extend(
        grid.center_cols
            .iter()
            .map(|&c| precision.code(frame.sample(r, c))),
    );
}

/// Checked variant of [`capture_row`].
pub fn capture_row_checked<S: PixelSource + ?Sized>(
    frame: &S,
    grid: &BoxGrid,
    row_index: usize,
    precision: Precision,
) -> Result<Vec<u8>> {
    grid.check_source(frame)?;
    if row_index >= grid.center_rows.len() {
        return Err(Error::RowOutOfRange {
            row: row_index,
            rows: grid.center_rows.len(),
        });
    }
    let mut out = Vec::with_capacity(grid.center_cols.len());
    capture_row(frame, grid, row_index, precision, &mut out);
    Ok(out)
}

/// Photodiode voltages before (reset) and after exposure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalogSample {
    pub v_reset: f64,
    pub v_exposed: f64,
    pub vdd: f64,
}

impl AnalogSample {
    /// The differential signal the readout converts.
    pub fn swing(&self) -> f64 {
        self.v_reset - self.v_exposed
    }
}

/// Linear photodiode discharge with a clamp at ground.
pub fn sense_analog(intensity: f64, exposure: f64, vdd: f64, k: f64) -> Result<AnalogSample> {
    if !(0.0..=255.0).contains(&intensity) {
        return Err(Error::invalid(
            "intensity",
            format!("{intensity} outside 0..=255"),
        ));
    }
    if !(exposure > 0.0) {
        return Err(Error::invalid(
            "exposure",
            format!("{exposure} must be positive"),
        ));
    }
    if !(vdd >= 0.0) {
        return Err(Error::invalid("vdd", format!("{vdd} must be non-negative")));
    }
    if !(k >= 0.0) {
        return Err(Error::invalid("k", format!("{k} must be non-negative")));
    }
    let v_exposed = (vdd - k * intensity * exposure).max(0.0);
    Ok(AnalogSample {
        v_reset: vdd,
        v_exposed,
        vdd,
    })
}
