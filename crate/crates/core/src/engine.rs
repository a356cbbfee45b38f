//! The event-detection / sensing-mode state machine.
//!
//! Each [`Engine::step`] runs one frame:
//!
//! 1. If the consecutive-event counter has reached `time_tau`, the stored
//!    background is rewritten from this frame's center codes and the counter
//!    resets. This happens before detection, so the frame that triggers the
//!    update compares against its own codes.
//! 2. Every center row is read at the configured precision and compared
//!    bit-for-bit (XNOR) with its MRAM row. Rows with at least
//!    `threshold_pixels` mismatching centers go on the turn-on list.
//! 3. A non-empty list increments the counter and runs sensing mode on the
//!    same frame, transferring the pixel-row band around each listed row.
//!    An empty list resets the counter.
//!
//! The counter and the turn-on list are volatile and are lost on power
//! cycles; only the MRAM background persists.

use serde::{Deserialize, Serialize};

use crate::energy::{Category, EnergyLedger, EnergyModel, EnergyTotals};
use crate::error::{Error, Result};
use crate::frame_io::{Frame, Mask};
use crate::nvm_store::{MramArray, NvmParams};
use crate::par::{self, Execution};
use crate::sensor_model::{capture_row, BoxGrid, Precision};

/// Box sizes available on the fabricated array.
pub const STRICT_BOX_SIZES: [usize; 3] = [3, 5, 7];
/// ADC precisions available on the fabricated array.
pub const STRICT_PRECISIONS: [u8; 4] = [1, 2, 3, 4];
/// A `threshold_pixels` that no row can reach.
pub const THRESHOLD_NEVER: usize = usize::MAX;

/// All 12 `(box_size, precision)` combinations, ascending.
pub fn strict_configs() -> Vec<(usize, u8)> {
    STRICT_BOX_SIZES
        .iter()
        .flat_map(|&b| STRICT_PRECISIONS.iter().map(move |&p| (b, p)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeseConfig {
    pub box_size: usize,
    pub precision: u8,
    /// Minimum mismatching centers in a row for the row to count as changed.
    pub threshold_pixels: usize,
    /// Consecutive event frames before steady changes merge into the
    /// background.
    pub time_tau: u32,
    /// Restrict box size and precision to the fabricated options.
    pub strict: bool,
    /// Transfer `row ± box_size / 2` instead of `row ± box_size`.
    pub transfer_half_box: bool,
    /// On background update, rewrite only rows whose codes changed.
    pub update_changed_rows_only: bool,
}

impl Default for NeseConfig {
    fn default() -> Self {
        Self {
            box_size: 3,
            precision: 2,
            threshold_pixels: 1,
            time_tau: 4,
            strict: false,
            transfer_half_box: false,
            update_changed_rows_only: false,
        }
    }
}

impl NeseConfig {
    pub fn new(box_size: usize, precision: u8, threshold_pixels: usize, time_tau: u32) -> Self {
        Self {
            box_size,
            precision,
            threshold_pixels,
            time_tau,
            ..Self::default()
        }
    }

    pub fn strict(mut self) -> Self {
        self.strict = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.box_size == 0 || self.box_size.is_multiple_of(2) {
            return Err(Error::invalid(
                "box_size",
                format!("{} must be odd and positive", self.box_size),
            ));
        }
        if self.strict && !STRICT_BOX_SIZES.contains(&self.box_size) {
            return Err(Error::invalid(
                "box_size",
                format!("{} not in {{3, 5, 7}} (strict mode)", self.box_size),
            ));
        }
        let max_precision = if self.strict { 4 } else { 8 };
        if !(1..=max_precision).contains(&self.precision) {
            return Err(Error::invalid(
                "precision",
                format!("{} not in 1..={max_precision}", self.precision),
            ));
        }
        if self.time_tau == 0 {
            return Err(Error::invalid("time_tau", "must be at least 1"));
        }
        Ok(())
    }

    pub fn precision_bits(&self) -> Result<Precision> {
        Precision::new(self.precision)
    }

    /// Half-width of the transferred row band.
    pub fn transfer_reach(&self) -> usize {
        if self.transfer_half_box {
            self.box_size / 2
        } else {
            self.box_size
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    EventDetection,
    Sensor,
}

/// What survives a power loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundKind {
    /// MRAM: contents persist.
    #[default]
    NonVolatile,
    /// Control model of an SRAM-style store: contents zeroed on power loss.
    Volatile,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineOptions {
    pub execution: Execution,
    pub background: BackgroundKind,
    /// Apply MRAM retention decay when [`Engine::apply_retention`] is called.
    pub retention_decay: bool,
}

/// An inclusive range of full-resolution pixel rows sent to the co-processor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowSpan {
    pub start: usize,
    pub end: usize,
}

impl RowSpan {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Sorts and merges overlapping or adjacent spans.
pub fn merge_spans(mut spans: Vec<RowSpan>) -> Vec<RowSpan> {
    spans.sort_unstable();
    let mut out: Vec<RowSpan> = Vec::with_capacity(spans.len());
    for s in spans {
        match out.last_mut() {
            Some(last) if s.start <= last.end + 1 => last.end = last.end.max(s.end),
            _ => out.push(s),
        }
    }
    out
}

/// Per-frame comparison outcome.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Detection {
    /// Mismatching centers per center row.
    pub row_counts: Vec<usize>,
    /// Center-resolution mask; `true` where the codes differ.
    pub change_mask: Mask,
    /// Pixel-row coordinates of rows that met the threshold.
    pub changed_rows: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepResult {
    pub frame_index: usize,
    /// Pixel-row coordinates of the center rows listed this frame.
    pub changed_rows: Vec<usize>,
    pub row_change_counts: Vec<usize>,
    #[serde(skip)]
    pub change_mask: Mask,
    pub sensor_mode_entered: bool,
    pub background_updated: bool,
    pub transferred_rows: Vec<RowSpan>,
    /// Metered energy charged during this step.
    pub energy: EnergyTotals,
}

/// Bitwise equality of two codes over `precision` bits.
pub fn compare_codes(current: u8, stored: u8, precision: Precision) -> bool {
    let mask = ((1u16 << precision.bits()) - 1) as u8;
    // XNOR of every bit pair must be all ones
    (!(current ^ stored)) & mask == mask
}

/// MSB-first bits of each code, concatenated.
pub fn encode_codes(codes: &[u8], precision: Precision, out: &mut Vec<bool>) {
    let p = precision.bits();
    for &code in codes {
        for bit in (0..p).rev() {
            out.push(code >> bit & 1 == 1);
        }
    }
}

fn decode_code(bits: &[bool]) -> u8 {
    bits.iter().fold(0u8, |acc, &b| acc << 1 | b as u8)
}

#[derive(Clone, Debug)]
pub struct Engine {
    config: NeseConfig,
    precision: Precision,
    options: EngineOptions,
    grid: BoxGrid,
    background: MramArray,
    energy: EnergyModel,
    box_sense_watts: f64,
    box_sense_extrapolated: bool,
    mode: Mode,
    time: u32,
    turn_on_list: Vec<usize>,
    clock: f64,
    ledger: EnergyLedger,
}

impl Engine {
    pub fn init(
        config: NeseConfig,
        first_frame: &Frame,
        nvm: NvmParams,
        energy: EnergyModel,
    ) -> Result<Self> {
        Self::init_with(config, first_frame, nvm, energy, EngineOptions::default())
    }

    /// Builds the box grid, allocates the MRAM (one row per center row,
    /// `precision` bits per center), and stores `first_frame` as the
    /// background.
    pub fn init_with(
        config: NeseConfig,
        first_frame: &Frame,
        nvm: NvmParams,
        energy: EnergyModel,
        options: EngineOptions,
    ) -> Result<Self> {
        config.validate()?;
        energy.validate()?;
        if first_frame.width() < config.box_size || first_frame.height() < config.box_size {
            return Err(Error::DimensionMismatch(format!(
                "frame {}x{} is smaller than box size {}",
                first_frame.width(),
                first_frame.height(),
                config.box_size
            )));
        }
        let precision = config.precision_bits()?;
        let grid = BoxGrid::new(first_frame.width(), first_frame.height(), config.box_size)?;
        let (box_sense_watts, box_sense_extrapolated) = if config.strict {
            (energy.power_table.box_sense_power(config.box_size)?, false)
        } else {
            let l = energy.power_table.box_sense_power_or_fit(config.box_size)?;
            (l.watts, l.extrapolated)
        };
        let background = MramArray::new(
            grid.center_rows().len(),
            grid.center_cols().len() * precision.bits() as usize,
            nvm,
        )?;
        let mut engine = Self {
            config,
            precision,
            options,
            grid,
            background,
            energy,
            box_sense_watts,
            box_sense_extrapolated,
            mode: Mode::EventDetection,
            time: 0,
            turn_on_list: Vec::new(),
            clock: 0.0,
            ledger: EnergyLedger::new(),
        };
        engine.write_background(first_frame, false)?;
        Ok(engine)
    }

    pub fn config(&self) -> &NeseConfig {
        &self.config
    }

    pub fn options(&self) -> &EngineOptions {
        &self.options
    }

    pub fn set_execution(&mut self, execution: Execution) {
        self.options.execution = execution;
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn background(&self) -> &MramArray {
        &self.background
    }

    pub fn energy_model(&self) -> &EnergyModel {
        &self.energy
    }

    /// True when the per-box sensing power came from a fit rather than a
    /// measured box size.
    pub fn sense_power_extrapolated(&self) -> bool {
        self.box_sense_extrapolated
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Consecutive event frames since the last quiet frame or update.
    pub fn time(&self) -> u32 {
        self.time
    }

    pub fn turn_on_list(&self) -> &[usize] {
        &self.turn_on_list
    }

    /// Simulation time in seconds.
    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn advance_clock(&mut self, seconds: f64) {
        self.clock += seconds;
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn is_powered(&self) -> bool {
        self.background.is_powered()
    }

    fn check_frame(&self, frame: &Frame) -> Result<()> {
        if frame.width() != self.grid.width() || frame.height() != self.grid.height() {
            return Err(Error::DimensionMismatch(format!(
                "frame {} is {}x{}, engine expects {}x{}",
                frame.index(),
                frame.width(),
                frame.height(),
                self.grid.width(),
                self.grid.height()
            )));
        }
        Ok(())
    }

    fn row_bits(&self, frame: &Frame, row_index: usize) -> Vec<bool> {
        let mut codes = Vec::with_capacity(self.grid.center_cols().len());
        capture_row(frame, &self.grid, row_index, self.precision, &mut codes);
        let mut bits = Vec::with_capacity(codes.len() * self.precision.bits() as usize);
        encode_codes(&codes, self.precision, &mut bits);
        bits
    }

    fn write_background(&mut self, frame: &Frame, changed_only: bool) -> Result<()> {
        let exec = self.options.execution;
        let rows = par::map_indexed(exec, self.grid.center_rows().len(), |r| {
            self.row_bits(frame, r)
        });
        for (r, bits) in rows.iter().enumerate() {
            if changed_only && self.background.peek_row(r)? == bits.as_slice() {
                continue;
            }
            self.background
                .write_bits(r, bits, self.clock, &mut self.ledger)?;
        }
        Ok(())
    }

    /// Compares every center row against the stored background and fills the
    /// turn-on list.
    pub fn detect_events(&mut self, frame: &Frame) -> Result<Detection> {
        if self.mode != Mode::EventDetection {
            return Err(Error::invalid(
                "mode",
                "event detection requires event-detection mode",
            ));
        }
        self.check_frame(frame)?;
        if !self.background.is_powered() {
            return Err(Error::PowerFault);
        }
        let p = self.precision.bits() as usize;
        let n_rows = self.grid.center_rows().len();
        let n_cols = self.grid.center_cols().len();

        let per_row: Vec<Result<Vec<bool>>> =
            par::map_indexed(self.options.execution, n_rows, |r| {
                let mut codes = Vec::with_capacity(n_cols);
                capture_row(frame, &self.grid, r, self.precision, &mut codes);
                let stored = self.background.peek_row(r)?;
                Ok(codes
                    .iter()
                    .zip(stored.chunks_exact(p))
                    .map(|(&cur, old)| !compare_codes(cur, decode_code(old), self.precision))
                    .collect())
            });

        self.ledger.charge(
            Category::PixelSense,
            self.grid.len() as f64 * self.box_sense_watts * self.energy.frame_period,
        );
        let xnor_per_row = (n_cols * p) as f64 * self.energy.e_xnor_bit;

        self.turn_on_list.clear();
        let mut row_counts = Vec::with_capacity(n_rows);
        let mut mask = Vec::with_capacity(n_rows * n_cols);
        for (r, mismatches) in per_row.into_iter().enumerate() {
            let mismatches = mismatches?;
            self.background.charge_row_read(r, &mut self.ledger)?;
            self.ledger.charge(Category::Xnor, xnor_per_row);
            let count = mismatches.iter().filter(|&&m| m).count();
            if count >= self.config.threshold_pixels {
                self.turn_on_list.push(self.grid.center_rows()[r]);
            }
            row_counts.push(count);
            mask.extend(mismatches);
        }
        Ok(Detection {
            row_counts,
            change_mask: Mask::new(n_cols, n_rows, mask)?,
            changed_rows: self.turn_on_list.clone(),
        })
    }

    /// Drains the turn-on list, transferring the clipped pixel-row band
    /// `[row - reach, row + reach]` around each listed row. Returns the merged
    /// bands. An empty list is a no-op.
    pub fn sensor_mode(&mut self, frame: &Frame) -> Vec<RowSpan> {
        let reach = self.config.transfer_reach();
        let last = self.grid.height().saturating_sub(1);
        let mut spans = Vec::with_capacity(self.turn_on_list.len());
        while let Some(row) = self.turn_on_list.pop() {
            spans.push(RowSpan {
                start: row.saturating_sub(reach),
                end: (row + reach).min(last),
            });
        }
        let merged = merge_spans(spans);
        let rows: usize = merged.iter().map(RowSpan::len).sum();
        self.ledger.charge(
            Category::Transfer,
            (rows * frame.width()) as f64 * self.energy.e_transfer_pixel,
        );
        merged
    }

    /// Processes one frame.
    pub fn step(&mut self, frame: &Frame) -> Result<StepResult> {
        self.check_frame(frame)?;
        if !self.background.is_powered() {
            return Err(Error::PowerFault);
        }
        let before = *self.ledger.totals();

        let mut background_updated = false;
        if self.time >= self.config.time_tau {
            self.write_background(frame, self.config.update_changed_rows_only)?;
            self.time = 0;
            background_updated = true;
        }

        let detection = self.detect_events(frame)?;
        let sensor_mode_entered = !self.turn_on_list.is_empty();
        let transferred_rows = if sensor_mode_entered {
            self.time += 1;
            self.mode = Mode::Sensor;
            let spans = self.sensor_mode(frame);
            self.mode = Mode::EventDetection;
            spans
        } else {
            self.time = 0;
            Vec::new()
        };

        let energy = self.ledger.totals().since(&before);
        let period = self.energy.frame_period;
        self.ledger.record_frame_power(if period > 0.0 {
            energy.total() / period
        } else {
            0.0
        });
        self.clock += period;

        Ok(StepResult {
            frame_index: frame.index(),
            changed_rows: detection.changed_rows,
            row_change_counts: detection.row_counts,
            change_mask: detection.change_mask,
            sensor_mode_entered,
            background_updated,
            transferred_rows,
            energy,
        })
    }

    /// Steps through a whole sequence.
    pub fn run(&mut self, frames: &[Frame]) -> Result<Vec<StepResult>> {
        frames.iter().map(|f| self.step(f)).collect()
    }

    /// Power loss: volatile state (counter, turn-on list, mode) is lost. A
    /// volatile background is zeroed; the MRAM keeps its contents.
    pub fn power_down(&mut self) {
        self.background.power_off();
        if self.options.background == BackgroundKind::Volatile {
            self.background.wipe();
        }
        self.time = 0;
        self.turn_on_list.clear();
        self.mode = Mode::EventDetection;
    }

    pub fn power_up(&mut self) {
        self.background.power_on();
    }

    pub fn power_cycle(&mut self) {
        self.power_down();
        self.power_up();
    }

    /// Ages the MRAM to the current clock when retention decay is enabled.
    pub fn apply_retention<R: rand::RngCore + ?Sized>(&mut self, rng: &mut R) -> usize {
        if !self.options.retention_decay {
            return 0;
        }
        self.background
            .apply_retention(self.clock, rng, self.options.execution)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine(config: NeseConfig, frame: &Frame) -> Engine {
        Engine::init(config, frame, NvmParams::default(), EnergyModel::default()).unwrap()
    }

    #[test]
    fn compare_examples() {
        let p2 = Precision::new(2).unwrap();
        assert!(compare_codes(0b10, 0b10, p2));
        assert!(!compare_codes(0b10, 0b11, p2));
        for p in 1..=8 {
            let prec = Precision::new(p).unwrap();
            for x in 0..(1u16 << p) {
                assert!(compare_codes(x as u8, x as u8, prec));
            }
        }
    }

    #[test]
    fn codes_round_trip_through_bits() {
        let p = Precision::new(3).unwrap();
        let mut bits = Vec::new();
        encode_codes(&[5, 0, 7], p, &mut bits);
        assert_eq!(
            bits,
            [true, false, true, false, false, false, true, true, true]
        );
        let decoded: Vec<u8> = bits.chunks(3).map(decode_code).collect();
        assert_eq!(decoded, [5, 0, 7]);
    }

    #[test]
    fn init_geometry_and_energy() {
        let f = Frame::filled(600, 600, 0).unwrap();
        let e = engine(NeseConfig::new(3, 2, 1, 4).strict(), &f);
        assert_eq!(e.background().rows(), 200);
        assert_eq!(e.background().cols(), 400);
        assert!(e.background().bits().iter().all(|&b| !b));
        let per_bit = e.background().write_cost_per_bit();
        let expected = 40_000.0 * 2.0 * per_bit;
        assert!((e.ledger().get(Category::MramWrite) - expected).abs() < expected * 1e-12);
        assert_eq!(e.mode(), Mode::EventDetection);
        assert_eq!(e.time(), 0);
    }

    #[test]
    fn init_rejects_bad_config() {
        let f = Frame::filled(10, 10, 0).unwrap();
        let init = |c| Engine::init(c, &f, NvmParams::default(), EnergyModel::default());
        assert!(init(NeseConfig::new(4, 2, 1, 4)).is_err());
        assert!(init(NeseConfig::new(9, 2, 1, 4).strict()).is_err());
        assert!(init(NeseConfig::new(3, 5, 1, 4).strict()).is_err());
        assert!(init(NeseConfig::new(3, 5, 1, 4)).is_ok());
        assert!(init(NeseConfig::new(11, 2, 1, 4)).is_err());
        assert!(init(NeseConfig::new(3, 2, 1, 0)).is_err());
    }

    #[test]
    fn identical_frame_has_no_events() {
        let f = Frame::filled(30, 30, 77).unwrap();
        let mut e = engine(NeseConfig::new(3, 4, 1, 4), &f);
        let d = e.detect_events(&f).unwrap();
        assert!(d.row_counts.iter().all(|&c| c == 0));
        assert!(d.changed_rows.is_empty());
    }

    #[test]
    fn single_center_crossing_a_step() {
        let bg = Frame::filled(30, 30, 63).unwrap();
        let mut e = engine(NeseConfig::new(3, 2, 1, 4), &bg);
        let mut f = bg.clone();
        // 63 -> code 0, 64 -> code 1 at 2 bits
        f.set(7, 13, 64);
        let d = e.detect_events(&f).unwrap();
        assert_eq!(d.changed_rows, vec![7]);
        assert_eq!(d.change_mask.count_true(), 1);
        assert!(d.change_mask.get(2, 4));
        // a non-center pixel is never read
        let mut g = bg.clone();
        g.set(8, 13, 255);
        assert!(e.detect_events(&g).unwrap().changed_rows.is_empty());
    }

    #[test]
    fn threshold_never_lists_nothing() {
        let bg = Frame::filled(30, 30, 0).unwrap();
        let mut e = engine(NeseConfig::new(3, 2, THRESHOLD_NEVER, 4), &bg);
        let f = Frame::filled(30, 30, 255).unwrap();
        assert!(e.detect_events(&f).unwrap().changed_rows.is_empty());
    }

    #[test]
    fn sensor_mode_bands() {
        let bg = Frame::filled(30, 30, 0).unwrap();
        let mut e = engine(NeseConfig::new(3, 2, 1, 4), &bg);
        assert!(e.sensor_mode(&bg).is_empty());
        e.turn_on_list = vec![10];
        assert_eq!(e.sensor_mode(&bg), vec![RowSpan { start: 7, end: 13 }]);
        assert!(e.turn_on_list.is_empty());
        e.turn_on_list = vec![10, 13];
        assert_eq!(e.sensor_mode(&bg), vec![RowSpan { start: 7, end: 16 }]);
        e.turn_on_list = vec![1, 28];
        assert_eq!(
            e.sensor_mode(&bg),
            vec![RowSpan { start: 0, end: 4 }, RowSpan { start: 25, end: 29 }]
        );

        let mut half = engine(
            NeseConfig {
                transfer_half_box: true,
                ..NeseConfig::new(3, 2, 1, 4)
            },
            &bg,
        );
        half.turn_on_list = vec![10];
        assert_eq!(half.sensor_mode(&bg), vec![RowSpan { start: 9, end: 11 }]);
    }

    #[test]
    fn merge_spans_cases() {
        let s = |start, end| RowSpan { start, end };
        assert_eq!(merge_spans(vec![s(5, 8), s(0, 2), s(3, 4)]), vec![s(0, 8)]);
        assert_eq!(merge_spans(vec![s(0, 2), s(4, 6)]), vec![s(0, 2), s(4, 6)]);
        assert_eq!(merge_spans(vec![]), vec![]);
    }

    #[test]
    fn static_scene_is_a_fixed_point() {
        let f = Frame::filled(20, 20, 100).unwrap();
        let mut e = engine(NeseConfig::new(3, 3, 1, 2), &f);
        for i in 0..10 {
            let r = e.step(&f.clone().with_index(i)).unwrap();
            assert!(!r.sensor_mode_entered);
            assert!(!r.background_updated);
            assert!(r.transferred_rows.is_empty());
            assert_eq!(e.time(), 0);
        }
    }

    #[test]
    fn persistent_object_merges_after_time_tau() {
        let bg = Frame::filled(30, 30, 20).unwrap();
        let mut obj = bg.clone();
        for r in 9..18 {
            for c in 9..18 {
                obj.set(r, c, 220);
            }
        }
        let tau = 3;
        let mut e = engine(NeseConfig::new(3, 2, 1, tau), &bg);
        let k = 2;
        let frames: Vec<Frame> = (0..10)
            .map(|i| if i < k { bg.clone() } else { obj.clone() }.with_index(i))
            .collect();
        let results = e.run(&frames).unwrap();
        for r in &results {
            let i = r.frame_index;
            let in_burst = (k..k + tau as usize).contains(&i);
            assert_eq!(r.sensor_mode_entered, in_burst, "frame {i}");
            assert_eq!(r.background_updated, i == k + tau as usize, "frame {i}");
            assert_eq!(r.sensor_mode_entered, !r.changed_rows.is_empty());
        }
        assert!(e.turn_on_list().is_empty());
    }

    #[test]
    fn changed_rows_only_update_charges_changed_rows() {
        let bg = Frame::filled(30, 30, 0).unwrap();
        let mut obj = bg.clone();
        obj.set(4, 4, 255);
        obj.set(4, 7, 255);
        let config = NeseConfig {
            update_changed_rows_only: true,
            ..NeseConfig::new(3, 2, 1, 1)
        };
        let mut e = engine(config, &bg);
        let first = e.step(&obj.clone().with_index(0)).unwrap();
        assert!(first.sensor_mode_entered);
        assert_eq!(first.energy.mram_write, 0.0);
        let second = e.step(&obj.clone().with_index(1)).unwrap();
        assert!(second.background_updated);
        assert!(!second.sensor_mode_entered);
        // one changed center row: 10 centers x 2 bits
        let expected = 10.0 * 2.0 * e.background().write_cost_per_bit();
        assert!((second.energy.mram_write - expected).abs() < 1e-24);
    }

    #[test]
    fn power_down_resets_volatile_state() {
        let bg = Frame::filled(30, 30, 0).unwrap();
        let f = Frame::filled(30, 30, 255).unwrap();
        let mut e = engine(NeseConfig::new(3, 2, 1, 10), &bg);
        e.step(&f).unwrap();
        assert_eq!(e.time(), 1);
        let bits = e.background().packed_bits();
        e.power_down();
        assert!(matches!(e.step(&f), Err(Error::PowerFault)));
        e.power_up();
        assert_eq!(e.time(), 0);
        assert_eq!(e.background().packed_bits(), bits);

        let mut v = Engine::init_with(
            NeseConfig::new(3, 2, 1, 10),
            &f,
            NvmParams::default(),
            EnergyModel::default(),
            EngineOptions {
                background: BackgroundKind::Volatile,
                ..Default::default()
            },
        )
        .unwrap();
        v.power_cycle();
        assert!(v.background().bits().iter().all(|&b| !b));
    }

    #[test]
    fn dimension_mismatch() {
        let bg = Frame::filled(30, 30, 0).unwrap();
        let mut e = engine(NeseConfig::new(3, 2, 1, 4), &bg);
        assert!(matches!(
            e.step(&Frame::filled(31, 30, 0).unwrap()),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
