//! Energy accounting and the calibrated power tables.
//!
//! Two accounting views coexist:
//!
//! * The **metered** ledger, charged operation by operation while the engine
//!   runs: per-box pixel sensing, MRAM bit reads and writes, XNOR compares,
//!   and full-resolution row transfers in sensing mode.
//! * The **composite** per-frame energy from [`frame_energy`]: the measured
//!   whole-pipeline detection power (pixel + MRAM read + compare) times the
//!   frame period, plus the MRAM writes and transfers actually metered.
//!
//! The detection powers are measured values for box sizes 3/5/7 at 2 and 4
//! bits. 1- and 3-bit values are interpolated geometrically from the table's
//! own 2.2x-per-2-bits ratio and are always flagged as extrapolated.
//!
//! MRAM, XNOR and transfer per-operation energies are uncalibrated
//! order-of-magnitude placeholders.

mod harvest;
mod report;

pub use harvest::{
    constant_trace, periodic_trace, read_harvest_trace, simulate_intermittent, write_harvest_trace,
    FrameOutcome, HarvesterSpec, IntermittentReport, OffInterval, PICOJOULES_PER_JOULE,
};
pub use report::{energy_csv, EnergySummary};

use serde::{Deserialize, Serialize};

use crate::engine::{NeseConfig, StepResult};
use crate::error::{Error, Result};
use crate::sensor_model::BoxGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    PixelSense,
    MramRead,
    MramWrite,
    Xnor,
    Transfer,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::PixelSense,
        Category::MramRead,
        Category::MramWrite,
        Category::Xnor,
        Category::Transfer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::PixelSense => "pixel_sense",
            Category::MramRead => "mram_read",
            Category::MramWrite => "mram_write",
            Category::Xnor => "xnor",
            Category::Transfer => "transfer",
        }
    }
}

/// Joules per category.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTotals {
    pub pixel_sense: f64,
    pub mram_read: f64,
    pub mram_write: f64,
    pub xnor: f64,
    pub transfer: f64,
}

impl EnergyTotals {
    pub fn get(&self, cat: Category) -> f64 {
        match cat {
            Category::PixelSense => self.pixel_sense,
            Category::MramRead => self.mram_read,
            Category::MramWrite => self.mram_write,
            Category::Xnor => self.xnor,
            Category::Transfer => self.transfer,
        }
    }

    fn slot(&mut self, cat: Category) -> &mut f64 {
        match cat {
            Category::PixelSense => &mut self.pixel_sense,
            Category::MramRead => &mut self.mram_read,
            Category::MramWrite => &mut self.mram_write,
            Category::Xnor => &mut self.xnor,
            Category::Transfer => &mut self.transfer,
        }
    }

    pub fn total(&self) -> f64 {
        Category::ALL.iter().map(|&c| self.get(c)).sum()
    }

    /// Category-wise `self - earlier`.
    pub fn since(&self, earlier: &EnergyTotals) -> EnergyTotals {
        let mut out = EnergyTotals::default();
        for c in Category::ALL {
            *out.slot(c) = self.get(c) - earlier.get(c);
        }
        out
    }

    pub fn merge(&mut self, other: &EnergyTotals) {
        for c in Category::ALL {
            *self.slot(c) += other.get(c);
        }
    }
}

/// Cumulative metered energy plus per-frame power samples.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EnergyLedger {
    totals: EnergyTotals,
    frame_power: Vec<f64>,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `joules` to a category. Charges must be finite and non-negative,
    /// which keeps every total non-decreasing.
    pub fn charge(&mut self, cat: Category, joules: f64) {
        assert!(
            joules.is_finite() && joules >= 0.0,
            "invalid {} charge: {joules}",
            cat.name()
        );
        *self.totals.slot(cat) += joules;
    }

    pub fn totals(&self) -> &EnergyTotals {
        &self.totals
    }

    pub fn total(&self) -> f64 {
        self.totals.total()
    }

    pub fn get(&self, cat: Category) -> f64 {
        self.totals.get(cat)
    }

    pub fn record_frame_power(&mut self, watts: f64) {
        self.frame_power.push(watts);
    }

    pub fn frame_power(&self) -> &[f64] {
        &self.frame_power
    }

    /// Folds another ledger's totals and samples into this one.
    pub fn merge(&mut self, other: &EnergyLedger) {
        self.totals.merge(&other.totals);
        self.frame_power.extend_from_slice(&other.frame_power);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSensePower {
    pub box_size: usize,
    pub microwatts: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionPower {
    pub box_size: usize,
    pub precision: u8,
    pub milliwatts: f64,
}

/// A power value and whether it came from outside the measured points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLookup {
    pub watts: f64,
    pub extrapolated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerTable {
    /// Sensing power per box per frame.
    pub box_sense: Vec<BoxSensePower>,
    /// Whole-pipeline event-detection power.
    pub detection: Vec<DetectionPower>,
    /// Detection-power growth per +2 bits of ADC precision.
    pub precision_step_ratio: f64,
}

impl Default for PowerTable {
    fn default() -> Self {
        Self::measured()
    }
}

impl PowerTable {
    /// The measured calibration points.
    pub fn measured() -> Self {
        let bs = |box_size, microwatts| BoxSensePower {
            box_size,
            microwatts,
        };
        let dp = |box_size, precision, milliwatts| DetectionPower {
            box_size,
            precision,
            milliwatts,
        };
        Self {
            box_sense: vec![bs(3, 1.31), bs(5, 1.48), bs(7, 1.64)],
            detection: vec![
                dp(3, 2, 842.0),
                dp(5, 2, 561.3),
                dp(7, 2, 374.2),
                dp(3, 4, 1852.4),
                dp(5, 4, 1234.9),
                dp(7, 4, 823.2),
            ],
            precision_step_ratio: 2.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.precision_step_ratio > 0.0) {
            return Err(Error::invalid(
                "power_table.precision_step_ratio",
                "must be positive",
            ));
        }
        for b in &self.box_sense {
            if !(b.microwatts >= 0.0) {
                return Err(Error::invalid("power_table.box_sense", "negative power"));
            }
        }
        for d in &self.detection {
            if !(d.milliwatts >= 0.0) {
                return Err(Error::invalid("power_table.detection", "negative power"));
            }
        }
        Ok(())
    }

    fn measured_detection(&self, box_size: usize, precision: u8) -> Option<f64> {
        self.detection
            .iter()
            .find(|d| d.box_size == box_size && d.precision == precision)
            .map(|d| d.milliwatts / 1e3)
    }

    /// Per-box sensing power; errors for box sizes without a measurement.
    pub fn box_sense_power(&self, box_size: usize) -> Result<f64> {
        self.box_sense
            .iter()
            .find(|b| b.box_size == box_size)
            .map(|b| b.microwatts / 1e6)
            .ok_or_else(|| Error::Calibration(format!("box size {box_size} sensing power")))
    }

    /// Per-box sensing power, falling back to a least-squares line through
    /// the measured points for other box sizes (clamped at zero).
    pub fn box_sense_power_or_fit(&self, box_size: usize) -> Result<PowerLookup> {
        if let Ok(watts) = self.box_sense_power(box_size) {
            return Ok(PowerLookup {
                watts,
                extrapolated: false,
            });
        }
        let pts: Vec<(f64, f64)> = self
            .box_sense
            .iter()
            .map(|b| (b.box_size as f64, b.microwatts / 1e6))
            .collect();
        let watts = match pts.len() {
            0 => return Err(Error::Calibration("any box sensing power".into())),
            1 => pts[0].1,
            _ => {
                let n = pts.len() as f64;
                let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
                let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
                let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
                let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
                let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
                (my + slope * (box_size as f64 - mx)).max(0.0)
            }
        };
        Ok(PowerLookup {
            watts,
            extrapolated: true,
        })
    }

    /// Whole-pipeline detection power for a configuration.
    ///
    /// Measured points are returned verbatim. Other precisions scale the
    /// nearest measured point geometrically by `ratio^(delta_bits / 2)`.
    pub fn detection_power(&self, box_size: usize, precision: u8) -> Result<PowerLookup> {
        if !(1..=8).contains(&precision) {
            return Err(Error::invalid(
                "precision",
                format!("{precision} outside 1..=8"),
            ));
        }
        if let Some(watts) = self.measured_detection(box_size, precision) {
            return Ok(PowerLookup {
                watts,
                extrapolated: false,
            });
        }
        let anchor = self
            .detection
            .iter()
            .filter(|d| d.box_size == box_size)
            .min_by_key(|d| ((d.precision as i32 - precision as i32).abs(), d.precision))
            .ok_or_else(|| Error::Calibration(format!("box size {box_size} detection power")))?;
        let steps = (precision as f64 - anchor.precision as f64) / 2.0;
        Ok(PowerLookup {
            watts: anchor.milliwatts / 1e3 * self.precision_step_ratio.powf(steps),
            extrapolated: true,
        })
    }

    /// `P(n, 4) / P(n, 2)` for each box size that has both points.
    pub fn precision_ratios(&self) -> Vec<(usize, f64)> {
        let mut sizes: Vec<usize> = self.detection.iter().map(|d| d.box_size).collect();
        sizes.sort_unstable();
        sizes.dedup();
        sizes
            .into_iter()
            .filter_map(|n| {
                let p2 = self.measured_detection(n, 2)?;
                let p4 = self.measured_detection(n, 4)?;
                Some((n, p4 / p2))
            })
            .collect()
    }
}

/// Detection power from the measured table.
pub fn detection_power(box_size: usize, precision: u8) -> Result<PowerLookup> {
    PowerTable::measured().detection_power(box_size, precision)
}

/// Per-box sensing power from the measured table.
pub fn box_sense_power(box_size: usize) -> Result<f64> {
    PowerTable::measured().box_sense_power(box_size)
}

/// Number of XNOR bit-compares per frame: one per precision bit per center.
pub fn xnor_count(box_size: usize, precision: u8, width: usize, height: usize) -> Result<usize> {
    let grid = BoxGrid::new(width, height, box_size)?;
    Ok(precision as usize * grid.len())
}

/// Per-operation constants and the frame period used by the metered ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyModel {
    pub power_table: PowerTable,
    /// Seconds per frame. Not a measured value: defaults to 30 fps.
    pub frame_period: f64,
    /// Joules per XNOR bit-compare (uncalibrated).
    pub e_xnor_bit: f64,
    /// Joules per full-resolution pixel sent in sensing mode (uncalibrated).
    pub e_transfer_pixel: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            power_table: PowerTable::measured(),
            frame_period: 1.0 / 30.0,
            e_xnor_bit: 10e-15,
            e_transfer_pixel: 100e-12,
        }
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<()> {
        self.power_table.validate()?;
        if !(self.frame_period >= 0.0) || !self.frame_period.is_finite() {
            return Err(Error::invalid(
                "frame_period",
                "must be finite and non-negative",
            ));
        }
        if !(self.e_xnor_bit >= 0.0) {
            return Err(Error::invalid("e_xnor_bit", "must be non-negative"));
        }
        if !(self.e_transfer_pixel >= 0.0) {
            return Err(Error::invalid("e_transfer_pixel", "must be non-negative"));
        }
        Ok(())
    }
}

/// Composite energy of one processed frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FrameEnergy {
    pub detection: f64,
    pub mram_write: f64,
    pub transfer: f64,
    pub total: f64,
    pub extrapolated: bool,
}

/// Detection power times the frame period, plus the MRAM write and transfer
/// energy metered for this step.
pub fn frame_energy(
    result: &StepResult,
    config: &NeseConfig,
    power_table: &PowerTable,
    frame_period: f64,
) -> Result<FrameEnergy> {
    let lookup = power_table.detection_power(config.box_size, config.precision)?;
    let detection = lookup.watts * frame_period;
    let mram_write = result.energy.mram_write;
    let transfer = result.energy.transfer;
    Ok(FrameEnergy {
        detection,
        mram_write,
        transfer,
        total: detection + mram_write + transfer,
        extrapolated: lookup.extrapolated,
    })
}
