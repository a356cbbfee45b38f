//! Per-frame energy CSV and the JSON run summary.

use serde::Serialize;

use super::{EnergyTotals, FrameEnergy, PowerLookup};
use crate::engine::StepResult;
use crate::error::{Error, Result};

/// Long-format CSV, columns `frame_index,category,joules`.
///
/// `detection` is the composite detection energy; `pixel_sense`,
/// `mram_read` and `xnor` are its metered counterparts; `mram_write` and
/// `transfer` are metered and shared by both views.
pub fn energy_csv<'a>(
    frames: impl IntoIterator<Item = (&'a StepResult, &'a FrameEnergy)>,
) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(["frame_index", "category", "joules"])
        .map_err(csv_err)?;
    for (step, fe) in frames {
        let idx = step.frame_index.to_string();
        let rows = [
            ("detection", fe.detection),
            ("pixel_sense", step.energy.pixel_sense),
            ("mram_read", step.energy.mram_read),
            ("xnor", step.energy.xnor),
            ("mram_write", step.energy.mram_write),
            ("transfer", step.energy.transfer),
        ];
        for (cat, j) in rows {
            w.write_record([idx.as_str(), cat, &format!("{j:e}")])
                .map_err(csv_err)?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CompositeTotals {
    pub detection: f64,
    pub mram_write: f64,
    pub transfer: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergySummary {
    pub frames_processed: usize,
    pub composite: CompositeTotals,
    /// Metered totals for processed frames (initial background write
    /// excluded).
    pub metered: EnergyTotals,
    /// Metered energy of writing the initial background.
    pub init_write_joules: f64,
    pub detection_power_watts: f64,
    pub detection_power_extrapolated: bool,
    pub sense_power_extrapolated: bool,
    /// Per-operation constants that are placeholders, not measurements.
    pub uncalibrated: Vec<&'static str>,
}

impl EnergySummary {
    pub fn new<'a>(
        frames: impl IntoIterator<Item = (&'a StepResult, &'a FrameEnergy)>,
        init_write_joules: f64,
        detection_power: PowerLookup,
        sense_power_extrapolated: bool,
    ) -> Self {
        let mut composite = CompositeTotals::default();
        let mut metered = EnergyTotals::default();
        let mut n = 0;
        let mut extrapolated = detection_power.extrapolated;
        for (step, fe) in frames {
            n += 1;
            composite.detection += fe.detection;
            composite.mram_write += fe.mram_write;
            composite.transfer += fe.transfer;
            composite.total += fe.total;
            metered.merge(&step.energy);
            extrapolated |= fe.extrapolated;
        }
        Self {
            frames_processed: n,
            composite,
            metered,
            init_write_joules,
            detection_power_watts: detection_power.watts,
            detection_power_extrapolated: extrapolated,
            sense_power_extrapolated,
            uncalibrated: vec!["mram_read", "mram_write", "xnor", "transfer"],
        }
    }
}
