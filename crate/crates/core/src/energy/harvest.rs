//! Energy-harvesting supply and intermittent execution.
//!
//! The storage element is tracked in integer picojoules so that the
//! per-timestep balance `accepted - consumed = stored_after - stored_before`
//! holds exactly.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{frame_energy, FrameEnergy};
use crate::engine::{Engine, StepResult};
use crate::error::{Error, Result};
use crate::frame_io::Frame;

pub const PICOJOULES_PER_JOULE: f64 = 1e12;

fn to_pj(joules: f64) -> u64 {
    (joules * PICOJOULES_PER_JOULE).round() as u64
}

fn to_joules(pj: u64) -> f64 {
    pj as f64 / PICOJOULES_PER_JOULE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarvesterSpec {
    /// Storage capacity in joules.
    pub capacity: f64,
    /// Joules offered to the store at each frame timestep. Timesteps past
    /// the end of the trace harvest nothing.
    pub harvest_trace: Vec<f64>,
    /// Stored energy needed to (re)start after a brown-out.
    pub power_on_threshold: f64,
    pub frame_period: f64,
    /// Stored energy at the start of the run.
    #[serde(default)]
    pub initial_charge: f64,
}

impl HarvesterSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.capacity > 0.0) || !self.capacity.is_finite() {
            return Err(Error::invalid("capacity", "must be positive and finite"));
        }
        if !(self.power_on_threshold > 0.0 && self.power_on_threshold <= self.capacity) {
            return Err(Error::invalid(
                "power_on_threshold",
                format!(
                    "{} must lie in (0, capacity = {}]",
                    self.power_on_threshold, self.capacity
                ),
            ));
        }
        if !(self.frame_period >= 0.0) || !self.frame_period.is_finite() {
            return Err(Error::invalid(
                "frame_period",
                "must be finite and non-negative",
            ));
        }
        if !(0.0..=self.capacity).contains(&self.initial_charge) {
            return Err(Error::invalid(
                "initial_charge",
                "must lie in [0, capacity]",
            ));
        }
        if let Some((i, v)) = self
            .harvest_trace
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::invalid(
                "harvest_trace",
                format!("entry {i} = {v} must be finite and non-negative"),
            ));
        }
        Ok(())
    }
}

pub fn constant_trace(joules: f64, len: usize) -> Vec<f64> {
    vec![joules; len]
}

/// `joules` during the first `on_steps` of every `period` steps, else 0.
pub fn periodic_trace(joules: f64, period: usize, on_steps: usize, len: usize) -> Vec<f64> {
    let period = period.max(1);
    (0..len)
        .map(|t| if t % period < on_steps { joules } else { 0.0 })
        .collect()
}

/// Reads a harvest trace: a `joules` header, then one non-negative decimal
/// per line.
pub fn read_harvest_trace(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let trace_err = |line: usize, reason: String| Error::Trace {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| trace_err(1, e.to_string()))?
        .clone();
    if headers.len() != 1 || &headers[0] != "joules" {
        return Err(trace_err(
            1,
            format!("expected header `joules`, found `{}`", headers.as_slice()),
        ));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| trace_err(line, e.to_string()))?;
        let field = rec.get(0).unwrap_or("");
        let v: f64 = field
            .parse()
            .map_err(|_| trace_err(line, format!("`{field}` is not a number")))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(trace_err(line, format!("{v} must be non-negative")));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn write_harvest_trace(trace: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("joules\n");
    for v in trace {
        text.push_str(&format!("{v}\n"));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// A maximal run of frames during which the device was off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OffInterval {
    pub start: usize,
    /// Inclusive.
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameOutcome {
    pub index: usize,
    pub processed: bool,
    /// Energy accepted into the store this timestep.
    pub accepted_pj: u64,
    /// Energy offered but not stored because the store was full.
    pub spilled_pj: u64,
    pub consumed_pj: u64,
    pub stored_before_pj: u64,
    pub stored_after_pj: u64,
    /// Retention flips applied when powering up at this timestep.
    pub retention_flips: usize,
    #[serde(skip)]
    pub result: Option<StepResult>,
    pub energy: Option<FrameEnergy>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntermittentReport {
    pub frames: Vec<FrameOutcome>,
    /// Brown-outs (on -> off transitions).
    pub power_cycles: usize,
    pub off_intervals: Vec<OffInterval>,
    pub skipped_frames: Vec<usize>,
    pub retention_flips: usize,
    pub harvested_joules: f64,
    pub consumed_joules: f64,
    pub spilled_joules: f64,
    pub final_stored_joules: f64,
}

impl IntermittentReport {
    pub fn results(&self) -> impl Iterator<Item = &StepResult> {
        self.frames.iter().filter_map(|f| f.result.as_ref())
    }
}

/// Runs `frames` on an energy-harvesting supply.
///
/// At each timestep the harvest for that step enters the store (clamped at
/// capacity). An off device powers up once the store reaches the power-on
/// threshold, aging the MRAM for the time it spent off when the engine has
/// retention decay enabled. A powered device processes the frame if the
/// store covers that frame's composite energy; otherwise it browns out: the
/// frame is skipped, the engine loses its volatile state, and the MRAM is
/// powered down with its contents intact.
pub fn simulate_intermittent(
    engine: &mut Engine,
    frames: &[Frame],
    harvester: &HarvesterSpec,
    seed: u64,
) -> Result<IntermittentReport> {
    harvester.validate()?;
    if frames.is_empty() {
        return Err(Error::invalid("frames", "sequence is empty"));
    }
    let period = engine.energy_model().frame_period;
    if (period - harvester.frame_period).abs() > 1e-12 * period.abs().max(1.0) {
        return Err(Error::invalid(
            "frame_period",
            format!(
                "harvester period {} differs from engine period {period}",
                harvester.frame_period
            ),
        ));
    }
    let table = engine.energy_model().power_table.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let capacity = to_pj(harvester.capacity);
    let threshold = to_pj(harvester.power_on_threshold);
    let mut stored = to_pj(harvester.initial_charge);
    let mut on = stored >= threshold;
    if !on {
        engine.power_down();
    }

    let mut outcomes = Vec::with_capacity(frames.len());
    let mut off_intervals = Vec::new();
    let mut off_since: Option<usize> = if on { None } else { Some(0) };
    let mut skipped = Vec::new();
    let mut power_cycles = 0;
    let mut retention_total = 0;
    let (mut harvested, mut consumed_total, mut spilled_total) = (0u64, 0u64, 0u64);

    for (t, frame) in frames.iter().enumerate() {
        let stored_before = stored;
        let offered = to_pj(harvester.harvest_trace.get(t).copied().unwrap_or(0.0));
        let accepted = offered.min(capacity - stored);
        stored += accepted;
        harvested += accepted;
        spilled_total += offered - accepted;

        let mut flips = 0;
        if !on && stored >= threshold {
            engine.power_up();
            flips = engine.apply_retention(&mut rng);
            retention_total += flips;
            on = true;
            if let Some(start) = off_since.take() {
                if t > start {
                    off_intervals.push(OffInterval { start, end: t - 1 });
                }
            }
        }

        let mut consumed = 0;
        let mut result = None;
        let mut energy = None;
        if on {
            let mut trial = engine.clone();
            let r = trial.step(frame)?;
            let fe = frame_energy(&r, trial.config(), &table, period)?;
            let demand = to_pj(fe.total);
            if demand <= stored {
                *engine = trial;
                stored -= demand;
                consumed = demand;
                result = Some(r);
                energy = Some(fe);
            } else {
                engine.power_down();
                on = false;
                power_cycles += 1;
                off_since = Some(t);
            }
        }
        if result.is_none() {
            engine.advance_clock(period);
            skipped.push(t);
        }
        consumed_total += consumed;

        outcomes.push(FrameOutcome {
            index: frame.index(),
            processed: result.is_some(),
            accepted_pj: accepted,
            spilled_pj: offered - accepted,
            consumed_pj: consumed,
            stored_before_pj: stored_before,
            stored_after_pj: stored,
            retention_flips: flips,
            result,
            energy,
        });
    }
    if let Some(start) = off_since {
        off_intervals.push(OffInterval {
            start,
            end: frames.len() - 1,
        });
    }

    Ok(IntermittentReport {
        frames: outcomes,
        power_cycles,
        off_intervals,
        skipped_frames: skipped,
        retention_flips: retention_total,
        harvested_joules: to_joules(harvested),
        consumed_joules: to_joules(consumed_total),
        spilled_joules: to_joules(spilled_total),
        final_stored_joules: to_joules(stored),
    })
}
