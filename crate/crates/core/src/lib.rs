//! Near-sensor event detection on a subsampled, precision-limited pixel
//! array with a non-volatile (SOT-MRAM) background store.
//!
//! The pipeline reads only the center pixel of each `n x n` box, quantizes
//! it to 1-4 bits, and XNOR-compares it with the background bits held in
//! MRAM. Rows with enough mismatches switch the sensor into a high-power
//! mode that transfers the surrounding pixel rows. Steady changes are
//! merged into the background after `time_tau` consecutive event frames.
//!
//! Modules:
//!
//! * [`frame_io`]: frames, masks, binary PGM.
//! * [`scene_gen`]: synthetic scenes with ground truth.
//! * [`sensor_model`]: box grid, readout, quantization.
//! * [`nvm_store`]: MRAM array with retention decay and snapshots.
//! * [`engine`]: the detection / sensing state machine.
//! * [`baselines`]: full-resolution frame-difference methods.
//! * [`energy`]: power tables, energy ledger, intermittent supply.
//! * [`metrics`]: mask scoring and sweep reports.
//! * [`cli`]: the `nese` command-line tool.

// `!(x >= 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod energy;
pub mod engine;
pub mod error;
pub mod frame_io;
pub mod metrics;
pub mod nvm_store;
pub mod par;
pub mod scene_gen;
pub mod sensor_model;

pub use engine::{Engine, EngineOptions, NeseConfig, StepResult};
pub use error::{Error, Result};
pub use frame_io::{Frame, Mask};
pub use par::Execution;
