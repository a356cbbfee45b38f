//! SOT-MRAM background store.
//!
//! Cells hold one bit each, keep their last write time, and decay with an
//! exponential waiting time of mean `tau = tau0 * exp(barrier)`, the barrier
//! being expressed in units of kT. Write energy scales linearly with the
//! barrier, anchored at a per-bit cost for a 40 kT cell.
//!
//! Contents survive [`MramArray::power_cycle`]; accessing the array while it
//! is powered off is a [`Error::PowerFault`].

use std::fs;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{Category, EnergyLedger};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Reference barrier for `e_write_bit_40kt`.
pub const REFERENCE_BARRIER: f64 = 40.0;

pub const SNAPSHOT_MAGIC: &[u8; 9] = b"NESE-NVM1";

/// Per-bit access energies. Defaults are uncalibrated placeholders.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NvmEnergyParams {
    pub e_read_bit: f64,
    pub e_write_bit_40kt: f64,
    pub p_mram_read: f64,
}

impl Default for NvmEnergyParams {
    fn default() -> Self {
        Self {
            e_read_bit: 0.1e-12,
            e_write_bit_40kt: 2e-12,
            p_mram_read: 10e-6,
        }
    }
}

impl NvmEnergyParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("e_read_bit", self.e_read_bit),
            ("e_write_bit_40kt", self.e_write_bit_40kt),
            ("p_mram_read", self.p_mram_read),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("{v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Cell technology: barrier height (kT), attempt period, energies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NvmParams {
    pub barrier: f64,
    pub tau0: f64,
    #[serde(flatten)]
    pub energy: NvmEnergyParams,
}

impl Default for NvmParams {
    fn default() -> Self {
        Self {
            barrier: 20.0,
            tau0: 1e-9,
            energy: NvmEnergyParams::default(),
        }
    }
}

impl NvmParams {
    /// 20 kT cells with `tau0` chosen so retention is one hour.
    pub fn one_hour_20kt() -> Self {
        Self {
            barrier: 20.0,
            tau0: 7.42e-6,
            energy: NvmEnergyParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.barrier > 0.0) {
            return Err(Error::invalid(
                "barrier",
                format!("{} must be positive", self.barrier),
            ));
        }
        if !(self.tau0 > 0.0) || !self.tau0.is_finite() {
            return Err(Error::invalid(
                "tau0",
                format!("{} must be positive", self.tau0),
            ));
        }
        self.energy.validate()
    }

    pub fn retention_time(&self) -> f64 {
        retention_time(self.barrier, self.tau0)
    }
}

/// Write energy per bit, linear in the barrier: `e40 * barrier / 40`.
pub fn write_energy_per_bit(barrier: f64, params: &NvmEnergyParams) -> f64 {
    params.e_write_bit_40kt * (barrier / REFERENCE_BARRIER)
}

/// Mean retention time `tau0 * exp(barrier)` in seconds.
pub fn retention_time(barrier: f64, tau0: f64) -> f64 {
    tau0 * barrier.exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MramArray {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
    last_write: Vec<f64>,
    params: NvmParams,
    powered: bool,
    // Row currently held in the comparator's operand register; volatile.
    latched_row: Option<usize>,
}

impl MramArray {
    /// An all-zero array written at time 0, powered on.
    pub fn new(rows: usize, cols: usize, params: NvmParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            rows,
            cols,
            bits: vec![false; rows * cols],
            last_write: vec![0.0; rows * cols],
            params,
            powered: true,
            latched_row: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn params(&self) -> &NvmParams {
        &self.params
    }

    pub fn barrier(&self) -> f64 {
        self.params.barrier
    }

    pub fn tau0(&self) -> f64 {
        self.params.tau0
    }

    pub fn retention_time(&self) -> f64 {
        self.params.retention_time()
    }

    pub fn is_powered(&self) -> bool {
        self.powered
    }

    pub fn latched_row(&self) -> Option<usize> {
        self.latched_row
    }

    /// All stored bits, row-major. Reporting view; not metered.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn last_write(&self) -> &[f64] {
        &self.last_write
    }

    /// Bits packed LSB-first, row-major; for byte-level comparisons.
    pub fn packed_bits(&self) -> Vec<u8> {
        pack_bits(&self.bits)
    }

    pub fn read_cost(&self) -> f64 {
        self.cols as f64 * self.params.energy.e_read_bit
    }

    pub fn write_cost_per_bit(&self) -> f64 {
        write_energy_per_bit(self.params.barrier, &self.params.energy)
    }

    fn check_access(&self, row: usize) -> Result<()> {
        if !self.powered {
            return Err(Error::PowerFault);
        }
        if row >= self.rows {
            return Err(Error::RowOutOfRange {
                row,
                rows: self.rows,
            });
        }
        Ok(())
    }

    /// Row contents without metering or latching. Used by the parallel
    /// comparison path, which charges reads separately via
    /// [`MramArray::charge_row_read`].
    pub fn peek_row(&self, row: usize) -> Result<&[bool]> {
        self.check_access(row)?;
        Ok(&self.bits[row * self.cols..(row + 1) * self.cols])
    }

    /// Charges one metered row read.
    pub fn charge_row_read(&mut self, row: usize, ledger: &mut EnergyLedger) -> Result<()> {
        self.check_access(row)?;
        ledger.charge(Category::MramRead, self.read_cost());
        self.latched_row = Some(row);
        Ok(())
    }

    /// Senses a row into the comparator register. Non-destructive.
    pub fn read_row(&mut self, row: usize, ledger: &mut EnergyLedger) -> Result<&[bool]> {
        self.charge_row_read(row, ledger)?;
        Ok(&self.bits[row * self.cols..(row + 1) * self.cols])
    }

    pub fn write_bits(
        &mut self,
        row: usize,
        bits: &[bool],
        now: f64,
        ledger: &mut EnergyLedger,
    ) -> Result<()> {
        self.check_access(row)?;
        if bits.len() != self.cols {
            return Err(Error::invalid(
                "bits",
                format!("row needs {} bits, got {}", self.cols, bits.len()),
            ));
        }
        let range = row * self.cols..(row + 1) * self.cols;
        self.bits[range.clone()].copy_from_slice(bits);
        self.last_write[range].iter_mut().for_each(|t| *t = now);
        ledger.charge(
            Category::MramWrite,
            self.cols as f64 * self.write_cost_per_bit(),
        );
        Ok(())
    }

    /// Ages every cell to `now` and returns the number of flipped bits.
    ///
    /// Each cell flips with probability `1 - exp(-(now - t)/tau)`, where `t`
    /// is the cell's decay reference time. Afterwards every examined cell's
    /// reference becomes `now` (the waiting time is memoryless, so surviving
    /// cells restart their clock). Rows draw from independent ChaCha streams
    /// keyed by one seed taken from `rng`, so the outcome does not depend on
    /// the execution policy.
    pub fn apply_retention<R: RngCore + ?Sized>(
        &mut self,
        now: f64,
        rng: &mut R,
        exec: Execution,
    ) -> usize {
        let tau = self.retention_time();
        let seed = rng.next_u64();
        let cols = self.cols.max(1);
        let mut flips_per_row = vec![0usize; self.rows];
        {
            let mut rows: Vec<(&mut [bool], &mut [f64], &mut usize)> = self
                .bits
                .chunks_mut(cols)
                .zip(self.last_write.chunks_mut(cols))
                .zip(flips_per_row.iter_mut())
                .map(|((b, t), f)| (b, t, f))
                .collect();
            par::for_each_chunk_mut(exec, &mut rows, 1, |row_idx, chunk| {
                let (bits, times, flips) = &mut chunk[0];
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(row_idx as u64);
                for (bit, t) in bits.iter_mut().zip(times.iter_mut()) {
                    let elapsed = (now - *t).max(0.0);
                    let p = -(-elapsed / tau).exp_m1();
                    let u: f64 = rng.gen();
                    if u < p {
                        *bit = !*bit;
                        **flips += 1;
                    }
                    *t = now.max(*t);
                }
            });
        }
        flips_per_row.iter().sum()
    }

    pub fn power_off(&mut self) {
        self.powered = false;
        self.latched_row = None;
    }

    pub fn power_on(&mut self) {
        self.powered = true;
    }

    /// Off then on. Stored bits and timestamps are untouched; the volatile
    /// comparator latch is cleared.
    pub fn power_cycle(&mut self) {
        self.power_off();
        self.power_on();
    }

    /// Zeroes every bit without metering. Models a volatile store losing its
    /// contents; never called on the non-volatile path.
    pub fn wipe(&mut self) {
        self.bits.iter_mut().for_each(|b| *b = false);
    }

    pub fn to_snapshot_bytes(&self) -> Vec<u8> {
        let n = self.rows * self.cols;
        let mut out = Vec::with_capacity(9 + 32 + n.div_ceil(8) + 8 * n);
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.cols as u64).to_le_bytes());
        out.extend_from_slice(&self.params.barrier.to_le_bytes());
        out.extend_from_slice(&self.params.tau0.to_le_bytes());
        out.extend_from_slice(&pack_bits(&self.bits));
        for t in &self.last_write {
            out.extend_from_slice(&t.to_le_bytes());
        }
        out
    }

    /// Restores an array from snapshot bytes; energy constants are not part
    /// of the snapshot and come from `energy`.
    pub fn from_snapshot_bytes(bytes: &[u8], energy: NvmEnergyParams) -> Result<Self> {
        let mut cur = bytes;
        let mut take = |n: usize, what: &str| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(Error::Snapshot(format!("truncated while reading {what}")));
            }
            let (head, tail) = cur.split_at(n);
            cur = tail;
            Ok(head)
        };
        if take(9, "magic")? != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let u64_at = |b: &[u8]| u64::from_le_bytes(b.try_into().unwrap());
        let f64_at = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());
        let rows = usize::try_from(u64_at(take(8, "rows")?))
            .map_err(|_| Error::Snapshot("rows overflow".into()))?;
        let cols = usize::try_from(u64_at(take(8, "cols")?))
            .map_err(|_| Error::Snapshot("cols overflow".into()))?;
        let barrier = f64_at(take(8, "barrier")?);
        let tau0 = f64_at(take(8, "tau0")?);
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Snapshot("dimensions overflow".into()))?;
        let packed = take(n.div_ceil(8), "bits")?;
        let bits = unpack_bits(packed, n);
        let times = take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Snapshot("dimensions overflow".into()))?,
            "last_write",
        )?;
        let last_write = times.chunks_exact(8).map(f64_at).collect();
        if !cur.is_empty() {
            return Err(Error::Snapshot(format!("{} trailing bytes", cur.len())));
        }
        let params = NvmParams {
            barrier,
            tau0,
            energy,
        };
        params.validate()?;
        Ok(Self {
            rows,
            cols,
            bits,
            last_write,
            params,
            powered: true,
            latched_row: None,
        })
    }

    pub fn save_snapshot(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_snapshot_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load_snapshot(path: impl AsRef<Path>, energy: NvmEnergyParams) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_snapshot_bytes(&bytes, energy)
    }
}

fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
        out[i / 8] |= 1 << (i % 8);
    }
    out
}

fn unpack_bits(packed: &[u8], n: usize) -> Vec<bool> {
    (0..n).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect()
}
