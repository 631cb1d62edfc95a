//! Multiply-accumulate cost models and run-time MAC instrumentation.
//!
//! Counts are in real multiply-accumulates: a complex MAC costs 4, scaling
//! a complex value by a real costs 2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-TF-unit cost of the neural direct-path estimator stage, reported for
/// context only and never folded into the linear-stage models.
pub const ESTIMATOR_MACS_PER_TF_UNIT: u64 = 2100;

pub const COMPLEX_MAC: u64 = 4;
pub const REAL_SCALE: u64 = 2;

/// Receives MAC counts from the filter kernels.
pub trait MacCounter {
    fn add(&mut self, macs: u64);
}

/// Counter that discards everything; compiles away in the hot path.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoCount;

impl MacCounter for NoCount {
    #[inline(always)]
    fn add(&mut self, _macs: u64) {}
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacTally {
    pub macs: u64,
    pub tf_units: u64,
}

impl MacCounter for MacTally {
    #[inline]
    fn add(&mut self, macs: u64) {
        self.macs += macs;
    }
}

impl MacTally {
    pub fn merge(&mut self, other: &MacTally) {
        self.macs += other.macs;
        self.tf_units += other.tf_units;
    }

    pub fn per_tf_unit(&self) -> f64 {
        if self.tf_units == 0 {
            0.0
        } else {
            self.macs as f64 / self.tf_units as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "algorithm")]
pub enum MacModel {
    FcpOnline { k: usize },
    KpFcp { p: usize, k1: usize, k2: usize },
}

impl MacModel {
    pub fn macs_per_tf_unit(&self) -> Result<u64> {
        match *self {
            MacModel::FcpOnline { k } => mac_fcp(k),
            MacModel::KpFcp { p, k1, k2 } => mac_kpfcp(p, k1, k2),
        }
    }
}

/// 16K^2 + 20K + 16.
pub fn mac_fcp(k: usize) -> Result<u64> {
    if k == 0 {
        return Err(Error::InvalidConfig("filter length must be at least 1".into()));
    }
    let k = k as u64;
    Ok(16 * k * k + 20 * k + 16)
}

/// 16P^2(K1^2 + K2^2) + 8P K1 K2 + 16P K1 + 20P K2 + 24.
pub fn mac_kpfcp(p: usize, k1: usize, k2: usize) -> Result<u64> {
    if p == 0 || k1 == 0 || k2 == 0 {
        return Err(Error::InvalidConfig(format!(
            "P, K1 and K2 must be at least 1, got ({p}, {k1}, {k2})"
        )));
    }
    let (p, k1, k2) = (p as u64, k1 as u64, k2 as u64);
    Ok(16 * p * p * (k1 * k1 + k2 * k2) + 8 * p * k1 * k2 + 16 * p * k1 + 20 * p * k2 + 24)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossover {
    /// Smallest order whose KP-FCP cost reaches the full-filter cost.
    At(usize),
    /// No order up to the search bound reaches parity.
    Never { searched_up_to: usize },
}

/// Searches P in 1..=min(k1, k2) + 1.
pub fn crossover(k1: usize, k2: usize) -> Result<Crossover> {
    let full = mac_fcp(k1 * k2)?;
    let bound = k1.min(k2) + 1;
    for p in 1..=bound {
        if mac_kpfcp(p, k1, k2)? >= full {
            return Ok(Crossover::At(p));
        }
    }
    Ok(Crossover::Never {
        searched_up_to: bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "P")]
    pub p: usize,
    pub macs_kpfcp: u64,
    pub macs_fcp: u64,
}

pub fn sweep_complexity(k1: usize, k2: usize, p_range: impl IntoIterator<Item = usize>) -> Result<Vec<SweepRow>> {
    let full = mac_fcp(k1 * k2)?;
    p_range
        .into_iter()
        .map(|p| {
            Ok(SweepRow {
                p,
                macs_kpfcp: mac_kpfcp(p, k1, k2)?,
                macs_fcp: full,
            })
        })
        .collect()
}
