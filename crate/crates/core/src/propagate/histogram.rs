//! Per-band energy binned by propagation delay.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};

pub const DEFAULT_BIN_WIDTH: f64 = 1e-3;
pub const DEFAULT_LENGTH: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnergyHistogram {
    /// Band centre in Hz.
    pub band: f64,
    /// Bin width in seconds.
    pub bin_width: f64,
    pub bins: Vec<f64>,
}

impl EnergyHistogram {
    /// Empty histogram covering `length` seconds.
    pub fn new(band: f64, bin_width: f64, length: f64) -> Result<Self> {
        if !(bin_width > 0.0) || !(length >= bin_width) || !length.is_finite() {
            return Err(Error::invalid("need 0 < bin_width <= length"));
        }
        let n = (length / bin_width).round() as usize;
        Ok(EnergyHistogram {
            band,
            bin_width,
            bins: vec![0.0; n],
        })
    }

    pub fn length(&self) -> f64 {
        self.bins.len() as f64 * self.bin_width
    }

    /// Bin for a delay, or `None` past the end.
    pub fn bin_of(&self, delay: f64) -> Option<usize> {
        let i = (delay / self.bin_width).floor();
        (i >= 0.0 && (i as usize) < self.bins.len()).then_some(i as usize)
    }

    /// Adds `energy` at `delay` seconds. Late arrivals are dropped.
    pub fn deposit(&mut self, delay: f64, energy: f64) {
        debug_assert!(energy >= 0.0);
        if let Some(i) = self.bin_of(delay) {
            self.bins[i] += energy;
        }
    }

    pub fn total(&self) -> f64 {
        self.bins.iter().sum()
    }

    /// Bin-wise sum with a histogram of the same band and layout.
    pub fn merge(&mut self, other: &EnergyHistogram) -> Result<()> {
        if other.band != self.band || other.bin_width != self.bin_width || other.bins.len() != self.bins.len() {
            return Err(Error::invalid("histogram layouts differ"));
        }
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
        Ok(())
    }

    /// Scales every bin by `s`.
    pub fn scale(&mut self, s: f64) {
        for b in &mut self.bins {
            *b *= s;
        }
    }
}

/// `band,bin_index,energy` rows for all histograms.
pub fn histograms_csv(hists: &[EnergyHistogram]) -> String {
    let mut s = String::from("band,bin_index,energy\n");
    for h in hists {
        for (i, e) in h.bins.iter().enumerate() {
            let _ = writeln!(s, "{},{},{:e}", h.band, i, e);
        }
    }
    s
}
