//! Sampled spectra and histograms.
//!
//! Frequencies are kept as GHz offsets from a reference frequency in THz so
//! that the absolute ~500 THz never has to be carried in a single value.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Spectrum {
    /// Absolute frequency (THz) that the offsets are measured from.
    pub reference_thz: Option<f64>,
    pub frequency_offset_ghz: Vec<f64>,
    pub counts: Vec<f64>,
}

impl Spectrum {
    pub fn new(reference_thz: Option<f64>, frequency_offset_ghz: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        if frequency_offset_ghz.len() != counts.len() {
            return Err(Error::InvalidInput(format!(
                "axis has {} samples but counts has {}",
                frequency_offset_ghz.len(),
                counts.len()
            )));
        }
        if let Some(i) = frequency_offset_ghz.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(format!("frequency axis not strictly ascending at sample {}", i + 1)));
        }
        Ok(Self {
            reference_thz,
            frequency_offset_ghz,
            counts,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Index and value of the largest sample.
    pub fn argmax(&self) -> Option<(usize, f64)> {
        self.counts
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (i, c)| match best {
                Some((_, b)) if b >= c => best,
                _ => Some((i, c)),
            })
    }
}

/// `start, start + step, ...` up to and including `stop` (within half a step
/// of rounding). Samples are computed as `start + i * step` to avoid drift.
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    ensure_positive(step, "grid step")?;
    if !(start.is_finite() && stop.is_finite()) || stop < start {
        return Err(Error::InvalidInput(format!("invalid grid window [{start}, {stop}]")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

/// Histogram of resonance frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramData {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl HistogramData {
    pub fn new(bin_edges: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if bin_edges.len() < 2 || counts.len() + 1 != bin_edges.len() {
            return Err(Error::InvalidInput("histogram needs counts.len() + 1 >= 2 edges".into()));
        }
        if bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("bin edges must be strictly ascending".into()));
        }
        Ok(Self { bin_edges, counts })
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// The histogram as a spectrum over bin centres, for peak fitting.
    pub fn to_spectrum(&self) -> Spectrum {
        Spectrum {
            reference_thz: None,
            frequency_offset_ghz: self.bin_centers(),
            counts: self.counts.iter().map(|&c| c as f64).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_endpoint() {
        let g = uniform_grid(-1.0, 1.0, 0.1).unwrap();
        assert_eq!(g.len(), 21);
        assert!((g[20] - 1.0).abs() < 1e-12);
        assert!(uniform_grid(0.0, 1.0, 0.0).is_err());
        assert!(uniform_grid(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn spectrum_rejects_unsorted_axis() {
        assert!(Spectrum::new(None, vec![0.0, 1.0, 0.5], vec![0.0; 3]).is_err());
        assert!(Spectrum::new(None, vec![0.0, 1.0], vec![0.0]).is_err());
        assert!(Spectrum::new(None, vec![], vec![]).is_ok());
    }

    #[test]
    fn argmax_prefers_first_of_ties() {
        let s = Spectrum::new(None, vec![0.0, 1.0, 2.0], vec![1.0, 3.0, 3.0]).unwrap();
        assert_eq!(s.argmax(), Some((1, 3.0)));
    }
}
