//! Spectral-coincidence statistics, identical-emitter pairing and the
//! confocal depth correction.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::rng::SimRng;
use crate::units::FWHM_PER_SIGMA;

/// How a coincidence window is applied to the detuning of two emitters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowConvention {
    /// `|f1 - f2| <= window`.
    #[default]
    Full,
    /// `|f1 - f2| <= window / 2`.
    Half,
}

impl WindowConvention {
    fn half_width_mhz(self, window_mhz: f64) -> f64 {
        match self {
            WindowConvention::Full => window_mhz,
            WindowConvention::Half => 0.5 * window_mhz,
        }
    }
}

fn check_window(inhom_fwhm_ghz: f64, window_mhz: f64) -> Result<()> {
    ensure_positive(inhom_fwhm_ghz, "inhomogeneous FWHM")?;
    if !(window_mhz >= 0.0) {
        return Err(Error::InvalidInput(format!("window must be >= 0, got {window_mhz}")));
    }
    Ok(())
}

/// Probability that two independent draws from a Gaussian of FWHM
/// `inhom_fwhm_ghz` lie within the window of each other. The difference of
/// the draws has standard deviation `sqrt(2) sigma`, giving
/// `erf(w / (2 sigma))`.
pub fn coincidence_probability_analytic(inhom_fwhm_ghz: f64, window_mhz: f64, convention: WindowConvention) -> Result<f64> {
    check_window(inhom_fwhm_ghz, window_mhz)?;
    let sigma = inhom_fwhm_ghz / FWHM_PER_SIGMA;
    let w = convention.half_width_mhz(window_mhz) * 1e-3;
    if w.is_infinite() {
        return Ok(1.0);
    }
    Ok(libm::erf(w / (2.0 * sigma)))
}

pub const MIN_MC_TRIALS: u64 = 1000;
/// Trials are split over this many partitions, each with its own substream
/// (see [`SimRng::substream`]); counts are summed exactly, so the estimate
/// does not depend on the execution strategy.
pub const MC_PARTITIONS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub probability: f64,
    pub standard_error: f64,
    pub trials: u64,
    pub hits: u64,
}

/// Monte Carlo counterpart of [`coincidence_probability_analytic`].
/// Detunings strictly inside the window count as hits, so a zero window
/// always gives zero.
pub fn coincidence_probability_mc(
    inhom_fwhm_ghz: f64,
    window_mhz: f64,
    trials: u64,
    seed: u64,
    convention: WindowConvention,
    exec: Execution,
) -> Result<McEstimate> {
    check_window(inhom_fwhm_ghz, window_mhz)?;
    if trials < MIN_MC_TRIALS {
        return Err(Error::InvalidInput(format!("need at least {MIN_MC_TRIALS} trials, got {trials}")));
    }
    let sigma = inhom_fwhm_ghz / FWHM_PER_SIGMA;
    let w = convention.half_width_mhz(window_mhz) * 1e-3;
    let per = trials / MC_PARTITIONS;
    let extra = trials % MC_PARTITIONS;
    let counts = map_indexed(MC_PARTITIONS as usize, exec, |i| {
        let i = i as u64;
        let n = per + u64::from(i < extra);
        let mut rng = SimRng::substream(seed, i);
        let mut hits = 0u64;
        for _ in 0..n {
            let a = rng.normal(0.0, sigma);
            let b = rng.normal(0.0, sigma);
            if (a - b).abs() < w {
                hits += 1;
            }
        }
        hits
    });
    let hits: u64 = counts.iter().sum();
    let p = hits as f64 / trials as f64;
    Ok(McEstimate {
        probability: p,
        standard_error: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
        hits,
    })
}

/// Normalised overlap of two unit-area Lorentzians:
/// `2 sqrt(g1 g2) G / (G^2 + d^2)` with half-widths `g`, `G = g1 + g2` and
/// centre separation `d`. Centres and widths must share a unit.
pub fn lorentzian_overlap(center1: f64, fwhm1: f64, center2: f64, fwhm2: f64) -> Result<f64> {
    ensure_positive(fwhm1, "FWHM 1")?;
    ensure_positive(fwhm2, "FWHM 2")?;
    ensure_finite(center1, "centre 1")?;
    ensure_finite(center2, "centre 2")?;
    let (g1, g2) = (0.5 * fwhm1, 0.5 * fwhm2);
    let g = g1 + g2;
    let d = center1 - center2;
    Ok((2.0 * (g1 * g2).sqrt() * g / (g * g + d * d)).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub i: usize,
    pub j: usize,
    pub detuning_mhz: f64,
    pub width_i_mhz: f64,
    pub width_j_mhz: f64,
    pub overlap_metric: f64,
}

/// All pairs detuned by at most `max_detuning_mhz`, closest first.
/// `emitters` holds `(centre in GHz, FWHM in MHz)`.
pub fn find_identical_pairs(emitters: &[(f64, f64)], max_detuning_mhz: f64) -> Result<Vec<PairReport>> {
    if !(max_detuning_mhz >= 0.0) {
        return Err(Error::InvalidInput("max detuning must be >= 0".into()));
    }
    let mut pairs = Vec::new();
    for i in 0..emitters.len() {
        for j in i + 1..emitters.len() {
            let (ci, wi) = emitters[i];
            let (cj, wj) = emitters[j];
            let detuning = (ci - cj).abs() * 1e3;
            if detuning <= max_detuning_mhz {
                pairs.push(PairReport {
                    i,
                    j,
                    detuning_mhz: detuning,
                    width_i_mhz: wi,
                    width_j_mhz: wj,
                    overlap_metric: lorentzian_overlap(ci * 1e3, wi, cj * 1e3, wj)?,
                });
            }
        }
    }
    pairs.sort_by(|a, b| a.detuning_mhz.total_cmp(&b.detuning_mhz).then((a.i, a.j).cmp(&(b.i, b.j))));
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthCorrection {
    pub factor: f64,
    pub actual_depth_um: f64,
}

/// Focal-shift correction for focusing from a medium of index `n_outside`
/// into one of index `n_inside`, using the marginal ray at `0.5 NA`.
pub fn depth_correction(numerical_aperture: f64, n_outside: f64, n_inside: f64, observed_depth_um: f64) -> Result<DepthCorrection> {
    ensure_positive(numerical_aperture, "numerical aperture")?;
    ensure_positive(n_outside, "outer refractive index")?;
    ensure_positive(n_inside, "inner refractive index")?;
    ensure_finite(observed_depth_um, "observed depth")?;
    let s = 0.5 * numerical_aperture;
    if s >= n_outside || s >= n_inside {
        return Err(Error::InvalidInput(format!(
            "0.5 NA = {s} must be below both refractive indices ({n_outside}, {n_inside})"
        )));
    }
    let factor = (s / n_outside).asin().tan() / (s / n_inside).asin().tan();
    Ok(DepthCorrection {
        factor,
        actual_depth_um: factor * observed_depth_um,
    })
}
