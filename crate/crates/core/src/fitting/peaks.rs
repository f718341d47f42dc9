//! Multi-peak line-shape models, peak detection and the fits built on them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lm::{nlls_solve, FitResult, LeastSquaresProblem, LmOptions};
use crate::error::{ensure_positive, Error, Result};
use crate::levels::{line_value, LineKind};
use crate::spectrum::Spectrum;

/// Minimum number of samples per free parameter.
pub const SAMPLES_PER_PARAMETER: usize = 5;
const SMOOTHING_WINDOW: usize = 5;
const BASELINE_PERCENTILE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakModel {
    pub kind: LineKind,
    pub peaks: Vec<Peak>,
    pub baseline: Option<f64>,
}

impl PeakModel {
    pub fn evaluate(&self, x: f64) -> f64 {
        self.baseline.unwrap_or(0.0)
            + self
                .peaks
                .iter()
                .map(|p| line_value(self.kind, p.center, p.fwhm, p.amplitude, x))
                .sum::<f64>()
    }

    pub fn parameter_count(&self) -> usize {
        3 * self.peaks.len() + usize::from(self.baseline.is_some())
    }

    fn to_params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.peaks.iter().flat_map(|pk| [pk.center, pk.fwhm, pk.amplitude]).collect();
        p.extend(self.baseline);
        p
    }

    fn from_params(kind: LineKind, params: &[f64], baseline: bool) -> Self {
        let peak_count = (params.len() - usize::from(baseline)) / 3;
        Self {
            kind,
            peaks: (0..peak_count)
                .map(|i| Peak {
                    center: params[3 * i],
                    fwhm: params[3 * i + 1],
                    amplitude: params[3 * i + 2],
                })
                .collect(),
            baseline: baseline.then(|| params[3 * peak_count]),
        }
    }
}

struct PeakProblem<'a> {
    kind: LineKind,
    baseline: bool,
    x: &'a [f64],
    y: &'a [f64],
}

impl PeakProblem<'_> {
    fn peak_count(&self, params: &[f64]) -> usize {
        (params.len() - usize::from(self.baseline)) / 3
    }
}

impl LeastSquaresProblem for PeakProblem<'_> {
    fn residual_count(&self) -> usize {
        self.x.len()
    }

    fn residuals(&self, params: &[f64], out: &mut [f64]) {
        let k = self.peak_count(params);
        let base = if self.baseline { params[3 * k] } else { 0.0 };
        for ((o, &x), &y) in out.iter_mut().zip(self.x).zip(self.y) {
            let mut v = base;
            for p in params[..3 * k].chunks_exact(3) {
                v += line_value(self.kind, p[0], p[1], p[2], x);
            }
            *o = v - y;
        }
    }

    fn jacobian(&self, params: &[f64], jac: &mut DMatrix<f64>) {
        let k = self.peak_count(params);
        let ln2x4 = 4.0 * std::f64::consts::LN_2;
        for (i, &x) in self.x.iter().enumerate() {
            for (j, p) in params[..3 * k].chunks_exact(3).enumerate() {
                let (c, w, a) = (p[0], p[1], p[2]);
                let d = x - c;
                let (dc, dw, da) = match self.kind {
                    LineKind::Lorentzian => {
                        let h = 0.5 * w;
                        let q = d * d + h * h;
                        let shape = h * h / q;
                        (a * h * h * 2.0 * d / (q * q), a * h * d * d / (q * q), shape)
                    }
                    LineKind::Gaussian => {
                        let e = (-ln2x4 * d * d / (w * w)).exp();
                        (a * e * 2.0 * ln2x4 * d / (w * w), a * e * 2.0 * ln2x4 * d * d / (w * w * w), e)
                    }
                };
                jac[(i, 3 * j)] = dc;
                jac[(i, 3 * j + 1)] = dw;
                jac[(i, 3 * j + 2)] = da;
            }
            if self.baseline {
                jac[(i, 3 * k)] = 1.0;
            }
        }
    }
}

/// How `fit_peaks` obtains its starting point.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// Smoothed local-maxima detection with this height threshold above the
    /// baseline estimate.
    Auto { threshold: f64 },
    Explicit(PeakModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakFit {
    pub result: FitResult,
    pub model: PeakModel,
}

/// Peak candidate from smoothed local-maximum detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub index: usize,
    pub center: f64,
    /// Smoothed height above the baseline estimate.
    pub height: f64,
    pub fwhm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub baseline: f64,
    /// Sorted by descending height.
    pub candidates: Vec<Candidate>,
}

/// Centred moving average; windows are truncated at the ends.
pub fn moving_average(y: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..y.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(y.len());
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Finds local maxima of the smoothed data that stand at least `threshold`
/// above the 10th-percentile baseline. When two maxima lie within one FWHM
/// of each other only the taller survives.
pub fn detect_peaks(x: &[f64], y: &[f64], threshold: f64) -> Detection {
    if y.is_empty() {
        return Detection {
            baseline: 0.0,
            candidates: Vec::new(),
        };
    }
    let s = moving_average(y, SMOOTHING_WINDOW);
    let baseline = percentile(&s, BASELINE_PERCENTILE);
    let n = s.len();
    let mut raw = Vec::new();
    let mut i = 0;
    while i < n {
        // Treat a plateau as one maximum located at its middle.
        let mut j = i;
        while j + 1 < n && s[j + 1] == s[i] {
            j += 1;
        }
        let left_lower = i == 0 || s[i - 1] < s[i];
        let right_lower = j + 1 == n || s[j + 1] < s[i];
        let height = s[i] - baseline;
        if left_lower && right_lower && height >= threshold && height > 0.0 {
            let mid = (i + j) / 2;
            raw.push(Candidate {
                index: mid,
                center: x[mid],
                height,
                fwhm: half_height_width(x, &s, mid, baseline),
            });
        }
        i = j + 1;
    }
    raw.sort_by(|a, b| b.height.total_cmp(&a.height).then(a.index.cmp(&b.index)));
    let mut kept: Vec<Candidate> = Vec::new();
    for c in raw {
        if kept.iter().all(|k| (k.center - c.center).abs() >= k.fwhm.max(c.fwhm)) {
            kept.push(c);
        }
    }
    Detection {
        baseline,
        candidates: kept,
    }
}

fn half_height_width(x: &[f64], s: &[f64], peak: usize, baseline: f64) -> f64 {
    let half = baseline + 0.5 * (s[peak] - baseline);
    let crossing = |range: &mut dyn Iterator<Item = usize>, step_back: isize| -> Option<f64> {
        for i in range {
            if s[i] < half {
                let inner = (i as isize + step_back) as usize;
                let t = (s[inner] - half) / (s[inner] - s[i]);
                return Some(x[inner] + t * (x[i] - x[inner]));
            }
        }
        None
    };
    let left = crossing(&mut (0..peak).rev(), 1);
    let right = crossing(&mut (peak + 1..s.len()), -1);
    let spacing = if x.len() > 1 { (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64 } else { 1.0 };
    let width = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (x[peak] - l),
        (None, Some(r)) => 2.0 * (r - x[peak]),
        (None, None) => x[x.len() - 1] - x[0],
    };
    width.max(spacing)
}

fn initial_model(
    x: &[f64],
    y: &[f64],
    kind: LineKind,
    peak_count: usize,
    baseline: bool,
    threshold: f64,
) -> Result<PeakModel> {
    let det = detect_peaks(x, y, threshold);
    if det.candidates.len() < peak_count {
        return Err(Error::TooFewPeaks {
            found: det.candidates.len(),
            requested: peak_count,
        });
    }
    Ok(PeakModel {
        kind,
        peaks: det.candidates[..peak_count]
            .iter()
            .map(|c| Peak {
                center: c.center,
                fwhm: c.fwhm,
                amplitude: c.height,
            })
            .collect(),
        baseline: baseline.then_some(det.baseline),
    })
}

fn sort_by_center(kind: LineKind, result: &mut FitResult, baseline: bool) -> PeakModel {
    let k = (result.parameters.len() - usize::from(baseline)) / 3;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| result.parameters[3 * a].total_cmp(&result.parameters[3 * b]));
    let reorder = |v: &[f64]| {
        let mut out: Vec<f64> = order.iter().flat_map(|&i| v[3 * i..3 * i + 3].to_vec()).collect();
        if baseline {
            out.push(v[3 * k]);
        }
        out
    };
    result.parameters = reorder(&result.parameters);
    result.standard_errors = reorder(&result.standard_errors);
    PeakModel::from_params(kind, &result.parameters, baseline)
}

fn fit_model(x: &[f64], y: &[f64], init: &PeakModel, max_iterations: usize) -> Result<PeakFit> {
    let n_params = init.parameter_count();
    if x.len() < SAMPLES_PER_PARAMETER * n_params {
        return Err(Error::InsufficientData(format!(
            "{} samples for {} free parameters (need {} per parameter)",
            x.len(),
            n_params,
            SAMPLES_PER_PARAMETER
        )));
    }
    for p in &init.peaks {
        ensure_positive(p.fwhm, "initial FWHM")?;
    }
    // Lines narrower than the sample spacing are not resolvable.
    let min_width = ((x[x.len() - 1] - x[0]) / (x.len() - 1) as f64).max(f64::MIN_POSITIVE);
    let mut lower = vec![f64::NEG_INFINITY; n_params];
    for i in 0..init.peaks.len() {
        lower[3 * i + 1] = min_width;
        lower[3 * i + 2] = 0.0;
    }
    let opts = LmOptions {
        max_iterations,
        lower: Some(lower),
        ..LmOptions::default()
    };
    let baseline = init.baseline.is_some();
    let problem = PeakProblem {
        kind: init.kind,
        baseline,
        x,
        y,
    };
    let mut result = nlls_solve(&problem, &init.to_params(), &opts)?;
    let model = sort_by_center(init.kind, &mut result, baseline);
    Ok(PeakFit { result, model })
}

/// Fits `peak_count` peaks of `kind` (plus an optional constant baseline)
/// to a spectrum. Fitted peaks come back ordered by ascending centre, with
/// widths in the axis unit.
pub fn fit_peaks(
    spectrum: &Spectrum,
    kind: LineKind,
    peak_count: usize,
    baseline: bool,
    init: &InitialGuess,
) -> Result<PeakFit> {
    fit_peaks_with_limit(spectrum, kind, peak_count, baseline, init, LmOptions::default().max_iterations)
}

/// [`fit_peaks`] with a custom iteration cap for the solver.
pub fn fit_peaks_with_limit(
    spectrum: &Spectrum,
    kind: LineKind,
    peak_count: usize,
    baseline: bool,
    init: &InitialGuess,
    max_iterations: usize,
) -> Result<PeakFit> {
    if peak_count == 0 {
        return Err(Error::InvalidInput("peak_count must be at least 1".into()));
    }
    let x = &spectrum.frequency_offset_ghz;
    let y = &spectrum.counts;
    let params = 3 * peak_count + usize::from(baseline);
    if x.len() < SAMPLES_PER_PARAMETER * params {
        return Err(Error::InsufficientData(format!(
            "{} samples for {params} free parameters (need {SAMPLES_PER_PARAMETER} per parameter)",
            x.len()
        )));
    }
    let model = match init {
        InitialGuess::Auto { threshold } => initial_model(x, y, kind, peak_count, baseline, *threshold)?,
        InitialGuess::Explicit(m) => {
            if m.peaks.len() != peak_count || m.baseline.is_some() != baseline {
                return Err(Error::InvalidInput("explicit initial model does not match the requested shape".into()));
            }
            PeakModel { kind, ..m.clone() }
        }
    };
    fit_model(x, y, &model, max_iterations)
}

/// A default detection threshold: 10% of the smoothed dynamic range.
pub fn default_threshold(spectrum: &Spectrum) -> f64 {
    if spectrum.is_empty() {
        return 0.0;
    }
    let s = moving_average(&spectrum.counts, SMOOTHING_WINDOW);
    let base = percentile(&s, BASELINE_PERCENTILE);
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    0.1 * (max - base)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub center_ghz: f64,
    pub fwhm_mhz: f64,
    pub amplitude: f64,
}

/// Lists resonances in a PLE scan.
///
/// Without `peak_count`, detected maxima whose ±3 FWHM windows overlap are
/// grouped and each group gets its own local Lorentzian + baseline fit.
/// Lines closer than about one FWHM produce a single maximum and are
/// reported as one feature. With `peak_count`, one global fit with that many
/// lines is run; if detection found fewer maxima, the broadest line of a
/// preliminary fit is split in two until the count is reached. Peaks whose fitted height falls
/// below `threshold` are dropped.
pub fn extract_resonances(spectrum: &Spectrum, threshold: f64, peak_count: Option<usize>) -> Result<Vec<Resonance>> {
    ensure_positive(threshold, "detection threshold")?;
    let x = &spectrum.frequency_offset_ghz;
    let y = &spectrum.counts;
    let det = detect_peaks(x, y, threshold);
    if det.candidates.is_empty() {
        return Ok(Vec::new());
    }
    let mut found: Vec<Peak> = match peak_count {
        Some(k) => {
            let mut seeds: Vec<Peak> = det
                .candidates
                .iter()
                .take(k)
                .map(|c| Peak {
                    center: c.center,
                    fwhm: c.fwhm,
                    amplitude: c.height,
                })
                .collect();
            while seeds.len() < k {
                // Refit first so the widest line is centred on the unresolved group.
                seeds = fit_or_seed(
                    x,
                    y,
                    &PeakModel {
                        kind: LineKind::Lorentzian,
                        peaks: seeds,
                        baseline: Some(det.baseline),
                    },
                );
                let (i, widest) = seeds
                    .iter()
                    .copied()
                    .enumerate()
                    .max_by(|a, b| a.1.fwhm.total_cmp(&b.1.fwhm))
                    .expect("at least one seed");
                let quarter = 0.25 * widest.fwhm;
                seeds[i] = Peak {
                    center: widest.center - quarter,
                    fwhm: 2.0 * quarter,
                    amplitude: 0.6 * widest.amplitude,
                };
                seeds.push(Peak {
                    center: widest.center + quarter,
                    fwhm: 2.0 * quarter,
                    amplitude: 0.6 * widest.amplitude,
                });
            }
            let init = PeakModel {
                kind: LineKind::Lorentzian,
                peaks: seeds,
                baseline: Some(det.baseline),
            };
            fit_or_seed(x, y, &init)
        }
        None => {
            let mut cands = det.candidates.clone();
            cands.sort_by(|a, b| a.center.total_cmp(&b.center));
            let mut groups: Vec<Vec<Candidate>> = Vec::new();
            for c in cands {
                match groups.last_mut() {
                    Some(g) if g.last().is_some_and(|p| c.center - 3.0 * c.fwhm <= p.center + 3.0 * p.fwhm) => g.push(c),
                    _ => groups.push(vec![c]),
                }
            }
            groups
                .iter()
                .flat_map(|g| {
                    let lo = g.iter().map(|c| c.center - 3.0 * c.fwhm).fold(f64::INFINITY, f64::min);
                    let hi = g.iter().map(|c| c.center + 3.0 * c.fwhm).fold(f64::NEG_INFINITY, f64::max);
                    let (a, b) = window_indices(x, lo, hi, SAMPLES_PER_PARAMETER * (3 * g.len() + 1));
                    let init = PeakModel {
                        kind: LineKind::Lorentzian,
                        peaks: g
                            .iter()
                            .map(|c| Peak {
                                center: c.center,
                                fwhm: c.fwhm,
                                amplitude: c.height,
                            })
                            .collect(),
                        baseline: Some(det.baseline),
                    };
                    fit_or_seed(&x[a..b], &y[a..b], &init)
                })
                .collect()
        }
    };
    found.retain(|p| p.amplitude >= threshold);
    found.sort_by(|a, b| a.center.total_cmp(&b.center));
    Ok(found
        .into_iter()
        .map(|p| Resonance {
            center_ghz: p.center,
            fwhm_mhz: p.fwhm * 1e3,
            amplitude: p.amplitude,
        })
        .collect())
}

// Index range covering [lo, hi], widened symmetrically to at least `min_len` samples.
fn window_indices(x: &[f64], lo: f64, hi: f64, min_len: usize) -> (usize, usize) {
    let mut a = x.partition_point(|&v| v < lo);
    let mut b = x.partition_point(|&v| v <= hi);
    while b - a < min_len && (a > 0 || b < x.len()) {
        a = a.saturating_sub(1);
        b = (b + 1).min(x.len());
    }
    (a, b)
}

fn fit_or_seed(x: &[f64], y: &[f64], init: &PeakModel) -> Vec<Peak> {
    match fit_model(x, y, init, LmOptions::default().max_iterations) {
        Ok(fit) => fit.model.peaks,
        Err(_) => init.peaks.clone(),
    }
}
