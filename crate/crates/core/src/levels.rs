//! Spin-orbit level structure, thermal visibility of the optical lines, and
//! analytic line shapes.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::exec::{map_slice, Execution};
use crate::spectrum::Spectrum;
use crate::units::{BOLTZMANN, PLANCK};

/// Excited-state splitting used when none is supplied. This is a literature
/// value for SnV, not a measured input of this toolkit; override it freely.
pub const DEFAULT_SNV_ES_SPLITTING_GHZ: f64 = 3000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStructure {
    /// Frequency of the C transition (lower excited -> lower ground level).
    pub zpl_center_thz: f64,
    pub gs_splitting_ghz: f64,
    pub es_splitting_ghz: f64,
    pub lifetime_ns: f64,
}

impl LevelStructure {
    pub fn new(zpl_center_thz: f64, gs_splitting_ghz: f64, es_splitting_ghz: f64, lifetime_ns: f64) -> Result<Self> {
        ensure_positive(zpl_center_thz, "ZPL centre")?;
        ensure_positive(gs_splitting_ghz, "ground-state splitting")?;
        ensure_positive(es_splitting_ghz, "excited-state splitting")?;
        ensure_positive(lifetime_ns, "lifetime")?;
        Ok(Self {
            zpl_center_thz,
            gs_splitting_ghz,
            es_splitting_ghz,
            lifetime_ns,
        })
    }

    /// Negatively charged SnV: C line at 484.130 THz, 821 GHz ground-state
    /// splitting, [`DEFAULT_SNV_ES_SPLITTING_GHZ`] and a 6 ns lifetime.
    pub fn snv_default() -> Self {
        Self {
            zpl_center_thz: 484.130,
            gs_splitting_ghz: 821.0,
            es_splitting_ghz: DEFAULT_SNV_ES_SPLITTING_GHZ,
            lifetime_ns: 6.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transition {
    A,
    B,
    C,
    D,
}

impl Transition {
    pub const ALL: [Transition; 4] = [Transition::A, Transition::B, Transition::C, Transition::D];

    pub fn from_upper_excited_level(self) -> bool {
        matches!(self, Transition::A | Transition::B)
    }

    pub fn to_lower_ground_level(self) -> bool {
        matches!(self, Transition::A | Transition::C)
    }
}

/// The four optical lines, stored as GHz offsets from the C line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transitions {
    pub c_thz: f64,
    pub offsets_ghz: [(Transition, f64); 4],
}

impl Transitions {
    pub fn offset_ghz(&self, t: Transition) -> f64 {
        self.offsets_ghz.iter().find(|(l, _)| *l == t).map(|&(_, o)| o).expect("all four lines present")
    }

    pub fn frequency_thz(&self, t: Transition) -> f64 {
        self.c_thz + self.offset_ghz(t) * 1e-3
    }
}

pub fn transition_frequencies(ls: &LevelStructure) -> Transitions {
    let gs = ls.gs_splitting_ghz;
    let es = ls.es_splitting_ghz;
    Transitions {
        c_thz: ls.zpl_center_thz,
        offsets_ghz: [
            (Transition::A, es),
            (Transition::B, es - gs),
            (Transition::C, 0.0),
            (Transition::D, -gs),
        ],
    }
}

/// Boltzmann occupation of the upper level of a two-level manifold.
pub fn thermal_population(splitting_ghz: f64, temperature_k: f64) -> Result<f64> {
    ensure_positive(splitting_ghz, "splitting")?;
    ensure_positive(temperature_k, "temperature")?;
    let x = PLANCK * splitting_ghz * 1e9 / (BOLTZMANN * temperature_k);
    Ok(1.0 / (1.0 + x.exp()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LineKind {
    #[default]
    Lorentzian,
    Gaussian,
}

/// A single line parameterised by its peak height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineShapeSpec {
    pub kind: LineKind,
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
}

impl LineShapeSpec {
    pub fn new(kind: LineKind, center: f64, fwhm: f64, amplitude: f64) -> Result<Self> {
        ensure_positive(fwhm, "FWHM")?;
        if !(amplitude >= 0.0) {
            return Err(Error::InvalidInput(format!("amplitude must be >= 0, got {amplitude}")));
        }
        Ok(Self {
            kind,
            center,
            fwhm,
            amplitude,
        })
    }

    /// Integral over the whole real line.
    pub fn area(&self) -> f64 {
        match self.kind {
            LineKind::Lorentzian => 0.5 * std::f64::consts::PI * self.amplitude * self.fwhm,
            LineKind::Gaussian => {
                self.amplitude * self.fwhm * (std::f64::consts::PI / (4.0 * std::f64::consts::LN_2)).sqrt()
            }
        }
    }
}

pub fn evaluate_line(spec: &LineShapeSpec, f: f64) -> f64 {
    line_value(spec.kind, spec.center, spec.fwhm, spec.amplitude, f)
}

#[inline]
pub(crate) fn line_value(kind: LineKind, center: f64, fwhm: f64, amplitude: f64, f: f64) -> f64 {
    let d = f - center;
    match kind {
        LineKind::Lorentzian => {
            let hw2 = 0.25 * fwhm * fwhm;
            amplitude * (hw2 / (d * d + hw2))
        }
        LineKind::Gaussian => amplitude * (-4.0 * std::f64::consts::LN_2 * d * d / (fwhm * fwhm)).exp(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlOptions {
    /// Fraction of each excited level's emission that ends on the lower
    /// ground level (A:B and C:D branching).
    pub lower_ground_branching: f64,
    /// Total peak-height budget shared by the four lines.
    pub total_amplitude: f64,
}

impl Default for PlOptions {
    fn default() -> Self {
        Self {
            lower_ground_branching: 0.5,
            total_amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlLine {
    pub transition: Transition,
    pub offset_ghz: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlSpectrum {
    /// Offsets are relative to the C line.
    pub spectrum: Spectrum,
    pub lines: Vec<PlLine>,
}

impl PlSpectrum {
    pub fn line(&self, t: Transition) -> &PlLine {
        self.lines.iter().find(|l| l.transition == t).expect("all four lines present")
    }
}

/// Zero-phonon PL spectrum: four Lorentzians with thermally weighted heights.
pub fn pl_spectrum(
    ls: &LevelStructure,
    temperature_k: f64,
    per_line_fwhm_ghz: f64,
    axis_ghz: &[f64],
    opts: PlOptions,
) -> Result<PlSpectrum> {
    if axis_ghz.is_empty() {
        return Err(Error::InvalidInput("frequency grid is empty".into()));
    }
    if axis_ghz.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("frequency grid must be sorted ascending".into()));
    }
    ensure_positive(per_line_fwhm_ghz, "per-line FWHM")?;
    let r = opts.lower_ground_branching;
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidInput(format!("branching fraction {r} outside [0, 1]")));
    }
    let upper = thermal_population(ls.es_splitting_ghz, temperature_k)?;
    let transitions = transition_frequencies(ls);
    let lines: Vec<PlLine> = transitions
        .offsets_ghz
        .iter()
        .map(|&(t, offset)| {
            let population = if t.from_upper_excited_level() { upper } else { 1.0 - upper };
            let branch = if t.to_lower_ground_level() { r } else { 1.0 - r };
            PlLine {
                transition: t,
                offset_ghz: offset,
                amplitude: opts.total_amplitude * population * branch,
            }
        })
        .collect();
    let counts = map_slice(axis_ghz, Execution::default(), |&f| {
        lines
            .iter()
            .map(|l| line_value(LineKind::Lorentzian, l.offset_ghz, per_line_fwhm_ghz, l.amplitude, f))
            .sum()
    });
    Ok(PlSpectrum {
        spectrum: Spectrum {
            reference_thz: Some(ls.zpl_center_thz),
            frequency_offset_ghz: axis_ghz.to_vec(),
            counts,
        },
        lines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::uniform_grid;
    use proptest::prelude::*;

    #[test]
    fn snv_transition_frequencies() {
        let t = transition_frequencies(&LevelStructure::snv_default());
        assert!((t.frequency_thz(Transition::C) - 484.130).abs() < 1e-12);
        assert!((t.frequency_thz(Transition::D) - 483.309).abs() < 1e-9);
        assert!((t.frequency_thz(Transition::A) - 487.130).abs() < 1e-9);
        assert!((t.frequency_thz(Transition::B) - 486.309).abs() < 1e-9);
        assert_eq!(t.offset_ghz(Transition::C) - t.offset_ghz(Transition::D), 821.0);
    }

    #[test]
    fn equal_splittings_put_b_on_c() {
        let ls = LevelStructure::new(484.13, 500.0, 500.0, 5.0).unwrap();
        let t = transition_frequencies(&ls);
        assert_eq!(t.offset_ghz(Transition::B), t.offset_ghz(Transition::C));
    }

    #[test]
    fn thermal_population_values() {
        let p = thermal_population(3000.0, 6.0).unwrap();
        assert!((p / 3.79e-11 - 1.0).abs() < 0.01, "{p}");
        let p = thermal_population(821.0, 6.0).unwrap();
        assert!((p - 1.40e-3).abs() < 0.01e-3, "{p}");
        let hot = thermal_population(821.0, 1e9).unwrap();
        assert!((hot - 0.5).abs() < 1e-6);
        assert!(thermal_population(821.0, 0.0).is_err());
        assert!(thermal_population(0.0, 4.0).is_err());
    }

    #[test]
    fn only_c_and_d_visible_at_6k() {
        let axis = uniform_grid(-1000.0, 3200.0, 1.0).unwrap();
        let pl = pl_spectrum(&LevelStructure::snv_default(), 6.0, 5.0, &axis, PlOptions::default()).unwrap();
        let ratio = pl.line(Transition::A).amplitude / pl.line(Transition::C).amplitude;
        assert!(ratio <= 1e-9, "{ratio}");
        assert_eq!(pl.line(Transition::C).offset_ghz - pl.line(Transition::D).offset_ghz, 821.0);
    }

    #[test]
    fn hot_limit_equalises_lines() {
        let axis = [0.0];
        let pl = pl_spectrum(&LevelStructure::snv_default(), 1e12, 5.0, &axis, PlOptions::default()).unwrap();
        let a = pl.line(Transition::A).amplitude;
        for t in Transition::ALL {
            assert!((pl.line(t).amplitude - a).abs() < 1e-6);
        }
    }

    #[test]
    fn pl_rejects_bad_grid() {
        let ls = LevelStructure::snv_default();
        assert!(pl_spectrum(&ls, 6.0, 5.0, &[], PlOptions::default()).is_err());
        assert!(pl_spectrum(&ls, 6.0, 5.0, &[1.0, 0.0], PlOptions::default()).is_err());
    }

    #[test]
    fn integrated_intensity_is_temperature_independent() {
        let ls = LevelStructure::snv_default();
        let axis = uniform_grid(-20_000.0, 20_000.0, 0.5).unwrap();
        let area = |t: f64| {
            let pl = pl_spectrum(&ls, t, 5.0, &axis, PlOptions::default()).unwrap();
            pl.spectrum.counts.iter().sum::<f64>() * 0.5
        };
        let cold = area(6.0);
        let hot = area(300.0);
        assert!((cold / hot - 1.0).abs() < 1e-3, "{cold} {hot}");
    }

    #[test]
    fn line_shape_values() {
        for kind in [LineKind::Lorentzian, LineKind::Gaussian] {
            let spec = LineShapeSpec::new(kind, 2.0, 0.4, 7.0).unwrap();
            assert_eq!(evaluate_line(&spec, 2.0), 7.0);
            assert!((evaluate_line(&spec, 2.2) - 3.5).abs() < 1e-12);
            assert!((evaluate_line(&spec, 1.8) - 3.5).abs() < 1e-12);
        }
        assert!(LineShapeSpec::new(LineKind::Gaussian, 0.0, 0.0, 1.0).is_err());
        assert!(LineShapeSpec::new(LineKind::Gaussian, 0.0, 1.0, -1.0).is_err());
    }

    // Substitution x = x0 + (G/2) tan(theta) maps the real line onto
    // (-pi/2, pi/2); midpoint rule there converges quickly.
    #[test]
    fn lorentzian_area_by_quadrature() {
        let spec = LineShapeSpec::new(LineKind::Lorentzian, 0.3, 0.032, 5.0).unwrap();
        let n = 200_000;
        let h = std::f64::consts::PI / n as f64;
        let hw = 0.5 * spec.fwhm;
        let integral: f64 = (0..n)
            .map(|i| {
                let theta = -std::f64::consts::FRAC_PI_2 + (i as f64 + 0.5) * h;
                let x = spec.center + hw * theta.tan();
                evaluate_line(&spec, x) * hw / theta.cos().powi(2) * h
            })
            .sum();
        assert!((integral / spec.area() - 1.0).abs() < 1e-9);
        assert!((spec.area() - std::f64::consts::FRAC_PI_2 * 5.0 * 0.032).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn population_is_monotone(s in 1.0f64..5000.0, t in 0.5f64..500.0) {
            let p = thermal_population(s, t).unwrap();
            prop_assert!(p > 0.0 && p < 0.5);
            prop_assert!(thermal_population(s, t * 1.1).unwrap() > p);
            prop_assert!(thermal_population(s * 1.1, t).unwrap() < p);
        }

        #[test]
        fn lines_symmetric_and_peaked(c in -5.0f64..5.0, w in 0.01f64..3.0, a in 0.0f64..100.0, d in 1e-3f64..10.0, gauss in any::<bool>()) {
            let kind = if gauss { LineKind::Gaussian } else { LineKind::Lorentzian };
            let spec = LineShapeSpec::new(kind, c, w, a).unwrap();
            let left = evaluate_line(&spec, c - d);
            let right = evaluate_line(&spec, c + d);
            prop_assert!((left - right).abs() <= 1e-12 * a.max(1.0));
            prop_assert!(evaluate_line(&spec, c) >= left);
        }
    }
}
