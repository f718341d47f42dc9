//! Quasi-local vibrational model of the impurity atom.
//!
//! The impurity sits in a harmonic well with one axial (A2u) and one doubly
//! degenerate transverse (Eu) mode, in both the electronic ground and excited
//! state. The zero-point energy difference between the two states depends on
//! the impurity mass as `1/sqrt(m)`, which is what produces the isotope shift
//! of the zero-phonon line.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{ensure_positive, Error, Result};
use crate::units::{AtomicMass, ForceConstant, ELEMENTARY_CHARGE, HBAR, PLANCK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElectronicState {
    Ground,
    Excited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    A2u,
    Eu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VibrationalModel {
    pub k_a2u_ground: ForceConstant,
    pub k_eu_ground: ForceConstant,
    pub k_a2u_excited: ForceConstant,
    pub k_eu_excited: ForceConstant,
    pub reference_mass: AtomicMass,
}

/// Force constants (Ha/Bohr^2) of the built-in SnV dataset, as
/// `(mode, state, k)`.
pub const SNV_FORCE_CONSTANTS: [(Mode, ElectronicState, f64); 4] = [
    (Mode::A2u, ElectronicState::Ground, 0.317_201),
    (Mode::Eu, ElectronicState::Ground, 0.418_695),
    (Mode::A2u, ElectronicState::Excited, 0.386_091),
    (Mode::Eu, ElectronicState::Excited, 0.435_863),
];

/// Mode energies (meV) published alongside the built-in force constants.
pub const SNV_REPORTED_MODE_ENERGIES: [(Mode, ElectronicState, f64); 4] = [
    (Mode::A2u, ElectronicState::Ground, 32.1),
    (Mode::Eu, ElectronicState::Ground, 37.7),
    (Mode::A2u, ElectronicState::Excited, 35.9),
    (Mode::Eu, ElectronicState::Excited, 38.4),
];

impl VibrationalModel {
    pub fn new(
        k_a2u_ground: ForceConstant,
        k_eu_ground: ForceConstant,
        k_a2u_excited: ForceConstant,
        k_eu_excited: ForceConstant,
        reference_mass: AtomicMass,
    ) -> Result<Self> {
        for (k, what) in [
            (k_a2u_ground, "k_a2u_ground"),
            (k_eu_ground, "k_eu_ground"),
            (k_a2u_excited, "k_a2u_excited"),
            (k_eu_excited, "k_eu_excited"),
        ] {
            ensure_positive(k.value, what)?;
        }
        ensure_positive(reference_mass.atomic_mass_u, "reference mass")?;
        Ok(Self {
            k_a2u_ground,
            k_eu_ground,
            k_a2u_excited,
            k_eu_excited,
            reference_mass,
        })
    }

    /// The built-in SnV model, referenced to 119Sn.
    pub fn snv_table1() -> Self {
        let k = |mode, state| {
            let (_, _, v) = SNV_FORCE_CONSTANTS
                .iter()
                .find(|(m, s, _)| *m == mode && *s == state)
                .copied()
                .expect("dataset covers all modes");
            ForceConstant::hartree_per_bohr2(v)
        };
        let reference = IsotopeTable::tin()
            .mass(119)
            .expect("119Sn is in the built-in table");
        Self {
            k_a2u_ground: k(Mode::A2u, ElectronicState::Ground),
            k_eu_ground: k(Mode::Eu, ElectronicState::Ground),
            k_a2u_excited: k(Mode::A2u, ElectronicState::Excited),
            k_eu_excited: k(Mode::Eu, ElectronicState::Excited),
            reference_mass: reference,
        }
    }

    pub fn force_constant(&self, mode: Mode, state: ElectronicState) -> ForceConstant {
        match (mode, state) {
            (Mode::A2u, ElectronicState::Ground) => self.k_a2u_ground,
            (Mode::Eu, ElectronicState::Ground) => self.k_eu_ground,
            (Mode::A2u, ElectronicState::Excited) => self.k_a2u_excited,
            (Mode::Eu, ElectronicState::Excited) => self.k_eu_excited,
        }
    }

    // sqrt(k_A2u) + 2 sqrt(k_Eu) in SI, for one electronic state.
    fn root_stiffness(&self, state: ElectronicState) -> f64 {
        self.force_constant(Mode::A2u, state).si_value().sqrt()
            + 2.0 * self.force_constant(Mode::Eu, state).si_value().sqrt()
    }

    /// True when the excited state is stiffer than the ground state, so that
    /// lighter isotopes emit at higher energy.
    pub fn is_blue_shifting(&self) -> bool {
        self.root_stiffness(ElectronicState::Excited) > self.root_stiffness(ElectronicState::Ground)
    }

    /// Loads the four force constants from a `mode,state,k_hartree_per_bohr2` CSV.
    pub fn from_csv(path: &Path, reference_mass: AtomicMass) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            mode: Mode,
            state: ElectronicState,
            k_hartree_per_bohr2: f64,
        }

        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        check_header(path, &mut reader, &["mode", "state", "k_hartree_per_bohr2"])?;
        let mut slots: [Option<ForceConstant>; 4] = [None; 4];
        for record in reader.deserialize::<Row>() {
            let row = record.map_err(|e| csv_error(path, e))?;
            let slot = match (row.mode, row.state) {
                (Mode::A2u, ElectronicState::Ground) => 0,
                (Mode::Eu, ElectronicState::Ground) => 1,
                (Mode::A2u, ElectronicState::Excited) => 2,
                (Mode::Eu, ElectronicState::Excited) => 3,
            };
            slots[slot] = Some(ForceConstant::hartree_per_bohr2(row.k_hartree_per_bohr2));
        }
        let get = |i: usize, name: &str| {
            slots[i].ok_or_else(|| Error::InvalidInput(format!("{}: missing {name} entry", path.display())))
        };
        Self::new(
            get(0, "a2u/ground")?,
            get(1, "eu/ground")?,
            get(2, "a2u/excited")?,
            get(3, "eu/excited")?,
            reference_mass,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsotopeEntry {
    pub mass: AtomicMass,
    pub abundance: f64,
}

/// Isotopes of one element with (possibly partial) natural abundances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotopeTable {
    pub element: String,
    pub entries: Vec<IsotopeEntry>,
}

impl IsotopeTable {
    pub fn new(element: impl Into<String>, entries: Vec<IsotopeEntry>) -> Result<Self> {
        for e in &entries {
            if !(e.abundance >= 0.0 && e.abundance.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "abundance of mass {} must be a non-negative number",
                    e.mass.mass_number
                )));
            }
        }
        Ok(Self {
            element: element.into(),
            entries,
        })
    }

    /// Stable tin isotopes. Abundances are only populated for 117, 118, 119,
    /// 120 and 122; the remaining entries carry zero so they never get
    /// sampled unless a caller overrides them.
    pub fn tin() -> Self {
        const TIN: [(u32, f64, f64); 10] = [
            (112, 111.904_818, 0.0),
            (114, 113.902_779, 0.0),
            (115, 114.903_342, 0.0),
            (116, 115.901_741, 0.0),
            (117, 116.902_952, 0.077),
            (118, 117.901_603, 0.242),
            (119, 118.903_308, 0.086),
            (120, 119.902_195, 0.326),
            (122, 121.903_439, 0.046),
            (124, 123.905_274, 0.0),
        ];
        Self {
            element: "Sn".into(),
            entries: TIN
                .iter()
                .map(|&(a, m, p)| IsotopeEntry {
                    mass: AtomicMass {
                        mass_number: a,
                        atomic_mass_u: m,
                    },
                    abundance: p,
                })
                .collect(),
        }
    }

    pub fn entry(&self, mass_number: u32) -> Option<&IsotopeEntry> {
        self.entries.iter().find(|e| e.mass.mass_number == mass_number)
    }

    pub fn mass(&self, mass_number: u32) -> Result<AtomicMass> {
        self.entry(mass_number)
            .map(|e| e.mass)
            .ok_or(Error::UnknownIsotope(mass_number))
    }

    /// Keeps only the listed mass numbers.
    pub fn restricted_to(&self, mass_numbers: &[u32]) -> Self {
        Self {
            element: self.element.clone(),
            entries: self
                .entries
                .iter()
                .filter(|e| mass_numbers.contains(&e.mass.mass_number))
                .copied()
                .collect(),
        }
    }

    /// Abundances scaled to sum to one.
    pub fn renormalized(&self) -> Result<Self> {
        if self.entries.is_empty() {
            return Err(Error::InvalidInput("isotope table is empty".into()));
        }
        let total: f64 = self.entries.iter().map(|e| e.abundance).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidInput("isotope abundances are all zero".into()));
        }
        Ok(Self {
            element: self.element.clone(),
            entries: self
                .entries
                .iter()
                .map(|e| IsotopeEntry {
                    mass: e.mass,
                    abundance: e.abundance / total,
                })
                .collect(),
        })
    }

    /// Reads a `mass_number,atomic_mass_u,abundance` CSV.
    pub fn from_csv(path: &Path, element: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            mass_number: u32,
            atomic_mass_u: f64,
            abundance: f64,
        }

        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        check_header(path, &mut reader, &["mass_number", "atomic_mass_u", "abundance"])?;
        let mut entries = Vec::new();
        for record in reader.deserialize::<Row>() {
            let row = record.map_err(|e| csv_error(path, e))?;
            entries.push(IsotopeEntry {
                mass: AtomicMass::new(row.mass_number, row.atomic_mass_u)?,
                abundance: row.abundance,
            });
        }
        Self::new(element, entries)
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

pub(crate) fn check_header<R: std::io::Read>(
    path: &Path,
    reader: &mut csv::Reader<R>,
    expected: &[&str],
) -> Result<()> {
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

/// Harmonic mode energy `hbar sqrt(k/m)` in meV.
pub fn vibration_energy(k: ForceConstant, m: AtomicMass) -> Result<f64> {
    ensure_positive(k.value, "force constant")?;
    ensure_positive(m.atomic_mass_u, "mass")?;
    let omega = (k.si_value() / m.kg()).sqrt();
    Ok(HBAR * omega / ELEMENTARY_CHARGE * 1e3)
}

/// `Omega_A2u + 2 Omega_Eu` (meV) for one electronic state at mass `m`.
pub fn zero_point_sum(model: &VibrationalModel, m: AtomicMass, state: ElectronicState) -> Result<f64> {
    let a2u = vibration_energy(model.force_constant(Mode::A2u, state), m)?;
    let eu = vibration_energy(model.force_constant(Mode::Eu, state), m)?;
    Ok(a2u + 2.0 * eu)
}

/// Zero-phonon line shift `E(m_n) - E(m_star)` in GHz.
pub fn isotope_shift(model: &VibrationalModel, m_n: AtomicMass, m_star: AtomicMass) -> Result<f64> {
    ensure_positive(m_n.atomic_mass_u, "mass m_n")?;
    ensure_positive(m_star.atomic_mass_u, "mass m_star")?;
    let stiffness = model.root_stiffness(ElectronicState::Excited) - model.root_stiffness(ElectronicState::Ground);
    let inv_root = 1.0 / m_n.kg().sqrt() - 1.0 / m_star.kg().sqrt();
    let joules = 0.5 * HBAR * inv_root * stiffness;
    Ok(joules / PLANCK * 1e-9)
}

/// Ratio of the shifts `m_ref -> m_a` and `m_ref -> m_b`. Independent of the
/// force constants.
pub fn shift_ratio(m_ref: AtomicMass, m_a: AtomicMass, m_b: AtomicMass) -> Result<f64> {
    ensure_positive(m_ref.atomic_mass_u, "reference mass")?;
    ensure_positive(m_a.atomic_mass_u, "mass a")?;
    ensure_positive(m_b.atomic_mass_u, "mass b")?;
    if m_b.atomic_mass_u == m_ref.atomic_mass_u {
        return Err(Error::InvalidInput("shift ratio denominator vanishes (m_b = m_ref)".into()));
    }
    let num = 1.0 - (m_ref.atomic_mass_u / m_a.atomic_mass_u).sqrt();
    let den = 1.0 - (m_ref.atomic_mass_u / m_b.atomic_mass_u).sqrt();
    Ok(num / den)
}

/// Shift per unit mass change, `C (1/sqrt(m) - 1/sqrt(m + 1))`, with `C`
/// fixed by a calibration point `(mass, shift_ghz)`.
pub fn unit_mass_shift_curve(
    masses: &[AtomicMass],
    calibration: (AtomicMass, f64),
) -> Result<Vec<(AtomicMass, f64)>> {
    let (cal_mass, cal_shift) = calibration;
    ensure_positive(cal_shift, "calibration shift")?;
    for m in masses {
        ensure_positive(m.atomic_mass_u, "mass")?;
    }
    if masses.windows(2).any(|w| w[1].atomic_mass_u < w[0].atomic_mass_u) {
        return Err(Error::InvalidInput("masses must be sorted ascending".into()));
    }
    if !masses.iter().any(|m| m.atomic_mass_u == cal_mass.atomic_mass_u) {
        return Err(Error::InvalidInput("calibration mass is not among the masses".into()));
    }
    let profile = |m: f64| 1.0 / m.sqrt() - 1.0 / (m + 1.0).sqrt();
    let scale = cal_shift / profile(cal_mass.atomic_mass_u);
    Ok(masses.iter().map(|&m| (m, scale * profile(m.atomic_mass_u))).collect())
}

/// Recomputed vs published mode energy for one dataset entry.
#[derive(Debug, Clone, Serialize)]
pub struct ModeEnergyCheck {
    pub mode: Mode,
    pub state: ElectronicState,
    pub reported_mev: f64,
    pub computed_mev: f64,
    pub relative_deviation: f64,
}

impl ModeEnergyCheck {
    /// Deviation large enough to be worth pointing out in reports.
    pub fn is_flagged(&self) -> bool {
        self.relative_deviation.abs() > 0.02
    }
}

/// Recomputes each published SnV mode energy from its force constant at mass `m`.
pub fn check_reported_mode_energies(model: &VibrationalModel, m: AtomicMass) -> Result<Vec<ModeEnergyCheck>> {
    SNV_REPORTED_MODE_ENERGIES
        .iter()
        .map(|&(mode, state, reported)| {
            let computed = vibration_energy(model.force_constant(mode, state), m)?;
            Ok(ModeEnergyCheck {
                mode,
                state,
                reported_mev: reported,
                computed_mev: computed,
                relative_deviation: (computed - reported) / reported,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sn(a: u32) -> AtomicMass {
        IsotopeTable::tin().mass(a).unwrap()
    }

    #[test]
    fn mode_energies_from_table_constants() {
        let m = AtomicMass::new(119, 118.903).unwrap();
        let a2u = vibration_energy(ForceConstant::hartree_per_bohr2(0.317_201), m).unwrap();
        let eu = vibration_energy(ForceConstant::hartree_per_bohr2(0.418_695), m).unwrap();
        assert!((a2u - 32.9).abs() < 0.05, "{a2u}");
        assert!((eu - 37.8).abs() < 0.05, "{eu}");
    }

    #[test]
    fn quadrupled_mass_halves_energy() {
        let k = ForceConstant::hartree_per_bohr2(0.4);
        let e1 = vibration_energy(k, AtomicMass::nominal(30)).unwrap();
        let e4 = vibration_energy(k, AtomicMass::nominal(120)).unwrap();
        assert!((e4 / e1 - 0.5).abs() < 1e-14);
    }

    #[test]
    fn vibration_energy_rejects_bad_input() {
        assert!(vibration_energy(ForceConstant::hartree_per_bohr2(0.0), sn(120)).is_err());
        assert!(vibration_energy(ForceConstant::hartree_per_bohr2(0.3), AtomicMass::nominal(0)).is_err());
    }

    #[test]
    fn zero_point_sums() {
        let model = VibrationalModel::snv_table1();
        let m = AtomicMass::new(119, 118.903).unwrap();
        let g = zero_point_sum(&model, m, ElectronicState::Ground).unwrap();
        let e = zero_point_sum(&model, m, ElectronicState::Excited).unwrap();
        assert!((g - 108.5).abs() < 0.1, "{g}");
        assert!((e - 113.5).abs() < 0.1, "{e}");

        let k = ForceConstant::hartree_per_bohr2(0.4);
        let flat = VibrationalModel::new(k, k, k, k, m).unwrap();
        assert_eq!(
            zero_point_sum(&flat, m, ElectronicState::Ground).unwrap(),
            zero_point_sum(&flat, m, ElectronicState::Excited).unwrap()
        );
    }

    #[test]
    fn builtin_model_is_blue_shifting() {
        assert!(VibrationalModel::snv_table1().is_blue_shifting());
    }

    #[test]
    fn shift_between_119_and_120() {
        let model = VibrationalModel::snv_table1();
        let s = isotope_shift(&model, AtomicMass::new(119, 118.903).unwrap(), AtomicMass::new(120, 119.902).unwrap()).unwrap();
        assert!((s - 2.5).abs() < 0.05, "{s}");
        assert_eq!(isotope_shift(&model, sn(120), sn(120)).unwrap(), 0.0);
        assert!(isotope_shift(&model, AtomicMass::nominal(0), sn(120)).is_err());
    }

    #[test]
    fn shift_ratio_values() {
        let r = shift_ratio(
            AtomicMass::new(118, 117.902).unwrap(),
            AtomicMass::new(119, 118.903).unwrap(),
            AtomicMass::new(120, 119.902).unwrap(),
        )
        .unwrap();
        assert!((r - 0.504).abs() < 5e-4, "{r}");
        assert_eq!(shift_ratio(sn(118), sn(118), sn(120)).unwrap(), 0.0);
        assert!(shift_ratio(sn(118), sn(119), sn(118)).is_err());
    }

    #[test]
    fn mass_scaling_curve() {
        let masses = [AtomicMass::nominal(28), AtomicMass::nominal(72), AtomicMass::nominal(119)];
        let curve = unit_mass_shift_curve(&masses, (AtomicMass::nominal(28), 87.0)).unwrap();
        assert_eq!(curve[0].1, 87.0);
        assert!((curve[1].1 - 21.4).abs() < 0.1, "{}", curve[1].1);
        assert!((curve[2].1 - 10.1).abs() < 0.05, "{}", curve[2].1);
        assert!(curve.windows(2).all(|w| w[1].1 < w[0].1));

        let unsorted = [AtomicMass::nominal(72), AtomicMass::nominal(28)];
        assert!(unit_mass_shift_curve(&unsorted, (AtomicMass::nominal(28), 87.0)).is_err());
        assert!(unit_mass_shift_curve(&masses, (AtomicMass::nominal(30), 87.0)).is_err());
    }

    #[test]
    fn reported_energy_check_flags_a2u_ground_only() {
        let model = VibrationalModel::snv_table1();
        let checks = check_reported_mode_energies(&model, sn(119)).unwrap();
        let flagged: Vec<_> = checks.iter().filter(|c| c.is_flagged()).collect();
        assert_eq!(flagged.len(), 1);
        assert_eq!((flagged[0].mode, flagged[0].state), (Mode::A2u, ElectronicState::Ground));
        assert!(checks.iter().all(|c| c.relative_deviation.abs() < 0.03));
    }

    #[test]
    fn renormalized_tin_subset() {
        let table = IsotopeTable::tin().restricted_to(&[117, 118, 119, 120, 122]).renormalized().unwrap();
        let p120 = table.entry(120).unwrap().abundance;
        assert!((p120 - 32.6 / 77.7).abs() < 1e-12);
        assert!(IsotopeTable::tin().restricted_to(&[112]).renormalized().is_err());
        assert!(IsotopeTable::tin().restricted_to(&[]).renormalized().is_err());
    }

    fn model_strategy() -> impl Strategy<Value = VibrationalModel> {
        (0.05f64..2.0, 0.05f64..2.0, 0.05f64..2.0, 0.05f64..2.0).prop_map(|(a, b, c, d)| {
            VibrationalModel::new(
                ForceConstant::hartree_per_bohr2(a),
                ForceConstant::hartree_per_bohr2(b),
                ForceConstant::hartree_per_bohr2(c),
                ForceConstant::hartree_per_bohr2(d),
                AtomicMass::nominal(119),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn shift_is_antisymmetric(model in model_strategy(), a in 10.0f64..250.0, b in 10.0f64..250.0) {
            let (ma, mb) = (AtomicMass { mass_number: 0, atomic_mass_u: a }, AtomicMass { mass_number: 0, atomic_mass_u: b });
            let ab = isotope_shift(&model, ma, mb).unwrap();
            let ba = isotope_shift(&model, mb, ma).unwrap();
            prop_assert_eq!(ab, -ba);
            prop_assert_eq!(isotope_shift(&model, ma, ma).unwrap(), 0.0);
        }

        // Closed form vs the half-difference of zero-point sums times (1 - sqrt(m_n/m*)).
        #[test]
        fn closed_form_matches_zero_point_route(model in model_strategy(), a in 10.0f64..250.0, b in 10.0f64..250.0) {
            prop_assume!((a - b).abs() > 1e-3);
            let (ma, mb) = (AtomicMass { mass_number: 0, atomic_mass_u: a }, AtomicMass { mass_number: 0, atomic_mass_u: b });
            let closed = isotope_shift(&model, ma, mb).unwrap();
            let excited = zero_point_sum(&model, ma, ElectronicState::Excited).unwrap();
            let ground = zero_point_sum(&model, ma, ElectronicState::Ground).unwrap();
            let ghz_per_mev = 1e-3 * ELEMENTARY_CHARGE / PLANCK * 1e-9;
            let factor = 0.5 * ghz_per_mev * (1.0 - (a / b).sqrt());
            let via_sums = (excited - ground) * factor;
            // The subtraction cancels, so compare against the size of its terms.
            let scale = (excited + ground) * factor.abs();
            prop_assume!(scale > 1e-9);
            prop_assert!((closed - via_sums).abs() / scale <= 1e-12, "{} vs {}", closed, via_sums);
        }

        #[test]
        fn lighter_isotope_is_bluer(model in model_strategy(), a in 10.0f64..250.0, b in 10.0f64..250.0) {
            prop_assume!(model.is_blue_shifting() && (a - b).abs() > 1e-6);
            let s = isotope_shift(&model, AtomicMass { mass_number: 0, atomic_mass_u: a }, AtomicMass { mass_number: 0, atomic_mass_u: b }).unwrap();
            prop_assert_eq!(s > 0.0, b > a);
        }

        #[test]
        fn ratio_ignores_force_constants(a in 50.0f64..150.0, da in 0.5f64..5.0, db in 0.5f64..5.0) {
            let m_ref = AtomicMass { mass_number: 0, atomic_mass_u: a };
            let m_a = AtomicMass { mass_number: 0, atomic_mass_u: a + da };
            let m_b = AtomicMass { mass_number: 0, atomic_mass_u: a + db };
            let r = shift_ratio(m_ref, m_a, m_b).unwrap();
            for model in [VibrationalModel::snv_table1(), VibrationalModel::new(
                ForceConstant::hartree_per_bohr2(0.1), ForceConstant::hartree_per_bohr2(0.2),
                ForceConstant::hartree_per_bohr2(0.5), ForceConstant::hartree_per_bohr2(0.9), m_ref).unwrap()] {
                let via_model = isotope_shift(&model, m_ref, m_a).unwrap() / isotope_shift(&model, m_ref, m_b).unwrap();
                prop_assert!((via_model - r).abs() <= 1e-9 * r.abs().max(1.0));
            }
        }

        #[test]
        fn curve_scales_with_calibration(shift in 1.0f64..500.0, factor in 0.1f64..10.0) {
            let masses = [AtomicMass::nominal(28), AtomicMass::nominal(72), AtomicMass::nominal(119), AtomicMass::nominal(207)];
            let base = unit_mass_shift_curve(&masses, (masses[0], shift)).unwrap();
            let scaled = unit_mass_shift_curve(&masses, (masses[0], shift * factor)).unwrap();
            for (b, s) in base.iter().zip(&scaled) {
                prop_assert!((s.1 - factor * b.1).abs() <= 1e-12 * s.1.abs());
            }
        }
    }
}
