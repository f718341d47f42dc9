//! Physical constants (CODATA 2018) and the handful of unit conversions the
//! rest of the crate needs.
//!
//! Everything is computed in SI internally. Unit tags only exist at the API
//! boundary, so `EnergyQuantity` always goes through joules.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Planck constant, J s (exact).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Elementary charge, C (exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Boltzmann constant, J/K (exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Atomic mass constant, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Hartree energy, J.
pub const HARTREE: f64 = 4.359_744_722_207_1e-18;
/// Bohr radius, m.
pub const BOHR: f64 = 5.291_772_109_03e-11;

/// Ratio between a Gaussian FWHM and its standard deviation, `2 sqrt(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyUnit {
    MilliElectronVolt,
    GigaHertz,
    TeraHertz,
    /// Vacuum photon wavelength in nanometres.
    Nanometre,
    Joule,
}

impl EnergyUnit {
    pub const ALL: [EnergyUnit; 5] = [
        EnergyUnit::MilliElectronVolt,
        EnergyUnit::GigaHertz,
        EnergyUnit::TeraHertz,
        EnergyUnit::Nanometre,
        EnergyUnit::Joule,
    ];

    pub fn is_wavelength(self) -> bool {
        matches!(self, EnergyUnit::Nanometre)
    }

    fn symbol(self) -> &'static str {
        match self {
            EnergyUnit::MilliElectronVolt => "meV",
            EnergyUnit::GigaHertz => "GHz",
            EnergyUnit::TeraHertz => "THz",
            EnergyUnit::Nanometre => "nm",
            EnergyUnit::Joule => "J",
        }
    }

    // Joules per unit, for the linear units.
    fn joules_per_unit(self) -> Option<f64> {
        match self {
            EnergyUnit::MilliElectronVolt => Some(1e-3 * ELEMENTARY_CHARGE),
            EnergyUnit::GigaHertz => Some(1e9 * PLANCK),
            EnergyUnit::TeraHertz => Some(1e12 * PLANCK),
            EnergyUnit::Joule => Some(1.0),
            EnergyUnit::Nanometre => None,
        }
    }
}

impl fmt::Display for EnergyUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyQuantity {
    pub value: f64,
    pub unit: EnergyUnit,
}

impl EnergyQuantity {
    pub fn new(value: f64, unit: EnergyUnit) -> Self {
        Self { value, unit }
    }

    fn to_joules(self) -> f64 {
        match self.unit.joules_per_unit() {
            Some(scale) => self.value * scale,
            None => PLANCK * SPEED_OF_LIGHT / (self.value * 1e-9),
        }
    }

    fn from_joules(joules: f64, unit: EnergyUnit) -> Self {
        let value = match unit.joules_per_unit() {
            Some(scale) => joules / scale,
            None => PLANCK * SPEED_OF_LIGHT / joules * 1e9,
        };
        Self { value, unit }
    }
}

impl fmt::Display for EnergyQuantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, self.unit)
    }
}

/// Converts `q` into `target`. Wavelength units require a strictly positive value.
pub fn convert_energy(q: EnergyQuantity, target: EnergyUnit) -> Result<EnergyQuantity> {
    ensure_finite(q.value, "energy")?;
    if q.unit == target {
        return Ok(q);
    }
    if q.unit.is_wavelength() || target.is_wavelength() {
        ensure_positive(q.value, "energy (wavelength conversion)")?;
    }
    Ok(EnergyQuantity::from_joules(q.to_joules(), target))
}

/// Fourier-transform-limited FWHM in MHz for an excited-state lifetime in ns.
pub fn ftl_from_lifetime(tau_ns: f64) -> Result<f64> {
    ensure_positive(tau_ns, "lifetime")?;
    Ok(1e3 / (2.0 * PI * tau_ns))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceConstantUnit {
    HartreePerBohrSquared,
    NewtonPerMetre,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceConstant {
    pub value: f64,
    pub unit: ForceConstantUnit,
}

impl ForceConstant {
    pub fn hartree_per_bohr2(value: f64) -> Self {
        Self {
            value,
            unit: ForceConstantUnit::HartreePerBohrSquared,
        }
    }

    pub fn newton_per_metre(value: f64) -> Self {
        Self {
            value,
            unit: ForceConstantUnit::NewtonPerMetre,
        }
    }

    /// Value in N/m.
    pub fn si_value(&self) -> f64 {
        match self.unit {
            ForceConstantUnit::HartreePerBohrSquared => self.value * HARTREE / (BOHR * BOHR),
            ForceConstantUnit::NewtonPerMetre => self.value,
        }
    }
}

/// Re-expresses a force constant in N/m.
pub fn force_constant_to_si(k: ForceConstant) -> Result<ForceConstant> {
    ensure_finite(k.value, "force constant")?;
    Ok(ForceConstant::newton_per_metre(k.si_value()))
}

/// An isotope mass: nominal mass number plus the true atomic mass in u.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomicMass {
    pub mass_number: u32,
    pub atomic_mass_u: f64,
}

impl AtomicMass {
    pub fn new(mass_number: u32, atomic_mass_u: f64) -> Result<Self> {
        ensure_positive(atomic_mass_u, "atomic mass")?;
        if (atomic_mass_u - f64::from(mass_number)).abs() >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "atomic mass {atomic_mass_u} u is inconsistent with mass number {mass_number}"
            )));
        }
        Ok(Self {
            mass_number,
            atomic_mass_u,
        })
    }

    /// Mass equal to the mass number, for callers that only know `A`.
    pub fn nominal(mass_number: u32) -> Self {
        Self {
            mass_number,
            atomic_mass_u: f64::from(mass_number),
        }
    }

    pub fn kg(&self) -> f64 {
        self.atomic_mass_u * ATOMIC_MASS_UNIT
    }
}
