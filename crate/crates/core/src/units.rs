//! Physical constants, unit conversions and the molecule catalog.
//!
//! Polarizabilities are stored as polarizability volumes in cubic angstrom,
//! the unit in which optical data for molecules are usually tabulated, and
//! converted to SI (C m^2 / V) only where a formula needs them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CODATA 2018 values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub h: f64,
    pub c: f64,
    pub eps0: f64,
    pub amu: f64,
}

pub const HBAR: f64 = 1.054_571_817e-34;
/// Stored as `2 pi hbar` so the two never disagree in the last bit.
pub const H: f64 = 2.0 * std::f64::consts::PI * HBAR;
pub const C: f64 = 299_792_458.0;
pub const EPS0: f64 = 8.854_187_812_8e-12;
pub const AMU: f64 = 1.660_539_066_60e-27;

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    hbar: HBAR,
    h: H,
    c: C,
    eps0: EPS0,
    amu: AMU,
};

const ANGSTROM3: f64 = 1e-30;

/// Complex polarizability volume `alpha / (4 pi eps0)` in cubic angstrom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPolarizability {
    pub real_volume: f64,
    pub imag_volume: f64,
}

impl ComplexPolarizability {
    pub fn new(real_volume: f64, imag_volume: f64) -> Result<Self> {
        if !real_volume.is_finite() {
            return Err(Error::domain("real_volume", real_volume, "must be finite"));
        }
        if !(imag_volume >= 0.0) || !imag_volume.is_finite() {
            return Err(Error::domain(
                "imag_volume",
                imag_volume,
                "must be finite and nonnegative",
            ));
        }
        Ok(Self {
            real_volume,
            imag_volume,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSpecies {
    pub name: String,
    /// Mass in atomic mass units.
    pub mass: f64,
    pub polarizability: ComplexPolarizability,
}

impl MoleculeSpecies {
    pub fn new(
        name: impl Into<String>,
        mass: f64,
        polarizability: ComplexPolarizability,
    ) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::domain("mass", mass, "must be positive"));
        }
        Ok(Self {
            name: name.into(),
            mass,
            polarizability,
        })
    }

    pub fn c60() -> Self {
        Self {
            name: "C60".into(),
            mass: 720.0,
            polarizability: ComplexPolarizability {
                real_volume: 101.0,
                imag_volume: 8.0,
            },
        }
    }

    pub fn c70() -> Self {
        Self {
            name: "C70".into(),
            mass: 840.0,
            polarizability: ComplexPolarizability {
                real_volume: 118.0,
                imag_volume: 20.0,
            },
        }
    }

    /// Mass in kilograms.
    pub fn mass_kg(&self) -> f64 {
        self.mass * AMU
    }
}

/// Built-in species, values at the 514.5 nm argon-ion line.
pub fn catalog() -> Vec<MoleculeSpecies> {
    vec![MoleculeSpecies::c60(), MoleculeSpecies::c70()]
}

pub fn lookup_species(name: &str) -> Option<MoleculeSpecies> {
    catalog()
        .into_iter()
        .find(|s| s.name.eq_ignore_ascii_case(name))
}

/// `4 pi eps0` times the polarizability volume, in C m^2 / V.
pub fn polarizability_si(p: ComplexPolarizability) -> Complex64 {
    let scale = 4.0 * std::f64::consts::PI * EPS0 * ANGSTROM3;
    Complex64::new(p.real_volume * scale, p.imag_volume * scale)
}

/// Absorption cross section `Im(alpha) k_L / eps0` in m^2.
pub fn absorption_cross_section(species: &MoleculeSpecies, k_l: f64) -> f64 {
    polarizability_si(species.polarizability).im * k_l / EPS0
}

/// `h / (M v)`.
pub fn de_broglie_wavelength(species: &MoleculeSpecies, v: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::domain("velocity", v, "must be positive"));
    }
    Ok(H / (species.mass_kg() * v))
}
