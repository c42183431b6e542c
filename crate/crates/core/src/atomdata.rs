//! Atomic constants and scaling laws for the 6s1/2 -> 7p1/2 -> ns1/2 ladder,
//! plus fundamental constants.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angular::HalfInt;
use crate::units;

/// CODATA 2018 values, SI.
pub mod constants {
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;
    pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
    pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
    pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
    pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub electron_charge: f64,
    pub electron_mass: f64,
    pub bohr_radius: f64,
    pub bohr_magneton: f64,
    pub epsilon_0: f64,
    pub speed_of_light: f64,
}

impl PhysicalConstants {
    pub const CODATA2018: PhysicalConstants = PhysicalConstants {
        hbar: constants::HBAR,
        electron_charge: constants::ELECTRON_CHARGE,
        electron_mass: constants::ELECTRON_MASS,
        bohr_radius: constants::BOHR_RADIUS,
        bohr_magneton: constants::BOHR_MAGNETON,
        epsilon_0: constants::EPSILON_0,
        speed_of_light: constants::SPEED_OF_LIGHT,
    };
}

#[derive(Debug, Error)]
pub enum AtomDataError {
    #[error("{0}")]
    Domain(String),
    #[error("no ground-state polarizability stored for {0} nm")]
    UnknownWavelength(u32),
    #[error("species file: {0}")]
    Io(#[from] std::io::Error),
    #[error("species file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid species data: {0}")]
    Invalid(String),
}

/// One fine-structure level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelData {
    pub label: String,
    /// rad/s, relative to the level used as frame reference.
    pub energy_offset: f64,
    /// Magnetic-dipole constant A, rad/s.
    pub hyperfine_a: f64,
    /// Seconds; infinite for a stable ground level.
    pub lifetime: f64,
    pub nuclear_spin: HalfInt,
    pub j: HalfInt,
}

impl LevelData {
    pub fn decay_rate(&self) -> f64 {
        1.0 / self.lifetime
    }

    /// Hyperfine levels f = |I-j|, ..., I+j.
    pub fn hyperfine_levels(&self) -> Vec<HalfInt> {
        HalfInt::couplings(self.nuclear_spin, self.j).collect()
    }

    pub fn hyperfine_shift(&self, f: HalfInt) -> Result<f64, AtomDataError> {
        hyperfine_shift(self.hyperfine_a, self.nuclear_spin, self.j, f)
    }
}

/// Rydberg series parameters for ns1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct RydbergSeries {
    pub label: String,
    pub j: HalfInt,
    pub g_j: f64,
    pub quantum_defect: f64,
    /// A_ns = coefficient / (n - defect)^3, rad/s.
    pub hyperfine_coefficient: f64,
    /// ⟨ns||r||p⟩ = coefficient / n^{3/2}, in units of a0.
    pub matrix_element_coefficient: f64,
    /// Lifetimes in seconds keyed by n.
    pub lifetimes: BTreeMap<u32, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesData {
    pub name: String,
    pub nuclear_spin: HalfInt,
    /// rad/s.
    pub qubit_splitting: f64,
    pub ground: LevelData,
    pub intermediate: LevelData,
    pub rydberg: RydbergSeries,
    /// ⟨p||r||g⟩ in units of a0, signed.
    pub matrix_element_gp: f64,
    /// Ground-state scalar polarizabilities, 10^-24 cm^3, keyed by wavelength in nm.
    pub ground_polarizability: BTreeMap<u32, f64>,
    /// Wavelengths of the two excitation legs, m.
    pub leg_wavelengths: [f64; 2],
    /// Fraction of the 1038 nm ground shift that differs between the clock states.
    pub ground_diff_1038_fraction: f64,
}

/// Hyperfine shift of level f from the fine-structure centre of mass:
/// (A/2)[f(f+1) - I(I+1) - j(j+1)], with A in rad/s.
pub fn hyperfine_shift(a: f64, i: HalfInt, j: HalfInt, f: HalfInt) -> Result<f64, AtomDataError> {
    let ok = f.twice() >= (i.twice() - j.twice()).abs()
        && f.twice() <= i.twice() + j.twice()
        && (i.twice() + j.twice() + f.twice()) % 2 == 0;
    if !ok {
        return Err(AtomDataError::Domain(format!("f = {f} does not couple I = {i} and j = {j}")));
    }
    let x = |q: HalfInt| q.value() * (q.value() + 1.0);
    Ok(0.5 * a * (x(f) - x(i) - x(j)))
}

/// Free-electron (ponderomotive) polarizability -e^2/(m_e ω^2), SI.
pub fn rydberg_nonres_polarizability(omega: f64) -> f64 {
    let e = constants::ELECTRON_CHARGE;
    -e * e / (constants::ELECTRON_MASS * omega * omega)
}

impl SpeciesData {
    /// The shipped caesium data set.
    pub fn cesium() -> SpeciesData {
        SpeciesFile::from_json(CS_JSON)
            .and_then(SpeciesFile::into_species)
            .expect("bundled caesium data is valid")
    }

    pub fn from_path(path: &Path) -> Result<SpeciesData, AtomDataError> {
        let text = std::fs::read_to_string(path)?;
        SpeciesFile::from_json(&text)?.into_species()
    }

    pub fn rydberg_hf_a(&self, n: u32) -> f64 {
        self.rydberg.hyperfine_coefficient / (n as f64 - self.rydberg.quantum_defect).powi(3)
    }

    /// Splitting between the two Rydberg hyperfine levels, rad/s.
    pub fn rydberg_hf_splitting(&self, n: u32) -> f64 {
        let a = self.rydberg_hf_a(n);
        let fs: Vec<HalfInt> = HalfInt::couplings(self.nuclear_spin, self.rydberg.j).collect();
        let lo = hyperfine_shift(a, self.nuclear_spin, self.rydberg.j, fs[0]).unwrap();
        let hi = hyperfine_shift(a, self.nuclear_spin, self.rydberg.j, *fs.last().unwrap()).unwrap();
        hi - lo
    }

    /// ⟨ns||r||p⟩ in metres.
    pub fn matrix_element_rp(&self, n: u32) -> f64 {
        self.rydberg.matrix_element_coefficient / (n as f64).powf(1.5) * constants::BOHR_RADIUS
    }

    /// ⟨p||r||g⟩ in metres.
    pub fn matrix_element_gp_si(&self) -> f64 {
        self.matrix_element_gp * constants::BOHR_RADIUS
    }

    /// Stored ground polarizability for a leg wavelength tag, 10^-24 cm^3.
    pub fn ground_nonres_polarizability(&self, wavelength_nm: u32) -> Result<f64, AtomDataError> {
        self.ground_polarizability
            .get(&wavelength_nm)
            .copied()
            .ok_or(AtomDataError::UnknownWavelength(wavelength_nm))
    }

    /// Lower (|0⟩) and upper (|1⟩) ground hyperfine levels.
    pub fn qubit_levels(&self) -> (HalfInt, HalfInt) {
        let fs = self.ground.hyperfine_levels();
        (fs[0], *fs.last().unwrap())
    }

    pub fn leg_angular_frequency(&self, leg: usize) -> f64 {
        2.0 * PI * constants::SPEED_OF_LIGHT / self.leg_wavelengths[leg]
    }
}

pub const CS_JSON: &str = include_str!("../data/cs.json");

/// On-disk species schema. Units are part of the key names.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct SpeciesFile {
    pub name: String,
    pub nuclear_spin: HalfInt,
    pub qubit_splitting_GHz: f64,
    pub ground: LevelFile,
    pub intermediate: LevelFile,
    pub rydberg: RydbergFile,
    pub matrix_element_gp_a0: f64,
    pub ground_polarizability_1e24_cm3: BTreeMap<String, f64>,
    pub leg_wavelengths_nm: [f64; 2],
    #[serde(default)]
    pub ground_diff_1038_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct LevelFile {
    pub label: String,
    pub j: HalfInt,
    pub hyperfine_A_MHz: f64,
    /// null for a stable level.
    pub lifetime_us: Option<f64>,
    #[serde(default)]
    pub energy_offset_GHz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct RydbergFile {
    pub label: String,
    pub j: HalfInt,
    pub g_j: f64,
    pub quantum_defect: f64,
    pub hyperfine_coefficient_MHz: f64,
    pub matrix_element_coefficient_a0: f64,
    #[serde(default)]
    pub lifetime_us: BTreeMap<String, f64>,
}

impl SpeciesFile {
    pub fn from_json(text: &str) -> Result<SpeciesFile, AtomDataError> {
        Ok(serde_json::from_str(text)?)
    }

    fn level(&self, l: &LevelFile) -> Result<LevelData, AtomDataError> {
        let lifetime = match l.lifetime_us {
            Some(t) if t > 0.0 => units::microsecond(t),
            Some(t) => return Err(AtomDataError::Invalid(format!("{}: lifetime {t} us is not positive", l.label))),
            None => f64::INFINITY,
        };
        if l.j.twice() < 0 {
            return Err(AtomDataError::Invalid(format!("{}: negative j", l.label)));
        }
        Ok(LevelData {
            label: l.label.clone(),
            energy_offset: units::ghz(l.energy_offset_GHz),
            hyperfine_a: units::mhz(l.hyperfine_A_MHz),
            lifetime,
            nuclear_spin: self.nuclear_spin,
            j: l.j,
        })
    }

    pub fn into_species(self) -> Result<SpeciesData, AtomDataError> {
        let ground = self.level(&self.ground)?;
        let intermediate = self.level(&self.intermediate)?;
        let mut lifetimes = BTreeMap::new();
        for (k, v) in &self.rydberg.lifetime_us {
            let n: u32 = k
                .parse()
                .map_err(|_| AtomDataError::Invalid(format!("Rydberg lifetime key {k:?} is not an integer n")))?;
            if *v <= 0.0 {
                return Err(AtomDataError::Invalid(format!("Rydberg lifetime for n = {n} is not positive")));
            }
            lifetimes.insert(n, units::microsecond(*v));
        }
        let mut ground_polarizability = BTreeMap::new();
        for (k, v) in &self.ground_polarizability_1e24_cm3 {
            let nm: u32 = k
                .parse()
                .map_err(|_| AtomDataError::Invalid(format!("polarizability key {k:?} is not a wavelength in nm")))?;
            ground_polarizability.insert(nm, *v);
        }
        if self.leg_wavelengths_nm.iter().any(|w| *w <= 0.0) {
            return Err(AtomDataError::Invalid("leg wavelengths must be positive".into()));
        }
        Ok(SpeciesData {
            name: self.name.clone(),
            nuclear_spin: self.nuclear_spin,
            qubit_splitting: units::ghz(self.qubit_splitting_GHz),
            ground,
            intermediate,
            rydberg: RydbergSeries {
                label: self.rydberg.label.clone(),
                j: self.rydberg.j,
                g_j: self.rydberg.g_j,
                quantum_defect: self.rydberg.quantum_defect,
                hyperfine_coefficient: units::mhz(self.rydberg.hyperfine_coefficient_MHz),
                matrix_element_coefficient: self.rydberg.matrix_element_coefficient_a0,
                lifetimes,
            },
            matrix_element_gp: self.matrix_element_gp_a0,
            ground_polarizability,
            leg_wavelengths: [
                units::nanometre(self.leg_wavelengths_nm[0]),
                units::nanometre(self.leg_wavelengths_nm[1]),
            ],
            ground_diff_1038_fraction: self.ground_diff_1038_fraction,
        })
    }
}
