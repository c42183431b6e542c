//! Two-photon excitation g -> p -> r: field amplitudes, Rabi frequencies with
//! intermediate hyperfine structure, the Stark-shift ledger, Zeeman decoupling
//! of the Rydberg hyperfine states, photon scattering and power calibration.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angular::{clebsch_gordan, hf_recoupling, CGKey, HalfInt};
use crate::atomdata::{constants, rydberg_nonres_polarizability, AtomDataError, SpeciesData};
use crate::units;

#[derive(Debug, Error)]
pub enum ExcitationError {
    #[error("invalid laser field: {0}")]
    InvalidField(String),
    #[error("invalid excitation config: {0}")]
    InvalidConfig(String),
    #[error("one-photon detuning is zero, the two-photon coupling is singular")]
    ZeroDetuning,
    #[error(
        "detuning {delta1_mhz:.3} MHz is within 10 linewidths of the f_p = {f} intermediate level; \
         the far-detuned model is invalid"
    )]
    ResonanceCollision { f: HalfInt, delta1_mhz: f64 },
    #[error(transparent)]
    AtomData(#[from] AtomDataError),
    #[error("calibration failed: {0}")]
    Calibration(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ExcitationWarning {
    /// |Δ1|/γ_p below 50.
    SmallDetuning { ratio: f64 },
}

/// Whether the intermediate-level hyperfine splittings enter the detuning weights.
/// `Collapsed` sets every Δ_{f_p} to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyperfine {
    #[default]
    Resolved,
    Collapsed,
}

/// A Gaussian beam focused on the atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaserField {
    /// W.
    pub power: f64,
    /// 1/e^2 intensity radius, m.
    pub waist: f64,
    /// Spherical polarization component q.
    pub polarization: i32,
    /// rad/s.
    pub omega: f64,
}

impl LaserField {
    pub fn new(power: f64, waist: f64, polarization: i32, omega: f64) -> Result<Self, ExcitationError> {
        let f = LaserField { power, waist, polarization, omega };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), ExcitationError> {
        if !(self.power >= 0.0) || !self.power.is_finite() {
            return Err(ExcitationError::InvalidField(format!("power {} W must be finite and >= 0", self.power)));
        }
        if !(self.waist > 0.0) || !self.waist.is_finite() {
            return Err(ExcitationError::InvalidField(format!("waist {} m must be > 0", self.waist)));
        }
        if !(-1..=1).contains(&self.polarization) {
            return Err(ExcitationError::InvalidField(format!("polarization q = {} not in {{-1, 0, 1}}", self.polarization)));
        }
        if !(self.omega > 0.0) {
            return Err(ExcitationError::InvalidField(format!("angular frequency {} must be > 0", self.omega)));
        }
        Ok(())
    }

    /// Peak intensity 2P/(πw²).
    pub fn peak_intensity(&self) -> f64 {
        2.0 * self.power / (PI * self.waist * self.waist)
    }

    pub fn with_power(mut self, power: f64) -> Self {
        self.power = power;
        self
    }
}

/// Peak on-axis field amplitude √(2I₀/ε₀c).
pub fn field_amplitude(field: &LaserField) -> f64 {
    (2.0 * field.peak_intensity() / (constants::EPSILON_0 * constants::SPEED_OF_LIGHT)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationConfig {
    pub species: SpeciesData,
    /// Ground to intermediate leg.
    pub field1: LaserField,
    /// Intermediate to Rydberg leg.
    pub field2: LaserField,
    /// Detuning of field1 from the intermediate centre of mass, rad/s. Positive is blue.
    pub delta1: f64,
    pub rydberg_n: u32,
    /// T.
    pub bias_field: f64,
    /// Targeted Rydberg fine-structure projection.
    pub rydberg_mj: HalfInt,
    /// Add the small field2 differential qubit shift to Δ_diff,g.
    pub include_1038_diff: bool,
}

impl ExcitationConfig {
    /// σ+ / σ- excitation of ns1/2, m_j = -1/2 in caesium with a 0.15 mT bias.
    /// Inputs are SI (W, m, rad/s).
    pub fn cesium(power1: f64, power2: f64, waist1: f64, waist2: f64, delta1: f64, rydberg_n: u32) -> Self {
        let species = SpeciesData::cesium();
        Self::for_species(species, power1, power2, waist1, waist2, delta1, rydberg_n)
    }

    pub fn for_species(
        species: SpeciesData,
        power1: f64,
        power2: f64,
        waist1: f64,
        waist2: f64,
        delta1: f64,
        rydberg_n: u32,
    ) -> Self {
        let field1 = LaserField { power: power1, waist: waist1, polarization: 1, omega: species.leg_angular_frequency(0) };
        let field2 = LaserField { power: power2, waist: waist2, polarization: -1, omega: species.leg_angular_frequency(1) };
        ExcitationConfig {
            species,
            field1,
            field2,
            delta1,
            rydberg_n,
            bias_field: units::millitesla(0.15),
            rydberg_mj: HalfInt::from_twice(-1),
            include_1038_diff: false,
        }
    }

    pub fn with_powers(&self, power1: f64, power2: f64) -> Self {
        let mut c = self.clone();
        c.field1.power = power1;
        c.field2.power = power2;
        c
    }

    /// Intermediate-level decay rate γ_p.
    pub fn gamma_p(&self) -> f64 {
        self.species.intermediate.decay_rate()
    }

    /// Rydberg projection m_r = m_g + q1 + q2 for a clock-state start.
    pub fn rydberg_m(&self, m_g: HalfInt) -> HalfInt {
        m_g + HalfInt::integer(self.field1.polarization + self.field2.polarization)
    }

    pub fn validate(&self) -> Result<Vec<ExcitationWarning>, ExcitationError> {
        self.field1.validate()?;
        self.field2.validate()?;
        if self.rydberg_n <= 5 {
            return Err(ExcitationError::InvalidConfig(format!("Rydberg n = {} must exceed 5", self.rydberg_n)));
        }
        if !(self.bias_field >= 0.0) {
            return Err(ExcitationError::InvalidConfig(format!("bias field {} T must be >= 0", self.bias_field)));
        }
        if self.rydberg_mj.abs() > self.species.rydberg.j {
            return Err(ExcitationError::InvalidConfig(format!("m_j = {} exceeds j", self.rydberg_mj)));
        }
        if self.delta1 == 0.0 || !self.delta1.is_finite() {
            return Err(ExcitationError::ZeroDetuning);
        }
        let gamma = self.gamma_p();
        for f in self.species.intermediate.hyperfine_levels() {
            let shift = self.species.intermediate.hyperfine_shift(f)?;
            if (self.delta1 - shift).abs() < 10.0 * gamma {
                return Err(ExcitationError::ResonanceCollision { f, delta1_mhz: units::to_mhz(self.delta1) });
            }
        }
        let mut warnings = Vec::new();
        let ratio = self.delta1.abs() / gamma;
        if ratio < 50.0 {
            warnings.push(ExcitationWarning::SmallDetuning { ratio });
        }
        Ok(warnings)
    }
}

fn cg(j1: HalfInt, m1: HalfInt, j2: HalfInt, m2: HalfInt, j: HalfInt, m: HalfInt) -> f64 {
    if m1.abs() > j1 || m2.abs() > j2 || m.abs() > j {
        return 0.0;
    }
    clebsch_gordan(CGKey::new(j1, m1, j2, m2, j, m)).unwrap_or(0.0)
}

/// One-photon ground factor Ξ̃^{f_p}_{f_g, m_g, q}.
pub fn ground_xi_tilde(species: &SpeciesData, f_g: HalfInt, m_g: HalfInt, q: i32, f_p: HalfInt) -> f64 {
    let i = species.nuclear_spin;
    let q = HalfInt::integer(q);
    hf_recoupling(i, species.ground.j, f_g, species.intermediate.j, f_p) * cg(f_g, m_g, HalfInt::ONE, q, f_p, m_g + q)
}

/// One-photon Rydberg factor Ξ̄^{f_p}_{j_r, m_j, -q2} for Rydberg projection m_r.
pub fn rydberg_xi_bar(species: &SpeciesData, m_j: HalfInt, m_r: HalfInt, q2: i32, f_p: HalfInt) -> f64 {
    let i = species.nuclear_spin;
    let j_r = species.rydberg.j;
    let m_i = m_r - m_j;
    let mq = HalfInt::integer(-q2);
    HalfInt::couplings(i, j_r)
        .map(|f_r| {
            hf_recoupling(i, j_r, f_r, species.intermediate.j, f_p)
                * cg(f_r, m_r, HalfInt::ONE, mq, f_p, m_r + mq)
                * cg(j_r, m_j, i, m_i, f_r, m_r)
        })
        .sum()
}

/// Angular bookkeeping for one ground state, one polarization pair and one
/// Rydberg m_j. Detuning weights are applied separately.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngularFactors {
    pub intermediate_f: Vec<HalfInt>,
    pub rydberg_f: Vec<HalfInt>,
    pub m_r: HalfInt,
    /// `two_photon[r][p]`: c c C C product for f_r = rydberg_f[r], f_p = intermediate_f[p].
    pub two_photon: Vec<Vec<f64>>,
    /// C^{f_r m_r}_{j_r m_j I m_I} for each f_r.
    pub rydberg_cg: Vec<f64>,
    /// Ξ̄ for each f_p.
    pub rydberg_xi: Vec<f64>,
}

impl AngularFactors {
    pub fn new(species: &SpeciesData, f_g: HalfInt, m_g: HalfInt, q1: i32, q2: i32, m_j: HalfInt) -> Self {
        let i = species.nuclear_spin;
        let (j_g, j_p, j_r) = (species.ground.j, species.intermediate.j, species.rydberg.j);
        let intermediate_f: Vec<HalfInt> = HalfInt::couplings(i, j_p).collect();
        let rydberg_f: Vec<HalfInt> = HalfInt::couplings(i, j_r).collect();
        let (hq1, hq2) = (HalfInt::integer(q1), HalfInt::integer(q2));
        let m_p = m_g + hq1;
        let m_r = m_p + hq2;
        let two_photon = rydberg_f
            .iter()
            .map(|&f_r| {
                intermediate_f
                    .iter()
                    .map(|&f_p| {
                        hf_recoupling(i, j_g, f_g, j_p, f_p)
                            * hf_recoupling(i, j_p, f_p, j_r, f_r)
                            * cg(f_p, m_p, HalfInt::ONE, hq2, f_r, m_r)
                            * cg(f_g, m_g, HalfInt::ONE, hq1, f_p, m_p)
                    })
                    .collect()
            })
            .collect();
        let m_i = m_r - m_j;
        let rydberg_cg = rydberg_f.iter().map(|&f_r| cg(j_r, m_j, i, m_i, f_r, m_r)).collect();
        let rydberg_xi = intermediate_f.iter().map(|&f_p| rydberg_xi_bar(species, m_j, m_r, q2, f_p)).collect();
        AngularFactors { intermediate_f, rydberg_f, m_r, two_photon, rydberg_cg, rydberg_xi }
    }

    /// Ω̃^{f_r, m_r} for each f_r, given per-f_p weights Δ1/(Δ1-Δ_{f_p}).
    pub fn omega_tilde(&self, weights: &[f64]) -> Vec<f64> {
        self.two_photon.iter().map(|row| row.iter().zip(weights).map(|(a, w)| a * w).sum()).collect()
    }

    /// Ω̄^{j_r, m_j}: projection of the hyperfine couplings on the decoupled state.
    pub fn omega_bar(&self, weights: &[f64]) -> f64 {
        self.omega_tilde(weights).iter().zip(&self.rydberg_cg).map(|(o, c)| o * c).sum()
    }
}

fn intermediate_shifts(cfg: &ExcitationConfig, hf: Hyperfine) -> Result<Vec<f64>, ExcitationError> {
    cfg.species
        .intermediate
        .hyperfine_levels()
        .into_iter()
        .map(|f| match hf {
            Hyperfine::Resolved => Ok(cfg.species.intermediate.hyperfine_shift(f)?),
            Hyperfine::Collapsed => Ok(0.0),
        })
        .collect()
}

fn detuning_weights(cfg: &ExcitationConfig, hf: Hyperfine) -> Result<Vec<f64>, ExcitationError> {
    Ok(intermediate_shifts(cfg, hf)?.iter().map(|s| cfg.delta1 / (cfg.delta1 - s)).collect())
}

/// Reduced couplings Ω, Ξ_gp, Ξ_rp (rad/s, signed by the matrix elements).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReducedCouplings {
    pub omega: f64,
    pub xi_gp: f64,
    pub xi_rp: f64,
}

pub fn reduced_couplings(cfg: &ExcitationConfig) -> Result<ReducedCouplings, ExcitationError> {
    if cfg.delta1 == 0.0 {
        return Err(ExcitationError::ZeroDetuning);
    }
    let e = constants::ELECTRON_CHARGE;
    let hbar = constants::HBAR;
    let xi_gp = field_amplitude(&cfg.field1) * e * cfg.species.matrix_element_gp_si() / hbar;
    let xi_rp = field_amplitude(&cfg.field2) * e * cfg.species.matrix_element_rp(cfg.rydberg_n) / hbar;
    Ok(ReducedCouplings { omega: xi_gp * xi_rp / (2.0 * cfg.delta1), xi_gp, xi_rp })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPhotonRabi {
    /// Ω_R, rad/s, signed.
    pub value: f64,
    /// Ω̄.
    pub angular_factor: f64,
    /// False when the requested m_j cannot be reached (m_I out of range).
    pub allowed: bool,
}

pub fn two_photon_rabi_detailed(
    cfg: &ExcitationConfig,
    f_g: HalfInt,
    m_g: HalfInt,
    hf: Hyperfine,
) -> Result<TwoPhotonRabi, ExcitationError> {
    let rc = reduced_couplings(cfg)?;
    let af = AngularFactors::new(&cfg.species, f_g, m_g, cfg.field1.polarization, cfg.field2.polarization, cfg.rydberg_mj);
    let m_i = af.m_r - cfg.rydberg_mj;
    let allowed = m_i.abs() <= cfg.species.nuclear_spin && af.rydberg_cg.iter().any(|c| *c != 0.0);
    if !allowed {
        return Ok(TwoPhotonRabi { value: 0.0, angular_factor: 0.0, allowed });
    }
    let bar = af.omega_bar(&detuning_weights(cfg, hf)?);
    Ok(TwoPhotonRabi { value: rc.omega * bar, angular_factor: bar, allowed })
}

/// Ground hyperfine to decoupled Rydberg fine-structure Rabi frequency.
pub fn two_photon_rabi(cfg: &ExcitationConfig, f_g: HalfInt, m_g: HalfInt) -> Result<f64, ExcitationError> {
    Ok(two_photon_rabi_detailed(cfg, f_g, m_g, Hyperfine::Resolved)?.value)
}

/// Rabi frequency from the upper clock state |1⟩.
pub fn qubit_rabi(cfg: &ExcitationConfig, hf: Hyperfine) -> Result<f64, ExcitationError> {
    let (_, upper) = cfg.species.qubit_levels();
    Ok(two_photon_rabi_detailed(cfg, upper, HalfInt::ZERO, hf)?.value)
}

/// Stark shifts on |0⟩, |1⟩ and |r⟩ for one site (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StarkLedger {
    /// Resonant field1 shift of |0⟩.
    pub res_g0: f64,
    /// Resonant field1 shift of |1⟩.
    pub res_g1: f64,
    pub nr_g1: f64,
    pub nr_g2: f64,
    /// Resonant field2 shift of |r⟩.
    pub res_r: f64,
    pub nr_r1: f64,
    pub nr_r2: f64,
    /// Field2 differential qubit shift, a diagnostic.
    #[serde(default)]
    pub diff_1038: f64,
    /// Whether `diff_ground_shift` adds `diff_1038`.
    #[serde(default)]
    pub include_1038: bool,
}

impl StarkLedger {
    /// Total light shift of |1⟩.
    pub fn ground_total(&self) -> f64 {
        self.res_g1 + self.nr_g1 + self.nr_g2
    }

    /// Total light shift of |0⟩.
    pub fn lower_total(&self) -> f64 {
        self.res_g0 + self.nr_g1 + self.nr_g2
    }

    pub fn rydberg_total(&self) -> f64 {
        self.res_r + self.nr_r1 + self.nr_r2
    }
}

/// Non-resonant shift -α|E|²/4ħ with α in SI.
fn nonres_shift(alpha_si: f64, field: &LaserField) -> f64 {
    let e = field_amplitude(field);
    -alpha_si * e * e / (4.0 * constants::HBAR)
}

pub fn stark_ledger(cfg: &ExcitationConfig) -> Result<StarkLedger, ExcitationError> {
    stark_ledger_with(cfg, Hyperfine::Resolved)
}

pub fn stark_ledger_with(cfg: &ExcitationConfig, hf: Hyperfine) -> Result<StarkLedger, ExcitationError> {
    cfg.validate()?;
    let rc = reduced_couplings(cfg)?;
    let sp = &cfg.species;
    let (lower, upper) = sp.qubit_levels();
    let q1 = cfg.field1.polarization;
    let shifts = intermediate_shifts(cfg, hf)?;
    let fps = sp.intermediate.hyperfine_levels();
    let m_r = cfg.rydberg_m(HalfInt::ZERO);
    let wq = sp.qubit_splitting;
    let mut res_g0 = 0.0;
    let mut res_g1 = 0.0;
    let mut res_r = 0.0;
    for (f_p, s) in fps.iter().zip(&shifts) {
        let x1 = ground_xi_tilde(sp, upper, HalfInt::ZERO, q1, *f_p);
        let x0 = ground_xi_tilde(sp, lower, HalfInt::ZERO, q1, *f_p);
        let xr = rydberg_xi_bar(sp, cfg.rydberg_mj, m_r, cfg.field2.polarization, *f_p);
        res_g1 += rc.xi_gp.powi(2) * x1 * x1 / (4.0 * (cfg.delta1 - s));
        res_g0 += rc.xi_gp.powi(2) * x0 * x0 / (4.0 * (cfg.delta1 - wq - s));
        res_r += rc.xi_rp.powi(2) * xr * xr / (4.0 * (cfg.delta1 - s));
    }
    let alpha_g1 = units::polarizability_si(sp.ground_nonres_polarizability(wavelength_tag(sp, 0))?);
    let alpha_g2 = units::polarizability_si(sp.ground_nonres_polarizability(wavelength_tag(sp, 1))?);
    let nr_g1 = nonres_shift(alpha_g1, &cfg.field1);
    let nr_g2 = nonres_shift(alpha_g2, &cfg.field2);
    let nr_r1 = nonres_shift(rydberg_nonres_polarizability(cfg.field1.omega), &cfg.field1);
    let nr_r2 = nonres_shift(rydberg_nonres_polarizability(cfg.field2.omega), &cfg.field2);
    Ok(StarkLedger {
        res_g0,
        res_g1,
        nr_g1,
        nr_g2,
        res_r,
        nr_r1,
        nr_r2,
        diff_1038: sp.ground_diff_1038_fraction * nr_g2,
        include_1038: cfg.include_1038_diff,
    })
}

fn wavelength_tag(sp: &SpeciesData, leg: usize) -> u32 {
    (sp.leg_wavelengths[leg] * 1e9).round() as u32
}

/// Qubit differential light shift Δ^r_11 - Δ^r_01 (plus the optional field2 term).
pub fn diff_ground_shift(ledger: &StarkLedger) -> f64 {
    let extra = if ledger.include_1038 { ledger.diff_1038 } else { 0.0 };
    ledger.res_g1 - ledger.res_g0 + extra
}

/// Δ_diff,gR: positive when |r⟩ is shifted up relative to |1⟩.
pub fn diff_ground_rydberg_shift(ledger: &StarkLedger) -> f64 {
    ledger.rydberg_total() - ledger.ground_total()
}

/// Effective one-photon magnitudes |Ω1|, |Ω2| of the hyperfine-free ladder:
/// Ξ times the root of the summed squared angular factors.
pub fn effective_one_photon(cfg: &ExcitationConfig) -> Result<(f64, f64), ExcitationError> {
    let rc = reduced_couplings(cfg)?;
    let sp = &cfg.species;
    let (_, upper) = sp.qubit_levels();
    let m_r = cfg.rydberg_m(HalfInt::ZERO);
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for f_p in sp.intermediate.hyperfine_levels() {
        s1 += ground_xi_tilde(sp, upper, HalfInt::ZERO, cfg.field1.polarization, f_p).powi(2);
        s2 += rydberg_xi_bar(sp, cfg.rydberg_mj, m_r, cfg.field2.polarization, f_p).powi(2);
    }
    Ok((rc.xi_gp.abs() * s1.sqrt(), rc.xi_rp.abs() * s2.sqrt()))
}

/// Scattered-photon number per π pulse split into (ground leg, Rydberg leg).
pub fn scattering_terms(cfg: &ExcitationConfig, hf: Hyperfine) -> Result<(f64, f64), ExcitationError> {
    let rc = reduced_couplings(cfg)?;
    let sp = &cfg.species;
    let (_, upper) = sp.qubit_levels();
    let m_r = cfg.rydberg_m(HalfInt::ZERO);
    let omega_r = qubit_rabi(cfg, hf)?;
    if omega_r == 0.0 {
        return Err(ExcitationError::InvalidConfig("two-photon Rabi frequency vanishes".into()));
    }
    let t_pi = PI / omega_r.abs();
    let shifts = intermediate_shifts(cfg, hf)?;
    let mut g = 0.0;
    let mut r = 0.0;
    for (f_p, s) in sp.intermediate.hyperfine_levels().iter().zip(&shifts) {
        let d2 = 2.0 * (cfg.delta1 - s).powi(2);
        g += ground_xi_tilde(sp, upper, HalfInt::ZERO, cfg.field1.polarization, *f_p).powi(2) / d2;
        r += rydberg_xi_bar(sp, cfg.rydberg_mj, m_r, cfg.field2.polarization, *f_p).powi(2) / d2;
    }
    let pre = cfg.gamma_p() * t_pi / 2.0;
    Ok((pre * rc.xi_gp.powi(2) * g, pre * rc.xi_rp.powi(2) * r))
}

/// Probability to scatter a photon from the intermediate level during one
/// ground-Rydberg π pulse.
pub fn scattering_probability(cfg: &ExcitationConfig) -> Result<f64, ExcitationError> {
    let (g, r) = scattering_terms(cfg, Hyperfine::Resolved)?;
    Ok(g + r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeemanState {
    pub m_j: HalfInt,
    /// Energy relative to the hyperfine centre of gravity, rad/s.
    pub energy: f64,
    /// Amplitudes on |f_r, m_r⟩.
    pub f_amplitudes: Vec<(HalfInt, f64)>,
    /// Amplitudes on the uncoupled |m_j, m_I = m_r - m_j⟩.
    pub mj_amplitudes: Vec<(HalfInt, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeemanMixing {
    /// μ_B g_j B / ħω_hf.
    pub x: f64,
    pub states: Vec<ZeemanState>,
    /// Energy gap between the two m_j eigenstates, rad/s.
    pub mj_splitting: f64,
    /// |coupling to the unwanted m_j eigenstate| / |coupling to the bare upper f_r state|.
    pub residual_coupling_ratio: f64,
    /// |coupling to the targeted eigenstate / fully decoupled value - 1|.
    pub target_coupling_deviation: f64,
}

/// Rydberg hyperfine plus Zeeman problem in the m_r = m_g + q1 + q2 subspace,
/// nuclear g-factor neglected.
pub fn zeeman_mixing(cfg: &ExcitationConfig) -> Result<ZeemanMixing, ExcitationError> {
    let sp = &cfg.species;
    let i = sp.nuclear_spin;
    let j = sp.rydberg.j;
    let m_r = cfg.rydberg_m(HalfInt::ZERO);
    let a = sp.rydberg_hf_a(cfg.rydberg_n);
    let fs: Vec<HalfInt> = HalfInt::couplings(i, j).filter(|f| m_r.abs() <= *f).collect();
    let mjs: Vec<HalfInt> = j.projections().filter(|mj| (m_r - *mj).abs() <= i).collect();
    let dim = fs.len();
    let energies: Vec<f64> = fs
        .iter()
        .map(|f| crate::atomdata::hyperfine_shift(a, i, j, *f))
        .collect::<Result<_, _>>()?;
    let b = constants::BOHR_MAGNETON * sp.rydberg.g_j * cfg.bias_field / constants::HBAR;
    // Uncoupled-to-coupled CG table u[mj][f].
    let u: Vec<Vec<f64>> = mjs.iter().map(|&mj| fs.iter().map(|&f| cg(j, mj, i, m_r - mj, f, m_r)).collect()).collect();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for r in 0..dim {
        h[(r, r)] += energies[r];
        for c in 0..dim {
            let jz: f64 = mjs.iter().enumerate().map(|(k, mj)| mj.value() * u[k][r] * u[k][c]).sum();
            h[(r, c)] += b * jz;
        }
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
    // Adiabatic labelling: ascending energy matches ascending g_j m_j.
    let mut labels = mjs.clone();
    labels.sort_by(|p, q| (sp.rydberg.g_j * p.value()).total_cmp(&(sp.rydberg.g_j * q.value())));
    let omega_hf = sp.rydberg_hf_splitting(cfg.rydberg_n).abs();
    let x = if omega_hf > 0.0 { b.abs() / omega_hf } else { f64::INFINITY };

    let (_, upper) = sp.qubit_levels();
    let af = AngularFactors::new(sp, upper, HalfInt::ZERO, cfg.field1.polarization, cfg.field2.polarization, cfg.rydberg_mj);
    let tilde_all = af.omega_tilde(&detuning_weights(cfg, Hyperfine::Resolved)?);
    let tilde: Vec<f64> = fs
        .iter()
        .map(|f| af.rydberg_f.iter().position(|g| g == f).map(|k| tilde_all[k]).unwrap_or(0.0))
        .collect();

    let mut states = Vec::with_capacity(dim);
    for (rank, &col) in order.iter().enumerate() {
        let m_j = labels[rank.min(labels.len() - 1)];
        let mut amp: Vec<f64> = (0..dim).map(|r| eig.eigenvectors[(r, col)]).collect();
        let k = mjs.iter().position(|m| *m == m_j).unwrap();
        let overlap: f64 = (0..dim).map(|r| u[k][r] * amp[r]).sum();
        if overlap < 0.0 {
            amp.iter_mut().for_each(|v| *v = -*v);
        }
        let mj_amplitudes = mjs
            .iter()
            .enumerate()
            .map(|(kk, mj)| (*mj, (0..dim).map(|r| u[kk][r] * amp[r]).sum()))
            .collect();
        states.push(ZeemanState {
            m_j,
            energy: eig.eigenvalues[col],
            f_amplitudes: fs.iter().copied().zip(amp).collect(),
            mj_amplitudes,
        });
    }
    let coupling = |s: &ZeemanState| -> f64 { s.f_amplitudes.iter().zip(&tilde).map(|((_, a), t)| a * t).sum() };
    let target = states.iter().find(|s| s.m_j == cfg.rydberg_mj);
    let other = states.iter().find(|s| s.m_j != cfg.rydberg_mj);
    let bare = tilde.last().copied().unwrap_or(0.0);
    let residual_coupling_ratio = match other {
        Some(s) if bare != 0.0 => (coupling(s) / bare).abs(),
        _ => 0.0,
    };
    let decoupled: f64 = fs
        .iter()
        .zip(&tilde)
        .map(|(f, t)| cg(j, cfg.rydberg_mj, i, m_r - cfg.rydberg_mj, *f, m_r) * t)
        .sum();
    let target_coupling_deviation = match target {
        Some(s) if decoupled != 0.0 => (coupling(s) / decoupled - 1.0).abs(),
        _ => f64::NAN,
    };
    let mj_splitting = if dim >= 2 { eig.eigenvalues.max() - eig.eigenvalues.min() } else { 0.0 };
    Ok(ZeemanMixing { x, states, mj_splitting, residual_coupling_ratio, target_coupling_deviation })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedRates {
    pub omega_r: f64,
    pub xi_gp: f64,
    pub xi_rp: f64,
    pub diff_ground: f64,
    pub diff_gr: f64,
    pub scatter_prob_per_pi: f64,
    pub zeeman_x: f64,
    pub mj_splitting: f64,
    pub residual_coupling_ratio: f64,
}

pub fn derived_rates(cfg: &ExcitationConfig) -> Result<DerivedRates, ExcitationError> {
    let rc = reduced_couplings(cfg)?;
    let ledger = stark_ledger(cfg)?;
    let z = zeeman_mixing(cfg)?;
    Ok(DerivedRates {
        omega_r: qubit_rabi(cfg, Hyperfine::Resolved)?,
        xi_gp: rc.xi_gp,
        xi_rp: rc.xi_rp,
        diff_ground: diff_ground_shift(&ledger),
        diff_gr: diff_ground_rydberg_shift(&ledger),
        scatter_prob_per_pi: scattering_probability(cfg)?,
        zeeman_x: z.x,
        mj_splitting: z.mj_splitting,
        residual_coupling_ratio: z.residual_coupling_ratio,
    })
}

/// Measured Ramsey and Rabi frequencies (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub diff_ground: f64,
    pub omega_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub power1: f64,
    pub power2: f64,
    /// The template with the fitted powers.
    pub config: ExcitationConfig,
    pub ledger: StarkLedger,
    /// Implied Δ_diff,gR, the consistency output.
    pub diff_gr: f64,
    pub omega_r: f64,
    pub scatter_prob_per_pi: f64,
    pub iterations: usize,
}

const POWER_MIN: f64 = 1e-12;
const POWER_MAX: f64 = 10.0;

/// Root of a monotone function on [POWER_MIN, POWER_MAX]: log-space bisection,
/// then secant polish to 1e-10 relative.
fn solve_power(f: impl Fn(f64) -> Result<f64, ExcitationError>, what: &str) -> Result<f64, ExcitationError> {
    let (mut lo, mut hi) = (POWER_MIN, POWER_MAX);
    let (mut flo, fhi) = (f(lo)?, f(hi)?);
    if flo == 0.0 {
        return Ok(lo);
    }
    if flo.signum() == fhi.signum() {
        return Err(ExcitationError::Calibration(format!(
            "no {what} in [{POWER_MIN:e}, {POWER_MAX}] W reproduces the measurement (residuals {flo:.4e}, {fhi:.4e} rad/s)"
        )));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let fm = f(mid)?;
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-6 {
            break;
        }
    }
    let (mut x0, mut x1) = (lo, hi);
    let (mut f0, mut f1) = (f(x0)?, f(x1)?);
    for _ in 0..50 {
        if f1 == f0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if !(x2 > 0.0) || !x2.is_finite() {
            break;
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f(x1)?;
        if ((x1 - x0) / x1).abs() < 1e-12 || f1 == 0.0 {
            break;
        }
    }
    // Keep the polish only if it stayed inside the bracket.
    if x1 >= lo * (1.0 - 1e-9) && x1 <= hi * (1.0 + 1e-9) {
        Ok(x1)
    } else {
        Ok((lo * hi).sqrt())
    }
}

/// Infer both beam powers from a Ramsey (Δ_diff,g) and a Rabi (Ω_R)
/// measurement. Powers in `template` are used only as a starting point.
pub fn calibrate_fields(measured: &Measured, template: &ExcitationConfig) -> Result<Calibration, ExcitationError> {
    if !(measured.diff_ground > 0.0) || !(measured.omega_r > 0.0) {
        return Err(ExcitationError::Calibration(format!(
            "measured values must be positive (Δ_diff,g = {:.4} MHz, Ω_R = {:.4} MHz)",
            units::to_mhz(measured.diff_ground),
            units::to_mhz(measured.omega_r)
        )));
    }
    template.validate()?;
    let mut p1 = template.field1.power.max(1e-6);
    let mut p2 = template.field2.power.max(1e-3);
    let rounds = if template.include_1038_diff { 50 } else { 1 };
    let mut iterations = 0;
    for _ in 0..rounds {
        iterations += 1;
        let new_p1 = solve_power(
            |p| Ok(diff_ground_shift(&stark_ledger(&template.with_powers(p, p2))?) - measured.diff_ground),
            "459 nm power",
        )?;
        let new_p2 = solve_power(
            |p| Ok(qubit_rabi(&template.with_powers(new_p1, p), Hyperfine::Resolved)?.abs() - measured.omega_r),
            "1038 nm power",
        )?;
        let done = ((new_p1 - p1) / new_p1).abs() < 1e-12 && ((new_p2 - p2) / new_p2).abs() < 1e-12;
        p1 = new_p1;
        p2 = new_p2;
        if done {
            break;
        }
    }
    let config = template.with_powers(p1, p2);
    let ledger = stark_ledger(&config)?;
    Ok(Calibration {
        power1: p1,
        power2: p2,
        diff_gr: diff_ground_rydberg_shift(&ledger),
        omega_r: qubit_rabi(&config, Hyperfine::Resolved)?,
        scatter_prob_per_pi: scattering_probability(&config)?,
        ledger,
        config,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn operating_point() -> ExcitationConfig {
        ExcitationConfig::cesium(
            units::microwatt(22.0),
            units::milliwatt(1.9),
            units::micron(3.0),
            units::micron(3.7),
            units::ghz(0.83),
            82,
        )
    }

    #[test]
    fn zero_power_zero_amplitude() {
        let f = LaserField::new(0.0, 1e-6, 1, 1e15).unwrap();
        assert_eq!(field_amplitude(&f), 0.0);
    }

    #[test]
    fn bad_fields_rejected() {
        assert!(LaserField::new(-1.0, 1e-6, 1, 1e15).is_err());
        assert!(LaserField::new(1.0, 0.0, 1, 1e15).is_err());
        assert!(LaserField::new(1.0, 1e-6, 2, 1e15).is_err());
    }

    #[test]
    fn zero_detuning_is_singular() {
        let mut c = operating_point();
        c.delta1 = 0.0;
        assert!(matches!(reduced_couplings(&c), Err(ExcitationError::ZeroDetuning)));
    }

    #[test]
    fn resonance_collision_detected() {
        let mut c = operating_point();
        c.delta1 = c.species.intermediate.hyperfine_shift(HalfInt::integer(4)).unwrap() + 1.0;
        assert!(matches!(stark_ledger(&c), Err(ExcitationError::ResonanceCollision { .. })));
    }

    #[test]
    fn small_detuning_warns() {
        let mut c = operating_point();
        c.delta1 = units::mhz(30.0);
        let w = c.validate().unwrap();
        assert!(matches!(w.as_slice(), [ExcitationWarning::SmallDetuning { .. }]));
    }

    #[test]
    fn zero_power_ledger_vanishes() {
        let c = operating_point().with_powers(0.0, 0.0);
        let l = stark_ledger(&c).unwrap();
        for v in [l.res_g0, l.res_g1, l.nr_g1, l.nr_g2, l.res_r, l.nr_r1, l.nr_r2] {
            assert_eq!(v, 0.0);
        }
        assert_eq!(diff_ground_shift(&l), 0.0);
    }
}
