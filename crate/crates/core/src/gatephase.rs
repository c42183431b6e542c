//! Gate-phase ledger for the π(control) / 2π(target) / π(control) blockade
//! sequence, the C_{Z,φ̄} matrix, and the parameter solver that recovers an
//! ideal C_Z.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::{self, Unitary4};
use crate::excitation::{
    self, diff_ground_rydberg_shift, effective_one_photon, stark_ledger_with, ExcitationConfig, ExcitationError, Hyperfine,
    StarkLedger,
};
use crate::units;

#[derive(Debug, Error)]
pub enum GateError {
    #[error(transparent)]
    Excitation(#[from] ExcitationError),
    #[error("two-photon Rabi frequency is zero; t_π undefined")]
    ZeroRabi,
    #[error("invalid gate context: {0}")]
    InvalidContext(String),
    #[error("no positive ratio q solves the φ_R condition (discriminant {discriminant:.6e})")]
    NoRatioRoot { discriminant: f64 },
    #[error("no feasible gap: {0}")]
    NoFeasibleGap(String),
}

/// Which Ω_R sets t_π for the phase ledger.
///
/// The phase formulas are derived for a ladder without intermediate hyperfine
/// structure, and the published phase values follow from that timing.
/// `HyperfineResolved` uses the hyperfine-resolved Ω_R instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RabiTiming {
    #[default]
    HyperfineFree,
    HyperfineResolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SitePhaseInputs {
    pub ledger: StarkLedger,
    /// Signed two-photon Rabi frequency, rad/s.
    pub omega_r: f64,
    pub omega1_abs: f64,
    pub omega2_abs: f64,
    /// π/|Ω_R|, s.
    pub t_pi: f64,
}

impl SitePhaseInputs {
    pub fn new(ledger: StarkLedger, omega_r: f64, omega1_abs: f64, omega2_abs: f64) -> Result<Self, GateError> {
        if omega_r == 0.0 || !omega_r.is_finite() {
            return Err(GateError::ZeroRabi);
        }
        Ok(SitePhaseInputs { ledger, omega_r, omega1_abs, omega2_abs, t_pi: PI / omega_r.abs() })
    }

    /// Hyperfine-resolved ledger with the chosen Rabi timing.
    pub fn from_excitation(cfg: &ExcitationConfig, timing: RabiTiming) -> Result<Self, GateError> {
        Self::from_excitation_with(cfg, Hyperfine::Resolved, timing)
    }

    pub fn from_excitation_with(cfg: &ExcitationConfig, ledger_hf: Hyperfine, timing: RabiTiming) -> Result<Self, GateError> {
        let ledger = stark_ledger_with(cfg, ledger_hf)?;
        let hf = match timing {
            RabiTiming::HyperfineFree => Hyperfine::Collapsed,
            RabiTiming::HyperfineResolved => Hyperfine::Resolved,
        };
        let omega_r = excitation::qubit_rabi(cfg, hf)?;
        let (o1, o2) = effective_one_photon(cfg)?;
        Self::new(ledger, omega_r, o1, o2)
    }

    /// Site with no light: all shifts zero, t_π from the given Rabi frequency.
    pub fn dark(omega_r: f64) -> Result<Self, GateError> {
        Self::new(StarkLedger::default(), omega_r, 0.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateContext {
    pub control: SitePhaseInputs,
    pub target: SitePhaseInputs,
    /// s.
    pub t_gap: f64,
    /// Blockade shift 𝖡, rad/s. May be infinite.
    pub blockade_b: f64,
}

impl GateContext {
    pub fn new(control: SitePhaseInputs, target: SitePhaseInputs, t_gap: f64, blockade_b: f64) -> Result<Self, GateError> {
        let ctx = GateContext { control, target, t_gap, blockade_b };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<(), GateError> {
        if !(self.t_gap >= 0.0) || !self.t_gap.is_finite() {
            return Err(GateError::InvalidContext(format!("t_gap = {} s must be finite and >= 0", self.t_gap)));
        }
        if !(self.blockade_b > 0.0) {
            return Err(GateError::InvalidContext(format!("blockade shift {} must be > 0", self.blockade_b)));
        }
        Ok(())
    }
}

/// The four diagonal phases plus their unwrapped constituents (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatePhases {
    pub phi00: f64,
    pub phi01: f64,
    pub phi10: f64,
    pub phi11: f64,
    pub phi_r_c: f64,
    pub phi_r_t: f64,
    pub phi_hf_c: f64,
    pub phi_hf_t: f64,
    pub phi_gap: f64,
    pub phi_bl: f64,
}

impl GatePhases {
    /// Phases given directly; constituents are left at zero.
    pub fn from_values(phi00: f64, phi01: f64, phi10: f64, phi11: f64) -> Self {
        GatePhases {
            phi00,
            phi01,
            phi10,
            phi11,
            phi_r_c: 0.0,
            phi_r_t: 0.0,
            phi_hf_c: 0.0,
            phi_hf_t: 0.0,
            phi_gap: 0.0,
            phi_bl: 0.0,
        }
    }

    pub fn values(&self) -> [f64; 4] {
        [self.phi00, self.phi01, self.phi10, self.phi11]
    }

    /// φ00 - φ01 - φ10 + φ11 wrapped; entangling unless this is 0 mod 2π.
    pub fn entangling_phase(&self) -> f64 {
        wrap(self.phi00 - self.phi01 - self.phi10 + self.phi11)
    }

    /// Wrapped deviation of φ01+φ10-φ00-φ11 from π-φ_BL.
    pub fn constraint_residual(&self) -> f64 {
        wrap(self.phi01 + self.phi10 - self.phi00 - self.phi11 - (PI - self.phi_bl))
    }
}

/// Wrap to (-π, π].
pub fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// 2π-pulse ground phase from the Stark-shift form:
/// π - (Δ^r_11 + Δ^nr_g1 + Δ^nr_g2)·2t_π.
pub fn phi_r(site: &SitePhaseInputs) -> f64 {
    PI - site.ledger.ground_total() * 2.0 * site.t_pi
}

/// The Rabi-ratio form π[1 - |Ω1/Ω2| sign(Δ1)] - (Δ^nr_g1 + Δ^nr_g2)·2t_π.
/// Agrees with [`phi_r`] only for a hyperfine-free ledger.
pub fn phi_r_ratio_form(site: &SitePhaseInputs, detuning_sign: f64) -> f64 {
    PI * (1.0 - (site.omega1_abs / site.omega2_abs) * detuning_sign.signum())
        - (site.ledger.nr_g1 + site.ledger.nr_g2) * 2.0 * site.t_pi
}

/// Phase on |0⟩ over one site's pulses.
pub fn phi_hf(site: &SitePhaseInputs) -> f64 {
    -site.ledger.lower_total() * 2.0 * site.t_pi
}

/// Phase of the control Rydberg amplitude while it waits out the gaps and
/// the target 2π pulse: +Δ_diff,gR,c · 2(t_gap + t_π,t).
///
/// The lasers are tuned to the light-shifted resonance, so in the laser frame
/// the dark Rydberg level sits at -Δ_diff,gR and its amplitude advances as
/// e^{+iΔ_diff,gR t}.
pub fn phi_gap(ctx: &GateContext) -> f64 {
    diff_ground_rydberg_shift(&ctx.control.ledger) * 2.0 * (ctx.t_gap + ctx.target.t_pi)
}

/// πΩ_R/(2𝖡) with the target Rabi frequency.
pub fn phi_bl(ctx: &GateContext) -> f64 {
    PI * ctx.target.omega_r.abs() / (2.0 * ctx.blockade_b)
}

pub fn assemble_phases(ctx: &GateContext) -> GatePhases {
    let phi_r_c = phi_r(&ctx.control);
    let phi_r_t = phi_r(&ctx.target);
    let phi_hf_c = phi_hf(&ctx.control);
    let phi_hf_t = phi_hf(&ctx.target);
    let phi_gap = phi_gap(ctx);
    let phi_bl = phi_bl(ctx);
    GatePhases {
        phi00: wrap(phi_hf_c + phi_hf_t),
        phi01: wrap(phi_hf_c + phi_r_t),
        phi10: wrap(phi_r_c + phi_gap + phi_hf_t),
        phi11: wrap(-PI + phi_r_c + phi_r_t + phi_gap + phi_bl),
        phi_r_c,
        phi_r_t,
        phi_hf_c,
        phi_hf_t,
        phi_gap,
        phi_bl,
    }
}

/// diag(e^{iφ00}, e^{iφ01}, e^{iφ10}, e^{iφ11}).
pub fn cz_matrix(phases: &GatePhases) -> Unitary4 {
    Unitary4::from_diagonal_phases(phases.values())
}

pub fn is_entangling(phases: &GatePhases) -> bool {
    phases.entangling_phase().abs() > 1e-9
}

/// a, b, c, d with Δ^r_11 = a|Ω1|², Δ^nr_g1 = b|Ω1|², Δ^nr_g2 = c|Ω2|²,
/// t_π = πd/|Ω1Ω2|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

pub fn ratio_coefficients(site: &SitePhaseInputs) -> Result<RatioCoefficients, GateError> {
    let (o1, o2) = (site.omega1_abs, site.omega2_abs);
    if !(o1 > 0.0 && o2 > 0.0) {
        return Err(GateError::InvalidContext("one-photon couplings must be positive".into()));
    }
    Ok(RatioCoefficients {
        a: site.ledger.res_g1 / (o1 * o1),
        b: site.ledger.nr_g1 / (o1 * o1),
        c: site.ledger.nr_g2 / (o2 * o2),
        d: site.t_pi * o1 * o2 / PI,
    })
}

/// Positive roots q = |Ω2/Ω1| giving φ_R = nπ, smallest first.
///
/// With t_π = πd/|Ω1Ω2| the condition reads 1 - n = 2d[(a+b)/q + cq],
/// i.e. 2cd q² + (n-1) q + 2(a+b)d = 0.
pub fn solve_ratio_q(k: &RatioCoefficients, n: i64) -> Result<Vec<f64>, GateError> {
    let qa = 2.0 * k.c * k.d;
    let qb = (n - 1) as f64;
    let qc = 2.0 * (k.a + k.b) * k.d;
    let mut roots = Vec::new();
    if qa.abs() < 1e-300 {
        if qb != 0.0 {
            roots.push(-qc / qb);
        }
        let disc = qb * qb;
        roots.retain(|q| *q > 0.0 && q.is_finite());
        if roots.is_empty() {
            return Err(GateError::NoRatioRoot { discriminant: disc });
        }
        return Ok(roots);
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Err(GateError::NoRatioRoot { discriminant: disc });
    }
    let s = disc.sqrt();
    // Cancellation-free pair.
    let sgn = if qb >= 0.0 { 1.0 } else { -1.0 };
    let t = -0.5 * (qb + sgn * s);
    let mut cand = vec![t / qa];
    if t != 0.0 {
        cand.push(qc / t);
    }
    cand.retain(|q| *q > 0.0 && q.is_finite());
    cand.sort_by(f64::total_cmp);
    cand.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * y.abs());
    if cand.is_empty() {
        return Err(GateError::NoRatioRoot { discriminant: disc });
    }
    Ok(cand)
}

/// Hardware bounds for the gap time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapLimits {
    pub min: f64,
    pub max: f64,
}

impl Default for GapLimits {
    fn default() -> Self {
        GapLimits { min: units::microsecond(0.5), max: units::microsecond(100.0) }
    }
}

/// How n′ in φ_gap = 2n′π is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NPrime {
    Fixed(i64),
    /// Smallest feasible |n′|.
    Auto,
    /// Smallest feasible |n′| that is even.
    AutoEven,
    /// Smallest feasible |n′| that is odd.
    AutoOdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapSolution {
    pub t_gap: f64,
    pub n_prime: i64,
    /// Δ_diff,gR vanished, so every gap works; the minimum is returned.
    pub degenerate: bool,
}

/// t_gap with t_gap + t_π,t = n′π/Δ_diff,gR, so that φ_gap ≡ 0 mod 2π.
pub fn solve_t_gap(ctx: &GateContext, choice: NPrime, limits: &GapLimits) -> Result<GapSolution, GateError> {
    let delta = diff_ground_rydberg_shift(&ctx.control.ledger);
    let tp = ctx.target.t_pi;
    if delta == 0.0 || (delta * (limits.max + tp)).abs() < 1e-15 {
        return Ok(GapSolution { t_gap: limits.min, n_prime: 0, degenerate: true });
    }
    let gap_for = |n: i64| n as f64 * PI / delta - tp;
    let check = |n: i64| -> Result<GapSolution, GateError> {
        let t = gap_for(n);
        if t < limits.min - 1e-18 || t > limits.max {
            return Err(GateError::NoFeasibleGap(format!(
                "n′ = {n} gives t_gap = {:.4} μs outside [{:.3}, {:.3}] μs",
                t * 1e6,
                limits.min * 1e6,
                limits.max * 1e6
            )));
        }
        Ok(GapSolution { t_gap: t, n_prime: n, degenerate: false })
    };
    let parity_ok = |n: i64| match choice {
        NPrime::AutoEven => n % 2 == 0,
        NPrime::AutoOdd => n % 2 != 0,
        _ => true,
    };
    match choice {
        NPrime::Fixed(n) => check(n),
        _ => {
            let sign = delta.signum() as i64;
            let mut m: i64 = 1;
            loop {
                let n = sign * m;
                let t = gap_for(n);
                if t > limits.max {
                    return Err(GateError::NoFeasibleGap(format!(
                        "smallest admissible n′ needs t_gap > {:.3} μs (Δ_diff,gR = {:.4} MHz)",
                        limits.max * 1e6,
                        units::to_mhz(delta)
                    )));
                }
                if t >= limits.min && parity_ok(n) {
                    return Ok(GapSolution { t_gap: t, n_prime: n, degenerate: false });
                }
                m += 1;
            }
        }
    }
}

/// Z rotations R_z(θ) = diag(e^{iθ/2}, e^{-iθ/2}) on each qubit that bring
/// C_{Z,φ̄} to diag(1,-1,-1,-1) up to a global phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RzCorrection {
    pub theta_c: f64,
    pub theta_t: f64,
    /// Wrapped distance of φ00 - φ01 - φ10 + φ11 from π.
    pub defect: f64,
    /// |e^{i·defect} - 1|, the operator-norm distance left after correction.
    pub residual: f64,
}

pub fn rz_correction(phases: &GatePhases) -> RzCorrection {
    let theta_c = wrap(phases.phi11 - phases.phi01);
    let theta_t = wrap(phases.phi11 - phases.phi10);
    let defect = wrap(phases.phi00 - phases.phi01 - phases.phi10 + phases.phi11 + PI);
    let residual = (num_complex::Complex64::from_polar(1.0, defect) - 1.0).norm();
    RzCorrection { theta_c, theta_t, defect, residual }
}

/// (R_z(θ_c) ⊗ R_z(θ_t)) · C_{Z,φ̄}.
pub fn apply_rz(phases: &GatePhases, rz: &RzCorrection) -> Unitary4 {
    let r = circuits::kron(&circuits::rz(rz.theta_c), &circuits::rz(rz.theta_t));
    r * cz_matrix(phases)
}

/// Result of tuning one site configuration, used at both sites, for an ideal C_Z.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealSolution {
    pub q: f64,
    pub n: i64,
    pub config: ExcitationConfig,
    pub gap: GapSolution,
    pub phases: GatePhases,
    pub rz: RzCorrection,
    pub corrected: Unitary4,
    /// Operator-norm distance of the corrected gate from C_Z, global phase removed.
    pub distance: f64,
}

/// Rescale P2 so that φ_R = nπ, pick t_gap with the parity that pairs with n,
/// then apply the Z corrections.
pub fn solve_ideal(
    cfg: &ExcitationConfig,
    n: i64,
    ledger_hf: Hyperfine,
    timing: RabiTiming,
    limits: &GapLimits,
    blockade_b: f64,
) -> Result<IdealSolution, GateError> {
    let site0 = SitePhaseInputs::from_excitation_with(cfg, ledger_hf, timing)?;
    let k = ratio_coefficients(&site0)?;
    let q = solve_ratio_q(&k, n)?[0];
    let q0 = site0.omega2_abs / site0.omega1_abs;
    let mut tuned = cfg.clone();
    tuned.field2.power = cfg.field2.power * (q / q0).powi(2);
    let site = SitePhaseInputs::from_excitation_with(&tuned, ledger_hf, timing)?;
    let mut ctx = GateContext::new(site, site, limits.min, blockade_b)?;
    let choice = if n % 2 == 0 { NPrime::AutoOdd } else { NPrime::AutoEven };
    let gap = solve_t_gap(&ctx, choice, limits)?;
    ctx.t_gap = gap.t_gap;
    let phases = assemble_phases(&ctx);
    let rz = rz_correction(&phases);
    let corrected = apply_rz(&phases, &rz);
    let distance = circuits::distance_up_to_global_phase(&corrected, &circuits::cz_ideal());
    Ok(IdealSolution { q, n, config: tuned, gap, phases, rz, corrected, distance })
}
