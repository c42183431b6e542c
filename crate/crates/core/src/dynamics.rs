//! Time-dependent Schrödinger solver for the blockade gate sequence.
//!
//! Each atom carries the ladder {|0⟩, |1⟩, |p⟩, |r⟩} in the frame rotating
//! with its own lasers: |1⟩ at zero, |0⟩ at -ω_q, |p⟩ at -Δ1 and |r⟩ at
//! -δ_L, where δ_L is the two-photon laser detuning. Couplings are real, so
//! the RWA Hamiltonian is real symmetric. Non-resonant polarizability shifts
//! are injected as diagonal terms. The two-atom space is the tensor product
//! with index 4·control + target plus the blockade shift on |rr⟩.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::{fit_sinusoid, SinusoidFit};
use crate::excitation::{self, ExcitationConfig, ExcitationError, Hyperfine};
use crate::gatephase::{wrap, GatePhases, SitePhaseInputs};
use crate::excitation::StarkLedger;

type C64 = Complex64;

pub const ZERO: usize = 0;
pub const ONE: usize = 1;
pub const P: usize = 2;
pub const R: usize = 3;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("norm drift {drift:.3e} exceeds 1e-9 (column {column}, {steps} RK steps, last step {last_step:.3e} s)")]
    NormDrift { drift: f64, column: usize, steps: usize, last_step: f64 },
    #[error("step size underflow at t = {t:.6e} s (h = {h:.3e} s)")]
    StepUnderflow { t: f64, h: f64 },
    #[error("invalid pulse segment: {0}")]
    InvalidSegment(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("initial state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error(transparent)]
    Excitation(#[from] ExcitationError),
    #[error("gate phase inputs: {0}")]
    Gate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Site {
    Control,
    Target,
    Both,
    None,
}

impl Site {
    fn lights(self, atom: usize) -> bool {
        matches!((self, atom), (Site::Both, _) | (Site::Control, 0) | (Site::Target, 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    pub site: Site,
    /// Length of the field1 pulse, s.
    pub duration: f64,
    /// Raised-cosine rise and fall time, s. Zero is a square pulse.
    pub rise_time: f64,
    /// Envelope scales for field1 and field2, in [0, 1].
    pub amp1: f64,
    pub amp2: f64,
    /// Laser frequency offsets while the site is lit, rad/s.
    pub delta1: f64,
    pub delta2: f64,
    /// Field2 stays on this much longer (or shorter if negative) than field1, s.
    pub leg2_lead_lag: f64,
}

impl PulseSegment {
    pub fn square(site: Site, duration: f64) -> Self {
        PulseSegment { site, duration, rise_time: 0.0, amp1: 1.0, amp2: 1.0, delta1: 0.0, delta2: 0.0, leg2_lead_lag: 0.0 }
    }

    pub fn idle(duration: f64) -> Self {
        PulseSegment { amp1: 0.0, amp2: 0.0, ..Self::square(Site::None, duration) }
    }

    pub fn ramped(site: Site, duration: f64, rise_time: f64) -> Self {
        PulseSegment { rise_time, ..Self::square(site, duration) }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: String| Err(DynamicsError::InvalidSegment(m));
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return bad(format!("duration {} must be >= 0", self.duration));
        }
        if !(self.rise_time >= 0.0) || self.rise_time > self.duration / 2.0 * (1.0 + 1e-12) {
            return bad(format!("rise time {} must lie in [0, duration/2]", self.rise_time));
        }
        if !(0.0..=1.0).contains(&self.amp1) || !(0.0..=1.0).contains(&self.amp2) {
            return bad("amplitudes must lie in [0, 1]".into());
        }
        if self.duration + self.leg2_lead_lag < 2.0 * self.rise_time - 1e-18 {
            return bad("field2 pulse shorter than its ramps".into());
        }
        Ok(())
    }

    /// Time the segment occupies.
    pub fn span(&self) -> f64 {
        self.duration.max(self.duration + self.leg2_lead_lag)
    }

    fn leg2_length(&self) -> f64 {
        self.duration + self.leg2_lead_lag
    }

    /// (f1, f2) envelope values at time t within the segment.
    pub fn envelopes(&self, t: f64) -> (f64, f64) {
        (self.amp1 * ramp(t, self.duration, self.rise_time), self.amp2 * ramp(t, self.leg2_length(), self.rise_time))
    }

    fn breakpoints(&self) -> Vec<f64> {
        let r = self.rise_time;
        let mut b = vec![0.0, self.span()];
        for len in [self.duration, self.leg2_length()] {
            b.extend([len, (len - r).max(0.0), r.min(len)]);
        }
        b.retain(|x| *x >= 0.0 && *x <= self.span());
        b.sort_by(f64::total_cmp);
        b.dedup_by(|x, y| (*x - *y).abs() <= 1e-18);
        b
    }
}

/// Raised-cosine edges of length `rise` on a pulse of length `len`.
fn ramp(t: f64, len: f64, rise: f64) -> f64 {
    if t < 0.0 || t > len || len <= 0.0 {
        return 0.0;
    }
    if rise <= 0.0 {
        return 1.0;
    }
    let edge = |s: f64| (PI * s / (2.0 * rise)).sin().powi(2);
    if t < rise {
        edge(t)
    } else if t > len - rise {
        edge(len - t)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    #[default]
    FullLadder,
    AdiabaticTwoLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Blockade {
    /// No amplitude ever reaches |rr⟩.
    Perfect,
    /// Shift on |rr⟩, rad/s.
    Finite(f64),
}

/// One atom's couplings and shifts at full envelope (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomLadder {
    /// |1⟩ to |p⟩.
    pub omega1: f64,
    /// |0⟩ to |p⟩.
    pub omega1_lower: f64,
    /// |p⟩ to |r⟩.
    pub omega2: f64,
    pub delta1: f64,
    pub omega_q: f64,
    pub nr_g1: f64,
    pub nr_g2: f64,
    pub nr_r1: f64,
    pub nr_r2: f64,
    /// Resonant |r⟩ shift not produced by the single-p ladder, scaled by f2².
    pub extra_r: f64,
    /// Two-photon laser detuning δ_L.
    pub laser_detuning: f64,
}

impl AtomLadder {
    /// Ladder with δ_L set to the light-shifted resonance Δ_diff,gR.
    #[allow(clippy::too_many_arguments)]
    pub fn resonant(
        omega1: f64,
        omega1_lower: f64,
        omega2: f64,
        delta1: f64,
        omega_q: f64,
        nr: [f64; 4],
    ) -> Self {
        let mut a = AtomLadder {
            omega1,
            omega1_lower,
            omega2,
            delta1,
            omega_q,
            nr_g1: nr[0],
            nr_g2: nr[1],
            nr_r1: nr[2],
            nr_r2: nr[3],
            extra_r: 0.0,
            laser_detuning: 0.0,
        };
        a.laser_detuning = excitation::diff_ground_rydberg_shift(&a.ledger());
        a
    }

    /// Effective single-p ladder for an excitation config. `Collapsed` takes
    /// the hyperfine-free couplings; `Resolved` matches Ω_R, Δ^r_11, Δ^r_01
    /// and Δ^r_R2 of the hyperfine-resolved ledger.
    pub fn from_excitation(cfg: &ExcitationConfig, hf: Hyperfine) -> Result<Self, DynamicsError> {
        let ledger = excitation::stark_ledger_with(cfg, hf)?;
        let wq = cfg.species.qubit_splitting;
        let d1 = cfg.delta1;
        let nr = [ledger.nr_g1, ledger.nr_g2, ledger.nr_r1, ledger.nr_r2];
        let mut a = match hf {
            Hyperfine::Collapsed => {
                let (o1, o2) = excitation::effective_one_photon(cfg)?;
                Self::resonant(o1, o1, o2, d1, wq, nr)
            }
            Hyperfine::Resolved => {
                let omega_r = excitation::qubit_rabi(cfg, Hyperfine::Resolved)?.abs();
                let o1 = (4.0 * d1 * ledger.res_g1).abs().sqrt();
                let o1_lower = (4.0 * (d1 - wq) * ledger.res_g0).abs().sqrt();
                let o2 = if o1 > 0.0 { 2.0 * d1.abs() * omega_r / o1 } else { 0.0 };
                let mut a = Self::resonant(o1, o1_lower, o2, d1, wq, nr);
                a.extra_r = ledger.res_r - o2 * o2 / (4.0 * d1);
                a
            }
        };
        a.laser_detuning = excitation::diff_ground_rydberg_shift(&a.ledger());
        Ok(a)
    }

    /// Stark ledger implied by this ladder.
    pub fn ledger(&self) -> StarkLedger {
        StarkLedger {
            res_g0: self.omega1_lower.powi(2) / (4.0 * (self.delta1 - self.omega_q)),
            res_g1: self.omega1.powi(2) / (4.0 * self.delta1),
            nr_g1: self.nr_g1,
            nr_g2: self.nr_g2,
            res_r: self.omega2.powi(2) / (4.0 * self.delta1) + self.extra_r,
            nr_r1: self.nr_r1,
            nr_r2: self.nr_r2,
            diff_1038: 0.0,
            include_1038: false,
        }
    }

    /// Ω1Ω2/2Δ1.
    pub fn omega_r(&self) -> f64 {
        self.omega1 * self.omega2 / (2.0 * self.delta1)
    }

    pub fn site_inputs(&self) -> Result<SitePhaseInputs, DynamicsError> {
        SitePhaseInputs::new(self.ledger(), self.omega_r(), self.omega1, self.omega2)
            .map_err(|e| DynamicsError::Gate(e.to_string()))
    }

    /// 4×4 single-atom Hamiltonian. `lit` says whether this atom's lasers are on
    /// in the current segment; `f1`, `f2` are the envelopes.
    pub fn hamiltonian(&self, flavor: Flavor, lit: bool, f1: f64, f2: f64, d1: f64, d2: f64) -> [[f64; 4]; 4] {
        let mut h = [[0.0; 4]; 4];
        let (f1, f2, d1, d2) = if lit { (f1, f2, d1, d2) } else { (0.0, 0.0, 0.0, 0.0) };
        let nr_g = f1 * f1 * self.nr_g1 + f2 * f2 * self.nr_g2;
        let nr_r = f1 * f1 * self.nr_r1 + f2 * f2 * self.nr_r2 + f2 * f2 * self.extra_r;
        match flavor {
            Flavor::FullLadder => {
                h[ZERO][ZERO] = -self.omega_q + nr_g;
                h[ONE][ONE] = nr_g;
                h[P][P] = -(self.delta1 + d1);
                h[R][R] = -(self.laser_detuning + d1 + d2) + nr_r;
                h[ONE][P] = f1 * self.omega1 / 2.0;
                h[ZERO][P] = f1 * self.omega1_lower / 2.0;
                h[P][R] = f2 * self.omega2 / 2.0;
            }
            Flavor::AdiabaticTwoLevel => {
                let dd = self.delta1 + d1;
                let res_g1 = f1 * f1 * self.omega1.powi(2) / (4.0 * dd);
                let res_g0 = f1 * f1 * self.omega1_lower.powi(2) / (4.0 * (dd - self.omega_q));
                let res_r = f2 * f2 * self.omega2.powi(2) / (4.0 * (self.delta1 - d2));
                h[ZERO][ZERO] = res_g0 + nr_g;
                h[ONE][ONE] = res_g1 + nr_g;
                h[P][P] = -(self.delta1 + d1);
                h[R][R] = -(self.laser_detuning + d1 + d2) + nr_r + res_r;
                h[ONE][R] = f1 * f2 * self.omega1 * self.omega2 / (4.0 * dd);
            }
        }
        for r in 0..4 {
            for c in 0..r {
                h[r][c] = h[c][r];
            }
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderModel {
    /// One atom, or control then target.
    pub atoms: Vec<AtomLadder>,
    pub blockade: Blockade,
    pub flavor: Flavor,
}

impl LadderModel {
    pub fn single(atom: AtomLadder, flavor: Flavor) -> Self {
        LadderModel { atoms: vec![atom], blockade: Blockade::Perfect, flavor }
    }

    pub fn pair(control: AtomLadder, target: AtomLadder, blockade: Blockade, flavor: Flavor) -> Self {
        LadderModel { atoms: vec![control, target], blockade, flavor }
    }

    pub fn dim(&self) -> usize {
        4usize.pow(self.atoms.len() as u32)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.atoms.is_empty() || self.atoms.len() > 2 {
            return Err(DynamicsError::InvalidModel(format!("{} atoms; 1 or 2 supported", self.atoms.len())));
        }
        if let Blockade::Finite(b) = self.blockade {
            if !b.is_finite() {
                return Err(DynamicsError::InvalidModel("finite blockade must be finite; use Perfect".into()));
            }
        }
        for a in &self.atoms {
            if a.delta1 == 0.0 {
                return Err(DynamicsError::InvalidModel("Δ1 = 0".into()));
            }
        }
        Ok(())
    }
}

/// Hamiltonian at time t inside `segment` (real symmetric, rad/s).
pub fn build_hamiltonian(model: &LadderModel, segment: &PulseSegment, t: f64) -> DMatrix<f64> {
    let (f1, f2) = segment.envelopes(t);
    let hs: Vec<[[f64; 4]; 4]> = model
        .atoms
        .iter()
        .enumerate()
        .map(|(k, a)| a.hamiltonian(model.flavor, segment.site.lights(k), f1, f2, segment.delta1, segment.delta2))
        .collect();
    if hs.len() == 1 {
        return DMatrix::from_fn(4, 4, |r, c| hs[0][r][c]);
    }
    let (hc, ht) = (&hs[0], &hs[1]);
    let rr = 4 * R + R;
    let mut h = DMatrix::from_fn(16, 16, |r, c| {
        let (rc, rt, cc, ct) = (r / 4, r % 4, c / 4, c % 4);
        let mut v = 0.0;
        if rt == ct {
            v += hc[rc][cc];
        }
        if rc == cc {
            v += ht[rt][ct];
        }
        v
    });
    match model.blockade {
        Blockade::Finite(b) => h[(rr, rr)] += b,
        Blockade::Perfect => {
            for k in 0..16 {
                if k != rr {
                    h[(rr, k)] = 0.0;
                    h[(k, rr)] = 0.0;
                }
            }
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Forward,
    /// Undo a forward run: segments in reverse order, evolution U†.
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagateOptions {
    pub rtol: f64,
    pub atol: f64,
    /// RK step cap is piece length / this.
    pub max_step_divisions: f64,
    /// Use RK even on constant stretches.
    pub force_rk: bool,
    /// Record populations of the first column at this spacing.
    pub sample_dt: Option<f64>,
    pub direction: Direction,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        PropagateOptions { rtol: 1e-10, atol: 1e-10, max_step_divisions: 50.0, force_rk: false, sample_dt: None, direction: Direction::Forward }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSample {
    pub t: f64,
    pub populations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    /// Final states, one column per initial state.
    pub states: DMatrix<C64>,
    pub total_time: f64,
    pub trace: Vec<TraceSample>,
    pub rk_steps: usize,
    pub max_norm_drift: f64,
}

impl PropagationResult {
    pub fn amplitude(&self, index: usize, column: usize) -> C64 {
        self.states[(index, column)]
    }

    pub fn phase(&self, index: usize, column: usize) -> f64 {
        self.states[(index, column)].arg()
    }

    pub fn populations(&self, column: usize) -> Vec<f64> {
        self.states.column(column).iter().map(|z| z.norm_sqr()).collect()
    }
}

fn minus_i_h(h: &DMatrix<C64>, y: &DMatrix<C64>) -> DMatrix<C64> {
    (h * y) * C64::new(0.0, -1.0)
}

/// exp(-iH dt) applied to y via the eigendecomposition of the real symmetric H.
fn exact_step(h: &DMatrix<f64>, y: &DMatrix<C64>, dt: f64) -> DMatrix<C64> {
    let eig = SymmetricEigen::new(h.clone());
    let v = eig.eigenvectors.map(|x| C64::new(x, 0.0));
    let mut z = v.adjoint() * y;
    for (r, lam) in eig.eigenvalues.iter().enumerate() {
        let ph = C64::from_polar(1.0, -lam * dt);
        for c in 0..z.ncols() {
            z[(r, c)] *= ph;
        }
    }
    v * z
}

const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Dormand-Prince 5(4) from t0 to t1 (either direction) for dy/dt = -iH(t)y.
fn rk45(
    h_of: &dyn Fn(f64) -> DMatrix<C64>,
    y0: DMatrix<C64>,
    t0: f64,
    t1: f64,
    opts: &PropagateOptions,
    steps: &mut usize,
) -> Result<DMatrix<C64>, DynamicsError> {
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let hmax = span.abs() / opts.max_step_divisions;
    let norm_h = {
        let h = h_of(t0);
        h.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1.0)
    };
    let mut h = (0.01 / norm_h).min(hmax);
    let mut t = t0;
    let mut y = y0;
    let mut k1 = minus_i_h(&h_of(t), &y);
    while (t1 - t) * dir > 0.0 {
        if h > (t1 - t).abs() {
            h = (t1 - t).abs();
        }
        let hs = h * dir;
        let mut ks: Vec<DMatrix<C64>> = Vec::with_capacity(7);
        ks.push(k1.clone());
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in ks.iter().enumerate() {
                let a = DP_A[s - 1][j];
                if a != 0.0 {
                    ys += kj * C64::new(a * hs, 0.0);
                }
            }
            ks.push(minus_i_h(&h_of(t + DP_C[s] * hs), &ys));
        }
        let mut y5 = y.clone();
        let mut err = DMatrix::<C64>::zeros(y.nrows(), y.ncols());
        for j in 0..7 {
            if DP_B5[j] != 0.0 {
                y5 += &ks[j] * C64::new(DP_B5[j] * hs, 0.0);
            }
            let e = DP_B5[j] - DP_B4[j];
            if e != 0.0 {
                err += &ks[j] * C64::new(e * hs, 0.0);
            }
        }
        let mut en = 0.0f64;
        for ((e, a), b) in err.iter().zip(y.iter()).zip(y5.iter()) {
            let sc = opts.atol + opts.rtol * a.norm().max(b.norm());
            en = en.max(e.norm() / sc);
        }
        *steps += 1;
        if en <= 1.0 {
            t += hs;
            y = y5;
            k1 = ks.pop().unwrap();
        }
        let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * fac).min(hmax);
        if h < 1e-14 * span.abs().max(1e-300) && (t1 - t).abs() > h {
            return Err(DynamicsError::StepUnderflow { t, h });
        }
    }
    Ok(y)
}

/// Advance the columns of `psi0` through the sequence.
pub fn propagate(
    model: &LadderModel,
    sequence: &[PulseSegment],
    psi0: &DMatrix<C64>,
    opts: &PropagateOptions,
) -> Result<PropagationResult, DynamicsError> {
    model.validate()?;
    let dim = model.dim();
    if psi0.nrows() != dim {
        return Err(DynamicsError::InvalidModel(format!("state has {} rows, model needs {dim}", psi0.nrows())));
    }
    for c in 0..psi0.ncols() {
        let n = psi0.column(c).norm();
        if (n - 1.0).abs() > 1e-9 {
            return Err(DynamicsError::NotNormalized(n));
        }
    }
    for s in sequence {
        s.validate()?;
    }
    let total: f64 = sequence.iter().map(|s| s.span()).sum();
    let mut y = psi0.clone();
    let mut steps = 0usize;
    let mut trace = Vec::new();
    let mut last_step = 0.0;
    let record = |trace: &mut Vec<TraceSample>, t: f64, y: &DMatrix<C64>| {
        trace.push(TraceSample { t, populations: y.column(0).iter().map(|z| z.norm_sqr()).collect() });
    };

    // Pieces in forward time: (segment index, start within segment, end within segment, absolute start).
    let mut pieces: Vec<(usize, f64, f64, f64)> = Vec::new();
    let mut offset = 0.0;
    for (k, s) in sequence.iter().enumerate() {
        let mut bp = s.breakpoints();
        if let Some(dt) = opts.sample_dt {
            if dt > 0.0 {
                let first = (offset / dt).ceil() as i64;
                let last = ((offset + s.span()) / dt).floor() as i64;
                for m in first..=last {
                    let local = m as f64 * dt - offset;
                    if local > 0.0 && local < s.span() {
                        bp.push(local);
                    }
                }
                bp.sort_by(f64::total_cmp);
                bp.dedup_by(|x, y| (*x - *y).abs() <= 1e-18);
            }
        }
        for w in bp.windows(2) {
            if w[1] > w[0] {
                pieces.push((k, w[0], w[1], offset + w[0]));
            }
        }
        offset += s.span();
    }
    if opts.direction == Direction::Backward {
        pieces.reverse();
    }
    if opts.sample_dt.is_some() {
        let t_start = if opts.direction == Direction::Forward { 0.0 } else { total };
        record(&mut trace, t_start, &y);
    }

    for (k, a, b, abs) in pieces {
        let seg = &sequence[k];
        let mid = 0.5 * (a + b);
        let constant = {
            let (f1a, f2a) = seg.envelopes(a + 1e-3 * (b - a));
            let (f1b, f2b) = seg.envelopes(b - 1e-3 * (b - a));
            let (f1m, f2m) = seg.envelopes(mid);
            f1a == f1b && f2a == f2b && f1a == f1m && f2a == f2m
        };
        let (from, to) = match opts.direction {
            Direction::Forward => (a, b),
            Direction::Backward => (b, a),
        };
        if constant && !opts.force_rk {
            let h = build_hamiltonian(model, seg, mid);
            y = exact_step(&h, &y, to - from);
        } else {
            // Interaction picture with respect to the diagonal at `from`, which
            // carries the GHz frame energies; RK only sees the slow remainder.
            let d: Vec<f64> = build_hamiltonian(model, seg, from).diagonal().iter().cloned().collect();
            let h_of = |t: f64| {
                let h = build_hamiltonian(model, seg, t);
                let tau = t - from;
                DMatrix::from_fn(h.nrows(), h.ncols(), |j, k| {
                    let w = if j == k { h[(j, k)] - d[j] } else { h[(j, k)] };
                    if w == 0.0 {
                        C64::new(0.0, 0.0)
                    } else {
                        C64::from_polar(w, (d[j] - d[k]) * tau)
                    }
                })
            };
            let before = steps;
            y = rk45(&h_of, y, from, to, opts, &mut steps)?;
            for (j, dj) in d.iter().enumerate() {
                let ph = C64::from_polar(1.0, -dj * (to - from));
                for c in 0..y.ncols() {
                    y[(j, c)] *= ph;
                }
            }
            if steps > before {
                last_step = (b - a) / (steps - before) as f64;
            }
        }
        if opts.sample_dt.is_some() {
            let t_abs = match opts.direction {
                Direction::Forward => abs + (b - a),
                Direction::Backward => abs,
            };
            record(&mut trace, t_abs, &y);
        }
    }

    let mut max_drift = 0.0f64;
    for c in 0..y.ncols() {
        let drift = (y.column(c).norm() - 1.0).abs();
        if drift > 1e-9 {
            return Err(DynamicsError::NormDrift { drift, column: c, steps, last_step });
        }
        max_drift = max_drift.max(drift);
    }
    Ok(PropagationResult { states: y, total_time: total, trace, rk_steps: steps, max_norm_drift: max_drift })
}

/// Single-atom or two-atom basis index of a product of per-atom levels.
pub fn product_index(levels: &[usize]) -> usize {
    levels.iter().fold(0, |acc, l| 4 * acc + l)
}

/// Columns = the given basis states.
pub fn basis_columns(dim: usize, indices: &[usize]) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(dim, indices.len());
    for (c, i) in indices.iter().enumerate() {
        m[(*i, c)] = C64::new(1.0, 0.0);
    }
    m
}

/// Pulse timing of the π / 2π / π sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateTiming {
    pub t_pi_c: f64,
    pub t_pi_t: f64,
    pub t_gap: f64,
    pub rise_time: f64,
    pub leg2_lead_lag: f64,
}

pub fn gate_sequence(timing: &GateTiming) -> Vec<PulseSegment> {
    let pulse = |site, d| PulseSegment {
        rise_time: timing.rise_time,
        leg2_lead_lag: timing.leg2_lead_lag,
        ..PulseSegment::square(site, d)
    };
    let gap = |extra: f64| PulseSegment::idle((timing.t_gap - extra).max(0.0));
    let lag = timing.leg2_lead_lag.max(0.0);
    vec![
        pulse(Site::Control, timing.t_pi_c),
        gap(lag),
        pulse(Site::Target, 2.0 * timing.t_pi_t),
        gap(lag),
        pulse(Site::Control, timing.t_pi_c),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateSimulation {
    /// Diagonal phases arg⟨ab|ψ_final⟩, wrapped; constituents unset.
    pub phases: GatePhases,
    /// 1 - computational-subspace population, per input 00, 01, 10, 11.
    pub leakage: [f64; 4],
    pub max_leakage: f64,
    /// Leakage above 0.05; the analytic comparison is then unreliable.
    pub leakage_warning: bool,
    pub total_time: f64,
    /// Computational block ⟨out|U|in⟩ as (re, im).
    pub block: [[(f64, f64); 4]; 4],
}

/// Run the two-atom sequence from each computational state.
pub fn simulate_gate(model: &LadderModel, timing: &GateTiming, opts: &PropagateOptions) -> Result<GateSimulation, DynamicsError> {
    if model.atoms.len() != 2 {
        return Err(DynamicsError::InvalidModel("gate simulation needs two atoms".into()));
    }
    let seq = gate_sequence(timing);
    let comp: Vec<usize> = [(0, 0), (0, 1), (1, 0), (1, 1)].iter().map(|&(c, t)| product_index(&[c, t])).collect();
    let res = propagate(model, &seq, &basis_columns(16, &comp), opts)?;
    let total = res.total_time;
    // Undo the -ω_q frame rotation of |0⟩ on each atom.
    let frame = |idx: usize| -> C64 {
        match model.flavor {
            Flavor::FullLadder => {
                let zeros = [idx / 4, idx % 4].iter().zip(&model.atoms).filter(|(l, _)| **l == ZERO).map(|(_, a)| a.omega_q).sum::<f64>();
                C64::from_polar(1.0, -zeros * total)
            }
            Flavor::AdiabaticTwoLevel => C64::new(1.0, 0.0),
        }
    };
    let mut block = [[(0.0, 0.0); 4]; 4];
    let mut leakage = [0.0; 4];
    let mut ph = [0.0; 4];
    for (col, _) in comp.iter().enumerate() {
        let mut inside = 0.0;
        for (row, &out) in comp.iter().enumerate() {
            let z = res.amplitude(out, col) * frame(out);
            block[row][col] = (z.re, z.im);
            inside += z.norm_sqr();
        }
        leakage[col] = (1.0 - inside).max(0.0);
        let (re, im) = block[col][col];
        ph[col] = wrap(im.atan2(re));
    }
    let max_leakage = leakage.iter().cloned().fold(0.0, f64::max);
    Ok(GateSimulation {
        phases: GatePhases::from_values(ph[0], ph[1], ph[2], ph[3]),
        leakage,
        max_leakage,
        leakage_warning: max_leakage > 0.05,
        total_time: total,
        block,
    })
}

/// Ground (|0⟩ + |1⟩) population after π, idle gap, π on a single atom starting in |1⟩.
pub fn pi_gap_pi_scan(
    model: &LadderModel,
    t_pi: f64,
    rise_time: f64,
    gaps: &[f64],
    opts: &PropagateOptions,
) -> Result<Vec<(f64, f64)>, DynamicsError> {
    if model.atoms.len() != 1 {
        return Err(DynamicsError::InvalidModel("π-gap-π scan is single-atom".into()));
    }
    let psi0 = basis_columns(4, &[ONE]);
    gaps.iter()
        .map(|&g| {
            let seq = [PulseSegment::ramped(Site::Control, t_pi, rise_time), PulseSegment::idle(g), PulseSegment::ramped(Site::Control, t_pi, rise_time)];
            let r = propagate(model, &seq, &psi0, opts)?;
            let p = r.populations(0);
            Ok((g, p[ZERO] + p[ONE]))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RabiScan {
    /// (duration, ground population, Rydberg population).
    pub points: Vec<(f64, f64, f64)>,
    /// Fit of the ground population.
    pub fit: SinusoidFit,
}

/// Populations after single square-edged (or ramped) pulses of each duration.
pub fn two_pi_scan(model: &LadderModel, durations: &[f64], rise_time: f64, opts: &PropagateOptions) -> Result<RabiScan, DynamicsError> {
    if model.atoms.len() != 1 {
        return Err(DynamicsError::InvalidModel("Rabi scan is single-atom".into()));
    }
    let psi0 = basis_columns(4, &[ONE]);
    let points: Vec<(f64, f64, f64)> = durations
        .iter()
        .map(|&d| {
            let seg = PulseSegment::ramped(Site::Control, d, rise_time.min(d / 2.0));
            let r = propagate(model, &[seg], &psi0, opts)?;
            let p = r.populations(0);
            Ok((d, p[ZERO] + p[ONE], p[R]))
        })
        .collect::<Result<_, DynamicsError>>()?;
    let t: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fit = fit_sinusoid(&t, &y, None).map_err(|e| DynamicsError::InvalidModel(e.to_string()))?;
    Ok(RabiScan { points, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_shape() {
        assert_eq!(ramp(0.5, 1.0, 0.0), 1.0);
        assert_eq!(ramp(0.0, 1.0, 0.2), 0.0);
        assert!((ramp(0.1, 1.0, 0.2) - 0.5).abs() < 1e-15);
        assert_eq!(ramp(0.5, 1.0, 0.2), 1.0);
        assert_eq!(ramp(1.5, 1.0, 0.2), 0.0);
    }

    #[test]
    fn segment_validation() {
        assert!(PulseSegment::ramped(Site::Control, 1.0, 0.6).validate().is_err());
        assert!(PulseSegment::square(Site::Control, -1.0).validate().is_err());
        assert!(PulseSegment { amp1: 1.5, ..PulseSegment::square(Site::Control, 1.0) }.validate().is_err());
    }

    #[test]
    fn breakpoints_include_ramps_and_lag() {
        let s = PulseSegment { leg2_lead_lag: 0.3, ..PulseSegment::ramped(Site::Control, 1.0, 0.1) };
        let b = s.breakpoints();
        for x in [0.0, 0.1, 0.9, 1.0, 1.2, 1.3] {
            assert!(b.iter().any(|y| (y - x).abs() < 1e-12), "{x} missing from {b:?}");
        }
    }
}
