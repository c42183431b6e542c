//! Two-qubit unitary algebra: rotations, C_X(θ) from C_{Z,φ̄}, the population
//! overlap metric, Bell preparation, parity oscillations and fidelity.
//!
//! Basis order is {00, 01, 10, 11} with index 2c + t (control first).
//! Resonant rotation convention:
//! R(ξ,θ) = [[cos(ξ/2), -i e^{-iθ} sin(ξ/2)], [-i e^{iθ} sin(ξ/2), cos(ξ/2)]].

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector3, Vector4};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;
use thiserror::Error;

use crate::gatephase::{cz_matrix, GatePhases};

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("parity curve needs at least 6 points, got {0}")]
    TooFewPoints(usize),
    #[error("parity curve θ values must be strictly increasing")]
    NotIncreasing,
    #[error("parity curve spans {0:.4} rad, less than one period (π)")]
    ShortSpan(f64),
    #[error("sinusoid fit needs at least 4 points, got {0}")]
    TooFewSamples(usize),
    #[error("least-squares system is singular")]
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary4(pub Matrix4<C64>);

impl Unitary4 {
    pub fn identity() -> Self {
        Unitary4(Matrix4::identity())
    }

    pub fn from_diagonal_phases(phases: [f64; 4]) -> Self {
        let mut m = Matrix4::zeros();
        for (k, p) in phases.iter().enumerate() {
            m[(k, k)] = C64::from_polar(1.0, *p);
        }
        Unitary4(m)
    }

    /// Rows as given, each entry (re, im).
    pub fn from_rows(rows: [[C64; 4]; 4]) -> Self {
        Unitary4(Matrix4::from_fn(|r, c| rows[r][c]))
    }

    pub fn entry(&self, r: usize, c: usize) -> C64 {
        self.0[(r, c)]
    }

    pub fn adjoint(&self) -> Self {
        Unitary4(self.0.adjoint())
    }

    /// max |U†U - I| elementwise.
    pub fn unitarity_error(&self) -> f64 {
        (self.0.adjoint() * self.0 - Matrix4::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn moduli(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.0[(r, c)].norm();
            }
        }
        out
    }

    pub fn apply(&self, k: &Ket4) -> Ket4 {
        Ket4(self.0 * k.0)
    }
}

impl Mul for Unitary4 {
    type Output = Unitary4;
    fn mul(self, rhs: Unitary4) -> Unitary4 {
        Unitary4(self.0 * rhs.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ket4(pub Vector4<C64>);

impl Ket4 {
    pub fn basis(index: usize) -> Self {
        let mut v = Vector4::zeros();
        v[index] = C64::new(1.0, 0.0);
        Ket4(v)
    }

    pub fn from_amplitudes(a: [C64; 4]) -> Self {
        Ket4(Vector4::new(a[0], a[1], a[2], a[3]))
    }

    pub fn amp(&self, index: usize) -> C64 {
        self.0[index]
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn populations(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|k| self.0[k].norm_sqr())
    }
}

pub fn rotation(xi: f64, theta: f64) -> Mat2 {
    let (c, s) = ((xi / 2.0).cos(), (xi / 2.0).sin());
    let mi = C64::new(0.0, -1.0);
    Mat2::new(
        C64::new(c, 0.0),
        mi * C64::from_polar(s, -theta),
        mi * C64::from_polar(s, theta),
        C64::new(c, 0.0),
    )
}

/// R_z(θ) = diag(e^{iθ/2}, e^{-iθ/2}).
pub fn rz(theta: f64) -> Mat2 {
    Mat2::new(C64::from_polar(1.0, theta / 2.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::from_polar(1.0, -theta / 2.0))
}

/// a ⊗ b with a acting on the control.
pub fn kron(a: &Mat2, b: &Mat2) -> Unitary4 {
    Unitary4(Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)]))
}

pub fn embed_control(r: &Mat2) -> Unitary4 {
    kron(r, &Mat2::identity())
}

pub fn embed_target(r: &Mat2) -> Unitary4 {
    kron(&Mat2::identity(), r)
}

fn permutation(p: [usize; 4]) -> Unitary4 {
    let mut m = Matrix4::zeros();
    for (col, row) in p.iter().enumerate() {
        m[(*row, col)] = C64::new(1.0, 0.0);
    }
    Unitary4(m)
}

/// diag(1, -1, -1, -1).
pub fn cz_ideal() -> Unitary4 {
    Unitary4::from_diagonal_phases([0.0, PI, PI, PI])
}

/// Target flipped when the control is |1⟩.
pub fn cx_ideal() -> Unitary4 {
    permutation([0, 1, 3, 2])
}

/// Target flipped when the control is |0⟩.
pub fn cx_bar() -> Unitary4 {
    permutation([1, 0, 2, 3])
}

/// R_t(π/2, θ) C_{Z,φ̄} R_t(π/2, 0).
pub fn cx_theta(phases: &GatePhases, theta: f64) -> Unitary4 {
    embed_target(&rotation(PI / 2.0, theta)) * cz_matrix(phases) * embed_target(&rotation(PI / 2.0, 0.0))
}

/// (1/4) Σ |target_ij|² |candidate_ij|². Phase blind, not a fidelity.
pub fn overlap(target: &Unitary4, candidate: &Unitary4) -> f64 {
    target.0.iter().zip(candidate.0.iter()).map(|(t, c)| t.norm_sqr() * c.norm_sqr()).sum::<f64>() / 4.0
}

/// C_{X,φ̄}(θ) R_c(π/2, 0) |00⟩.
pub fn bell_prepare(phases: &GatePhases, theta: f64) -> Ket4 {
    let u = cx_theta(phases, theta) * embed_control(&rotation(PI / 2.0, 0.0));
    u.apply(&Ket4::basis(0))
}

/// 2|a00 a11 - a01 a10| for a normalized pure state.
pub fn concurrence(k: &Ket4) -> f64 {
    2.0 * (k.amp(0) * k.amp(3) - k.amp(1) * k.amp(2)).norm()
}

/// Populations and the two coherences that the parity signal sees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coherences {
    pub populations: [f64; 4],
    /// ρ_{00,11}.
    pub c1: C64,
    /// ρ_{01,10}.
    pub c2: C64,
}

impl Coherences {
    pub fn of_ket(k: &Ket4) -> Self {
        Coherences { populations: k.populations(), c1: k.amp(0) * k.amp(3).conj(), c2: k.amp(1) * k.amp(2).conj() }
    }

    /// P′(θ) = 2Re C2 - 2|C1| cos(2θ + arg C1).
    pub fn parity(&self, theta: f64) -> f64 {
        2.0 * self.c2.re - 2.0 * self.c1.norm() * (2.0 * theta + self.c1.arg()).cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParitySample {
    pub theta: f64,
    pub parity: f64,
    pub shots: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityCurve {
    pub samples: Vec<ParitySample>,
}

impl ParityCurve {
    pub fn validate(&self) -> Result<(), CircuitError> {
        if self.samples.windows(2).any(|w| w[1].theta <= w[0].theta) {
            return Err(CircuitError::NotIncreasing);
        }
        Ok(())
    }
}

/// Parity P00 + P11 - P01 - P10 after R(π/2,θ) on both qubits.
pub fn parity_after_analysis(state: &Ket4, theta: f64) -> f64 {
    let r = rotation(PI / 2.0, theta);
    let p = kron(&r, &r).apply(state).populations();
    p[0] + p[3] - p[1] - p[2]
}

pub fn parity_scan(state: &Ket4, grid: &[f64]) -> ParityCurve {
    ParityCurve {
        samples: grid.iter().map(|&theta| ParitySample { theta, parity: parity_after_analysis(state, theta), shots: None }).collect(),
    }
}

/// Parity curve from populations and coherences, for states given that way.
pub fn parity_scan_coherences(c: &Coherences, grid: &[f64]) -> ParityCurve {
    ParityCurve { samples: grid.iter().map(|&theta| ParitySample { theta, parity: c.parity(theta), shots: None }).collect() }
}

/// Binomial shot noise on the even-parity outcome, p_even = (1 + P)/2.
pub fn add_shot_noise<R: Rng + ?Sized>(curve: &ParityCurve, shots: u32, rng: &mut R) -> ParityCurve {
    let samples = curve
        .samples
        .iter()
        .map(|s| {
            let p_even = ((1.0 + s.parity) / 2.0).clamp(0.0, 1.0);
            let k = Binomial::new(shots as u64, p_even).expect("probability in [0,1]").sample(rng);
            ParitySample { theta: s.theta, parity: 2.0 * k as f64 / shots as f64 - 1.0, shots: Some(shots) }
        })
        .collect();
    ParityCurve { samples }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherenceFit {
    pub c1_abs: f64,
    pub c1_phase: f64,
    pub re_c2: f64,
    /// Root-mean-square fit residual.
    pub residual: f64,
    /// Oscillation amplitude not resolved above the noise.
    pub degenerate: bool,
}

fn least_squares(rows: &[[f64; 3]], y: &[f64]) -> Result<(Vector3<f64>, f64), CircuitError> {
    let a = DMatrix::from_fn(rows.len(), 3, |r, c| rows[r][c]);
    let b = nalgebra::DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-12).map_err(|_| CircuitError::Singular)?;
    let resid = (&a * &x - &b).norm() / (y.len() as f64).sqrt();
    Ok((Vector3::new(x[0], x[1], x[2]), resid))
}

/// Fit P′(θ) = a - b cos(2θ + φ) as a linear problem in (a, b cos φ, b sin φ).
pub fn parity_fit(curve: &ParityCurve) -> Result<CoherenceFit, CircuitError> {
    let n = curve.samples.len();
    if n < 6 {
        return Err(CircuitError::TooFewPoints(n));
    }
    curve.validate()?;
    let span = curve.samples[n - 1].theta - curve.samples[0].theta;
    if span < PI * (1.0 - 1e-9) * (n as f64 - 1.0) / n as f64 {
        return Err(CircuitError::ShortSpan(span));
    }
    let rows: Vec<[f64; 3]> = curve.samples.iter().map(|s| [1.0, -(2.0 * s.theta).cos(), (2.0 * s.theta).sin()]).collect();
    let y: Vec<f64> = curve.samples.iter().map(|s| s.parity).collect();
    let (x, residual) = least_squares(&rows, &y)?;
    let b = x[1].hypot(x[2]);
    // Standard error of the amplitude for n evenly spread points.
    let floor = 2.0 * residual * (2.0 / n as f64).sqrt();
    let degenerate = b <= 1e-10 || b < floor;
    Ok(CoherenceFit {
        c1_abs: if degenerate { 0.0 } else { b / 2.0 },
        c1_phase: if degenerate { 0.0 } else { x[2].atan2(x[1]) },
        re_c2: x[0] / 2.0,
        residual,
        degenerate,
    })
}

/// y(t) = offset - amplitude·cos(frequency·t + phase).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
    pub residual: f64,
}

fn sinusoid_at(t: &[f64], y: &[f64], w: f64) -> Result<SinusoidFit, CircuitError> {
    let rows: Vec<[f64; 3]> = t.iter().map(|&ti| [1.0, -(w * ti).cos(), (w * ti).sin()]).collect();
    let (x, residual) = least_squares(&rows, y)?;
    Ok(SinusoidFit { offset: x[0], amplitude: x[1].hypot(x[2]), frequency: w, phase: x[2].atan2(x[1]), residual })
}

/// Sinusoid fit with unknown frequency: grid search over (0, Nyquist] or the
/// given band, then golden-section refinement of the residual.
pub fn fit_sinusoid(t: &[f64], y: &[f64], band: Option<(f64, f64)>) -> Result<SinusoidFit, CircuitError> {
    let n = t.len();
    if n < 4 {
        return Err(CircuitError::TooFewSamples(n));
    }
    let span = t.iter().cloned().fold(f64::MIN, f64::max) - t.iter().cloned().fold(f64::MAX, f64::min);
    let (lo, hi) = band.unwrap_or((PI / span / 4.0, PI * (n as f64 - 1.0) / span));
    let steps = 400;
    let mut best = sinusoid_at(t, y, lo)?;
    let mut best_k = 0;
    for k in 1..=steps {
        let w = lo + (hi - lo) * k as f64 / steps as f64;
        let f = sinusoid_at(t, y, w)?;
        if f.residual < best.residual {
            best = f;
            best_k = k;
        }
    }
    let dw = (hi - lo) / steps as f64;
    let (mut a, mut b) = ((lo + dw * (best_k as f64 - 1.0)).max(lo), (lo + dw * (best_k as f64 + 1.0)).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = sinusoid_at(t, y, c)?.residual;
    let mut fd = sinusoid_at(t, y, d)?.residual;
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * b.abs().max(1.0) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = sinusoid_at(t, y, c)?.residual;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = sinusoid_at(t, y, d)?.residual;
        }
    }
    let refined = sinusoid_at(t, y, 0.5 * (a + b))?;
    Ok(if refined.residual <= best.residual { refined } else { best })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellFidelity {
    pub value: f64,
    /// F > 1/2 witnesses entanglement.
    pub entangled: bool,
}

/// F = (P00 + P11)/2 + |C1|.
pub fn bell_fidelity(p00: f64, p11: f64, c1_abs: f64) -> BellFidelity {
    let value = (p00 + p11) / 2.0 + c1_abs;
    BellFidelity { value, entangled: value > 0.5 }
}

/// Fidelity with populations divided by the product of the two sites'
/// retention probabilities and a loss-corrected |C1|.
pub fn loss_corrected_fidelity(p00: f64, p11: f64, c1_abs: f64, retention_c: f64, retention_t: f64) -> BellFidelity {
    let r = retention_c * retention_t;
    bell_fidelity(p00 / r, p11 / r, c1_abs)
}

/// Rows: prepared basis state; columns: |⟨out|C_{X,φ̄}(θ)|in⟩|².
pub fn population_matrix(phases: &GatePhases, theta: f64) -> [[f64; 4]; 4] {
    let u = cx_theta(phases, theta);
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        for (o, v) in row.iter_mut().enumerate() {
            *v = u.entry(o, i).norm_sqr();
        }
    }
    m
}

/// Overlap of a population matrix (rows = inputs) with a permutation pattern.
pub fn population_overlap(pop: &[[f64; 4]; 4], ideal: &Unitary4) -> f64 {
    let mut s = 0.0;
    for (i, row) in pop.iter().enumerate() {
        for (o, v) in row.iter().enumerate() {
            s += ideal.entry(o, i).norm_sqr() * v;
        }
    }
    s / 4.0
}

/// min over γ of ‖a - e^{iγ} b‖₂ (spectral norm), γ taken from arg tr(b†a).
pub fn distance_up_to_global_phase(a: &Unitary4, b: &Unitary4) -> f64 {
    let tr = (b.0.adjoint() * a.0).trace();
    let g = if tr.norm() > 0.0 { tr / tr.norm() } else { C64::new(1.0, 0.0) };
    let d = a.0 - b.0 * g;
    d.svd(false, false).singular_values.max()
}

/// Target-|1⟩ population after C_{X,φ̄}(θ) acting on |c, 1⟩.
pub fn eye_population(phases: &GatePhases, theta: f64, control: usize) -> f64 {
    let out = cx_theta(phases, theta).apply(&Ket4::basis(2 * control + 1));
    out.populations()[2 * control + 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_overlap_with_cx_is_half() {
        assert!((overlap(&cx_ideal(), &Unitary4::identity()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_curve_flagged() {
        let grid: Vec<f64> = (0..12).map(|k| k as f64 * PI / 12.0).collect();
        let curve = ParityCurve { samples: grid.iter().map(|&t| ParitySample { theta: t, parity: 0.3, shots: None }).collect() };
        let f = parity_fit(&curve).unwrap();
        assert!(f.degenerate);
        assert_eq!(f.c1_abs, 0.0);
        assert!((f.re_c2 - 0.15).abs() < 1e-12);
    }

    #[test]
    fn short_curve_rejected() {
        let curve = ParityCurve { samples: (0..3).map(|k| ParitySample { theta: k as f64, parity: 0.0, shots: None }).collect() };
        assert_eq!(parity_fit(&curve), Err(CircuitError::TooFewPoints(3)));
    }
}
