use std::f64::consts::PI;

use proptest::prelude::*;
use rydgate::angular::HalfInt;
use rydgate::atomdata::{self, constants, hyperfine_shift, AtomDataError, SpeciesData};
use rydgate::units;

fn h(twice: i32) -> HalfInt {
    HalfInt::from_twice(twice)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn intermediate_hyperfine_shifts() {
    let cs = SpeciesData::cesium();
    let s3 = units::to_mhz(cs.intermediate.hyperfine_shift(h(6)).unwrap());
    let s4 = units::to_mhz(cs.intermediate.hyperfine_shift(h(8)).unwrap());
    assert!(rel(s3, -212.3) < 1e-3, "{s3}");
    assert!(rel(s4, 165.1) < 1e-3, "{s4}");
    // (A/2)[f(f+1) - I(I+1) - j(j+1)] by hand for A = 94.35 MHz
    assert!((s3 - 94.35 * 0.5 * (12.0 - 15.75 - 0.75)).abs() < 1e-9);
    assert!((s4 - 94.35 * 0.5 * (20.0 - 15.75 - 0.75)).abs() < 1e-9);
}

#[test]
fn zero_a_gives_zero_shift() {
    for f in [h(6), h(8)] {
        assert_eq!(hyperfine_shift(0.0, h(7), h(1), f).unwrap(), 0.0);
    }
}

#[test]
fn triangle_violation_is_domain_error() {
    assert!(matches!(hyperfine_shift(1.0, h(7), h(1), h(10)), Err(AtomDataError::Domain(_))));
    assert!(matches!(hyperfine_shift(1.0, h(7), h(1), h(5)), Err(AtomDataError::Domain(_))));
}

#[test]
fn stored_constants_as_entered() {
    let cs = SpeciesData::cesium();
    assert_eq!(cs.nuclear_spin, h(7));
    assert!(rel(units::to_ghz(cs.qubit_splitting), 9.192_631_77) < 1e-12);
    assert!(rel(units::to_mhz(cs.intermediate.hyperfine_a), 94.35) < 1e-12);
    assert!(rel(cs.intermediate.lifetime, 0.155e-6) < 1e-12);
    assert!(rel(cs.rydberg.lifetimes[&82], 203e-6) < 1e-12);
    assert_eq!(cs.matrix_element_gp, -0.276);
    assert_eq!(cs.rydberg.matrix_element_coefficient, -8.08);
    assert_eq!(cs.rydberg.quantum_defect, 4.05);
    assert!(rel(units::to_mhz(cs.rydberg.hyperfine_coefficient), 13200.0) < 1e-12);
    assert_eq!(cs.ground_nonres_polarizability(459).unwrap(), -11.6);
    assert_eq!(cs.ground_nonres_polarizability(1038).unwrap(), 189.0);
    assert!(rel(cs.intermediate.decay_rate(), 1.0 / 0.155e-6) < 1e-12);
}

#[test]
fn unknown_wavelength_rejected() {
    let cs = SpeciesData::cesium();
    assert!(matches!(cs.ground_nonres_polarizability(780), Err(AtomDataError::UnknownWavelength(780))));
}

#[test]
fn rydberg_hyperfine_law() {
    let cs = SpeciesData::cesium();
    let a50 = units::to_mhz(cs.rydberg_hf_a(50));
    assert!(rel(a50, 13200.0 / 45.95f64.powi(3)) < 1e-12);
    let split82 = units::to_mhz(cs.rydberg_hf_splitting(82)) * 1e3;
    assert!(rel(split82, 110.0) < 0.02, "{split82} kHz");
    assert!(rel(cs.rydberg_hf_splitting(82), 4.0 * cs.rydberg_hf_a(82)) < 1e-12);
    let mut prev = f64::INFINITY;
    for n in 10..400 {
        let a = cs.rydberg_hf_a(n);
        assert!(a < prev && a > 0.0);
        prev = a;
    }
    assert!(cs.rydberg_hf_a(1_000_000) < 1e-9 * cs.rydberg_hf_a(82));
}

#[test]
fn ponderomotive_polarizability() {
    let w = |nm: f64| 2.0 * PI * constants::SPEED_OF_LIGHT / (nm * 1e-9);
    let a459 = units::polarizability_cm3(atomdata::rydberg_nonres_polarizability(w(459.0)));
    let a1038 = units::polarizability_cm3(atomdata::rydberg_nonres_polarizability(w(1038.0)));
    assert!((a459 + 15.0).abs() < 0.5, "{a459}");
    assert!((a1038 + 77.0).abs() < 0.5, "{a1038}");
    // Gaussian units: α = -e²/(m ω²) with e² → r_e m c², i.e. -r_e λ²/(4π²).
    let r_e = 2.817_940_326_2e-15;
    let gauss = |nm: f64| -r_e * (nm * 1e-9f64).powi(2) / (4.0 * PI * PI) * 1e6 / 1e-24;
    assert!(rel(a459, gauss(459.0)) < 1e-8);
    assert!(rel(a1038, gauss(1038.0)) < 1e-8);
}

#[test]
fn species_file_roundtrip_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cs.json");
    std::fs::write(&p, atomdata::CS_JSON).unwrap();
    assert_eq!(SpeciesData::from_path(&p).unwrap(), SpeciesData::cesium());
    std::fs::write(&p, atomdata::CS_JSON.replace("\"lifetime_us\": 0.155", "\"lifetime_us\": -1.0")).unwrap();
    assert!(SpeciesData::from_path(&p).is_err());
    std::fs::write(&p, "{").unwrap();
    assert!(matches!(SpeciesData::from_path(&p), Err(AtomDataError::Json(_))));
}

proptest! {
    #[test]
    fn polarizability_scales_inverse_square(omega in 1e14f64..1e16) {
        let r = atomdata::rydberg_nonres_polarizability(2.0 * omega) / atomdata::rydberg_nonres_polarizability(omega);
        prop_assert!((r - 0.25).abs() < 1e-14);
        prop_assert!(atomdata::rydberg_nonres_polarizability(omega) < 0.0);
    }

    #[test]
    fn hyperfine_centre_of_mass(a in -1e10f64..1e10, ti in 0i32..16, tj in 1i32..8) {
        let (i, j) = (h(ti), h(tj));
        let mut sum = 0.0;
        let mut scale = 0.0;
        for f in HalfInt::couplings(i, j) {
            let s = hyperfine_shift(a, i, j, f).unwrap();
            sum += f.multiplicity() as f64 * s;
            scale += f.multiplicity() as f64 * s.abs();
        }
        prop_assert!(sum.abs() <= 1e-9 * scale.max(1e-300));
    }
}

#[test]
fn centre_of_mass_for_cesium_manifolds() {
    let cs = SpeciesData::cesium();
    for (a, j) in [(cs.intermediate.hyperfine_a, cs.intermediate.j), (cs.rydberg_hf_a(82), cs.rydberg.j)] {
        let s: f64 = HalfInt::couplings(cs.nuclear_spin, j)
            .map(|f| f.multiplicity() as f64 * hyperfine_shift(a, cs.nuclear_spin, j, f).unwrap())
            .sum();
        assert!(s.abs() < 1e-9 * a.abs());
    }
}
