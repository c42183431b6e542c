use std::f64::consts::PI;

use proptest::prelude::*;
use rydgate::circuits::{cz_ideal, distance_up_to_global_phase};
use rydgate::excitation::{diff_ground_rydberg_shift, ExcitationConfig, Hyperfine, StarkLedger};
use rydgate::gatephase::*;
use rydgate::units::{ghz, mhz, micron, microsecond, microwatt, milliwatt, to_mhz};

fn site_cfg(p1_uw: f64, p2_mw: f64, nu1: f64) -> ExcitationConfig {
    ExcitationConfig::cesium(microwatt(p1_uw), milliwatt(p2_mw), micron(3.0), micron(3.7), ghz(nu1), 82)
}

fn operating_point_ctx(t_gap_us: f64) -> GateContext {
    let c = SitePhaseInputs::from_excitation(&site_cfg(22.0, 1.9, 0.83), RabiTiming::HyperfineFree).unwrap();
    let t = SitePhaseInputs::from_excitation(&site_cfg(21.0, 2.0, 0.83), RabiTiming::HyperfineFree).unwrap();
    GateContext::new(c, t, microsecond(t_gap_us), mhz(23.0)).unwrap()
}

/// Same residue mod 2π.
fn same_angle(a: f64, b: f64) -> f64 {
    wrap(a - b).abs()
}

#[test]
fn phi_r_limits() {
    // Fully compensated shifts give π.
    let mut l = StarkLedger { res_g1: 3.0e5, nr_g1: 1.0e5, nr_g2: -4.0e5, ..Default::default() };
    let s = SitePhaseInputs::new(l, mhz(0.67), 1.0, 1.0).unwrap();
    assert!((phi_r(&s) - PI).abs() < 1e-12);
    l.nr_g1 = 0.0;
    l.nr_g2 = 0.0;
    let s = SitePhaseInputs::new(l, mhz(0.67), 1.0, 1.0).unwrap();
    assert!((phi_r(&s) - (PI - 2.0 * s.t_pi * l.res_g1)).abs() < 1e-12);
}

#[test]
fn phi_hf_far_from_qubit_splitting() {
    let mut cfg = site_cfg(22.0, 1.9, 0.83);
    let base = rydgate::excitation::stark_ledger(&cfg).unwrap().res_g0;
    cfg.species.qubit_splitting *= 100.0;
    let far = rydgate::excitation::stark_ledger(&cfg).unwrap().res_g0;
    assert!(far.abs() < base.abs() / 50.0);
    let z = SitePhaseInputs::dark(mhz(0.67)).unwrap();
    assert_eq!(phi_hf(&z), 0.0);
}

#[test]
fn phi_gap_linear_and_vanishing() {
    let ctx = operating_point_ctx(1.0);
    let mut ctx2 = ctx;
    ctx2.t_gap = 2.0 * ctx.t_gap + ctx.target.t_pi;
    assert!((phi_gap(&ctx2) - 2.0 * phi_gap(&ctx)).abs() < 1e-12 * phi_gap(&ctx).abs());
    let mut dark = ctx;
    dark.control.ledger = StarkLedger::default();
    assert_eq!(phi_gap(&dark), 0.0);
    // Direct evaluation: Δ_diff,gR = 2π×0.088 MHz over 1.5 μs total, twice.
    let mut l = StarkLedger::default();
    l.res_r = mhz(0.088);
    let mut d = ctx;
    d.control.ledger = l;
    d.t_gap = microsecond(1.5) - d.target.t_pi;
    assert!((phi_gap(&d) - 2.0 * PI * 0.088e6 * 2.0 * 1.5e-6).abs() < 1e-12);
}

#[test]
fn blockade_leakage_phase() {
    let s = SitePhaseInputs::dark(mhz(0.67)).unwrap();
    let ctx = GateContext::new(s, s, 0.0, mhz(23.0)).unwrap();
    let bl = phi_bl(&ctx);
    assert!((bl - 0.0458).abs() < 5e-4, "{bl}");
    assert!((bl.to_degrees() - 2.6).abs() < 0.05);
    let inf = GateContext::new(s, s, 0.0, f64::INFINITY).unwrap();
    assert_eq!(phi_bl(&inf), 0.0);
    let eq = GateContext::new(s, s, 0.0, mhz(0.67)).unwrap();
    assert!((phi_bl(&eq) - PI / 2.0).abs() < 1e-14);
}

#[test]
fn zero_constituents() {
    let s = SitePhaseInputs::new(StarkLedger::default(), mhz(1.0), 1.0, 1.0).unwrap();
    let mut ctx = GateContext::new(s, s, 0.0, f64::INFINITY).unwrap();
    ctx.control.ledger.res_g1 = PI / (2.0 * s.t_pi);
    ctx.target.ledger.res_g1 = PI / (2.0 * s.t_pi);
    ctx.control.ledger.res_r = ctx.control.ledger.res_g1;
    // φ_R = 0 at both sites, everything else zero.
    let p = assemble_phases(&ctx);
    for (got, want) in p.values().iter().zip([0.0, 0.0, 0.0, -PI]) {
        assert!(same_angle(*got, want) < 1e-12);
    }
    // diag(1,1,1,-1) reaches diag(1,-1,-1,-1) only with local Z rotations.
    assert!(distance_up_to_global_phase(&cz_matrix(&p), &cz_ideal()) > 1.0);
    let rz = rz_correction(&p);
    assert!(distance_up_to_global_phase(&apply_rz(&p, &rz), &cz_ideal()) < 1e-12);
}

#[test]
fn unshifted_ladder_is_ideal_cz() {
    let s = SitePhaseInputs::dark(mhz(1.0)).unwrap();
    let p = assemble_phases(&GateContext::new(s, s, microsecond(2.0), f64::INFINITY).unwrap());
    assert!(distance_up_to_global_phase(&cz_matrix(&p), &cz_ideal()) < 1e-12);
}

#[test]
fn cz_matrix_unitary_and_entangling() {
    let p = GatePhases::from_values(-0.13, 0.88, -0.76, PI + 0.24);
    assert!(cz_matrix(&p).unitarity_error() < 1e-14);
    assert!(is_entangling(&p));
    assert!(!is_entangling(&GatePhases::from_values(0.3, 0.1, 0.4, 0.2)));
}

/// Arithmetic on the quoted worked-example phases.
#[test]
fn quoted_phases_consistent_with_leakage() {
    let s = 0.88 + (-0.76) - (-0.13) - (PI + 0.24);
    assert!(same_angle(s, -PI + 0.01) < 1e-12);
    let bl = PI * 0.67 / (2.0 * 23.0);
    let dev = same_angle(s, PI - bl);
    assert!(dev < 0.05, "deviation {dev:.4} rad");
}

#[test]
fn ratio_form_matches_ledger_form_at_operating_point() {
    for nu in [0.83, -0.83, 2.0] {
        let cfg = site_cfg(22.0, 1.9, nu);
        let s = SitePhaseInputs::from_excitation_with(&cfg, Hyperfine::Collapsed, RabiTiming::HyperfineFree).unwrap();
        assert!(same_angle(phi_r(&s), phi_r_ratio_form(&s, cfg.delta1)) < 1e-10);
    }
}

#[test]
fn ratio_root_linear_case() {
    let k = RatioCoefficients { a: 0.7, b: 0.2, c: 0.0, d: 1.3 };
    for n in [-3i64, -1, 0] {
        let q = solve_ratio_q(&k, n).unwrap();
        // 2(a+b)d/(1-n) under the factor-2 convention of the φ_R condition.
        assert!((q[0] - 2.0 * (k.a + k.b) * k.d / (1 - n) as f64).abs() < 1e-12);
    }
}

#[test]
fn operating_point_ratio_root() {
    let cfg = site_cfg(22.0, 1.9, 0.83);
    let s = SitePhaseInputs::from_excitation_with(&cfg, Hyperfine::Collapsed, RabiTiming::HyperfineFree).unwrap();
    let k = ratio_coefficients(&s).unwrap();
    let q = solve_ratio_q(&k, 1).unwrap()[0];
    let q0 = s.omega2_abs / s.omega1_abs;
    let tuned = cfg.with_powers(cfg.field1.power, cfg.field2.power * (q / q0).powi(2));
    let t = SitePhaseInputs::from_excitation_with(&tuned, Hyperfine::Collapsed, RabiTiming::HyperfineFree).unwrap();
    assert!(same_angle(phi_r(&t), PI) < 1e-10);
}

#[test]
fn gap_examples() {
    let mut l = StarkLedger::default();
    l.res_r = mhz(0.1);
    let s = SitePhaseInputs::new(l, mhz(0.67), 1.0, 1.0).unwrap();
    let limits = GapLimits { min: 0.0, max: microsecond(100.0) };
    let ctx = GateContext::new(s, s, 0.0, f64::INFINITY).unwrap();
    let g = solve_t_gap(&ctx, NPrime::Fixed(1), &limits).unwrap();
    assert!(((g.t_gap + s.t_pi) - microsecond(5.0)).abs() < 1e-15);
    let mut c = ctx;
    c.t_gap = g.t_gap;
    assert!(same_angle(phi_gap(&c), 0.0) < 1e-10);

    let control = operating_point_ctx(1.0);
    let d = to_mhz(diff_ground_rydberg_shift(&control.control.ledger));
    let mut l = StarkLedger::default();
    l.res_r = mhz(0.088);
    let s = SitePhaseInputs::new(l, mhz(0.67), 1.0, 1.0).unwrap();
    let ctx = GateContext::new(s, s, 0.0, f64::INFINITY).unwrap();
    let g = solve_t_gap(&ctx, NPrime::Fixed(1), &limits).unwrap();
    assert!(((g.t_gap + s.t_pi) * 1e6 - 5.68).abs() < 0.01);
    assert!(d > 0.0);
}

#[test]
fn gap_edge_cases() {
    let s = SitePhaseInputs::dark(mhz(0.67)).unwrap();
    let ctx = GateContext::new(s, s, 0.0, f64::INFINITY).unwrap();
    let g = solve_t_gap(&ctx, NPrime::Auto, &GapLimits::default()).unwrap();
    assert!(g.degenerate);
    assert_eq!(g.t_gap, GapLimits::default().min);

    let mut l = StarkLedger::default();
    l.res_r = mhz(0.1);
    let s = SitePhaseInputs::new(l, mhz(0.67), 1.0, 1.0).unwrap();
    let ctx = GateContext::new(s, s, 0.0, f64::INFINITY).unwrap();
    let tight = GapLimits { min: microsecond(0.5), max: microsecond(3.0) };
    assert!(matches!(solve_t_gap(&ctx, NPrime::Fixed(1), &tight), Err(GateError::NoFeasibleGap(_))));
    assert!(matches!(solve_t_gap(&ctx, NPrime::AutoEven, &tight), Err(GateError::NoFeasibleGap(_))));
    let wide = GapLimits::default();
    let even = solve_t_gap(&ctx, NPrime::AutoEven, &wide).unwrap();
    let odd = solve_t_gap(&ctx, NPrime::AutoOdd, &wide).unwrap();
    assert_eq!(even.n_prime, 2);
    assert_eq!(odd.n_prime, 1);
}

#[test]
fn parity_tables_correct_to_cz() {
    for hf in [-2.0, -0.4, 0.0, 0.9, 2.7] {
        let odd_even = GatePhases::from_values(2.0 * hf, hf + PI, hf + PI, PI);
        let even_odd = GatePhases::from_values(2.0 * hf, hf, hf, PI);
        for p in [odd_even, even_odd] {
            let rz = rz_correction(&p);
            assert!(rz.residual < 1e-12);
            assert!(distance_up_to_global_phase(&apply_rz(&p, &rz), &cz_ideal()) < 1e-12);
        }
    }
}

#[test]
fn solver_closure_at_operating_point() {
    let cfg = site_cfg(22.0, 1.9, 0.83);
    for n in [1, -1] {
        let sol = solve_ideal(&cfg, n, Hyperfine::Collapsed, RabiTiming::HyperfineFree, &GapLimits::default(), f64::INFINITY).unwrap();
        assert!(sol.distance < 1e-8, "n = {n}: {}", sol.distance);
        let site = SitePhaseInputs::from_excitation_with(&sol.config, Hyperfine::Collapsed, RabiTiming::HyperfineFree).unwrap();
        assert!(same_angle(phi_r(&site), n as f64 * PI) < 1e-10);
    }
    // Hyperfine-resolved ledger with finite blockade: left with the leakage-sized defect.
    let sol = solve_ideal(&cfg, 1, Hyperfine::Resolved, RabiTiming::HyperfineResolved, &GapLimits::default(), mhz(23.0)).unwrap();
    assert!(sol.distance <= 1.01 * sol.phases.phi_bl);
}

fn arb_context() -> impl Strategy<Value = GateContext> {
    (5.0f64..60.0, 0.5f64..5.0, 5.0f64..60.0, 0.5f64..5.0, 0.4f64..5.0, 0.0f64..10.0, 1.0f64..200.0, any::<bool>())
        .prop_map(|(p1c, p2c, p1t, p2t, nu, gap, b, resolved)| {
            let timing = if resolved { RabiTiming::HyperfineResolved } else { RabiTiming::HyperfineFree };
            let c = SitePhaseInputs::from_excitation(&site_cfg(p1c, p2c, nu), timing).unwrap();
            let t = SitePhaseInputs::from_excitation(&site_cfg(p1t, p2t, -nu), timing).unwrap();
            GateContext::new(c, t, microsecond(gap), mhz(b)).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn constraint_identity(ctx in arb_context()) {
        let p = assemble_phases(&ctx);
        prop_assert!(p.constraint_residual().abs() < 1e-10);
        for v in p.values() {
            prop_assert!(v > -PI && v <= PI);
        }
    }

    #[test]
    fn wrap_properties(x in -1e4f64..1e4) {
        let y = wrap(x);
        prop_assert!(y > -PI && y <= PI);
        let k = (x - y) / (2.0 * PI);
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn residual_is_entangling_defect(a in -PI..PI, b in -PI..PI, c in -PI..PI, d in -PI..PI) {
        let p = GatePhases::from_values(a, b, c, d);
        let rz = rz_correction(&p);
        let defect = wrap(p.entangling_phase() + PI);
        prop_assert!(same_angle(rz.defect, defect) < 1e-12);
        let dist = distance_up_to_global_phase(&apply_rz(&p, &rz), &cz_ideal());
        prop_assert!(dist <= rz.residual + 1e-12);
        prop_assert!(dist >= rz.residual / 2.0 - 1e-12);
    }

    #[test]
    fn eq5_equals_eq7_hyperfine_free(p1 in 2.0f64..100.0, p2 in 0.2f64..10.0, nu in 0.3f64..20.0, neg in any::<bool>()) {
        let cfg = site_cfg(p1, p2, if neg { -nu } else { nu });
        let s = SitePhaseInputs::from_excitation_with(&cfg, Hyperfine::Collapsed, RabiTiming::HyperfineFree).unwrap();
        prop_assert!(same_angle(phi_r(&s), phi_r_ratio_form(&s, cfg.delta1)) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn solver_closure(p1 in 10.0f64..40.0, p2 in 1.0f64..4.0, nu in 0.5f64..3.0, n in prop::sample::select(vec![1i64, -1])) {
        let cfg = site_cfg(p1, p2, nu);
        let sol = solve_ideal(&cfg, n, Hyperfine::Collapsed, RabiTiming::HyperfineFree, &GapLimits::default(), f64::INFINITY).unwrap();
        prop_assert!(sol.distance < 1e-8);
    }
}
