use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

use rydgate::circuits::{self, ParityCurve, ParitySample};
use rydgate::dynamics::{
    self, AtomLadder, Blockade, GateTiming, LadderModel, PropagateOptions, ONE, P, R, ZERO,
};
use rydgate::excitation::{self, ExcitationConfig, Hyperfine};
use rydgate::gatephase::{
    self, GapLimits, GateContext, GateError, GatePhases, RabiTiming, SitePhaseInputs,
};
use rydgate::units::{microsecond, nanosecond, to_mhz};

use crate::config::{RunConfig, ScanAxis, SiteConfig};
use crate::error::{CliError, Result};
use crate::output::{num, text, Report, Table};

fn flag(b: bool) -> Value {
    text(if b { "true" } else { "false" })
}

fn site_list(cfg: &RunConfig) -> [(&'static str, &SiteConfig); 2] {
    [("control", &cfg.sites.control), ("target", &cfg.sites.target)]
}

pub fn cmd_calibrate(cfg: &RunConfig) -> Result<Report> {
    let mut rep = Report::new("calibrate");
    let cols = ["site", "power_459_uW", "power_1038_mW", "diff_ground_MHz", "omega_r_MHz", "diff_gr_MHz", "p_se_per_pi"];
    let mut forward = Table::new("forward", &cols);
    for (name, site) in site_list(cfg) {
        let d = excitation::derived_rates(&cfg.excitation(site)?)?;
        forward.push(vec![
            text(name),
            num(site.power_459_uW),
            num(site.power_1038_mW),
            num(to_mhz(d.diff_ground)),
            num(to_mhz(d.omega_r.abs())),
            num(to_mhz(d.diff_gr)),
            num(d.scatter_prob_per_pi),
        ]);
    }
    rep.tables.push(forward);

    let Some(measured) = &cfg.measured else {
        rep.note("no measured values given: forward predictions only");
        return Ok(rep);
    };
    let mut cal_t = Table::new(
        "calibrated",
        &[&cols[..], &["iterations", "power_459_rel_dev", "power_1038_rel_dev"]].concat(),
    );
    for ((name, site), m) in site_list(cfg).into_iter().zip([measured.control, measured.target]) {
        let cal = excitation::calibrate_fields(&m.to_measured(), &cfg.excitation(site)?)?;
        let (p1, p2) = (cal.power1 * 1e6, cal.power2 * 1e3);
        let dev1 = if site.power_459_uW > 0.0 { p1 / site.power_459_uW - 1.0 } else { f64::NAN };
        let dev2 = if site.power_1038_mW > 0.0 { p2 / site.power_1038_mW - 1.0 } else { f64::NAN };
        rep.scalar(&format!("{name}_power_459_uW"), p1);
        rep.scalar(&format!("{name}_power_1038_mW"), p2);
        rep.scalar(&format!("{name}_diff_gr_MHz"), to_mhz(cal.diff_gr));
        rep.scalar(&format!("{name}_omega_r_MHz"), to_mhz(cal.omega_r.abs()));
        rep.scalar(&format!("{name}_p_se_per_pi"), cal.scatter_prob_per_pi);
        cal_t.push(vec![
            text(name),
            num(p1),
            num(p2),
            num(m.diff_ground_MHz),
            num(to_mhz(cal.omega_r.abs())),
            num(to_mhz(cal.diff_gr)),
            num(cal.scatter_prob_per_pi),
            num(cal.iterations as f64),
            num(dev1),
            num(dev2),
        ]);
    }
    rep.tables.push(cal_t);
    Ok(rep)
}

/// Gate phases for the run, with the context when they were computed.
pub struct PhaseSet {
    pub phases: GatePhases,
    pub ctx: Option<GateContext>,
    pub note: Option<String>,
}

pub fn site_inputs(cfg: &RunConfig, ec: &ExcitationConfig) -> std::result::Result<SitePhaseInputs, GateError> {
    SitePhaseInputs::from_excitation_with(ec, cfg.gate.ledger.into(), cfg.gate.timing.into())
}

pub fn gate_phases(cfg: &RunConfig) -> Result<PhaseSet> {
    if let Some(p) = cfg.gate.phases_rad {
        return Ok(PhaseSet { phases: GatePhases::from_values(p[0], p[1], p[2], p[3]), ctx: None, note: Some("phases taken from gate.phases_rad".into()) });
    }
    let mut inputs = Vec::new();
    for (name, site) in site_list(cfg) {
        match site_inputs(cfg, &cfg.excitation(site)?) {
            Ok(s) => inputs.push(s),
            Err(GateError::ZeroRabi) => {
                return Ok(PhaseSet {
                    phases: GatePhases::from_values(0.0, 0.0, 0.0, 0.0),
                    ctx: None,
                    note: Some(format!("no two-photon coupling at the {name} site: no Rydberg pulses, identity phases")),
                })
            }
            Err(e) => return Err(e.into()),
        }
    }
    let ctx = GateContext::new(inputs[0], inputs[1], cfg.t_gap(), cfg.blockade())?;
    Ok(PhaseSet { phases: gatephase::assemble_phases(&ctx), ctx: Some(ctx), note: None })
}

pub fn cmd_phases(cfg: &RunConfig) -> Result<Report> {
    let mut rep = Report::new("phases");
    let set = gate_phases(cfg)?;
    let p = &set.phases;
    if let Some(n) = &set.note {
        rep.note(n.clone());
    }
    for (k, v) in ["phi00", "phi01", "phi10", "phi11"].iter().zip(p.values()) {
        rep.scalar(k, v);
    }
    rep.scalar("phi11_minus_pi", gatephase::wrap(p.phi11 - PI));
    rep.scalar("phi01_minus_phi00", gatephase::wrap(p.phi01 - p.phi00));
    rep.scalar("phi11_minus_phi10", gatephase::wrap(p.phi11 - p.phi10));
    if let Some(ctx) = &set.ctx {
        rep.scalar("phi_r_c", p.phi_r_c);
        rep.scalar("phi_r_t", p.phi_r_t);
        rep.scalar("phi_hf_c", p.phi_hf_c);
        rep.scalar("phi_hf_t", p.phi_hf_t);
        rep.scalar("phi_gap", p.phi_gap);
        rep.scalar("phi_bl", p.phi_bl);
        rep.scalar("t_pi_c_us", ctx.control.t_pi * 1e6);
        rep.scalar("t_pi_t_us", ctx.target.t_pi * 1e6);
    }
    rep.scalar("entangling_phase", p.entangling_phase());
    rep.value("entangling", flag(gatephase::is_entangling(p)));
    rep.scalar("constraint_residual", p.constraint_residual());

    let cz = gatephase::cz_matrix(p);
    let mut t = Table::new("cz_matrix", &["row", "col", "re", "im"]);
    for r in 0..4 {
        for c in 0..4 {
            let z = cz.entry(r, c);
            t.push_nums(&[r as f64, c as f64, z.re, z.im]);
        }
    }
    rep.tables.push(t);

    if cfg.gate.solver.enabled {
        let s = &cfg.gate.solver;
        let limits = GapLimits { min: microsecond(s.t_gap_min_us), max: microsecond(s.t_gap_max_us) };
        let sol = gatephase::solve_ideal(&cfg.control()?, s.n, Hyperfine::Collapsed, RabiTiming::HyperfineFree, &limits, cfg.blockade())?;
        rep.note("solver uses the hyperfine-free ledger and timing at the control-site settings for both sites");
        rep.scalar("solver_q", sol.q);
        rep.scalar("solver_n", sol.n as f64);
        rep.scalar("solver_power_1038_mW", sol.config.field2.power * 1e3);
        rep.scalar("solver_t_gap_us", sol.gap.t_gap * 1e6);
        rep.scalar("solver_n_prime", sol.gap.n_prime as f64);
        rep.value("solver_gap_degenerate", flag(sol.gap.degenerate));
        rep.scalar("solver_theta_c", sol.rz.theta_c);
        rep.scalar("solver_theta_t", sol.rz.theta_t);
        rep.scalar("solver_defect", sol.rz.defect);
        rep.scalar("solver_distance_to_cz", sol.distance);
    }
    Ok(rep)
}

fn analysis_theta(cfg: &RunConfig, p: &GatePhases) -> f64 {
    cfg.gate.theta_rad.unwrap_or_else(|| gatephase::wrap(p.phi11 - p.phi10))
}

fn theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

pub fn cmd_bell(cfg: &RunConfig, seed: u64) -> Result<Report> {
    let mut rep = Report::new("bell");
    let set = gate_phases(cfg)?;
    if let Some(n) = &set.note {
        rep.note(n.clone());
    }
    let theta = analysis_theta(cfg, &set.phases);
    let ket = circuits::bell_prepare(&set.phases, theta);
    let pops = ket.populations();
    let c1 = ket.amp(0) * ket.amp(3).conj();
    rep.scalar("theta", theta);
    for (k, v) in ["p00", "p01", "p10", "p11"].iter().zip(pops) {
        rep.scalar(k, v);
    }
    rep.scalar("c1_abs", c1.norm());
    rep.scalar("relative_phase_11_00", gatephase::wrap(ket.amp(3).arg() - ket.amp(0).arg()));
    rep.scalar("concurrence", circuits::concurrence(&ket));
    let f = circuits::bell_fidelity(pops[0], pops[3], c1.norm());
    rep.scalar("fidelity", f.value);
    rep.value("entangled", flag(f.entangled));

    let mut amps = Table::new("amplitudes", &["state", "abs", "arg"]);
    for (i, s) in ["00", "01", "10", "11"].iter().enumerate() {
        amps.push(vec![text(*s), num(ket.amp(i).norm()), num(ket.amp(i).arg())]);
    }
    rep.tables.push(amps);

    let grid = theta_grid(cfg.bell.theta_points);
    let curve = match &cfg.bell.parity_csv {
        Some(path) => {
            rep.note(format!("parity curve read from {}", path.display()));
            let pts = crate::output::read_parity_csv(path)?;
            ParityCurve { samples: pts.into_iter().map(|(theta, parity)| ParitySample { theta, parity, shots: None }).collect() }
        }
        None => circuits::parity_scan(&ket, &grid),
    };
    let fit = circuits::parity_fit(&curve)?;
    rep.scalar("fit_c1_abs", fit.c1_abs);
    rep.scalar("fit_c1_phase", fit.c1_phase);
    rep.scalar("fit_residual", fit.residual);
    rep.scalar("fit_fidelity", circuits::bell_fidelity(pops[0], pops[3], fit.c1_abs).value);
    let lc = circuits::loss_corrected_fidelity(pops[0], pops[3], fit.c1_abs, cfg.bell.retention_control, cfg.bell.retention_target);
    rep.scalar("loss_corrected_fidelity", lc.value);
    let mut pt = Table::new("parity", &["theta_rad", "parity"]);
    for s in &curve.samples {
        pt.push_nums(&[s.theta, s.parity]);
    }
    rep.tables.push(pt);

    // Synthetic shot noise on the modelled curve.
    let model_curve = circuits::parity_scan(&ket, &grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noisy = Table::new("noisy_fidelity", &["trial", "c1_abs", "fidelity"]);
    let mut fs = Vec::with_capacity(cfg.bell.trials);
    for k in 0..cfg.bell.trials {
        let c = circuits::add_shot_noise(&model_curve, cfg.bell.shots, &mut rng);
        let fit = circuits::parity_fit(&c)?;
        let fv = circuits::bell_fidelity(pops[0], pops[3], fit.c1_abs).value;
        fs.push(fv);
        noisy.push_nums(&[k as f64, fit.c1_abs, fv]);
    }
    if !fs.is_empty() {
        let n = fs.len() as f64;
        let mean = fs.iter().sum::<f64>() / n;
        let sd = (fs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
        rep.scalar("noisy_fidelity_mean", mean);
        rep.scalar("noisy_fidelity_std", sd);
        rep.scalar("noisy_fidelity_min", fs.iter().cloned().fold(f64::INFINITY, f64::min));
        rep.scalar("noisy_fidelity_max", fs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    rep.tables.push(noisy);
    Ok(rep)
}

pub fn cmd_eye(cfg: &RunConfig) -> Result<Report> {
    let mut rep = Report::new("eye");
    let set = gate_phases(cfg)?;
    if let Some(n) = &set.note {
        rep.note(n.clone());
    }
    let p = &set.phases;
    let grid = theta_grid(cfg.bell.theta_points.max(8));
    let mut t = Table::new("eye", &["theta_rad", "p_target1_control0", "p_target1_control1"]);
    let (mut h0, mut h1) = (num_complex::Complex64::new(0.0, 0.0), num_complex::Complex64::new(0.0, 0.0));
    let mut contrast = 0.0f64;
    for &th in &grid {
        let (a, b) = (circuits::eye_population(p, th, 0), circuits::eye_population(p, th, 1));
        h0 += num_complex::Complex64::from_polar(a, -th);
        h1 += num_complex::Complex64::from_polar(b, -th);
        contrast = contrast.max((a - b).abs());
        t.push_nums(&[th, a, b]);
    }
    rep.tables.push(t);
    // p(θ) = (1 - cos(θ - θ_min))/2, so Σ p e^{-iθ} has phase π - θ_min.
    let min0 = gatephase::wrap(PI - h0.arg());
    let min1 = gatephase::wrap(PI - h1.arg());
    rep.scalar("minimum_theta_control0", min0);
    rep.scalar("minimum_theta_control1", min1);
    rep.scalar("expected_minimum_control0", gatephase::wrap(p.phi01 - p.phi00));
    rep.scalar("expected_minimum_control1", gatephase::wrap(p.phi11 - p.phi10));
    rep.scalar("curve_offset", gatephase::wrap(min1 - min0));
    rep.scalar("expected_offset", p.entangling_phase());
    rep.scalar("max_curve_difference", contrast);
    Ok(rep)
}

/// Fractional change of one scan axis applied to both sites.
fn perturbed(cfg: &RunConfig, shifts: &[(ScanAxis, f64)]) -> RunConfig {
    let mut c = cfg.clone();
    for s in [&mut c.sites.control, &mut c.sites.target] {
        for &(axis, x) in shifts {
            match axis {
                ScanAxis::P459 => s.power_459_uW *= 1.0 + x,
                ScanAxis::P1038 => s.power_1038_mW *= 1.0 + x,
                ScanAxis::Delta1 => s.detuning_GHz *= 1.0 + x,
            }
        }
    }
    c
}

/// (P00 + P11)/2 + |C1| of the Bell state made at the fixed analysis phase.
fn bell_metric(cfg: &RunConfig, theta: f64) -> Result<f64> {
    let set = gate_phases(cfg)?;
    let ket = circuits::bell_prepare(&set.phases, theta);
    let p = ket.populations();
    Ok(circuits::bell_fidelity(p[0], p[3], (ket.amp(0) * ket.amp(3).conj()).norm()).value)
}

/// Fidelity normalized to the centre along one direction of fractional shifts.
pub fn normalized_fidelity(cfg: &RunConfig, direction: &[(ScanAxis, f64)], x: f64) -> Result<f64> {
    let center = gate_phases(cfg)?;
    let theta = analysis_theta(cfg, &center.phases);
    let f0 = bell_metric(cfg, theta)?;
    let shifts: Vec<(ScanAxis, f64)> = direction.iter().map(|&(a, w)| (a, w * x)).collect();
    Ok(bell_metric(&perturbed(cfg, &shifts), theta)? / f0)
}

/// First fractional excursion (step 1e-3, up to 0.9) at which the normalized
/// fidelity drops below `level`, in the positive and negative directions.
pub fn contour_crossing(cfg: &RunConfig, direction: &[(ScanAxis, f64)], level: f64) -> Result<(Option<f64>, Option<f64>)> {
    let center = gate_phases(cfg)?;
    let theta = analysis_theta(cfg, &center.phases);
    let f0 = bell_metric(cfg, theta)?;
    let mut out = [None, None];
    for (slot, sign) in out.iter_mut().zip([1.0, -1.0]) {
        for k in 1..=900 {
            let x = sign * k as f64 * 1e-3;
            let shifts: Vec<(ScanAxis, f64)> = direction.iter().map(|&(a, w)| (a, w * x)).collect();
            if bell_metric(&perturbed(cfg, &shifts), theta)? / f0 < level {
                *slot = Some(x);
                break;
            }
        }
    }
    Ok((out[0], out[1]))
}

fn axis_name(a: ScanAxis) -> &'static str {
    match a {
        ScanAxis::P459 => "p459",
        ScanAxis::P1038 => "p1038",
        ScanAxis::Delta1 => "delta1",
    }
}

pub fn cmd_scan(cfg: &RunConfig) -> Result<Report> {
    if cfg.gate.phases_rad.is_some() {
        return Err(CliError::Config("scan recomputes phases; remove gate.phases_rad".into()));
    }
    let mut rep = Report::new("scan");
    let center = gate_phases(cfg)?;
    if let Some(n) = &center.note {
        rep.note(n.clone());
    }
    let theta = analysis_theta(cfg, &center.phases);
    let f0 = bell_metric(cfg, theta)?;
    rep.scalar("theta", theta);
    rep.scalar("center_fidelity", f0);
    rep.note("analysis phase fixed at the centre point; fidelity (P00+P11)/2+|C1| normalized to the centre");

    let sc = &cfg.scan;
    let n = sc.points;
    let axis: Vec<f64> = (0..n).map(|k| sc.range[0] + (sc.range[1] - sc.range[0]) * k as f64 / (n - 1) as f64).collect();
    let [a0, a1] = sc.axes;
    let cells: Vec<(f64, f64)> = axis.iter().flat_map(|&u| axis.iter().map(move |&v| (u, v))).collect();
    let values: Vec<Result<f64>> = cells.par_iter().map(|&(u, v)| bell_metric(&perturbed(cfg, &[(a0, u), (a1, v)]), theta)).collect();
    let c0 = format!("{}_frac", axis_name(a0));
    let c1 = format!("{}_frac", axis_name(a1));
    let mut t = Table::new("grid", &[c0.as_str(), c1.as_str(), "fidelity", "normalized"]);
    let mut above = 0usize;
    for (&(u, v), f) in cells.iter().zip(values) {
        let f = f?;
        if f / f0 >= 0.95 {
            above += 1;
        }
        t.push_nums(&[u, v, f, f / f0]);
    }
    rep.scalar("fraction_above_0_95", above as f64 / cells.len() as f64);
    rep.tables.push(t);

    let mut ct = Table::new("contour_0_95", &["direction", "positive_crossing", "negative_crossing"]);
    let dirs: [(&str, Vec<(ScanAxis, f64)>); 4] = [
        ("p459", vec![(ScanAxis::P459, 1.0)]),
        ("p1038", vec![(ScanAxis::P1038, 1.0)]),
        ("p459_minus_p1038", vec![(ScanAxis::P459, 1.0), (ScanAxis::P1038, -1.0)]),
        ("delta1", vec![(ScanAxis::Delta1, 1.0)]),
    ];
    let crossings: Vec<Result<(Option<f64>, Option<f64>)>> = dirs.par_iter().map(|(_, d)| contour_crossing(cfg, d, 0.95)).collect();
    for ((name, _), c) in dirs.iter().zip(crossings) {
        let (pos, neg) = c?;
        let v = |x: Option<f64>| x.map(num).unwrap_or(Value::Null);
        ct.push(vec![text(*name), v(pos), v(neg)]);
    }
    rep.tables.push(ct);
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scenario {
    Gate,
    Rabi,
    PiGapPi,
}

fn ladders(cfg: &RunConfig) -> Result<(AtomLadder, AtomLadder)> {
    let hf: Hyperfine = cfg.dynamics.couplings.into();
    Ok((AtomLadder::from_excitation(&cfg.control()?, hf)?, AtomLadder::from_excitation(&cfg.target()?, hf)?))
}

fn propagate_opts(cfg: &RunConfig) -> PropagateOptions {
    PropagateOptions { rtol: cfg.dynamics.rtol, atol: cfg.dynamics.atol, ..PropagateOptions::default() }
}

fn grid(g: (f64, f64, usize)) -> Vec<f64> {
    let (a, b, n) = g;
    if n == 1 {
        return vec![microsecond(a)];
    }
    (0..n).map(|k| microsecond(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
}

pub fn cmd_simulate(cfg: &RunConfig, scenario: Scenario) -> Result<Report> {
    let d = &cfg.dynamics;
    let flavor = d.flavor.into();
    let opts = propagate_opts(cfg);
    let rise = nanosecond(d.rise_time_ns);
    let (lc, lt) = ladders(cfg)?;
    let mut rep = Report::new(match scenario {
        Scenario::Gate => "simulate_gate",
        Scenario::Rabi => "simulate_rabi",
        Scenario::PiGapPi => "simulate_pi_gap_pi",
    });
    match scenario {
        Scenario::Gate => {
            let blockade = cfg.gate.blockade_MHz.map(|b| Blockade::Finite(rydgate::units::mhz(b))).unwrap_or(Blockade::Perfect);
            let model = LadderModel::pair(lc, lt, blockade, flavor);
            let (sc, st) = (lc.site_inputs()?, lt.site_inputs()?);
            let ctx = GateContext::new(sc, st, cfg.t_gap(), cfg.blockade())?;
            let analytic = gatephase::assemble_phases(&ctx);
            let square = GateTiming { t_pi_c: sc.t_pi, t_pi_t: st.t_pi, t_gap: cfg.t_gap(), rise_time: 0.0, leg2_lead_lag: 0.0 };
            let ramped = GateTiming { rise_time: rise, leg2_lead_lag: nanosecond(d.leg2_lead_lag_ns), ..square };
            let s_sq = dynamics::simulate_gate(&model, &square, &opts)?;
            let s_rp = dynamics::simulate_gate(&model, &ramped, &opts)?;
            let mut t = Table::new(
                "phases",
                &["state", "analytic", "sim_square", "square_minus_analytic", "sim_ramped", "ramped_minus_square", "leakage_square", "leakage_ramped"],
            );
            let mut worst = 0.0f64;
            for (i, s) in ["00", "01", "10", "11"].iter().enumerate() {
                let (a, q, r) = (analytic.values()[i], s_sq.phases.values()[i], s_rp.phases.values()[i]);
                let diff = gatephase::wrap(q - a);
                worst = worst.max(diff.abs());
                t.push(vec![text(*s), num(a), num(q), num(diff), num(r), num(gatephase::wrap(r - q)), num(s_sq.leakage[i]), num(s_rp.leakage[i])]);
            }
            rep.tables.push(t);
            rep.scalar("max_abs_square_minus_analytic", worst);
            rep.scalar("max_leakage_square", s_sq.max_leakage);
            rep.scalar("max_leakage_ramped", s_rp.max_leakage);
            if s_sq.leakage_warning || s_rp.leakage_warning {
                rep.note("leakage above 0.05: analytic comparison unreliable");
            }

            // Population trace for |11⟩ through the ramped sequence.
            let seq = dynamics::gate_sequence(&ramped);
            let start = dynamics::basis_columns(16, &[dynamics::product_index(&[ONE, ONE])]);
            let tr = dynamics::propagate(&model, &seq, &start, &PropagateOptions { sample_dt: Some(nanosecond(d.sample_ns)), ..opts })?;
            let mut trace = Table::new(
                "trace_11",
                &["t_s", "c_pop_0", "c_pop_1", "c_pop_p", "c_pop_r", "t_pop_0", "t_pop_1", "t_pop_p", "t_pop_r"],
            );
            for smp in &tr.trace {
                let mut row = vec![smp.t];
                for atom in 0..2 {
                    for lvl in [ZERO, ONE, P, R] {
                        let s: f64 = (0..16).filter(|k| if atom == 0 { k / 4 == lvl } else { k % 4 == lvl }).map(|k| smp.populations[k]).sum();
                        row.push(s);
                    }
                }
                trace.push_nums(&row);
            }
            rep.tables.push(trace);
        }
        Scenario::Rabi => {
            let model = LadderModel::single(lc, flavor);
            let scan = dynamics::two_pi_scan(&model, &grid(d.rabi_grid_us), 0.0, &opts)?;
            rep.scalar("fitted_rabi_MHz", to_mhz(scan.fit.frequency));
            rep.scalar("analytic_rabi_MHz", to_mhz(lc.omega_r().abs()));
            let mut t = Table::new("rabi", &["duration_s", "ground_pop", "rydberg_pop"]);
            for &(dur, g, r) in &scan.points {
                t.push_nums(&[dur, g, r]);
            }
            rep.tables.push(t);
            let t2pi = 2.0 * PI / lc.omega_r().abs();
            let seg = dynamics::PulseSegment::ramped(dynamics::Site::Control, t2pi, rise.min(t2pi / 2.0));
            let tr = dynamics::propagate(
                &model,
                &[seg],
                &dynamics::basis_columns(4, &[ONE]),
                &PropagateOptions { sample_dt: Some(nanosecond(d.sample_ns)), ..opts },
            )?;
            let mut trace = Table::new("trace_2pi", &["t_s", "pop_0", "pop_1", "pop_p", "pop_r"]);
            for smp in &tr.trace {
                trace.push_nums(&[smp.t, smp.populations[0], smp.populations[1], smp.populations[2], smp.populations[3]]);
            }
            rep.tables.push(trace);
        }
        Scenario::PiGapPi => {
            let mut atom = lc;
            atom.laser_detuning += rydgate::units::mhz(d.two_photon_offset_MHz);
            let model = LadderModel::single(atom, flavor);
            let t_pi = lc.site_inputs()?.t_pi;
            let gaps = grid(d.gap_grid_us);
            let sq = dynamics::pi_gap_pi_scan(&model, t_pi, 0.0, &gaps, &opts)?;
            let rp = dynamics::pi_gap_pi_scan(&model, t_pi, rise, &gaps, &opts)?;
            let mut t = Table::new("pi_gap_pi", &["gap_s", "ground_pop_square", "ground_pop_ramped"]);
            for (a, b) in sq.iter().zip(&rp) {
                t.push_nums(&[a.0, a.1, b.1]);
            }
            rep.tables.push(t);
            let spread = rp.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max) - rp.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
            rep.scalar("ramped_population_spread", spread);
            rep.scalar("diff_gr_MHz", to_mhz(lc.laser_detuning));
        }
    }
    Ok(rep)
}
