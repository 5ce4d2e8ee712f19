//! The acceptance criteria, shared by the `verify all` command and the acceptance tests.

use std::time::Instant;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::damping::{
    check_geometric_control, closed_geodesic_samples, generator_axis_state, DampingField,
    DampingPreset, DEFAULT_CONTROL_THRESHOLD,
};
use crate::error::Result;
use crate::geometry::{bolza_relation_product, Complex, FundamentalDomain, GeodesicState};
use crate::mesh::{assemble, build_mesh, laplacian_eigs, AssembledOperators};
use crate::spectrum::{
    constant_damping_spectrum, expanded_taus, observability_ratio, resolvent_norm, resolvent_scan,
    scan_peaks, solve_qep, spectral_strip, spectrum_summary, trusted_re_bound, QepWindow,
};
use crate::wave::{evolve, fit_decay_rate, initial_state, EvolveOptions, InitialData};
use crate::words::{count_words, dyadic_grid, verify_count_bound, WordParameters};

pub const CRITERION_COUNT: u8 = 10;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub details: Vec<String>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<32} {} ({:.1} s)",
            self.id,
            self.title,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds
        )
    }
}

/// Collects named sub-checks of one criterion.
struct Checks {
    passed: bool,
    lines: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self {
            passed: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, msg: String) {
        self.passed &= ok;
        self.lines.push(format!("[{}] {msg}", if ok { "ok" } else { "FAILED" }));
    }
}

pub fn title(id: u8) -> &'static str {
    match id {
        1 => "constant-damping oracle",
        2 => "spectrum structure",
        3 => "gap positivity and stability",
        4 => "energy decay law",
        5 => "geometry suite",
        6 => "flow averages",
        7 => "Weyl and concentration",
        8 => "resolvent scanner",
        9 => "observability",
        10 => "word combinatorics",
        _ => "unknown",
    }
}

/// Runs one criterion; errors count as failures and are reported in the details.
pub fn run_criterion(id: u8) -> CriterionReport {
    let start = Instant::now();
    let outcome = match id {
        1 => constant_oracle(),
        2 => structure_suite(),
        3 => gap_stability(),
        4 => decay_law(),
        5 => geometry_suite(),
        6 => flow_average_suite(),
        7 => weyl_statistics(),
        8 => resolvent_suite(),
        9 => observability_suite(),
        10 => word_suite(),
        _ => Err(crate::Error::Argument(format!("no criterion {id}"))),
    };
    let (passed, details) = match outcome {
        Ok(c) => (c.passed, c.lines),
        Err(e) => (false, vec![format!("[FAILED] error: {e}")]),
    };
    CriterionReport {
        id,
        title: title(id),
        passed,
        details,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_all() -> Vec<CriterionReport> {
    (1..=CRITERION_COUNT).map(run_criterion).collect()
}

fn operators(level: usize, a: &DampingField) -> Result<AssembledOperators> {
    assemble(&build_mesh(level)?, a)
}

fn rel(a: Complex, b: Complex) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

fn constant_oracle() -> Result<Checks> {
    let mut c = Checks::new();
    let start = Instant::now();
    let a0 = 0.5;
    let ops = operators(4, &DampingField::constant(a0)?)?;
    let eigs = solve_qep(&ops, &QepWindow::symmetric(5.0, 20))?;
    let got = expanded_taus(&eigs);
    let lambdas: Vec<f64> = laplacian_eigs(&ops, 40)?.iter().map(|m| m.lambda).collect();
    let mut oracle = constant_damping_spectrum(&lambdas, a0);
    oracle.sort_by(|x, y| x.re.abs().partial_cmp(&y.re.abs()).unwrap());
    let mut used = vec![false; oracle.len()];
    let mut worst = 0.0f64;
    for t in got.iter().take(20) {
        let (j, d) = oracle
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, o)| (j, rel(*t, *o)))
            .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .expect("oracle list longer than the solve");
        used[j] = true;
        worst = worst.max(d);
    }
    let elapsed = start.elapsed().as_secs_f64();
    c.check(got.len() >= 20, format!("{} eigenvalues with multiplicity returned", got.len()));
    c.check(worst <= 1e-6, format!("worst relative deviation from the closed form {worst:.2e}"));
    c.check(elapsed <= 120.0, format!("runtime {elapsed:.1} s"));
    Ok(c)
}

fn structure_suite() -> Result<Checks> {
    let mut c = Checks::new();
    for preset in DampingPreset::ALL {
        let ops = operators(3, &preset.field()?)?;
        let trusted = trusted_re_bound(&ops);
        let eigs = solve_qep(&ops, &QepWindow::symmetric(trusted, 2 * ops.dof_count))?;
        let s = spectrum_summary(&eigs, &ops)?;
        let (lo, hi) = spectral_strip(&ops);
        let name = preset.name();
        c.check(s.symmetry_defect <= 1e-6, format!("{name}: symmetry defect {:.1e}", s.symmetry_defect));
        c.check(
            s.im_range.0 >= lo && s.im_range.1 <= hi,
            format!("{name}: Im τ in [{:.4}, {:.2e}] within [{lo:.4}, {hi:.0e}]", s.im_range.0, s.im_range.1),
        );
        c.check(
            s.zero_mode.present && s.zero_mode.multiplicity == 1 && s.zero_mode.constant_defect <= 1e-6,
            format!(
                "{name}: zero mode present {} multiplicity {} constant defect {:.1e}",
                s.zero_mode.present, s.zero_mode.multiplicity, s.zero_mode.constant_defect
            ),
        );
        c.check(
            s.max_im_off_axis < 0.0,
            format!("{name}: largest Im τ off the imaginary axis {:.3e}", s.max_im_off_axis),
        );
    }
    Ok(c)
}

fn gap_stability() -> Result<Checks> {
    let mut c = Checks::new();
    let a = DampingPreset::AxisAvoidingBump.field()?;
    let mut gaps = Vec::new();
    for level in 3..=5 {
        let ops = operators(level, &a)?;
        let eigs = solve_qep(&ops, &QepWindow::symmetric(6.0, 2 * ops.dof_count))?;
        let g = spectrum_summary(&eigs, &ops)?.gap_g;
        c.check(g > 1e-4, format!("refinement {level}: gap_G = {g:.6}"));
        gaps.push(g);
    }
    let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gaps.iter().copied().fold(0.0, f64::max);
    let spread = (hi - lo) / lo;
    c.check(spread <= 0.3, format!("relative spread across refinements {spread:.3}"));
    Ok(c)
}

fn decay_law() -> Result<Checks> {
    let mut c = Checks::new();
    let level = 3;
    let a0 = 0.3;
    let ops = operators(level, &DampingField::constant(a0)?)?;
    let (init, _) = initial_state(&ops, &InitialData::LowPass { lambda_cut: 20.0, seed: 7 }, None)?;
    let mut opts = EvolveOptions::new(0.01, 40.0);
    opts.stride = 5;
    let (_, trace) = evolve(&ops, &init, &opts)?;
    let fit = fit_decay_rate(&trace, None)?;
    let g = fit.gamma_fit.unwrap_or(f64::NAN);
    c.check((g - 2.0 * a0).abs() <= 0.05 * 2.0 * a0, format!("constant {a0}, low-pass data: γ_fit = {g:.5}"));
    c.check(trace.is_nonincreasing(1e-10), format!("low-pass trace max rise {:.2e}·E(0)", trace.max_increase() / trace.initial_energy()));

    for preset in DampingPreset::ALL {
        let ops = operators(level, &preset.field()?)?;
        let eigs = solve_qep(&ops, &QepWindow::symmetric(4.0, 200))?;
        let idx = eigs
            .iter()
            .position(|e| e.tau.re.abs() > 1e-6)
            .ok_or_else(|| crate::Error::Numerical("no oscillating mode in the window".into()))?;
        let (init, oracle) = initial_state(&ops, &InitialData::QepMode { index: idx }, Some(&eigs))?;
        let oracle = oracle.unwrap_or(f64::NAN);
        let mut opts = EvolveOptions::new(0.01, (6.0 / oracle).clamp(20.0, 400.0));
        opts.stride = 10;
        let (_, trace) = evolve(&ops, &init, &opts)?;
        let g = fit_decay_rate(&trace, None)?.gamma_fit.unwrap_or(f64::NAN);
        let name = preset.name();
        c.check(
            (g - oracle).abs() <= 0.05 * oracle,
            format!("{name}: γ_fit = {g:.5}, 2·(−Im τ) = {oracle:.5} for τ = {:.4}", eigs[idx].tau),
        );
        c.check(trace.is_nonincreasing(1e-10), format!("{name}: trace nonincreasing"));
    }

    let ops = operators(level, &DampingField::zero())?;
    let (init, _) = initial_state(&ops, &InitialData::LowPass { lambda_cut: 20.0, seed: 7 }, None)?;
    let mut opts = EvolveOptions::new(0.01, 50.0);
    opts.stride = 10;
    let (_, trace) = evolve(&ops, &init, &opts)?;
    let e0 = trace.initial_energy();
    let drift = trace.samples.iter().map(|s| (s.1 - e0).abs()).fold(0.0, f64::max) / e0;
    c.check(drift <= 1e-8, format!("no damping: relative energy drift {drift:.2e} over T = 50"));
    Ok(c)
}

fn geometry_suite() -> Result<Checks> {
    let mut c = Checks::new();
    let defect = bolza_relation_product()?.identity_defect();
    c.check(defect <= 1e-8, format!("relation product identity defect {defect:.2e}"));
    let domain = FundamentalDomain::bolza();
    let four_pi = 4.0 * std::f64::consts::PI;
    let oct = domain.area_by_quadrature(64);
    c.check((oct - four_pi).abs() <= 0.01 * four_pi, format!("octagon area {oct:.8}"));
    for level in 3..=5 {
        let ops = operators(level, &DampingField::zero())?;
        let err = (ops.area - four_pi).abs() / four_pi;
        c.check(err <= 0.01, format!("refinement {level}: mesh area {:.5} (relative error {:.3}%)", ops.area, 100.0 * err));
    }
    for level in 0..=5 {
        let chi = build_mesh(level)?.euler_characteristic();
        c.check(chi == -2, format!("refinement {level}: Euler characteristic {chi}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let r = 0.6 * rng.gen::<f64>().sqrt();
        let s = GeodesicState::new(
            Complex::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU)),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let (t1, t2) = (rng.gen_range(0.0..6.0), rng.gen_range(0.0..6.0));
        let two = domain.flow(&domain.flow(&s, t1)?, t2)?;
        let one = domain.flow(&s, t1 + t2)?;
        worst = worst.max(two.separation(&one));
    }
    c.check(worst <= 1e-8, format!("flow semigroup worst separation {worst:.2e} over 100 cases"));
    Ok(c)
}

fn flow_average_suite() -> Result<Checks> {
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let value = 0.37;
    let constant = DampingField::constant(value)?;
    let bump = DampingPreset::SingleBump.field()?;
    let mut const_err = 0.0f64;
    let mut additivity = 0.0f64;
    for _ in 0..20 {
        let s = GeodesicState::new(
            Complex::from_polar(0.5 * rng.gen::<f64>(), rng.gen_range(0.0..std::f64::consts::TAU)),
            rng.gen_range(-3.0..3.0),
        );
        let t = rng.gen_range(0.5..15.0);
        const_err = const_err.max((constant.flow_average(&s, t)? - value).abs());
        // the flow expands perturbations like e^t, so longer splits only measure roundoff
        let t = t.min(8.0);
        let (first, mid) = bump.flow_average_with_end(&s, t)?;
        let second = bump.flow_average(&mid, t)?;
        let whole = bump.flow_average(&s, 2.0 * t)?;
        additivity = additivity.max((2.0 * whole - first - second).abs());
    }
    c.check(const_err <= 1e-9, format!("constant field average error {const_err:.2e}"));
    c.check(additivity <= 1e-7, format!("additivity defect {additivity:.2e}"));
    let a = DampingPreset::AxisAvoidingBump.field()?;
    let axis = generator_axis_state();
    let grid: Vec<f64> = (1..=40).map(|k| 0.5 * k as f64).collect();
    let on_axis = a.flow_averages_on_grid(&axis, &grid)?;
    let max_axis = on_axis.iter().copied().fold(0.0, f64::max);
    c.check(max_axis == 0.0, format!("axis averages over {} grid times, max {max_axis:e}", grid.len()));
    let domain = FundamentalDomain::bolza();
    let samples = closed_geodesic_samples(&domain)?;
    let report = check_geometric_control(&a, 20.0, &samples, DEFAULT_CONTROL_THRESHOLD)?;
    let witness_is_axis = report
        .witness
        .map(|w| w.separation(&axis) < 1e-12)
        .unwrap_or(false);
    c.check(
        !report.controlled && witness_is_axis,
        format!("control check returns {} with the axis as witness: {witness_is_axis}", report.controlled),
    );
    Ok(c)
}

fn weyl_statistics() -> Result<Checks> {
    let mut c = Checks::new();
    let level = 4;
    for preset in DampingPreset::ALL {
        let ops = operators(level, &preset.field()?)?;
        let trusted = trusted_re_bound(&ops);
        let eigs = solve_qep(&ops, &QepWindow::symmetric(trusted, 2 * ops.dof_count))?;
        let taus = expanded_taus(&eigs);
        let name = preset.name();
        let mut worst = 0.0f64;
        for k in 0..=12 {
            let r = trusted * (0.25 + 0.75 * k as f64 / 12.0);
            let n = 0.5 * taus.iter().filter(|t| t.re.abs() <= r).count() as f64;
            worst = worst.max((n / (r * r) - 1.0).abs());
        }
        c.check(
            worst <= 0.25,
            format!("{name}: max |N(r)/r² − 1| = {worst:.3} for r in [{:.2}, {trusted:.2}]", 0.25 * trusted),
        );
        if preset != DampingPreset::Constant {
            let s = spectrum_summary(&eigs, &ops)?;
            let frac = s.concentration.last().map(|x| x.1).unwrap_or(0.0);
            c.check(frac > 0.5, format!("{name}: fraction within 0.2‖a‖ of −⟨a⟩ = {frac:.3}"));
        }
    }
    Ok(c)
}

fn resolvent_suite() -> Result<Checks> {
    let mut c = Checks::new();
    for level in [2, 3] {
        let ops = operators(level, &DampingField::zero())?;
        let r = resolvent_norm(&ops, Complex::new(0.0, 1.0))?;
        c.check((r.norm - 1.0).abs() <= 1e-8, format!("refinement {level}, a = 0: ‖R(i)‖ − 1 = {:.2e}", r.norm - 1.0));
    }
    let ops = operators(3, &DampingPreset::SingleBump.field()?)?;
    let eigs = solve_qep(&ops, &QepWindow::symmetric(6.5, 2 * ops.dof_count))?;
    let spacing = 0.01;
    let grid: Vec<f64> = (0..=550).map(|k| 0.5 + spacing * k as f64).collect();
    let scan = resolvent_scan(&ops, &grid, 0.0)?;
    let peaks = scan_peaks(&scan);
    let mut worst = 0.0f64;
    for &p in &peaks {
        let x = grid[p];
        let d = eigs.iter().map(|e| (e.tau.re - x).abs()).fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
    }
    c.check(!peaks.is_empty(), format!("single bump, Im τ = 0: {} peaks on [0.5, 6]", peaks.len()));
    c.check(worst <= spacing, format!("largest peak offset from an eigenvalue real part {worst:.4} (grid {spacing})"));
    Ok(c)
}

fn observability_suite() -> Result<Checks> {
    let mut c = Checks::new();
    let a = DampingPreset::SingleBump.field()?;
    let mut mins = Vec::new();
    for level in [4, 5] {
        let ops = operators(level, &a)?;
        let r = observability_ratio(&ops, 50)?;
        c.check(r.min_ratio > 0.0, format!("refinement {level}: min ratio over 50 modes {:.5}", r.min_ratio));
        mins.push(r.min_ratio);
    }
    let spread = (mins[0] - mins[1]).abs() / mins[0].min(mins[1]);
    c.check(spread <= 0.1, format!("relative difference across refinements {spread:.4}"));
    Ok(c)
}

fn word_suite() -> Result<Checks> {
    let mut c = Checks::new();
    let start = Instant::now();
    let mut mismatches = 0;
    for n0 in 1..=16u64 {
        let popcounts: Vec<u32> = (0u32..1 << n0).map(|w| w.count_ones()).collect();
        for k in 1..=9 {
            let p = WordParameters::with_n0(n0, k as f64 / 10.0)?;
            let t = p.threshold() as u32;
            let brute = popcounts.iter().filter(|&&ones| ones >= t).count();
            if count_words(&p)?.z_count != BigUint::from(brute) {
                mismatches += 1;
            }
        }
    }
    c.check(mismatches == 0, format!("binomial sums vs enumeration, N0 ≤ 16, 9 values of α: {mismatches} mismatches"));
    let report = verify_count_bound(&dyadic_grid(4, 40)?, 0.9, 1.0 / 16.0)?;
    c.check(
        report.max <= 10.0 * report.first,
        format!("max of x·h^(4√α) over h = 2^-4..2^-40 is {:.3e} = {:.3}× the first value", report.max, report.ratio_to_first),
    );
    let elapsed = start.elapsed().as_secs_f64();
    c.check(elapsed <= 10.0, format!("runtime {elapsed:.2} s"));
    Ok(c)
}
