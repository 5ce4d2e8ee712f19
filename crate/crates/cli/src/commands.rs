use crate::config::RunConfig;
use crate::emit::{num, Emitter, LinePlot};
use anyhow::{Context, Result};
use hyperdamp::damping::{check_geometric_control, estimate_asymptotic_constants, sample_states};
use hyperdamp::geometry::{bolza_relation_product, FundamentalDomain};
use hyperdamp::mesh::{assemble, build_mesh, write_sparse_text, AssembledOperators, HyperbolicMesh};
use hyperdamp::spectrum::{
    resolvent_scan, scan_peaks, solve_qep, spectrum_summary, trusted_re_bound, DampedEigenvalue, QepWindow,
};
use hyperdamp::verify::{run_criterion, CriterionReport, CRITERION_COUNT};
use hyperdamp::wave::{evolve, fit_decay_rate, initial_state, verify_integrated_energy};
use hyperdamp::words::{dyadic_grid, verify_count_bound};
use serde::Serialize;

/// Energy may rise by at most this fraction of `E(0)` between samples.
pub const ENERGY_SLACK: f64 = 1e-10;

pub enum Status {
    Ok,
    /// A computed invariant does not hold; artifacts are still written.
    Violation(String),
}

fn operators(cfg: &RunConfig) -> Result<(HyperbolicMesh, AssembledOperators)> {
    let mesh = build_mesh(cfg.refinement()).context("building the mesh")?;
    let a = cfg.damping_field().context("building the damping field")?;
    let ops = assemble(&mesh, &a).context("assembling operators")?;
    Ok((mesh, ops))
}

fn window(cfg: &RunConfig, ops: &AssembledOperators) -> QepWindow {
    let t = trusted_re_bound(ops);
    QepWindow {
        re_min: cfg.spectrum.re_min.unwrap_or(-t),
        re_max: cfg.spectrum.re_max.unwrap_or(t),
        // the pencil has 2n eigenvalues, so the count is an upper limit
        count: cfg.spectrum.count.min(2 * ops.dof_count),
    }
}

fn solve(cfg: &RunConfig, ops: &AssembledOperators) -> Result<Vec<DampedEigenvalue>> {
    solve_qep(ops, &window(cfg, ops)).context("solving the damped eigenvalue problem")
}

#[derive(Serialize)]
struct GeneratorInfo {
    alpha: [f64; 2],
    beta: [f64; 2],
    translation_length: f64,
}

#[derive(Serialize)]
struct MeshInfo {
    refinement: usize,
    vertices: usize,
    triangles: usize,
    dof_count: usize,
    edges: usize,
    euler_characteristic: i64,
    min_angle_deg: f64,
    identification_defect: f64,
    area: f64,
}

#[derive(Serialize)]
struct SurfaceInfo {
    genus: usize,
    area: f64,
    gauss_bonnet_area: f64,
    relation_defect: f64,
    circumradius: f64,
    inradius: f64,
    vertices: Vec<[f64; 2]>,
    generators: Vec<GeneratorInfo>,
    mesh: MeshInfo,
}

pub fn surface_info(cfg: &RunConfig, out: &mut Emitter) -> Result<Status> {
    let domain = FundamentalDomain::bolza();
    let (mesh, ops) = operators(cfg)?;
    let info = SurfaceInfo {
        genus: domain.genus(),
        area: domain.area_by_quadrature(64),
        gauss_bonnet_area: 4.0 * std::f64::consts::PI,
        relation_defect: bolza_relation_product()?.identity_defect(),
        circumradius: domain.circumradius(),
        inradius: domain.inradius(),
        vertices: domain.vertices().iter().map(|z| [z.re, z.im]).collect(),
        generators: domain
            .generators()
            .iter()
            .map(|g| GeneratorInfo {
                alpha: [g.alpha().re, g.alpha().im],
                beta: [g.beta().re, g.beta().im],
                translation_length: g.translation_length(),
            })
            .collect(),
        mesh: MeshInfo {
            refinement: mesh.refinement,
            vertices: mesh.vertices.len(),
            triangles: mesh.triangles.len(),
            dof_count: mesh.dof_count,
            edges: mesh.edge_count(),
            euler_characteristic: mesh.euler_characteristic(),
            min_angle_deg: mesh.min_angle_deg(),
            identification_defect: mesh.identification_defect(),
            area: ops.area,
        },
    };
    println!("area {:.8} (4π = {:.8}), mesh area {:.8}", info.area, info.gauss_bonnet_area, ops.area);
    out.json("surface.json", &info)?;
    Ok(Status::Ok)
}

pub fn flow_average(cfg: &RunConfig, out: &mut Emitter) -> Result<Status> {
    let a = cfg.damping_field()?;
    let f = &cfg.flow;
    let samples = sample_states(a.domain(), f.radial, f.angular, f.directions)?;
    let report = estimate_asymptotic_constants(&a, &samples, &f.t_grid).context("flow averages")?;
    println!(
        "a_- ≈ {:.6}, a_+ ≈ {:.6} at T = {} over {} geodesics (stable: {})",
        report.a_minus_est,
        report.a_plus_est,
        f.t_grid.last().unwrap(),
        report.sample_size,
        report.converged
    );
    let rows: Vec<Vec<String>> = report
        .t_grid
        .iter()
        .zip(report.inf_estimates.iter().zip(&report.sup_estimates))
        .map(|(t, (lo, hi))| vec![num(*t), num(*lo), num(*hi)])
        .collect();
    out.csv("flow_average.csv", &["t", "inf_average", "sup_average"], &rows)?;
    out.json("flow_average.json", &report)?;
    Ok(Status::Ok)
}

pub fn control_check(cfg: &RunConfig, out: &mut Emitter) -> Result<Status> {
    let a = cfg.damping_field()?;
    let f = &cfg.flow;
    let samples = sample_states(a.domain(), f.radial, f.angular, f.directions)?;
    let report = check_geometric_control(&a, f.control_length, &samples, f.threshold).context("control check")?;
    println!(
        "geometric control at L = {}: {} (min average {:.3e})",
        report.length, report.controlled, report.min_average
    );
    out.json("control.json", &report)?;
    Ok(Status::Ok)
}

pub fn spectrum_solve(cfg: &RunConfig, out: &mut Emitter) -> Result<Status> {
    let (_, ops) = operators(cfg)?;
    let eigs = solve(cfg, &ops)?;
    let summary = spectrum_summary(&eigs, &ops)?;
    println!(
        "{} eigenvalues, gap_G = {:.6}, symmetry defect {:.2e}",
        eigs.len(),
        summary.gap_g,
        summary.symmetry_defect
    );
    let rows: Vec<Vec<String>> = eigs
        .iter()
        .map(|e| {
            vec![
                num(e.tau.re),
                num(e.tau.im),
                num(e.residual),
                e.multiplicity.to_string(),
                e.paired_index.map(|i| i.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    out.csv("eigenvalues.csv", &["re", "im", "residual", "multiplicity", "paired_index"], &rows)?;
    out.json("spectrum_summary.json", &summary)?;
    Ok(Status::Ok)
}

pub fn resolvent(cfg: &RunConfig, out: &mut Emitter) -> Result<Status> {
    let (_, ops) = operators(cfg)?;
    let r = &cfg.resolvent;
    let step = (r.re_max - r.re_min) / (r.points - 1) as f64;
    let grid: Vec<f64> = (0..r.points).map(|i| r.re_min + step * i as f64).collect();
    let values = resolvent_scan(&ops, &grid, r.im).context("resolvent scan")?;
    let peaks = scan_peaks(&values);
    println!("{} grid points, {} peaks", values.len(), peaks.len());
    let rows: Vec<Vec<String>> = values
        .iter()
        .map(|v| vec![num(v.re), num(v.im), num(v.norm), num(v.sigma_min), v.near_singular.to_string()])
        .collect();
    out.csv("resolvent.csv", &["re", "im", "norm", "sigma_min", "near_singular"], &rows)?;
    out.svg(
        "resolvent.svg",
        &LinePlot {
            title: format!("resolvent norm at Im τ = {}", r.im),
            x_label: "Re τ".into(),
            y_label: "log10 ‖R(τ)‖".into(),
            series: vec![values.iter().map(|v| (v.re, v.norm.log10())).collect()],
            markers: peaks.iter().map(|&i| values[i].re).collect(),
        },
    );
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct WaveSummary {
    dof_count: usize,
    initial_energy: f64,
    final_energy: f64,
    max_increase: f64,
    nonincreasing: bool,
    gamma_fit: Option<f64>,
    fit_window: Option<(f64, f64)>,
    fit_r2: Option<f64>,
    fit_error: Option<String>,
    gamma_oracle: Option<f64>,
    integrated_energy: Option<hyperdamp::wave::IntegratedEnergyReport>,
}

pub fn wave_evolve(cfg: &RunConfig, out: &mut Emitter) -> Result<Status> {
    let (_, ops) = operators(cfg)?;
    let data = cfg.initial_data();
    let eigs = match cfg.wave.initial {
        crate::config::InitialKind::QepMode => Some(solve(cfg, &ops)?),
        _ => None,
    };
    let (init, oracle) = initial_state(&ops, &data, eigs.as_deref()).context("initial data")?;
    let (_, trace) = evolve(&ops, &init, &cfg.evolve_options()).context("time integration")?;
    let oracle = oracle.or_else(|| {
        let a = cfg.damping_field().ok()?.constant_value()?;
        matches!(cfg.wave.initial, crate::config::InitialKind::LowPass).then_some(2.0 * a)
    });
    let (fitted, fit_error) = match fit_decay_rate(&trace, None) {
        Ok(t) => (t, None),
        Err(e) => (trace.clone(), Some(e.to_string())),
    };
    let t_end = trace.samples.last().map(|s| s.0).unwrap_or(0.0);
    let t_grid: Vec<f64> = (2..).map(f64::from).take_while(|t| t + 1.0 <= t_end).collect();
    let integrated = if t_grid.is_empty() { None } else { Some(verify_integrated_energy(&trace, &t_grid)?) };
    let nonincreasing = trace.is_nonincreasing(ENERGY_SLACK);
    let summary = WaveSummary {
        dof_count: ops.dof_count,
        initial_energy: trace.initial_energy(),
        final_energy: trace.final_energy(),
        max_increase: trace.max_increase(),
        nonincreasing,
        gamma_fit: fitted.gamma_fit,
        fit_window: fitted.fit_window,
        fit_r2: fitted.fit_r2,
        fit_error,
        gamma_oracle: oracle,
        integrated_energy: integrated,
    };
    println!(
        "E(0) = {:.6e}, E(T) = {:.6e}, gamma_fit = {}, oracle = {}",
        summary.initial_energy,
        summary.final_energy,
        summary.gamma_fit.map(|g| format!("{g:.6}")).unwrap_or_else(|| "n/a".into()),
        summary.gamma_oracle.map(|g| format!("{g:.6}")).unwrap_or_else(|| "n/a".into()),
    );
    let rows: Vec<Vec<String>> = trace
        .samples
        .iter()
        .zip(&trace.h1_sq)
        .map(|((t, e), h)| vec![num(*t), num(*e), num(*h)])
        .collect();
    out.csv("energy.csv", &["t", "energy", "h1_sq"], &rows)?;
    out.json("wave_summary.json", &summary)?;
    out.svg(
        "energy.svg",
        &LinePlot {
            title: "energy decay".into(),
            x_label: "t".into(),
            y_label: "log10 E(t)".into(),
            series: vec![trace.samples.iter().map(|(t, e)| (*t, e.log10())).collect()],
            markers: Vec::new(),
        },
    );
    if nonincreasing {
        Ok(Status::Ok)
    } else {
        Ok(Status::Violation(format!(
            "energy increased by {:.3e} between samples (allowed {:.1e}·E(0))",
            summary.max_increase, ENERGY_SLACK
        )))
    }
}

pub fn words_bound(cfg: &RunConfig, out: &mut Emitter) -> Result<Status> {
    let w = &cfg.words;
    let grid = dyadic_grid(w.kmin, w.kmax)?;
    let report = verify_count_bound(&grid, w.rho, w.alpha)?;
    println!(
        "{} grid points, max x·h^(4√α) = {:.6e} ({:.3}× the first)",
        report.rows.len(),
        report.max,
        report.ratio_to_first
    );
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.h),
                r.n0.to_string(),
                r.z_count.clone(),
                r.q_count.clone(),
                r.x_count.clone(),
                num(r.scaled),
            ]
        })
        .collect();
    out.csv("words_bound.csv", &["h", "n0", "z_count", "q_count", "x_count", "scaled"], &rows)?;
    out.json("words_bound.json", &report)?;
    Ok(Status::Ok)
}

pub fn mesh_export(cfg: &RunConfig, out: &mut Emitter) -> Result<Status> {
    let (mesh, ops) = operators(cfg)?;
    let mut buf = Vec::new();
    write_sparse_text(&ops, &mut buf)?;
    out.text("matrices.txt", &buf);
    out.json("mesh.json", &mesh)?;
    println!("{} degrees of freedom, {} triangles", ops.dof_count, mesh.triangles.len());
    Ok(Status::Ok)
}

pub fn verify_all(only: &[u8], out: &mut Emitter) -> Result<Vec<CriterionReport>> {
    let ids: Vec<u8> = if only.is_empty() { (1..=CRITERION_COUNT).collect() } else { only.to_vec() };
    let mut reports = Vec::new();
    for id in ids {
        let r = run_criterion(id);
        println!("{}", r.line());
        if !r.passed {
            for d in &r.details {
                println!("    {d}");
            }
        }
        reports.push(r);
    }
    out.json("acceptance.json", &reports)?;
    Ok(reports)
}
