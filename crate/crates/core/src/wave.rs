//! Time integration of `M v̈ + 2A v̇ + K v = 0`, energy traces and decay-rate fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{hyperbolic_distance, Complex};
use crate::mesh::{laplacian_eigs, AssembledOperators};
use crate::spectrum::DampedEigenvalue;

/// Fraction of the trace dropped as transient by the default fit window.
pub const FIT_SKIP: f64 = 0.2;
/// Fraction of the trace fitted by the default window.
pub const FIT_SPAN: f64 = 0.6;
/// Fits below this coefficient of determination are rejected.
pub const MIN_FIT_R2: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    pub displacement: Vec<f64>,
    pub velocity: Vec<f64>,
    pub time: f64,
}

impl WaveState {
    pub fn new(displacement: Vec<f64>, velocity: Vec<f64>) -> Result<Self> {
        let s = Self {
            displacement,
            velocity,
            time: 0.0,
        };
        s.check(s.displacement.len())?;
        Ok(s)
    }

    pub fn zero(n: usize) -> Self {
        Self {
            displacement: vec![0.0; n],
            velocity: vec![0.0; n],
            time: 0.0,
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.displacement.len() != n || self.velocity.len() != n {
            return Err(Error::Argument(format!(
                "state dimensions {}/{} do not match {n} dofs",
                self.displacement.len(),
                self.velocity.len()
            )));
        }
        if self
            .displacement
            .iter()
            .chain(&self.velocity)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Numerical(format!("non-finite state at t = {}", self.time)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct EnergyTrace {
    /// `(t, E)`.
    pub samples: Vec<(f64, f64)>,
    /// `vᵀKv + vᵀMv` at each sample time.
    pub h1_sq: Vec<f64>,
    pub gamma_fit: Option<f64>,
    pub fit_window: Option<(f64, f64)>,
    pub fit_r2: Option<f64>,
    pub gamma_oracle: Option<f64>,
}

impl EnergyTrace {
    /// Largest increase between consecutive samples.
    pub fn max_increase(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn initial_energy(&self) -> f64 {
        self.samples.first().map(|s| s.1).unwrap_or(0.0)
    }

    pub fn final_energy(&self) -> f64 {
        self.samples.last().map(|s| s.1).unwrap_or(0.0)
    }

    /// Whether E never rises by more than `rel · E(0)` between samples.
    pub fn is_nonincreasing(&self, rel: f64) -> bool {
        self.samples.len() < 2 || self.max_increase() <= rel * self.initial_energy()
    }
}

/// `½(v̇ᵀMv̇ + vᵀKv)`.
pub fn energy(ops: &AssembledOperators, s: &WaveState) -> f64 {
    0.5 * (ops.m.quadratic_form(&s.velocity) + ops.k.quadratic_form(&s.displacement))
}

fn h1_sq(ops: &AssembledOperators, v: &[f64]) -> f64 {
    ops.k.quadratic_form(v) + ops.m.quadratic_form(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Newmark average acceleration (implicit trapezoidal rule).
    #[default]
    AverageAcceleration,
    /// Explicit central differences; needs `dt ≤ 0.5/sqrt(λ_max)`.
    Leapfrog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_final: f64,
    /// Steps between energy samples.
    pub stride: usize,
    pub integrator: Integrator,
}

impl EvolveOptions {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            t_final,
            stride: 1,
            integrator: Integrator::AverageAcceleration,
        }
    }
}

/// Largest eigenvalue of `M⁻¹K` by power iteration, inflated by 5%.
pub fn lambda_max_estimate(ops: &AssembledOperators) -> f64 {
    let n = ops.dof_count;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut est = 0.0;
    for _ in 0..60 {
        let y = ops.mass_factor.solve(&ops.k.mul_vec(&x));
        let nrm = ops.m_norm(&y);
        if nrm == 0.0 {
            return 0.0;
        }
        est = ops.m_inner(&x, &y) / ops.m_norm(&x).powi(2);
        x = y.iter().map(|v| v / nrm).collect();
    }
    1.05 * est
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// Integrates from `init` to `t_final` with a fixed step and records the energy.
pub fn evolve(
    ops: &AssembledOperators,
    init: &WaveState,
    opts: &EvolveOptions,
) -> Result<(WaveState, EnergyTrace)> {
    let n = ops.dof_count;
    init.check(n)?;
    if !(opts.dt > 0.0) || !opts.dt.is_finite() {
        return Err(Error::Argument(format!("time step {} must be positive", opts.dt)));
    }
    if !(opts.t_final >= 0.0) || !opts.t_final.is_finite() {
        return Err(Error::Argument(format!("final time {} must be nonnegative", opts.t_final)));
    }
    if opts.stride == 0 {
        return Err(Error::Argument("sample stride must be positive".into()));
    }
    let steps = (opts.t_final / opts.dt).round() as usize;
    match opts.integrator {
        Integrator::AverageAcceleration => newmark(ops, init, opts, steps),
        Integrator::Leapfrog => {
            let lmax = lambda_max_estimate(ops);
            if opts.dt > 0.5 / lmax.sqrt() {
                return Err(Error::Argument(format!(
                    "explicit step {} exceeds 0.5/sqrt(λ_max) = {}",
                    opts.dt,
                    0.5 / lmax.sqrt()
                )));
            }
            leapfrog(ops, init, opts, steps)
        }
    }
}

fn record(ops: &AssembledOperators, s: &WaveState, trace: &mut EnergyTrace) {
    trace.samples.push((s.time, energy(ops, s)));
    trace.h1_sq.push(h1_sq(ops, &s.displacement));
}

fn newmark(
    ops: &AssembledOperators,
    init: &WaveState,
    opts: &EvolveOptions,
    steps: usize,
) -> Result<(WaveState, EnergyTrace)> {
    let n = ops.dof_count;
    let dt = opts.dt;
    let eff = ops.factor_real(&[(1.0, &ops.m), (dt, &ops.a), (0.25 * dt * dt, &ops.k)])?;
    let mut s = init.clone();
    let mut trace = EnergyTrace::default();
    record(ops, &s, &mut trace);
    let force = |v: &[f64], w: &[f64]| -> Vec<f64> {
        let kv = ops.k.mul_vec(v);
        let aw = ops.a.mul_vec(w);
        (0..n).map(|i| -kv[i] - 2.0 * aw[i]).collect()
    };
    let mut acc = ops.mass_factor.solve(&force(&s.displacement, &s.velocity));
    for step in 1..=steps {
        let mut v_pred = s.displacement.clone();
        axpy(&mut v_pred, dt, &s.velocity);
        axpy(&mut v_pred, 0.25 * dt * dt, &acc);
        let mut w_pred = s.velocity.clone();
        axpy(&mut w_pred, 0.5 * dt, &acc);
        let next_acc = eff.solve(&force(&v_pred, &w_pred));
        axpy(&mut v_pred, 0.25 * dt * dt, &next_acc);
        axpy(&mut w_pred, 0.5 * dt, &next_acc);
        s.displacement = v_pred;
        s.velocity = w_pred;
        s.time = init.time + step as f64 * dt;
        acc = next_acc;
        if step % opts.stride == 0 || step == steps {
            s.check(n)?;
            record(ops, &s, &mut trace);
        }
    }
    Ok((s, trace))
}

fn leapfrog(
    ops: &AssembledOperators,
    init: &WaveState,
    opts: &EvolveOptions,
    steps: usize,
) -> Result<(WaveState, EnergyTrace)> {
    let n = ops.dof_count;
    let dt = opts.dt;
    let lhs = ops.factor_real(&[(1.0, &ops.m), (dt, &ops.a)])?;
    let mut trace = EnergyTrace::default();
    let mut s = init.clone();
    record(ops, &s, &mut trace);
    let kv = ops.k.mul_vec(&s.displacement);
    let aw = ops.a.mul_vec(&s.velocity);
    let acc = ops
        .mass_factor
        .solve(&(0..n).map(|i| -kv[i] - 2.0 * aw[i]).collect::<Vec<_>>());
    let mut prev: Vec<f64> = (0..n)
        .map(|i| s.displacement[i] - dt * s.velocity[i] + 0.5 * dt * dt * acc[i])
        .collect();
    let mut cur = s.displacement.clone();
    // (M + dt A) v⁺ = 2 M v − (M − dt A) v⁻ − dt² K v
    let advance = |cur: &[f64], prev: &[f64]| -> Vec<f64> {
        let mc = ops.m.mul_vec(cur);
        let mp = ops.m.mul_vec(prev);
        let ap = ops.a.mul_vec(prev);
        let kc = ops.k.mul_vec(cur);
        let rhs: Vec<f64> = (0..n)
            .map(|i| 2.0 * mc[i] - mp[i] + dt * ap[i] - dt * dt * kc[i])
            .collect();
        lhs.solve(&rhs)
    };
    let mut next = advance(&cur, &prev);
    for step in 1..=steps {
        prev = std::mem::replace(&mut cur, next);
        next = advance(&cur, &prev);
        s.displacement = cur.clone();
        s.velocity = (0..n).map(|i| (next[i] - prev[i]) / (2.0 * dt)).collect();
        s.time = init.time + step as f64 * dt;
        if step % opts.stride == 0 || step == steps {
            s.check(n)?;
            record(ops, &s, &mut trace);
        }
    }
    Ok((s, trace))
}

/// Least-squares slope of `ln E` over `window` (default: skip the first 20%, fit the
/// next 60%). A flat trace yields a zero rate.
pub fn fit_decay_rate(trace: &EnergyTrace, window: Option<(f64, f64)>) -> Result<EnergyTrace> {
    let (t_first, t_last) = match (trace.samples.first(), trace.samples.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => {
            return Err(Error::FitQuality {
                r2: f64::NAN,
                reason: "empty trace".into(),
            })
        }
    };
    let span = t_last - t_first;
    let (t0, t1) = window.unwrap_or((
        t_first + FIT_SKIP * span,
        t_first + (FIT_SKIP + FIT_SPAN) * span,
    ));
    let pts: Vec<(f64, f64)> = trace
        .samples
        .iter()
        .filter(|(t, e)| *t >= t0 - 1e-12 && *t <= t1 + 1e-12 && *e > 1e-300)
        .map(|(t, e)| (*t, e.ln()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::FitQuality {
            r2: f64::NAN,
            reason: format!("{} usable samples in [{t0}, {t1}], need 10", pts.len()),
        });
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ym).powi(2)).sum();
    let slope = sty / stt;
    let spread = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
        - pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let r2 = if spread < 1e-9 { 1.0 } else { sty * sty / (stt * syy) };
    if r2 < MIN_FIT_R2 {
        return Err(Error::FitQuality {
            r2,
            reason: "log-energy is not dominated by a linear trend".into(),
        });
    }
    let mut out = trace.clone();
    out.gamma_fit = Some(-slope);
    out.fit_window = Some((t0, t1));
    out.fit_r2 = Some(r2);
    Ok(out)
}

/// `2 · min(−Im τ)` over the excited eigenvalues.
pub fn decay_oracle(excited: &[DampedEigenvalue]) -> Option<f64> {
    excited
        .iter()
        .map(|e| -2.0 * e.tau.im)
        .min_by(|a, b| a.partial_cmp(b).unwrap())
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegratedEnergyReport {
    /// `(T, E(T) / ∫_{T−2}^{T+1} ‖v‖²_{H¹} dt)`.
    pub rows: Vec<(f64, f64)>,
    pub max_ratio: f64,
}

fn trapezoid_between(times: &[f64], values: &[f64], a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    for i in 1..times.len() {
        let (t0, t1) = (times[i - 1].max(a), times[i].min(b));
        if t1 <= t0 {
            continue;
        }
        let lerp = |t: f64| {
            let s = (t - times[i - 1]) / (times[i] - times[i - 1]);
            values[i - 1] + s * (values[i] - values[i - 1])
        };
        total += 0.5 * (lerp(t0) + lerp(t1)) * (t1 - t0);
    }
    total
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let k = times.partition_point(|x| *x < t).clamp(1, times.len() - 1);
    let s = (t - times[k - 1]) / (times[k] - times[k - 1]);
    values[k - 1] + s * (values[k] - values[k - 1])
}

/// Ratios `E(T) / ∫_{T−2}^{T+1} (vᵀKv + vᵀMv) dt` over a grid of `T`; windows of zero
/// energy are skipped.
pub fn verify_integrated_energy(trace: &EnergyTrace, t_grid: &[f64]) -> Result<IntegratedEnergyReport> {
    let times: Vec<f64> = trace.samples.iter().map(|s| s.0).collect();
    let energies: Vec<f64> = trace.samples.iter().map(|s| s.1).collect();
    if times.len() < 2 {
        return Err(Error::Argument("trace has fewer than two samples".into()));
    }
    let t_end = *times.last().unwrap();
    let mut rows = Vec::new();
    for &t in t_grid {
        if t < 2.0 {
            return Err(Error::Argument(format!("T = {t} below 2")));
        }
        if t + 1.0 > t_end + 1e-9 {
            return Err(Error::Argument(format!("T + 1 = {} beyond the trace end {t_end}", t + 1.0)));
        }
        let integral = trapezoid_between(&times, &trace.h1_sq, t - 2.0, t + 1.0);
        if integral <= 1e-300 {
            continue;
        }
        rows.push((t, interpolate(&times, &energies, t) / integral));
    }
    let max_ratio = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(IntegratedEnergyReport { rows, max_ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// Laplacian eigenfunction `u_index` (M-normalized) at rest.
    SingleMode { index: usize },
    /// Random combination of the modes `1 ≤ k` with `λ_k ≤ lambda_cut`, at rest.
    LowPass { lambda_cut: f64, seed: u64 },
    /// Nodal samples of `exp(−d(z, center)²/width²)`, at rest.
    PointBump { center: [f64; 2], width: f64 },
    /// Real part of the damped mode `index` of a solved spectrum, with its exact velocity.
    QepMode { index: usize },
}

/// Builds initial data. `QepMode` needs the solved spectrum; its decay oracle is
/// `−2 Im τ`. Modes with `λ_k ≤ 0` are skipped in the low-pass sum.
pub fn initial_state(
    ops: &AssembledOperators,
    data: &InitialData,
    spectrum: Option<&[DampedEigenvalue]>,
) -> Result<(WaveState, Option<f64>)> {
    let n = ops.dof_count;
    match data {
        InitialData::SingleMode { index } => {
            let modes = laplacian_eigs(ops, index + 1)?;
            let u = modes[*index].vector.clone();
            Ok((WaveState::new(u, vec![0.0; n])?, None))
        }
        InitialData::LowPass { lambda_cut, seed } => {
            if !(*lambda_cut > 0.0) {
                return Err(Error::Argument("lambda_cut must be positive".into()));
            }
            let mut count = 8.min(n);
            let modes = loop {
                let modes = laplacian_eigs(ops, count)?;
                if modes.last().map(|m| m.lambda > *lambda_cut).unwrap_or(true) || count == n {
                    break modes;
                }
                count = (2 * count).min(n);
            };
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut v = vec![0.0; n];
            let mut used = 0;
            for m in modes.iter().skip(1).filter(|m| m.lambda <= *lambda_cut) {
                axpy(&mut v, rng.gen_range(-1.0..1.0), &m.vector);
                used += 1;
            }
            if used == 0 {
                return Err(Error::Argument(format!("no nonconstant modes below {lambda_cut}")));
            }
            Ok((WaveState::new(v, vec![0.0; n])?, None))
        }
        InitialData::PointBump { center, width } => {
            let c = Complex::new(center[0], center[1]);
            if c.norm() >= 1.0 || !(*width > 0.0) {
                return Err(Error::Argument("bump center must lie in the disk and width be positive".into()));
            }
            let v: Vec<f64> = ops
                .dof_points
                .iter()
                .map(|z| (-(hyperbolic_distance(*z, c).unwrap_or(f64::INFINITY) / width).powi(2)).exp())
                .collect();
            Ok((WaveState::new(v, vec![0.0; n])?, None))
        }
        InitialData::QepMode { index } => {
            let eigs = spectrum.ok_or_else(|| Error::Argument("damped-mode data needs a solved spectrum".into()))?;
            let e = eigs
                .get(*index)
                .ok_or_else(|| Error::Argument(format!("mode {index} not in the spectrum")))?;
            let v0 = e.eigenvector.iter().map(|u| u.re).collect();
            let v1 = e
                .eigenvector
                .iter()
                .map(|u| (Complex::new(0.0, -1.0) * e.tau * u).re)
                .collect();
            Ok((WaveState::new(v0, v1)?, Some(-2.0 * e.tau.im)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damping::DampingField;
    use crate::mesh::{assemble, build_mesh};
    use proptest::prelude::*;
    use rand::Rng;

    fn ops(level: usize, a: &DampingField) -> AssembledOperators {
        assemble(&build_mesh(level).unwrap(), a).unwrap()
    }

    #[test]
    fn energy_examples() {
        let o = ops(2, &DampingField::zero());
        let n = o.dof_count;
        assert!(energy(&o, &WaveState::new(vec![3.0; n], vec![0.0; n]).unwrap()) < 1e-12);
        let modes = laplacian_eigs(&o, 2).unwrap();
        let s = WaveState::new(vec![0.0; n], modes[1].vector.clone()).unwrap();
        assert!((energy(&o, &s) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_data_stays_zero() {
        let o = ops(2, &DampingField::constant(0.3).unwrap());
        let (s, trace) = evolve(&o, &WaveState::zero(o.dof_count), &EvolveOptions::new(0.05, 2.0)).unwrap();
        assert!(s.displacement.iter().chain(&s.velocity).all(|v| *v == 0.0));
        assert!(trace.samples.iter().all(|x| x.1 == 0.0));
    }

    #[test]
    fn conservation_without_damping() {
        let o = ops(2, &DampingField::zero());
        let (init, _) = initial_state(&o, &InitialData::LowPass { lambda_cut: 30.0, seed: 3 }, None).unwrap();
        let mut opts = EvolveOptions::new(0.02, 50.0);
        opts.stride = 10;
        let (_, trace) = evolve(&o, &init, &opts).unwrap();
        let e0 = trace.initial_energy();
        for (_, e) in &trace.samples {
            assert!((e - e0).abs() <= 1e-8 * e0);
        }
        match fit_decay_rate(&trace, None) {
            Ok(t) => assert!(t.gamma_fit.unwrap().abs() < 1e-4),
            Err(Error::FitQuality { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn single_mode_matches_closed_form() {
        let a0 = 0.3;
        let o = ops(3, &DampingField::constant(a0).unwrap());
        let modes = laplacian_eigs(&o, 3).unwrap();
        let (lam, u) = (modes[2].lambda, &modes[2].vector);
        let omega = (lam - a0 * a0).sqrt();
        let init = WaveState::new(u.clone(), vec![0.0; o.dof_count]).unwrap();
        let mut opts = EvolveOptions::new(0.002, 10.0);
        opts.stride = 50;
        let (_, trace) = evolve(&o, &init, &opts).unwrap();
        for (t, e) in &trace.samples {
            let c = (omega * t).cos() + a0 / omega * (omega * t).sin();
            let d = -(a0 * a0 + omega * omega) / omega * (omega * t).sin();
            let exact = 0.5 * (-2.0 * a0 * t).exp() * (d * d + lam * c * c);
            assert!((e - exact).abs() < 1e-4 * exact, "t={t}: {e} vs {exact}");
        }
        let fit = fit_decay_rate(&trace, None).unwrap();
        assert!((fit.gamma_fit.unwrap() - 2.0 * a0).abs() < 0.02 * 2.0 * a0);
    }

    #[test]
    fn leapfrog_agrees_with_implicit() {
        let o = ops(2, &DampingField::constant(0.2).unwrap());
        let (init, _) = initial_state(&o, &InitialData::LowPass { lambda_cut: 12.0, seed: 1 }, None).unwrap();
        let dt = 0.25 / lambda_max_estimate(&o).sqrt();
        let mut opts = EvolveOptions::new(dt, 3.0);
        let (a, _) = evolve(&o, &init, &opts).unwrap();
        opts.integrator = Integrator::Leapfrog;
        let (b, _) = evolve(&o, &init, &opts).unwrap();
        let diff = a.displacement.iter().zip(&b.displacement).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let scale = a.displacement.iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-2 * scale);
        opts.dt = 10.0;
        assert!(evolve(&o, &init, &opts).is_err());
    }

    #[test]
    fn integrated_energy_requires_late_times() {
        let o = ops(2, &DampingField::constant(0.2).unwrap());
        let (init, _) = initial_state(&o, &InitialData::SingleMode { index: 1 }, None).unwrap();
        let mut opts = EvolveOptions::new(0.01, 8.0);
        opts.stride = 5;
        let (_, trace) = evolve(&o, &init, &opts).unwrap();
        assert!(verify_integrated_energy(&trace, &[1.5]).is_err());
        let r = verify_integrated_energy(&trace, &[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.max_ratio.is_finite() && r.max_ratio > 0.0);
    }

    #[test]
    fn undamped_single_mode_integral_ratio() {
        let o = ops(2, &DampingField::zero());
        let modes = laplacian_eigs(&o, 2).unwrap();
        let lam = modes[1].lambda;
        let init = WaveState::new(modes[1].vector.clone(), vec![0.0; o.dof_count]).unwrap();
        let mut opts = EvolveOptions::new(0.001, 6.0);
        opts.stride = 10;
        let (_, trace) = evolve(&o, &init, &opts).unwrap();
        let r = verify_integrated_energy(&trace, &[3.0]).unwrap();
        let w = lam.sqrt();
        // ∫ (λ+1) cos²(ωt) dt over [1, 4]
        let int = (lam + 1.0) * (1.5 + ((2.0 * w * 4.0).sin() - (2.0 * w * 1.0).sin()) / (4.0 * w));
        assert!((r.rows[0].1 - 0.5 * lam / int).abs() < 1e-4 * r.rows[0].1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn energy_is_nonnegative_and_nonincreasing(seed in 0u64..1000, a0 in 0.0f64..1.0) {
            let o = ops(1, &DampingField::constant(a0).unwrap());
            let n = o.dof_count;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let init = WaveState::new(v, w).unwrap();
            prop_assert!(energy(&o, &init) >= 0.0);
            let (_, trace) = evolve(&o, &init, &EvolveOptions::new(0.05, 3.0)).unwrap();
            prop_assert!(trace.is_nonincreasing(1e-10));
        }
    }
}
