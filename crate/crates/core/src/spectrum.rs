//! The quadratic eigenvalue problem `(K − τ²M − 2iτA)u = 0`, spectrum statistics,
//! M-weighted resolvent norms and the observability ratio of Laplacian eigenfunctions.
//!
//! Linearization: with `w = τu`,
//! `[0 I; K −2iA] (u, w) = τ [I 0; 0 M] (u, w)`.
//! Shift-invert at `σ` needs only `Q(σ) = K − σ²M − 2iσA`, which is complex symmetric:
//! `(L₀ − σL₁)⁻¹ (r₁, r₂)` has `y₁ = Q(σ)⁻¹(r₂ + (2iA + σM) r₁)`, `y₂ = r₁ + σ y₁`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Complex;
use crate::linalg::krylov::block_arnoldi;
use crate::linalg::skyline::SkylineLdlt;
use crate::mesh::{laplacian_eigs, AssembledOperators, LaplaceMode};

/// Required bound on every returned eigenpair residual.
pub const QEP_RESIDUAL_TOL: f64 = 1e-6;

/// Eigenvalues closer than this are one eigenvalue with a multiplicity.
pub const DEDUP_TOL: f64 = 1e-7;

/// Largest dof count accepted by the dense companion solver.
pub const DENSE_QEP_LIMIT: usize = 600;

/// Largest dof count for which resolvent norms use a dense SVD.
pub const DENSE_RESOLVENT_LIMIT: usize = 200;

/// σ_min below `NEAR_SINGULAR_REL · (1 + |τ|)` is reported as a hit on the spectrum.
pub const NEAR_SINGULAR_REL: f64 = 1e-6;

/// Slack on the imaginary strip `[−2‖a‖_∞, 0]`.
pub const STRIP_SLACK: f64 = 1e-6;

const BLOCK: usize = 4;
const RITZ_TOL: f64 = 1e-9;
const REFINE_TARGET: f64 = 1e-10;
const MAX_SHIFT_RETRIES: usize = 3;
const MAX_SPLIT_DEPTH: usize = 6;
const ZERO_TOL: f64 = 1e-8;

fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

const I: Complex = Complex::new(0.0, 1.0);

/// Real-part window of a solve; at most `count` eigenvalues (with multiplicity),
/// smallest `|Re τ|` first, are returned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QepWindow {
    pub re_min: f64,
    pub re_max: f64,
    pub count: usize,
}

impl QepWindow {
    pub fn symmetric(half_width: f64, count: usize) -> Self {
        Self {
            re_min: -half_width,
            re_max: half_width,
            count,
        }
    }
}

/// One eigenvalue of the damped pencil.
#[derive(Debug, Clone, Serialize)]
pub struct DampedEigenvalue {
    pub tau: Complex,
    /// M-normalized representative eigenvector.
    #[serde(skip)]
    pub eigenvector: Vec<Complex>,
    /// `‖Q(τ)u‖_{M⁻¹} / ‖u‖_M`.
    pub residual: f64,
    /// Dimension of the computed eigenspace.
    pub multiplicity: usize,
    /// Index of the eigenvalue nearest `−conj(τ)`.
    pub paired_index: Option<usize>,
}

#[derive(Debug, Clone)]
struct Eigenpair {
    tau: Complex,
    u: Vec<Complex>,
    residual: f64,
}

/// `Q(τ)u`.
pub fn apply_pencil(ops: &AssembledOperators, tau: Complex, u: &[Complex]) -> Vec<Complex> {
    let n = u.len();
    let mut ku = vec![c(0.0, 0.0); n];
    let mut mu = vec![c(0.0, 0.0); n];
    let mut au = vec![c(0.0, 0.0); n];
    ops.k.mul_complex_into(u, &mut ku);
    ops.m.mul_complex_into(u, &mut mu);
    ops.a.mul_complex_into(u, &mut au);
    let t2 = tau * tau;
    let t_damp = 2.0 * I * tau;
    (0..n).map(|i| ku[i] - t2 * mu[i] - t_damp * au[i]).collect()
}

/// `‖Q(τ)u‖_{M⁻¹} / ‖u‖_M`.
pub fn pencil_residual(ops: &AssembledOperators, tau: Complex, u: &[Complex]) -> f64 {
    let r = apply_pencil(ops, tau, u);
    ops.m_inv_norm_complex(&r) / ops.m_norm_complex(u)
}

fn factor_pencil(ops: &AssembledOperators, s: Complex) -> Result<SkylineLdlt<Complex>> {
    ops.factor_complex(&[(c(1.0, 0.0), &ops.k), (-s * s, &ops.m), (-2.0 * I * s, &ops.a)])
}

/// Factorizes `Q(s)`, nudging the shift off the spectrum up to three times.
fn factor_with_retry(ops: &AssembledOperators, s: Complex) -> Result<(Complex, SkylineLdlt<Complex>)> {
    let mut shift = s;
    let mut last = None;
    for attempt in 0..=MAX_SHIFT_RETRIES {
        match factor_pencil(ops, shift) {
            Ok(f) => return Ok((shift, f)),
            Err(e @ Error::Factorization { .. }) => {
                last = Some(e);
                let step = 1e-3 * (1.0 + s.norm()) * 10f64.powi(attempt as i32);
                shift = s + Complex::from_polar(step, 0.3 + attempt as f64);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(Error::Numerical("shift factorization failed".into())))
}

fn normalize_m(ops: &AssembledOperators, u: &mut [Complex]) {
    let nrm = ops.m_norm_complex(u);
    if nrm > 0.0 {
        u.iter_mut().for_each(|x| *x /= nrm);
    }
}

/// Root of `uᵀQ(τ)u = 0` closest to `guess`. The bilinear form is the two-sided
/// functional for complex symmetric pencils; the sesquilinear one is used when
/// `uᵀMu` nearly vanishes.
pub fn rayleigh_functional(ops: &AssembledOperators, u: &[Complex], guess: Complex) -> Complex {
    let conj_u: Vec<Complex> = u.iter().map(|x| x.conj()).collect();
    let herm_m = ops.m.bilinear_complex(&conj_u, u).norm();
    let bil_m = ops.m.bilinear_complex(u, u);
    let left: &[Complex] = if bil_m.norm() > 1e-6 * herm_m { u } else { &conj_u };
    let m = ops.m.bilinear_complex(left, u);
    let alpha = ops.a.bilinear_complex(left, u);
    let k = ops.k.bilinear_complex(left, u);
    let disc = (m * k - alpha * alpha).sqrt();
    let r1 = (-I * alpha + disc) / m;
    let r2 = (-I * alpha - disc) / m;
    if (r1 - guess).norm() <= (r2 - guess).norm() {
        r1
    } else {
        r2
    }
}

/// Residual inverse iteration `u ← u − F⁻¹Q(τ)u` with the Rayleigh functional update.
fn refine(
    ops: &AssembledOperators,
    factor: &SkylineLdlt<Complex>,
    tau0: Complex,
    u0: Vec<Complex>,
    max_steps: usize,
) -> Eigenpair {
    let mut u = u0;
    normalize_m(ops, &mut u);
    let mut tau = rayleigh_functional(ops, &u, tau0);
    let mut res = pencil_residual(ops, tau, &u);
    for _ in 0..max_steps {
        if res <= REFINE_TARGET {
            break;
        }
        let r = apply_pencil(ops, tau, &u);
        let d = factor.solve(&r);
        let mut next: Vec<Complex> = u.iter().zip(&d).map(|(a, b)| a - b).collect();
        normalize_m(ops, &mut next);
        let next_tau = rayleigh_functional(ops, &next, tau);
        let next_res = pencil_residual(ops, next_tau, &next);
        if !(next_res < res) {
            break;
        }
        let stalled = next_res > 0.5 * res;
        u = next;
        tau = next_tau;
        res = next_res;
        if stalled {
            break;
        }
    }
    Eigenpair { tau, u, residual: res }
}

/// Eigenvalues of a small dense complex matrix (diagonal of its complex Schur form).
fn dense_eigenvalues(a: DMatrix<Complex>) -> Vec<Complex> {
    let (_, t) = a.schur().unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Right singular vectors of the `g` smallest singular values.
fn null_vectors(a: &DMatrix<Complex>, g: usize) -> Vec<DVector<Complex>> {
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].partial_cmp(&svd.singular_values[j]).unwrap());
    order
        .into_iter()
        .take(g)
        .map(|i| vt.row(i).adjoint())
        .collect()
}

/// Computes every eigenpair near `center` by block inverse iteration at a fresh shift and a
/// projected quadratic problem on the resulting subspace.
fn extract_cluster(
    ops: &AssembledOperators,
    center: Complex,
    size: usize,
    seed: u64,
) -> Result<Vec<Eigenpair>> {
    let n = ops.dof_count;
    let nudge = Complex::from_polar(1e-9 * (1.0 + center.norm()), PI / 5.0);
    let (s, factor) = factor_with_retry(ops, center + nudge)?;
    let p = (size + 2).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::<Complex>::from_fn(n, p, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    for _ in 0..3 {
        for j in 0..p {
            let col: Vec<Complex> = x.column(j).iter().copied().collect();
            let mut mx = vec![c(0.0, 0.0); n];
            let mut ax = vec![c(0.0, 0.0); n];
            ops.m.mul_complex_into(&col, &mut mx);
            ops.a.mul_complex_into(&col, &mut ax);
            let rhs: Vec<Complex> = (0..n).map(|i| 2.0 * s * mx[i] + 2.0 * I * ax[i]).collect();
            let y = factor.solve(&rhs);
            x.set_column(j, &DVector::from_vec(y));
        }
        x = x.qr().q();
    }
    let project = |mat: &crate::linalg::sparse::SparseMatrix<f64>| -> DMatrix<Complex> {
        let mut out = DMatrix::<Complex>::zeros(p, p);
        let cols: Vec<Vec<Complex>> = (0..p).map(|j| x.column(j).iter().copied().collect()).collect();
        for j in 0..p {
            let mut y = vec![c(0.0, 0.0); n];
            mat.mul_complex_into(&cols[j], &mut y);
            for i in 0..p {
                out[(i, j)] = cols[i].iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
            }
        }
        out
    };
    let kp = project(&ops.k);
    let mp = project(&ops.m);
    let ap = project(&ops.a);
    let mp_inv = mp
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("projected mass is singular".into()))?;
    let mut comp = DMatrix::<Complex>::zeros(2 * p, 2 * p);
    for i in 0..p {
        comp[(i, p + i)] = c(1.0, 0.0);
    }
    let lower_left = &mp_inv * &kp;
    let lower_right = &mp_inv * &ap * (-2.0 * I);
    comp.view_mut((p, 0), (p, p)).copy_from(&lower_left);
    comp.view_mut((p, p), (p, p)).copy_from(&lower_right);
    let radius = 1e-5 * (1.0 + center.norm());
    let mut taus: Vec<Complex> = dense_eigenvalues(comp)
        .into_iter()
        .filter(|t| (t - center).norm() <= radius)
        .collect();
    taus.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    let mut out = Vec::new();
    let mut i = 0;
    while i < taus.len() {
        let mut j = i + 1;
        while j < taus.len() && (taus[j] - taus[i]).norm() <= 1e-9 * (1.0 + taus[i].norm()) {
            j += 1;
        }
        let g = j - i;
        let tau_g = taus[i..j].iter().sum::<Complex>() / g as f64;
        let qp = &kp - &mp * (tau_g * tau_g) - &ap * (2.0 * I * tau_g);
        for y in null_vectors(&qp, g) {
            let u: Vec<Complex> = (&x * y).iter().copied().collect();
            out.push(refine(ops, &factor, tau_g, u, 6));
        }
        i = j;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    closed_right: bool,
}

impl Segment {
    fn contains(&self, x: f64) -> bool {
        x >= self.lo && (x < self.hi || (self.closed_right && x <= self.hi))
    }
}

/// Expected number of eigenvalues with real part in `[x0, x1]` (Weyl density `2|x|`).
fn expected_count(x0: f64, x1: f64) -> f64 {
    let f = |x: f64| x * x.abs();
    f(x1) - f(x0)
}

fn tile_window(re_min: f64, re_max: f64, half_height: f64) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut x0 = re_min;
    while x0 < re_max {
        let width_at = |x: f64| (16.0 / (2.0 * x.abs() + 2.0)).max(2.0 * half_height).clamp(0.5, 4.0);
        let mut w = width_at(x0);
        w = w.min(width_at(x0 + w));
        let x1 = (x0 + w).min(re_max);
        let x1 = if re_max - x1 < 0.25 * w { re_max } else { x1 };
        segments.push(Segment {
            lo: x0,
            hi: x1,
            closed_right: x1 >= re_max,
        });
        x0 = x1;
    }
    segments
}

/// Shift-invert block Arnoldi on one segment of the strip.
fn solve_segment(
    ops: &AssembledOperators,
    seg: Segment,
    strip: (f64, f64),
    seed: u64,
    depth: usize,
) -> Result<Vec<Eigenpair>> {
    let n = ops.dof_count;
    let center = 0.5 * (seg.lo + seg.hi);
    let half_w = 0.5 * (seg.hi - seg.lo);
    let s_im = 0.5 * (strip.0 + strip.1);
    let half_h = 0.5 * (strip.1 - strip.0);
    let radius = 1.02 * (half_w * half_w + half_h * half_h).sqrt() + 1e-9;
    let (sigma, factor) = factor_with_retry(ops, c(center, s_im))?;
    let est = expected_count(center - radius, center + radius) + 8.0;
    let round = |d: usize| (d.div_ceil(BLOCK) * BLOCK).min(2 * n);
    let mut dim = round(((3.0 * est) as usize + 40).max(60));
    for attempt in 0..4 {
        let op = |x: &[Complex]| -> Result<Vec<Complex>> {
            let (x1, x2) = x.split_at(n);
            let mut mx2 = vec![c(0.0, 0.0); n];
            let mut mx1 = vec![c(0.0, 0.0); n];
            let mut ax1 = vec![c(0.0, 0.0); n];
            ops.m.mul_complex_into(x2, &mut mx2);
            ops.m.mul_complex_into(x1, &mut mx1);
            ops.a.mul_complex_into(x1, &mut ax1);
            let rhs: Vec<Complex> = (0..n).map(|i| mx2[i] + 2.0 * I * ax1[i] + sigma * mx1[i]).collect();
            let y1 = factor.solve(&rhs);
            let mut out = y1.clone();
            out.extend((0..n).map(|i| x1[i] + sigma * y1[i]));
            Ok(out)
        };
        let fact = block_arnoldi::<Complex, _, fn(&[Complex]) -> Vec<Complex>>(
            2 * n,
            dim,
            BLOCK,
            seed ^ (attempt as u64) << 32,
            op,
            None,
        )?;
        let h = fact.square();
        let nus = dense_eigenvalues(h.clone());
        struct Ritz {
            tau: Complex,
            nu: Complex,
            converged: bool,
        }
        let mut ritz: Vec<Ritz> = nus
            .into_iter()
            .filter(|nu| nu.norm() > 1e-14)
            .map(|nu| Ritz {
                tau: sigma + 1.0 / nu,
                nu,
                converged: false,
            })
            .collect();
        ritz.sort_by(|a, b| (a.tau - sigma).norm().partial_cmp(&(b.tau - sigma).norm()).unwrap());
        let mut clusters = cluster_indices(&ritz.iter().map(|r| r.tau).collect::<Vec<_>>(), 1e-6);
        let ritz_dist: Vec<f64> = ritz.iter().map(|r| (r.tau - sigma).norm()).collect();
        let dist = |cl: &[usize]| {
            cl.iter()
                .map(|&i| ritz_dist[i])
                .fold(f64::INFINITY, f64::min)
        };
        clusters.sort_by(|a, b| dist(a).partial_cmp(&dist(b)).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64 + 1));
        let mut cluster_vectors: Vec<(Vec<usize>, DMatrix<Complex>)> = Vec::new();
        let mut outside_checked = 0;
        for cl in clusters {
            if dist(&cl) > radius {
                if outside_checked >= 4 || (0..ritz.len()).any(|i| ritz[i].converged && ritz_dist[i] > radius) {
                    break;
                }
                outside_checked += 1;
            }
            let nu = cl.iter().map(|&i| ritz[i].nu).sum::<Complex>() / cl.len() as f64;
            let y = h_inverse_iteration(&h, nu, cl.len(), &mut rng)?;
            let res = (0..y.ncols())
                .map(|j| fact.residual_norm(&y.column(j).into_owned()))
                .fold(0.0, f64::max);
            let ok = res <= RITZ_TOL * nu.norm();
            for &i in &cl {
                ritz[i].converged = ok;
            }
            if ok {
                cluster_vectors.push((cl, y));
            }
        }
        let inside_ok = ritz
            .iter()
            .filter(|r| (r.tau - sigma).norm() <= radius)
            .all(|r| r.converged);
        let beyond = ritz
            .iter()
            .any(|r| r.converged && (r.tau - sigma).norm() > radius);
        let complete = fact.dim >= 2 * n;
        if inside_ok && (beyond || complete) {
            let basis = fact.basis.columns(0, fact.dim);
            let mut pairs = Vec::new();
            for (k, (cl, y)) in cluster_vectors.into_iter().enumerate() {
                let tau_c = cl.iter().map(|&i| ritz[i].tau).sum::<Complex>() / cl.len() as f64;
                if !(tau_c.re >= seg.lo - 1e-3 && tau_c.re <= seg.hi + 1e-3) {
                    continue;
                }
                let mut refined = Vec::new();
                for j in 0..y.ncols() {
                    let z = &basis * y.column(j);
                    let u: Vec<Complex> = z.iter().take(n).copied().collect();
                    refined.push(refine(ops, &factor, tau_c, u, 5));
                }
                if refined.iter().any(|p| p.residual > 1e-2 * QEP_RESIDUAL_TOL) {
                    refined = extract_cluster(ops, tau_c, cl.len(), seed ^ (k as u64 + 7) << 16)?;
                }
                pairs.extend(refined.into_iter().filter(|p| seg.contains(p.tau.re)));
            }
            return Ok(pairs);
        }
        if dim >= 2 * n {
            break;
        }
        dim = round(2 * dim);
    }
    if depth < MAX_SPLIT_DEPTH && seg.hi - seg.lo > 1e-3 {
        let mid = 0.5 * (seg.lo + seg.hi);
        let left = Segment {
            lo: seg.lo,
            hi: mid,
            closed_right: false,
        };
        let right = Segment {
            lo: mid,
            hi: seg.hi,
            closed_right: seg.closed_right,
        };
        let mut out = solve_segment(ops, left, strip, seed.wrapping_mul(31).wrapping_add(1), depth + 1)?;
        out.extend(solve_segment(ops, right, strip, seed.wrapping_mul(31).wrapping_add(2), depth + 1)?);
        return Ok(out);
    }
    Err(Error::Convergence(format!(
        "shift-invert Arnoldi could not certify the segment [{}, {}]",
        seg.lo, seg.hi
    )))
}

/// Orthonormal basis of the dominant invariant subspace of `H` near `nu`.
fn h_inverse_iteration(
    h: &DMatrix<Complex>,
    nu: Complex,
    size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<Complex>> {
    let d = h.nrows();
    let mut shift = nu * (1.0 + 1e-10) + c(1e-14, 1e-14);
    for _ in 0..4 {
        let shifted = h - DMatrix::<Complex>::identity(d, d) * shift;
        let lu = shifted.lu();
        let mut y = DMatrix::<Complex>::from_fn(d, size, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let mut ok = true;
        for _ in 0..3 {
            match lu.solve(&y) {
                Some(next) if next.iter().all(|v| v.re.is_finite() && v.im.is_finite()) => {
                    y = next.qr().q();
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok(y);
        }
        shift += c(1e-10, 1e-10) * (1.0 + nu.norm());
    }
    Err(Error::Numerical("inverse iteration on the projected matrix failed".into()))
}

/// Groups points whose distance is within `rel · (1 + |z|)` (single linkage).
fn cluster_indices(points: &[Complex], rel: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut j = i;
        while p[j] != r {
            let next = p[j];
            p[j] = r;
            j = next;
        }
        r
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].re.partial_cmp(&points[b].re).unwrap());
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            let tol = rel * (1.0 + points[i].norm().max(points[j].norm()));
            if points[j].re - points[i].re > tol {
                break;
            }
            if (points[i] - points[j]).norm() <= tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Numerical rank of the M-Gram matrix of a set of vectors.
fn m_rank(ops: &AssembledOperators, vectors: &[&[Complex]]) -> usize {
    let k = vectors.len();
    if k <= 1 {
        return k;
    }
    let mv: Vec<Vec<Complex>> = vectors
        .iter()
        .map(|v| {
            let mut y = vec![c(0.0, 0.0); v.len()];
            ops.m.mul_complex_into(v, &mut y);
            y
        })
        .collect();
    let norms: Vec<f64> = (0..k)
        .map(|i| vectors[i].iter().zip(&mv[i]).map(|(a, b)| (a.conj() * b).re).sum::<f64>().sqrt())
        .collect();
    let g = DMatrix::<Complex>::from_fn(k, k, |i, j| {
        vectors[i].iter().zip(&mv[j]).map(|(a, b)| a.conj() * b).sum::<Complex>() / (norms[i] * norms[j])
    });
    let g = (&g + g.adjoint()) * c(0.5, 0.0);
    let eig = g.symmetric_eigenvalues();
    let top = eig.iter().fold(0.0f64, |m, v| m.max(*v));
    eig.iter().filter(|v| **v > 1e-6 * top).count()
}

/// Merges eigenpairs closer than [`DEDUP_TOL`], recording multiplicities.
fn deduplicate(ops: &AssembledOperators, mut pairs: Vec<Eigenpair>) -> Vec<DampedEigenvalue> {
    pairs.sort_by(|a, b| {
        a.tau.re.partial_cmp(&b.tau.re).unwrap().then(a.tau.im.partial_cmp(&b.tau.im).unwrap())
    });
    let taus: Vec<Complex> = pairs.iter().map(|p| p.tau).collect();
    let n = taus.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if taus[j].re - taus[i].re > DEDUP_TOL {
                break;
            }
            if (taus[i] - taus[j]).norm() <= DEDUP_TOL {
                let (mut ri, mut rj) = (i, j);
                while parent[ri] != ri {
                    ri = parent[ri];
                }
                while parent[rj] != rj {
                    rj = parent[rj];
                }
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
        .into_iter()
        .map(|g| {
            let vectors: Vec<&[Complex]> = g.iter().map(|&i| pairs[i].u.as_slice()).collect();
            let multiplicity = m_rank(ops, &vectors).max(1);
            let best = *g
                .iter()
                .min_by(|&&a, &&b| pairs[a].residual.partial_cmp(&pairs[b].residual).unwrap())
                .unwrap();
            let residual = g.iter().map(|&i| pairs[i].residual).fold(0.0, f64::max);
            let mut u = pairs[best].u.clone();
            fix_phase(&mut u);
            DampedEigenvalue {
                tau: pairs[best].tau,
                eigenvector: u,
                residual,
                multiplicity,
                paired_index: None,
            }
        })
        .collect()
}

/// Rotates a vector so that its largest entry is real and positive.
fn fix_phase(u: &mut [Complex]) {
    if let Some(big) = u.iter().copied().max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap()) {
        if big.norm() > 0.0 {
            let phase = big.conj() / big.norm();
            u.iter_mut().for_each(|x| *x *= phase);
        }
    }
}

/// Filters to the window, orders by `|Re τ|`, truncates to `count` (whole eigenspaces
/// only) and sets the mirror partner indices.
fn finalize(mut eigs: Vec<DampedEigenvalue>, window: &QepWindow) -> Vec<DampedEigenvalue> {
    eigs.retain(|e| e.tau.re >= window.re_min - 1e-12 && e.tau.re <= window.re_max + 1e-12);
    eigs.sort_by(|a, b| {
        let ka = (a.tau.re.abs() * 1e9).round();
        let kb = (b.tau.re.abs() * 1e9).round();
        ka.partial_cmp(&kb)
            .unwrap()
            .then(b.tau.im.partial_cmp(&a.tau.im).unwrap())
            .then(a.tau.re.partial_cmp(&b.tau.re).unwrap())
    });
    let mut total = 0;
    let mut keep = 0;
    for e in &eigs {
        if total >= window.count {
            break;
        }
        total += e.multiplicity;
        keep += 1;
    }
    eigs.truncate(keep);
    assign_pairs(&mut eigs);
    eigs
}

fn assign_pairs(eigs: &mut [DampedEigenvalue]) {
    let taus: Vec<Complex> = eigs.iter().map(|e| e.tau).collect();
    for (i, e) in eigs.iter_mut().enumerate() {
        let target = -taus[i].conj();
        e.paired_index = taus
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (**a - target).norm().partial_cmp(&(**b - target).norm()).unwrap())
            .map(|(j, _)| j);
        let _ = i;
    }
}

fn validate_window(ops: &AssembledOperators, window: &QepWindow) -> Result<()> {
    if !(window.re_min < window.re_max) || !window.re_min.is_finite() || !window.re_max.is_finite() {
        return Err(Error::Argument(format!(
            "empty window [{}, {}]",
            window.re_min, window.re_max
        )));
    }
    if window.count == 0 || window.count > 2 * ops.dof_count {
        return Err(Error::Argument(format!(
            "count {} outside 1..={}",
            window.count,
            2 * ops.dof_count
        )));
    }
    Ok(())
}

/// The strip `[−2‖a‖_∞ − ε, ε]` containing every eigenvalue.
pub fn spectral_strip(ops: &AssembledOperators) -> (f64, f64) {
    (-2.0 * ops.damping_sup - STRIP_SLACK, STRIP_SLACK)
}

/// Eigenvalues with real part in the window, by shift-invert Arnoldi on shifts tiling
/// the strip; each eigenpair is refined on the quadratic residual.
pub fn solve_qep(ops: &AssembledOperators, window: &QepWindow) -> Result<Vec<DampedEigenvalue>> {
    validate_window(ops, window)?;
    let strip = spectral_strip(ops);
    let segments = tile_window(window.re_min, window.re_max, 0.5 * (strip.1 - strip.0));
    let parts: Vec<Vec<Eigenpair>> = segments
        .par_iter()
        .enumerate()
        .map(|(k, seg)| solve_segment(ops, *seg, strip, 0x5eed_0000 + k as u64, 0))
        .collect::<Result<_>>()?;
    let pairs: Vec<Eigenpair> = parts.into_iter().flatten().collect();
    let eigs = finalize(deduplicate(ops, pairs), window);
    check_residuals(&eigs)?;
    Ok(eigs)
}

fn check_residuals(eigs: &[DampedEigenvalue]) -> Result<()> {
    if let Some(bad) = eigs.iter().find(|e| !(e.residual <= QEP_RESIDUAL_TOL)) {
        return Err(Error::Convergence(format!(
            "eigenvalue {} has residual {:e}",
            bad.tau, bad.residual
        )));
    }
    Ok(())
}

/// Full spectrum of the companion matrix `[0 I; M⁻¹K −2iM⁻¹A]` by dense complex Schur,
/// refined cluster by cluster on the sparse pencil. Cross-validation path for small meshes.
pub fn solve_qep_dense(ops: &AssembledOperators, window: &QepWindow) -> Result<Vec<DampedEigenvalue>> {
    validate_window(ops, window)?;
    let n = ops.dof_count;
    if n > DENSE_QEP_LIMIT {
        return Err(Error::Argument(format!(
            "dense companion solve limited to {DENSE_QEP_LIMIT} dofs, mesh has {n}"
        )));
    }
    let m = ops.m.to_dense();
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Numerical("mass matrix Cholesky failed".into()))?;
    let minv_k = chol.solve(&ops.k.to_dense());
    let minv_a = chol.solve(&ops.a.to_dense());
    let mut comp = DMatrix::<Complex>::zeros(2 * n, 2 * n);
    for i in 0..n {
        comp[(i, n + i)] = c(1.0, 0.0);
        for j in 0..n {
            comp[(n + i, j)] = c(minv_k[(i, j)], 0.0);
            comp[(n + i, n + j)] = c(0.0, -2.0 * minv_a[(i, j)]);
        }
    }
    let taus: Vec<Complex> = dense_eigenvalues(comp)
        .into_iter()
        .filter(|t| t.re >= window.re_min - 1e-6 && t.re <= window.re_max + 1e-6)
        .collect();
    let clusters = cluster_indices(&taus, 1e-6);
    let parts: Vec<Vec<Eigenpair>> = clusters
        .par_iter()
        .enumerate()
        .map(|(k, cl)| {
            let center = cl.iter().map(|&i| taus[i]).sum::<Complex>() / cl.len() as f64;
            extract_cluster(ops, center, cl.len(), 0xd3a5_0000 + k as u64)
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<Eigenpair> = parts.into_iter().flatten().collect();
    let eigs = finalize(deduplicate(ops, pairs), window);
    check_residuals(&eigs)?;
    Ok(eigs)
}

/// Closed-form spectrum for constant damping `a₀`: `τ = −ia₀ ± sqrt(λ_k − a₀²)` with the
/// principal square root; for `λ_k < a₀²` both roots are purely imaginary.
pub fn constant_damping_spectrum(lambdas: &[f64], a0: f64) -> Vec<Complex> {
    let mut out = Vec::with_capacity(2 * lambdas.len());
    for &l in lambdas {
        let root = c(l - a0 * a0, 0.0).sqrt();
        let mut pair = [c(0.0, -a0) + root, c(0.0, -a0) - root];
        pair.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap().then(a.re.partial_cmp(&b.re).unwrap()));
        out.extend(pair);
    }
    out
}

/// Eigenvalues repeated by multiplicity.
pub fn expanded_taus(eigs: &[DampedEigenvalue]) -> Vec<Complex> {
    eigs.iter()
        .flat_map(|e| std::iter::repeat(e.tau).take(e.multiplicity))
        .collect()
}

/// Largest `|Re τ|` considered resolved by the mesh: `0.5·sqrt(λ_max_resolved)` with
/// `λ_max_resolved` the dof count (by Weyl's law the n-th eigenvalue of a surface of
/// area 4π is about n).
pub fn trusted_re_bound(ops: &AssembledOperators) -> f64 {
    0.5 * (ops.dof_count as f64).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroMode {
    pub present: bool,
    pub multiplicity: usize,
    /// `max |u_i − mean(u)| / |mean(u)|` of the zero-mode eigenvector.
    pub constant_defect: f64,
}

/// Whole-spectrum statistics.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub gap_g: f64,
    pub mean_damping: f64,
    pub sup_norm: f64,
    /// `(r, N(r))` with `N(r) = ½ #{|Re τ| ≤ r}` counted with multiplicity.
    pub weyl_counts: Vec<(f64, f64)>,
    /// `(ε, fraction of trusted eigenvalues with |Im τ + ⟨a⟩_M| < ε)`.
    pub concentration: Vec<(f64, f64)>,
    pub symmetry_defect: f64,
    pub zero_mode: ZeroMode,
    /// Largest and smallest imaginary parts.
    pub im_range: (f64, f64),
    /// Largest `Im τ` over eigenvalues with `|Re τ| > 1e−6`.
    pub max_im_off_axis: f64,
    /// Whether `Im τ ≥ −‖a‖_∞ − 1e−6` holds for all eigenvalues off the imaginary axis
    /// (a continuum bound, reported only).
    pub sharp_lower_bound_holds: bool,
    pub trusted_re: f64,
    pub eigenvalue_count: usize,
}

/// Spectrum statistics over a computed eigenvalue list.
pub fn spectrum_summary(
    eigs: &[DampedEigenvalue],
    ops: &AssembledOperators,
) -> Result<SpectrumSummary> {
    if eigs.is_empty() {
        return Err(Error::Argument("empty eigenvalue list".into()));
    }
    let sup = ops.damping_sup;
    let gap_g = eigs
        .iter()
        .filter(|e| e.tau.norm() > ZERO_TOL)
        .map(|e| -e.tau.im)
        .fold(f64::INFINITY, f64::min);
    let symmetry_defect = eigs
        .iter()
        .map(|e| {
            let target = -e.tau.conj();
            eigs.iter().map(|f| (f.tau - target).norm()).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let zero: Vec<&DampedEigenvalue> = eigs.iter().filter(|e| e.tau.norm() <= ZERO_TOL).collect();
    let zero_mode = match zero.first() {
        Some(z) => {
            let mean = z.eigenvector.iter().sum::<Complex>() / z.eigenvector.len() as f64;
            let defect = z
                .eigenvector
                .iter()
                .map(|x| (x - mean).norm())
                .fold(0.0, f64::max)
                / mean.norm().max(1e-300);
            ZeroMode {
                present: true,
                multiplicity: zero.iter().map(|e| e.multiplicity).sum(),
                constant_defect: defect,
            }
        }
        None => ZeroMode {
            present: false,
            multiplicity: 0,
            constant_defect: f64::NAN,
        },
    };
    let trusted_re = trusted_re_bound(ops);
    let taus = expanded_taus(eigs);
    let max_re = taus.iter().map(|t| t.re.abs()).fold(0.0, f64::max).min(trusted_re);
    let weyl_counts: Vec<(f64, f64)> = (1..=16)
        .map(|k| {
            let r = max_re * k as f64 / 16.0;
            let count = taus.iter().filter(|t| t.re.abs() <= r).count();
            (r, 0.5 * count as f64)
        })
        .collect();
    let trusted: Vec<&Complex> = taus.iter().filter(|t| t.re.abs() <= trusted_re).collect();
    let concentration = [0.05, 0.1, 0.2]
        .iter()
        .map(|f| {
            let eps = f * sup;
            let hits = trusted
                .iter()
                .filter(|t| (t.im + ops.mean_damping).abs() < eps)
                .count();
            (eps, hits as f64 / trusted.len().max(1) as f64)
        })
        .collect();
    let im_range = taus.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
        (lo.min(t.im), hi.max(t.im))
    });
    let off_axis: Vec<&Complex> = taus.iter().filter(|t| t.re.abs() > 1e-6).collect();
    let max_im_off_axis = off_axis.iter().map(|t| t.im).fold(f64::NEG_INFINITY, f64::max);
    let sharp_lower_bound_holds = off_axis.iter().all(|t| t.im >= -sup - 1e-6);
    Ok(SpectrumSummary {
        gap_g,
        mean_damping: ops.mean_damping,
        sup_norm: sup,
        weyl_counts,
        concentration,
        symmetry_defect,
        zero_mode,
        im_range,
        max_im_off_axis,
        sharp_lower_bound_holds,
        trusted_re,
        eigenvalue_count: taus.len(),
    })
}

/// `‖R(τ)‖` in the M-weighted operator norm, with its smallest singular value.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolventValue {
    pub re: f64,
    pub im: f64,
    pub norm: f64,
    pub sigma_min: f64,
    pub near_singular: bool,
}

impl ResolventValue {
    fn singular(tau: Complex) -> Self {
        Self {
            re: tau.re,
            im: tau.im,
            norm: f64::INFINITY,
            sigma_min: 0.0,
            near_singular: true,
        }
    }

    fn from_sigma(tau: Complex, sigma_min: f64) -> Self {
        let near_singular = sigma_min < NEAR_SINGULAR_REL * (1.0 + tau.norm());
        Self {
            re: tau.re,
            im: tau.im,
            norm: if near_singular { f64::INFINITY } else { 1.0 / sigma_min },
            sigma_min,
            near_singular,
        }
    }
}

/// `‖R(τ)‖ = 1 / σ_min(M^{−1/2} Q(τ) M^{−1/2})`; dense SVD on small meshes, otherwise
/// Lanczos on `Q⁻ᴴ M Q⁻¹ M`, which is self-adjoint in the M-inner product.
pub fn resolvent_norm(ops: &AssembledOperators, tau: Complex) -> Result<ResolventValue> {
    if ops.dof_count <= DENSE_RESOLVENT_LIMIT {
        resolvent_norm_dense(ops, tau)
    } else {
        resolvent_norm_iterative(ops, tau)
    }
}

pub fn resolvent_norm_dense(ops: &AssembledOperators, tau: Complex) -> Result<ResolventValue> {
    let m = ops.m.to_dense();
    let eig = m.symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| *v <= 0.0) {
        return Err(Error::Numerical("mass matrix is not positive definite".into()));
    }
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * eig.eigenvectors.transpose();
    let w = inv_sqrt.map(|v| c(v, 0.0));
    let q = ops.k.to_dense().map(|v| c(v, 0.0))
        - ops.m.to_dense().map(|v| c(v, 0.0)) * (tau * tau)
        - ops.a.to_dense().map(|v| c(v, 0.0)) * (2.0 * I * tau);
    let b = &w * q * &w;
    let sv = b.singular_values();
    let smin = sv.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    Ok(ResolventValue::from_sigma(tau, smin))
}

pub fn resolvent_norm_iterative(ops: &AssembledOperators, tau: Complex) -> Result<ResolventValue> {
    let n = ops.dof_count;
    let factor = match factor_pencil(ops, tau) {
        Ok(f) => f,
        Err(Error::Factorization { .. }) => return Ok(ResolventValue::singular(tau)),
        Err(e) => return Err(e),
    };
    let mmul = |x: &[Complex]| {
        let mut y = vec![c(0.0, 0.0); n];
        ops.m.mul_complex_into(x, &mut y);
        y
    };
    let op = |x: &[Complex]| -> Result<Vec<Complex>> {
        let y = factor.solve(&mmul(x));
        let z: Vec<Complex> = mmul(&y).iter().map(|v| v.conj()).collect();
        Ok(factor.solve(&z).iter().map(|v| v.conj()).collect())
    };
    let mut prev = f64::NAN;
    let mut dim = 24usize.min(n);
    loop {
        let fact = block_arnoldi(n, dim, 2, 0x7e50, op, Some(mmul))?;
        let h = fact.square();
        let h = (&h + h.adjoint()) * c(0.5, 0.0);
        let top = h.symmetric_eigenvalues().iter().fold(0.0f64, |m, v| m.max(*v));
        if top.is_finite() && (top - prev).abs() <= 1e-12 * top || dim >= n {
            let smin = 1.0 / top.max(1e-300).sqrt();
            return Ok(ResolventValue::from_sigma(tau, smin));
        }
        prev = top;
        dim = (2 * dim).min(n);
    }
}

/// Resolvent norms along the horizontal line `Im τ = im`.
pub fn resolvent_scan(ops: &AssembledOperators, re_grid: &[f64], im: f64) -> Result<Vec<ResolventValue>> {
    re_grid
        .par_iter()
        .map(|&re| resolvent_norm(ops, c(re, im)))
        .collect()
}

/// Indices of strict interior local maxima of a scan.
pub fn scan_peaks(values: &[ResolventValue]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i].norm > values[i - 1].norm && values[i].norm > values[i + 1].norm)
        .collect()
}

/// Per-mode ratios `‖a u_k‖ / ‖u_k‖` for Laplacian eigenfunctions.
#[derive(Debug, Clone, Serialize)]
pub struct ObservabilityReport {
    /// Minimum over `k ≥ 1`.
    pub min_ratio: f64,
    pub per_mode: Vec<f64>,
    pub lambdas: Vec<f64>,
}

/// Observability ratios from precomputed Laplacian modes; `ratio_k² = u_kᵀA₂u_k / u_kᵀMu_k`.
pub fn observability_from_modes(ops: &AssembledOperators, modes: &[LaplaceMode], n_modes: usize) -> Result<ObservabilityReport> {
    if n_modes > modes.len() {
        return Err(Error::Argument(format!(
            "{n_modes} modes requested, {} available",
            modes.len()
        )));
    }
    if n_modes < 2 {
        return Err(Error::Argument("at least two modes are needed".into()));
    }
    let per_mode: Vec<f64> = modes[..n_modes]
        .iter()
        .map(|m| (ops.a2.quadratic_form(&m.vector) / ops.m.quadratic_form(&m.vector)).max(0.0).sqrt())
        .collect();
    let min_ratio = per_mode[1..].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ObservabilityReport {
        min_ratio,
        per_mode,
        lambdas: modes[..n_modes].iter().map(|m| m.lambda).collect(),
    })
}

pub fn observability_ratio(ops: &AssembledOperators, n_modes: usize) -> Result<ObservabilityReport> {
    if n_modes > ops.dof_count {
        return Err(Error::Argument(format!(
            "{n_modes} modes requested, mesh has {} dofs",
            ops.dof_count
        )));
    }
    let modes = laplacian_eigs(ops, n_modes)?;
    observability_from_modes(ops, &modes, n_modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damping::{DampingField, DampingPreset};
    use crate::mesh::{assemble, build_mesh, dense_laplacian_eigs};

    fn ops(level: usize, a: &DampingField) -> AssembledOperators {
        assemble(&build_mesh(level).unwrap(), a).unwrap()
    }

    #[test]
    fn complex_schur_is_triangular() {
        let a = DMatrix::<Complex>::from_fn(5, 5, |i, j| c((i * 3 + j) as f64 % 7.0, (i + 2 * j) as f64 % 3.0));
        let (q, t) = a.clone().schur().unpack();
        for i in 0..5 {
            for j in 0..i {
                assert!(t[(i, j)].norm() < 1e-12);
            }
        }
        assert!((&q * &t * q.adjoint() - a).norm() < 1e-10);
    }

    #[test]
    fn constant_damping_formula_branches() {
        let s = constant_damping_spectrum(&[0.0, 0.16, 4.0], 0.5);
        assert!((s[0] - c(0.0, -1.0)).norm() < 1e-15);
        assert!(s[1].norm() < 1e-15);
        assert!((s[2] - c(0.0, -0.8)).norm() < 1e-15);
        assert!((s[3] - c(0.0, -0.2)).norm() < 1e-15);
        let w = (4.0f64 - 0.25).sqrt();
        assert!((s[4] - c(-w, -0.5)).norm() < 1e-15);
        assert!((s[5] - c(w, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn arnoldi_matches_dense_on_small_mesh() {
        let a = DampingPreset::AxisAvoidingBump.field().unwrap();
        let o = ops(2, &a);
        let w = QepWindow::symmetric(6.0, 2 * o.dof_count);
        let it = solve_qep(&o, &w).unwrap();
        let de = solve_qep_dense(&o, &w).unwrap();
        let ti = expanded_taus(&it);
        let td = expanded_taus(&de);
        assert_eq!(ti.len(), td.len());
        for t in &td {
            let best = ti.iter().map(|s| (s - t).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8, "{t} unmatched ({best:e})");
        }
        for e in &it {
            assert!(e.residual <= QEP_RESIDUAL_TOL);
        }
    }

    #[test]
    fn undamped_spectrum_is_real() {
        let o = ops(2, &DampingField::zero());
        let lam = dense_laplacian_eigs(&o, o.dof_count).unwrap();
        let eigs = solve_qep(&o, &QepWindow::symmetric(4.0, 2 * o.dof_count)).unwrap();
        for e in &eigs {
            assert!(e.tau.im.abs() < 1e-7, "{}", e.tau);
            let l = e.tau.re * e.tau.re;
            let best = lam.iter().map(|m| (m.lambda - l).abs()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-6 * (1.0 + l));
        }
    }

    #[test]
    fn constant_damping_matches_closed_form() {
        let a0 = 0.5;
        let o = ops(3, &DampingField::constant(a0).unwrap());
        let lam: Vec<f64> = dense_laplacian_eigs(&o, 40).unwrap().iter().map(|m| m.lambda).collect();
        let eigs = solve_qep(&o, &QepWindow::symmetric(4.5, 40)).unwrap();
        let oracle = constant_damping_spectrum(&lam, a0);
        for t in expanded_taus(&eigs) {
            let best = oracle.iter().map(|s| (s - t).norm() / (1.0 + s.norm())).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-6, "{t}");
        }
        let zero = eigs.iter().find(|e| e.tau.norm() < 1e-8).unwrap();
        assert_eq!(zero.multiplicity, 1);
    }

    #[test]
    fn resolvent_at_i_without_damping() {
        for level in [1, 3] {
            let o = ops(level, &DampingField::zero());
            let r = resolvent_norm(&o, c(0.0, 1.0)).unwrap();
            assert!((r.norm - 1.0).abs() < 1e-8, "level {level}: {}", r.norm);
        }
    }

    #[test]
    fn dense_and_iterative_resolvent_agree() {
        let o = ops(2, &DampingPreset::SingleBump.field().unwrap());
        for tau in [c(1.3, -0.1), c(2.7, 0.4), c(0.2, -1.5)] {
            let d = resolvent_norm_dense(&o, tau).unwrap();
            let i = resolvent_norm_iterative(&o, tau).unwrap();
            assert!((d.norm - i.norm).abs() < 1e-8 * d.norm, "{} {}", d.norm, i.norm);
        }
    }

    #[test]
    fn resolvent_flags_eigenvalues() {
        let o = ops(3, &DampingPreset::SingleBump.field().unwrap());
        let eigs = solve_qep(&o, &QepWindow::symmetric(3.0, 30)).unwrap();
        let e = eigs.iter().find(|e| e.tau.re > 1.0).unwrap();
        let r = resolvent_norm(&o, e.tau + c(1e-8, 0.0)).unwrap();
        assert!(r.near_singular && r.norm.is_infinite());
    }

    #[test]
    fn observability_of_constant_field() {
        let o = ops(3, &DampingField::constant(0.4).unwrap());
        let rep = observability_ratio(&o, 10).unwrap();
        for r in &rep.per_mode {
            assert!((r - 0.4).abs() < 1e-10);
        }
        assert!(observability_ratio(&o, 10_000).is_err());
    }
}
