//! Triangulation of the Bolza octagon with side identifications and P1 finite-element
//! assembly of the stiffness, hyperbolic mass and damping matrices.

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::damping::DampingField;
use crate::error::{Error, Result};
use crate::geometry::{area_density, geodesic_midpoint, Complex, FundamentalDomain, MobiusTransform};
use crate::linalg::krylov::block_arnoldi;
use crate::linalg::skyline::{Ordering, SkylineLdlt};
use crate::linalg::sparse::{combine, SparseMatrix, SparsePattern};

pub const MAX_REFINEMENT: usize = 8;

/// Default lower bound on the Euclidean triangle angles.
pub const DEFAULT_MIN_ANGLE_DEG: f64 = 15.0;

/// Tolerance for matching a boundary node with its image across a paired side.
const PAIRING_TOL: f64 = 1e-8;

/// Degree-4 six-point symmetric rule on the reference triangle: (weight, barycentric
/// coordinates), weights summing to one.
const DUNAVANT4: [(f64, [f64; 3]); 6] = {
    const W1: f64 = 0.223381589678011;
    const W2: f64 = 0.109951743655322;
    const A1: f64 = 0.108103018168070;
    const B1: f64 = 0.445948490915965;
    const A2: f64 = 0.816847572980459;
    const B2: f64 = 0.091576213509771;
    [
        (W1, [A1, B1, B1]),
        (W1, [B1, A1, B1]),
        (W1, [B1, B1, A1]),
        (W2, [A2, B2, B2]),
        (W2, [B2, A2, B2]),
        (W2, [B2, B2, A2]),
    ]
};

/// A boundary node glued to another node: `deck(position of canonical) = position of node`.
#[derive(Debug, Clone, Serialize)]
pub struct Identification {
    pub node: usize,
    pub canonical: usize,
    pub deck: MobiusTransform,
}

/// Triangulated octagon with its side gluing.
#[derive(Debug, Clone, Serialize)]
pub struct HyperbolicMesh {
    pub refinement: usize,
    pub vertices: Vec<Complex>,
    pub triangles: Vec<[usize; 3]>,
    pub identification: Vec<Identification>,
    /// node → degree of freedom
    pub dof_of: Vec<usize>,
    /// degree of freedom → canonical node
    pub canonical_nodes: Vec<usize>,
    pub dof_count: usize,
    pub interior_edges: usize,
    pub boundary_edges: usize,
}

impl HyperbolicMesh {
    /// Edges of the glued complex: interior edges plus half the boundary edges.
    pub fn edge_count(&self) -> usize {
        self.interior_edges + self.boundary_edges / 2
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.dof_count as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    /// Smallest Euclidean interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| triangle_angles(self.corners(t)).into_iter().fold(f64::INFINITY, f64::min))
            .fold(f64::INFINITY, f64::min)
            .to_degrees()
    }

    pub fn corners(&self, t: &[usize; 3]) -> [Complex; 3] {
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    /// Positions of the canonical node of every degree of freedom.
    pub fn dof_points(&self) -> Vec<Complex> {
        self.canonical_nodes.iter().map(|&n| self.vertices[n]).collect()
    }

    /// Largest `|deck(canonical) − node|` over the identification table.
    pub fn identification_defect(&self) -> f64 {
        self.identification
            .iter()
            .map(|id| (id.deck.apply(self.vertices[id.canonical]) - self.vertices[id.node]).norm())
            .fold(0.0, f64::max)
    }
}

fn signed_area(p: [Complex; 3]) -> f64 {
    let u = p[1] - p[0];
    let v = p[2] - p[0];
    0.5 * (u.re * v.im - u.im * v.re)
}

fn triangle_angles(p: [Complex; 3]) -> [f64; 3] {
    std::array::from_fn(|i| {
        let a = p[(i + 1) % 3] - p[i];
        let b = p[(i + 2) % 3] - p[i];
        (a.conj() * b).arg().abs()
    })
}

/// Builds the mesh at `refinement` uniform subdivisions of the eight-triangle fan.
pub fn build_mesh(refinement: usize) -> Result<HyperbolicMesh> {
    build_mesh_with_floor(refinement, DEFAULT_MIN_ANGLE_DEG)
}

pub fn build_mesh_with_floor(refinement: usize, min_angle_deg: f64) -> Result<HyperbolicMesh> {
    if refinement > MAX_REFINEMENT {
        return Err(Error::Argument(format!(
            "refinement level {refinement} exceeds {MAX_REFINEMENT}"
        )));
    }
    let domain = FundamentalDomain::bolza();
    let mut vertices = vec![Complex::new(0.0, 0.0)];
    // sides (bit mask) each node lies on
    let mut sides: Vec<u8> = vec![0];
    for j in 0..8 {
        vertices.push(domain.vertices()[j]);
        sides.push((1u8 << j) | (1u8 << ((j + 7) % 8)));
    }
    let mut triangles: Vec<[usize; 3]> = (0..8).map(|j| [0, 1 + j, 1 + (j + 1) % 8]).collect();

    for _ in 0..refinement {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(4 * triangles.len());
        for t in &triangles {
            let mut mid = [0usize; 3];
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[e] = match midpoints.get(&key) {
                    Some(&m) => m,
                    None => {
                        let m = vertices.len();
                        vertices.push(geodesic_midpoint(vertices[a], vertices[b])?);
                        sides.push(sides[a] & sides[b]);
                        midpoints.insert(key, m);
                        m
                    }
                };
            }
            let [a, b, c] = *t;
            let [mab, mbc, mca] = mid;
            next.push([a, mab, mca]);
            next.push([mab, b, mbc]);
            next.push([mca, mbc, c]);
            next.push([mab, mbc, mca]);
        }
        triangles = next;
    }

    for t in &triangles {
        let p = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
        if signed_area(p) <= 0.0 {
            return Err(Error::Construction(format!("triangle {t:?} is not positively oriented")));
        }
        let worst = triangle_angles(p).into_iter().fold(f64::INFINITY, f64::min).to_degrees();
        if worst < min_angle_deg {
            return Err(Error::Construction(format!(
                "triangle {t:?} has angle {worst:.2}° below the {min_angle_deg}° floor"
            )));
        }
    }

    let n_nodes = vertices.len();
    let mut canonical: Vec<usize> = (0..n_nodes).collect();
    let mut deck: Vec<MobiusTransform> = vec![MobiusTransform::identity(); n_nodes];

    // the eight octagon corners form one vertex cycle, glued to corner 0 (node 1)
    let corner_decks = corner_words(&domain)?;
    for j in 1..8 {
        canonical[1 + j] = 1;
        deck[1 + j] = corner_decks[j];
    }

    // side nodes: match each with its image across the paired side
    let mut by_side: Vec<Vec<usize>> = vec![Vec::new(); 8];
    for (i, &mask) in sides.iter().enumerate() {
        if i >= 1 && i <= 8 {
            continue;
        }
        for s in 0..8 {
            if mask & (1 << s) != 0 {
                by_side[s].push(i);
            }
        }
    }
    for s in 0..8 {
        let partner_side = (s + 4) % 8;
        let map = domain.pairings()[partner_side];
        for &i in &by_side[s] {
            let image = map.apply(vertices[i]);
            let found = by_side[partner_side]
                .iter()
                .copied()
                .min_by(|&x, &y| {
                    (vertices[x] - image)
                        .norm()
                        .partial_cmp(&(vertices[y] - image).norm())
                        .unwrap()
                })
                .ok_or_else(|| Error::Construction(format!("side {partner_side} has no nodes")))?;
            let gap = (vertices[found] - image).norm();
            if gap > PAIRING_TOL {
                return Err(Error::Construction(format!(
                    "node {i} on side {s} has no partner on side {partner_side} (gap {gap:e})"
                )));
            }
            if found < i {
                canonical[i] = found;
                // partner = pairing[s+4](node) ⇒ node = pairing[s](partner)
                deck[i] = domain.pairings()[s];
            }
        }
    }

    let mut dof_of = vec![usize::MAX; n_nodes];
    let mut canonical_nodes = Vec::new();
    for i in 0..n_nodes {
        if canonical[i] == i {
            dof_of[i] = canonical_nodes.len();
            canonical_nodes.push(i);
        }
    }
    for i in 0..n_nodes {
        if canonical[i] != i {
            let c = canonical[i];
            if canonical[c] != c {
                return Err(Error::Construction(format!("node {i} glued to a non-canonical node")));
            }
            dof_of[i] = dof_of[c];
        }
    }
    let identification: Vec<Identification> = (0..n_nodes)
        .filter(|&i| canonical[i] != i)
        .map(|i| Identification {
            node: i,
            canonical: canonical[i],
            deck: deck[i],
        })
        .collect();

    let mut edge_faces: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &triangles {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            *edge_faces.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let boundary_edges = edge_faces.values().filter(|&&c| c == 1).count();
    let interior_edges = edge_faces.len() - boundary_edges;

    let mesh = HyperbolicMesh {
        refinement,
        vertices,
        triangles,
        identification,
        dof_of,
        dof_count: canonical_nodes.len(),
        canonical_nodes,
        interior_edges,
        boundary_edges,
    };
    let defect = mesh.identification_defect();
    if defect > PAIRING_TOL {
        return Err(Error::Construction(format!("identification defect {defect:e}")));
    }
    Ok(mesh)
}

/// Shortest words in the side pairings carrying corner 0 to every other corner.
fn corner_words(domain: &FundamentalDomain) -> Result<[MobiusTransform; 8]> {
    let v = domain.vertices();
    let mut found: [Option<MobiusTransform>; 8] = [None; 8];
    found[0] = Some(MobiusTransform::identity());
    let mut queue = VecDeque::from([0usize]);
    while let Some(k) = queue.pop_front() {
        let t = found[k].unwrap();
        // corner k lies on sides k − 1 and k
        for s in [(k + 7) % 8, k] {
            let p = domain.pairings()[(s + 4) % 8];
            let image = p.apply(v[k]);
            let m = (0..8)
                .find(|&m| (v[m] - image).norm() < PAIRING_TOL)
                .ok_or_else(|| Error::Construction(format!("corner {k} leaves the corner set")))?;
            if found[m].is_none() {
                found[m] = Some(p.compose(&t)?);
                queue.push_back(m);
            }
        }
    }
    let mut out = [MobiusTransform::identity(); 8];
    for (k, f) in found.into_iter().enumerate() {
        out[k] = f.ok_or_else(|| Error::Construction(format!("corner {k} not in the cycle")))?;
    }
    Ok(out)
}

/// Sparse FEM operators on the glued mesh.
#[derive(Debug, Clone)]
pub struct AssembledOperators {
    pub refinement: usize,
    pub dof_count: usize,
    /// Dirichlet form.
    pub k: SparseMatrix<f64>,
    /// Hyperbolic L² form.
    pub m: SparseMatrix<f64>,
    /// `∫ a u v`.
    pub a: SparseMatrix<f64>,
    /// `∫ a² u v`.
    pub a2: SparseMatrix<f64>,
    pub ordering: Arc<Ordering>,
    pub mass_factor: Arc<SkylineLdlt<f64>>,
    /// `1ᵀ M 1`.
    pub area: f64,
    pub damping_sup: f64,
    /// `1ᵀ A 1 / 1ᵀ M 1`.
    pub mean_damping: f64,
    pub dof_points: Vec<Complex>,
}

impl AssembledOperators {
    pub fn pattern(&self) -> &Arc<SparsePattern> {
        self.k.pattern()
    }

    pub fn damping_is_zero(&self) -> bool {
        self.a.max_abs() == 0.0
    }

    pub fn m_inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let my = self.m.mul_vec(y);
        x.iter().zip(&my).map(|(a, b)| a * b).sum()
    }

    pub fn m_norm(&self, x: &[f64]) -> f64 {
        self.m.quadratic_form(x).max(0.0).sqrt()
    }

    /// `sqrt(rᴴ M⁻¹ r)`.
    pub fn m_inv_norm_complex(&self, r: &[Complex]) -> f64 {
        let y = self.mass_factor.solve_complex(r);
        r.iter()
            .zip(&y)
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    pub fn m_inv_norm(&self, r: &[f64]) -> f64 {
        let y = self.mass_factor.solve(r);
        r.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }

    /// Complex M-norm `sqrt(uᴴ M u)`.
    pub fn m_norm_complex(&self, u: &[Complex]) -> f64 {
        let mut y = vec![Complex::new(0.0, 0.0); u.len()];
        self.m.mul_complex_into(u, &mut y);
        u.iter()
            .zip(&y)
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// Factorizes `Σ c_k X_k` in the shared ordering.
    pub fn factor_real(&self, terms: &[(f64, &SparseMatrix<f64>)]) -> Result<SkylineLdlt<f64>> {
        SkylineLdlt::factor(&combine(terms)?, self.ordering.clone())
    }

    pub fn factor_complex(
        &self,
        terms: &[(Complex, &SparseMatrix<f64>)],
    ) -> Result<SkylineLdlt<Complex>> {
        SkylineLdlt::factor(&combine(terms)?, self.ordering.clone())
    }
}

#[derive(Debug, Clone)]
struct LocalMatrices {
    dofs: [usize; 3],
    k: [[f64; 3]; 3],
    m: [[f64; 3]; 3],
    a: [[f64; 3]; 3],
    a2: [[f64; 3]; 3],
}

/// Euclidean P1 stiffness of one triangle.
pub fn local_stiffness(p: [Complex; 3]) -> [[f64; 3]; 3] {
    let area = signed_area(p);
    let grads = p1_gradients(p);
    std::array::from_fn(|i| std::array::from_fn(|j| area * (grads[i].0 * grads[j].0 + grads[i].1 * grads[j].1)))
}

fn p1_gradients(p: [Complex; 3]) -> [(f64, f64); 3] {
    let area2 = 2.0 * signed_area(p);
    std::array::from_fn(|i| {
        let a = p[(i + 1) % 3];
        let b = p[(i + 2) % 3];
        ((a.im - b.im) / area2, (b.re - a.re) / area2)
    })
}

/// Stiffness of one triangle with the hyperbolic metric written out:
/// `∫ g^{ij} ∂_i φ ∂_j φ √g` with `g = ρ δ`, evaluated by the degree-4 rule.
pub fn local_stiffness_with_metric(p: [Complex; 3]) -> [[f64; 3]; 3] {
    let area = signed_area(p);
    let grads = p1_gradients(p);
    let mut out = [[0.0; 3]; 3];
    for (w, bary) in DUNAVANT4 {
        let x = p[0] * bary[0] + p[1] * bary[1] + p[2] * bary[2];
        let rho = area_density(x);
        let inv_metric = 1.0 / rho;
        let volume = rho;
        for i in 0..3 {
            for j in 0..3 {
                let dot = grads[i].0 * grads[j].0 + grads[i].1 * grads[j].1;
                out[i][j] += w * area * inv_metric * dot * volume;
            }
        }
    }
    out
}

fn local_matrices(mesh: &HyperbolicMesh, t: &[usize; 3], a: &DampingField) -> Result<LocalMatrices> {
    let p = mesh.corners(t);
    let area = signed_area(p);
    let mut m = [[0.0; 3]; 3];
    let mut am = [[0.0; 3]; 3];
    let mut a2m = [[0.0; 3]; 3];
    for (w, bary) in DUNAVANT4 {
        let x = p[0] * bary[0] + p[1] * bary[1] + p[2] * bary[2];
        if x.norm_sqr() >= 1.0 {
            return Err(Error::Numerical(format!("quadrature point {x} outside the disk")));
        }
        let rho = area_density(x);
        let av = a.evaluate(x)?;
        for i in 0..3 {
            for j in 0..3 {
                let base = w * area * rho * bary[i] * bary[j];
                m[i][j] += base;
                am[i][j] += base * av;
                a2m[i][j] += base * av * av;
            }
        }
    }
    Ok(LocalMatrices {
        dofs: [mesh.dof_of[t[0]], mesh.dof_of[t[1]], mesh.dof_of[t[2]]],
        k: local_stiffness(p),
        m,
        a: am,
        a2: a2m,
    })
}

/// Assembles K, M, A and A₂ (the form of a²) on the glued mesh.
pub fn assemble(mesh: &HyperbolicMesh, a: &DampingField) -> Result<AssembledOperators> {
    let n = mesh.dof_count;
    let couplings = mesh.triangles.iter().flat_map(|t| {
        let d = [mesh.dof_of[t[0]], mesh.dof_of[t[1]], mesh.dof_of[t[2]]];
        [(d[0], d[1]), (d[1], d[2]), (d[2], d[0])]
    });
    let pattern = Arc::new(SparsePattern::from_couplings(n, couplings));
    // element contributions computed in parallel, gathered in element order
    let locals: Vec<LocalMatrices> = mesh
        .triangles
        .par_iter()
        .map(|t| local_matrices(mesh, t, a))
        .collect::<Result<_>>()?;
    let mut k = SparseMatrix::<f64>::zeros(pattern.clone());
    let mut m = SparseMatrix::<f64>::zeros(pattern.clone());
    let mut am = SparseMatrix::<f64>::zeros(pattern.clone());
    let mut a2m = SparseMatrix::<f64>::zeros(pattern.clone());
    for loc in &locals {
        for i in 0..3 {
            for j in 0..3 {
                let (r, c) = (loc.dofs[i], loc.dofs[j]);
                k.add_to(r, c, loc.k[i][j]);
                m.add_to(r, c, loc.m[i][j]);
                am.add_to(r, c, loc.a[i][j]);
                a2m.add_to(r, c, loc.a2[i][j]);
            }
        }
    }
    let ordering = Arc::new(Ordering::rcm(&pattern));
    let mass_factor = Arc::new(SkylineLdlt::factor(&m, ordering.clone())?);
    if mass_factor.negative_pivots() > 0 {
        return Err(Error::Numerical("mass matrix is not positive definite".into()));
    }
    let ones = vec![1.0; n];
    let area = m.quadratic_form(&ones);
    let mean_damping = am.quadratic_form(&ones) / area;
    Ok(AssembledOperators {
        refinement: mesh.refinement,
        dof_count: n,
        k,
        m,
        a: am,
        a2: a2m,
        ordering,
        mass_factor,
        area,
        damping_sup: a.sup_norm(),
        mean_damping,
        dof_points: mesh.dof_points(),
    })
}

/// One generalized eigenpair `K u = λ M u` with `uᵀ M u = 1`.
#[derive(Debug, Clone, Serialize)]
pub struct LaplaceMode {
    pub lambda: f64,
    pub vector: Vec<f64>,
    /// `‖K u − λ M u‖_{M⁻¹}`.
    pub residual: f64,
}

/// Residual bound required of every returned Laplacian eigenpair.
pub const LAPLACE_RESIDUAL_TOL: f64 = 1e-8;

/// Size up to which the Laplacian eigenproblem is solved densely.
pub const DENSE_LAPLACE_LIMIT: usize = 300;

const LANCZOS_SHIFT: f64 = -0.5;
const LANCZOS_BLOCK: usize = 4;

/// The `count` lowest eigenpairs of `K u = λ M u`, ascending and M-orthonormal.
pub fn laplacian_eigs(ops: &AssembledOperators, count: usize) -> Result<Vec<LaplaceMode>> {
    let n = ops.dof_count;
    if count == 0 || count > n {
        return Err(Error::Argument(format!("requested {count} modes of {n}")));
    }
    let mut modes = if n <= DENSE_LAPLACE_LIMIT {
        dense_laplacian_eigs(ops, count)?
    } else {
        lanczos_laplacian_eigs(ops, count)?
    };
    for mode in &mut modes {
        mode.residual = laplace_residual(ops, mode.lambda, &mode.vector);
        if mode.lambda.abs() < 1e-8 {
            // kernel of the Dirichlet form: fix the sign so the constant mode is positive
            let s: f64 = mode.vector.iter().sum();
            if s < 0.0 {
                mode.vector.iter_mut().for_each(|v| *v = -*v);
            }
        }
    }
    if let Some(bad) = modes.iter().position(|m| !(m.residual <= LAPLACE_RESIDUAL_TOL)) {
        return Err(Error::Convergence(format!(
            "Laplacian mode {bad}: residual {:e} (λ = {})",
            modes[bad].residual, modes[bad].lambda
        )));
    }
    Ok(modes)
}

pub fn laplace_residual(ops: &AssembledOperators, lambda: f64, u: &[f64]) -> f64 {
    let ku = ops.k.mul_vec(u);
    let mu = ops.m.mul_vec(u);
    let r: Vec<f64> = ku.iter().zip(&mu).map(|(k, m)| k - lambda * m).collect();
    ops.m_inv_norm(&r)
}

/// Dense generalized symmetric eigensolver via the Cholesky factor of M.
pub fn dense_laplacian_eigs(ops: &AssembledOperators, count: usize) -> Result<Vec<LaplaceMode>> {
    let k = ops.k.to_dense();
    let m = ops.m.to_dense();
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Numerical("mass matrix Cholesky failed".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let c = &linv * &k * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let lt = l.transpose();
    let mut out = Vec::with_capacity(count);
    for &i in order.iter().take(count) {
        let y = eig.eigenvectors.column(i).into_owned();
        let u = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        out.push(LaplaceMode {
            lambda: eig.eigenvalues[i],
            vector: u.as_slice().to_vec(),
            residual: 0.0,
        });
    }
    Ok(out)
}

/// Shift-invert block Lanczos in the M-inner product with full reorthogonalization.
/// Completeness below the largest returned eigenvalue is certified by the inertia of
/// `K − μ M`.
fn lanczos_laplacian_eigs(ops: &AssembledOperators, count: usize) -> Result<Vec<LaplaceMode>> {
    let n = ops.dof_count;
    let shifted = ops.factor_real(&[(1.0, &ops.k), (-LANCZOS_SHIFT, &ops.m)])?;
    let round = |d: usize| (d.div_ceil(LANCZOS_BLOCK) * LANCZOS_BLOCK).min(n);
    let mut dim = round(2 * count + 40);
    let mut last_err = String::new();
    for attempt in 0..8 {
        let fact = block_arnoldi(
            n,
            dim,
            LANCZOS_BLOCK,
            0x1a2b + attempt as u64,
            |x: &[f64]| Ok(shifted.solve(&ops.m.mul_vec(x))),
            Some(|x: &[f64]| ops.m.mul_vec(x)),
        )?;
        let d = fact.dim;
        let h = fact.square();
        let t = (&h + h.transpose()) * 0.5;
        let eig = t.symmetric_eigen();
        let mut pairs: Vec<(f64, DVector<f64>)> = (0..d)
            .filter(|&i| eig.eigenvalues[i] > 0.0)
            .map(|i| {
                let theta = eig.eigenvalues[i];
                (LANCZOS_SHIFT + 1.0 / theta, eig.eigenvectors.column(i).into_owned())
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let ritz: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut modes = Vec::with_capacity(count);
        for (_, y) in pairs.into_iter().take(count) {
            let u = fact.basis.columns(0, d) * y;
            let mut u = u.as_slice().to_vec();
            let nrm = ops.m_norm(&u);
            u.iter_mut().for_each(|v| *v /= nrm);
            let lambda = ops.k.quadratic_form(&u);
            let residual = laplace_residual(ops, lambda, &u);
            modes.push(LaplaceMode {
                lambda,
                vector: u,
                residual,
            });
        }
        if modes.len() < count {
            last_err = format!("only {} Ritz values at dimension {dim}", modes.len());
        } else if let Some(bad) = modes.iter().position(|m| m.residual > LAPLACE_RESIDUAL_TOL) {
            last_err = format!(
                "mode {bad} residual {:e} at dimension {dim}",
                modes[bad].residual
            );
        } else {
            let top = modes[count - 1].lambda;
            let probe = top + 1e-6 * (1.0 + top.abs());
            let below = ops.factor_real(&[(1.0, &ops.k), (-probe, &ops.m)])?.negative_pivots();
            // a multiple eigenvalue may straddle the requested count
            let found = ritz.iter().filter(|&&l| l < probe).count();
            if below <= found {
                m_orthonormalize(ops, &mut modes);
                return Ok(modes);
            }
            last_err = format!("inertia reports {below} eigenvalues below {probe}, found {found}");
        }
        if dim == n {
            break;
        }
        dim = round(dim * 3 / 2);
    }
    Err(Error::Convergence(format!("block Lanczos: {last_err}")))
}

/// Re-orthonormalizes eigenvectors within clusters of equal eigenvalues.
fn m_orthonormalize(ops: &AssembledOperators, modes: &mut [LaplaceMode]) {
    let mut start = 0;
    while start < modes.len() {
        let mut end = start + 1;
        while end < modes.len()
            && (modes[end].lambda - modes[start].lambda).abs() < 1e-7 * (1.0 + modes[start].lambda)
        {
            end += 1;
        }
        for i in start..end {
            for j in start..i {
                let c = ops.m_inner(&modes[j].vector, &modes[i].vector);
                let prev = modes[j].vector.clone();
                modes[i].vector.iter_mut().zip(&prev).for_each(|(v, p)| *v -= c * p);
            }
            let nrm = ops.m_norm(&modes[i].vector);
            modes[i].vector.iter_mut().for_each(|v| *v /= nrm);
        }
        start = end;
    }
}

/// Writes the operators in the plain sparse text format: a `#`-prefixed header with
/// `dof_count`, `refinement` and `area`, then one block per matrix introduced by
/// `matrix <name> <nnz>` and followed by `row col value` triplets (0-based).
pub fn write_sparse_text<W: Write>(ops: &AssembledOperators, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "# hyperdamp sparse text v1")?;
    writeln!(out, "# dof_count {}", ops.dof_count)?;
    writeln!(out, "# refinement {}", ops.refinement)?;
    writeln!(out, "# area {:.12e}", ops.area)?;
    for (name, mat) in [("K", &ops.k), ("M", &ops.m), ("A", &ops.a)] {
        let p = mat.pattern();
        writeln!(out, "matrix {name} {}", p.nnz())?;
        for i in 0..p.n() {
            for k in p.row_range(i) {
                let j = p.row(i)[k - p.row_range(i).start];
                writeln!(out, "{i} {j} {:.17e}", mat.values()[k])?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn level_zero_counts() {
        let mesh = build_mesh(0).unwrap();
        assert_eq!(mesh.triangles.len(), 8);
        assert_eq!(mesh.dof_count, 2);
        assert_eq!(mesh.edge_count(), 12);
        assert_eq!(mesh.euler_characteristic(), -2);
    }

    #[test]
    fn refinement_counts_and_topology() {
        let domain = FundamentalDomain::bolza();
        for level in 0..=4 {
            let mesh = build_mesh(level).unwrap();
            assert_eq!(mesh.triangles.len(), 8 * 4usize.pow(level as u32));
            assert_eq!(mesh.euler_characteristic(), -2, "level {level}");
            assert!(mesh.identification_defect() < 1e-8);
            assert!(mesh.min_angle_deg() >= DEFAULT_MIN_ANGLE_DEG);
            for z in &mesh.vertices {
                assert!(domain.contains(*z) || (z.norm() - domain.vertices()[0].norm()).abs() < 1e-9);
            }
        }
        let dofs: Vec<usize> = (1..=5).map(|l| build_mesh(l).unwrap().dof_count).collect();
        assert_eq!(dofs, vec![14, 62, 254, 1022, 4094]);
    }

    #[test]
    fn rejects_excessive_level_and_high_angle_floor() {
        assert!(matches!(build_mesh(9), Err(Error::Argument(_))));
        assert!(matches!(build_mesh_with_floor(1, 80.0), Err(Error::Construction(_))));
    }

    #[test]
    fn corner_decks_map_corner_zero() {
        let domain = FundamentalDomain::bolza();
        let words = corner_words(&domain).unwrap();
        for k in 0..8 {
            assert!((words[k].apply(domain.vertices()[0]) - domain.vertices()[k]).norm() < 1e-10);
        }
    }

    #[test]
    fn operator_invariants() {
        let mesh = build_mesh(3).unwrap();
        let a = crate::damping::DampingPreset::SingleBump.field().unwrap();
        let ops = assemble(&mesh, &a).unwrap();
        for mat in [&ops.k, &ops.m, &ops.a, &ops.a2] {
            assert!(mat.symmetry_defect() < 1e-12);
        }
        let ones = vec![1.0; ops.dof_count];
        assert!(ops.k.mul_vec(&ones).iter().all(|v| v.abs() < 1e-10));
        assert!((ops.area - 4.0 * PI).abs() < 0.02 * 4.0 * PI);
        let zero = assemble(&mesh, &DampingField::zero()).unwrap();
        assert_eq!(zero.a.max_abs(), 0.0);
        assert!(zero.damping_is_zero());
        assert!(!ops.damping_is_zero());
    }

    #[test]
    fn metric_factors_cancel_in_stiffness() {
        let mesh = build_mesh(2).unwrap();
        for t in mesh.triangles.iter().step_by(7) {
            let p = mesh.corners(t);
            let e = local_stiffness(p);
            let h = local_stiffness_with_metric(p);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((e[i][j] - h[i][j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn area_converges_to_four_pi_at_second_order() {
        // straight chords overshoot the geodesic sides, so the excess is positive and
        // shrinks by about four per level
        let mut prev = f64::INFINITY;
        for level in 1..=4 {
            let ops = assemble(&build_mesh(level).unwrap(), &DampingField::zero()).unwrap();
            let err = ops.area - 4.0 * PI;
            assert!(err > 0.0);
            if level >= 2 {
                let rate = prev / err;
                assert!(rate > 3.5 && rate < 4.5, "rate {rate}");
            }
            prev = err;
        }
        assert!(prev < 0.01 * 4.0 * PI);
    }

    #[test]
    fn lanczos_matches_dense() {
        let ops = assemble(&build_mesh(3).unwrap(), &DampingField::zero()).unwrap();
        let dense = dense_laplacian_eigs(&ops, 30).unwrap();
        let iterative = lanczos_laplacian_eigs(&ops, 30).unwrap();
        for (d, i) in dense.iter().zip(&iterative) {
            assert!((d.lambda - i.lambda).abs() < 1e-9 * (1.0 + d.lambda), "{} {}", d.lambda, i.lambda);
        }
        assert!(dense[0].lambda.abs() < 1e-8);
        assert!(dense[1].lambda > 0.1);
    }

    #[test]
    fn eigenpairs_are_m_orthonormal_with_constant_ground_state() {
        let ops = assemble(&build_mesh(4).unwrap(), &DampingField::zero()).unwrap();
        let modes = laplacian_eigs(&ops, 12).unwrap();
        assert!(modes[0].lambda.abs() < 1e-8);
        let c = modes[0].vector[0];
        assert!(modes[0].vector.iter().all(|v| (v - c).abs() < 1e-8));
        for i in 0..modes.len() {
            for j in 0..=i {
                let g = ops.m_inner(&modes[i].vector, &modes[j].vector);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-8, "{i} {j} {g}");
            }
            assert!(modes[i].residual <= LAPLACE_RESIDUAL_TOL);
        }
    }

    #[test]
    fn sparse_text_export_has_header() {
        let ops = assemble(&build_mesh(1).unwrap(), &DampingField::zero()).unwrap();
        let mut buf = Vec::new();
        write_sparse_text(&ops, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("# dof_count 14"));
        assert!(text.contains(&format!("matrix K {}", ops.pattern().nnz())));
    }
}
