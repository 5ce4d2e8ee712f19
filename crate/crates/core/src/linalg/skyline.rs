//! Envelope (skyline) LDLᵀ factorization for symmetric matrices, real or complex
//! symmetric (plain transpose, no conjugation), under a reverse Cuthill–McKee ordering.

use std::collections::VecDeque;

use nalgebra::ComplexField;

use super::sparse::{SparseMatrix, SparsePattern};
use crate::error::{Error, Result};

/// Relative pivot size below which a factorization is declared singular.
pub const PIVOT_TOL: f64 = 1e-13;

/// A symmetric permutation together with the envelope it induces.
#[derive(Debug, Clone)]
pub struct Ordering {
    /// new index → old index
    perm: Vec<usize>,
    /// old index → new index
    iperm: Vec<usize>,
    first: Vec<usize>,
    row_start: Vec<usize>,
}

impl Ordering {
    /// Reverse Cuthill–McKee ordering started from a pseudo-peripheral vertex of each component.
    pub fn rcm(pattern: &SparsePattern) -> Self {
        let n = pattern.n();
        let degree: Vec<usize> = (0..n).map(|i| pattern.row(i).len()).collect();
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let seed = (0..n)
                .filter(|&i| !visited[i])
                .min_by_key(|&i| degree[i])
                .expect("unvisited vertex");
            let start = pseudo_peripheral(pattern, seed, &visited);
            let mut queue = VecDeque::from([start]);
            visited[start] = true;
            while let Some(v) = queue.pop_front() {
                order.push(v);
                let mut nbrs: Vec<usize> = pattern
                    .row(v)
                    .iter()
                    .copied()
                    .filter(|&w| !visited[w])
                    .collect();
                nbrs.sort_by_key(|&w| (degree[w], w));
                for w in nbrs {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
        order.reverse();
        Self::from_permutation(pattern, order)
    }

    pub fn identity(pattern: &SparsePattern) -> Self {
        Self::from_permutation(pattern, (0..pattern.n()).collect())
    }

    fn from_permutation(pattern: &SparsePattern, perm: Vec<usize>) -> Self {
        let n = perm.len();
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let mut first = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            first[new] = pattern
                .row(old)
                .iter()
                .map(|&j| iperm[j])
                .filter(|&j| j <= new)
                .min()
                .unwrap_or(new);
        }
        let mut row_start = Vec::with_capacity(n + 1);
        row_start.push(0);
        for i in 0..n {
            row_start.push(row_start[i] + (i - first[i]));
        }
        Self {
            perm,
            iperm,
            first,
            row_start,
        }
    }

    /// Number of stored off-diagonal entries in the envelope.
    pub fn envelope_size(&self) -> usize {
        *self.row_start.last().unwrap_or(&0)
    }

    /// Maximal row half-bandwidth.
    pub fn bandwidth(&self) -> usize {
        (0..self.first.len())
            .map(|i| i - self.first[i])
            .max()
            .unwrap_or(0)
    }
}

fn pseudo_peripheral(pattern: &SparsePattern, seed: usize, blocked: &[bool]) -> usize {
    let mut current = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(pattern, current, blocked);
        let depth = *levels.iter().flatten().max().unwrap_or(&0);
        if depth <= ecc && current != seed {
            break;
        }
        ecc = depth;
        let far = (0..pattern.n())
            .filter(|&i| levels[i] == Some(depth))
            .min_by_key(|&i| pattern.row(i).len())
            .unwrap_or(current);
        if far == current {
            break;
        }
        current = far;
    }
    current
}

fn bfs_levels(pattern: &SparsePattern, start: usize, blocked: &[bool]) -> Vec<Option<usize>> {
    let mut level = vec![None; pattern.n()];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let lv = level[v].unwrap();
        for &w in pattern.row(v) {
            if !blocked[w] && level[w].is_none() {
                level[w] = Some(lv + 1);
                queue.push_back(w);
            }
        }
    }
    level
}

/// `P A Pᵀ = L D Lᵀ` with unit lower-triangular `L` stored row-wise inside the envelope.
#[derive(Debug, Clone)]
pub struct SkylineLdlt<T> {
    ordering: std::sync::Arc<Ordering>,
    lower: Vec<T>,
    diag: Vec<T>,
}

impl<T: ComplexField<RealField = f64> + Copy> SkylineLdlt<T> {
    pub fn factor(a: &SparseMatrix<T>, ordering: std::sync::Arc<Ordering>) -> Result<Self> {
        let n = a.n();
        let pattern = a.pattern().clone();
        let ord = &*ordering;
        let mut lower = vec![T::zero(); ord.envelope_size()];
        let mut diag = vec![T::zero(); n];
        let mut scale = 0.0f64;
        for new in 0..n {
            let old = ord.perm[new];
            let start = pattern.row_range(old).start;
            for (idx, &col) in pattern.row(old).iter().enumerate() {
                let j = ord.iperm[col];
                let v = a.values()[start + idx];
                if j == new {
                    diag[new] = v;
                    scale = scale.max(v.modulus());
                } else if j < new {
                    lower[ord.row_start[new] + j - ord.first[new]] = v;
                }
            }
        }
        if scale == 0.0 {
            scale = 1.0;
        }
        for i in 0..n {
            let fi = ord.first[i];
            let (done, rest) = lower.split_at_mut(ord.row_start[i]);
            let row = &mut rest[..i - fi];
            // row[j - fi] becomes u_j = L_ij D_j
            for j in fi..i {
                let fj = ord.first[j];
                let k0 = fi.max(fj);
                let lj = &done[ord.row_start[j]..ord.row_start[j] + (j - fj)];
                let mut s = row[j - fi];
                for k in k0..j {
                    s -= row[k - fi] * lj[k - fj];
                }
                row[j - fi] = s;
            }
            let mut d = diag[i];
            for j in fi..i {
                let u = row[j - fi];
                let l = u / diag[j];
                d -= u * l;
                row[j - fi] = l;
            }
            if !(d.modulus() > PIVOT_TOL * scale) || !d.modulus().is_finite() {
                return Err(Error::Factorization {
                    row: i,
                    pivot: d.modulus(),
                });
            }
            diag[i] = d;
        }
        Ok(Self {
            ordering,
            lower,
            diag,
        })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn pivots(&self) -> &[T] {
        &self.diag
    }

    pub fn solve_into(&self, b: &[T], x: &mut [T]) {
        let ord = &*self.ordering;
        let n = self.n();
        let mut y: Vec<T> = (0..n).map(|i| b[ord.perm[i]]).collect();
        for i in 0..n {
            let fi = ord.first[i];
            let row = &self.lower[ord.row_start[i]..ord.row_start[i + 1]];
            let mut s = y[i];
            for (k, l) in row.iter().enumerate() {
                s -= *l * y[fi + k];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = ord.first[i];
            let yi = y[i];
            let row = &self.lower[ord.row_start[i]..ord.row_start[i + 1]];
            for (k, l) in row.iter().enumerate() {
                y[fi + k] -= *l * yi;
            }
        }
        for i in 0..n {
            x[ord.perm[i]] = y[i];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); b.len()];
        self.solve_into(b, &mut x);
        x
    }
}

impl SkylineLdlt<f64> {
    /// Number of negative pivots, which by Sylvester's law equals the number of
    /// negative eigenvalues of the factored matrix.
    pub fn negative_pivots(&self) -> usize {
        self.diag.iter().filter(|d| **d < 0.0).count()
    }

    /// Solves with a complex right-hand side by splitting real and imaginary parts.
    pub fn solve_complex(&self, b: &[num_complex::Complex64]) -> Vec<num_complex::Complex64> {
        let re: Vec<f64> = b.iter().map(|z| z.re).collect();
        let im: Vec<f64> = b.iter().map(|z| z.im).collect();
        let xr = self.solve(&re);
        let xi = self.solve(&im);
        xr.into_iter()
            .zip(xi)
            .map(|(r, i)| num_complex::Complex64::new(r, i))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    /// Random sparse symmetric pattern: a ring plus random chords.
    fn random_pattern(n: usize, chords: usize, rng: &mut ChaCha8Rng) -> Arc<SparsePattern> {
        let mut c: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        for _ in 0..chords {
            c.push((rng.gen_range(0..n), rng.gen_range(0..n)));
        }
        Arc::new(SparsePattern::from_couplings(n, c))
    }

    #[test]
    fn real_indefinite_solve_and_inertia() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_pattern(60, 40, &mut rng);
        let mut a = SparseMatrix::<f64>::zeros(p.clone());
        for i in 0..60 {
            for &j in p.row(i) {
                if j < i {
                    let v = rng.gen_range(-1.0..1.0);
                    a.add_to(i, j, v);
                    a.add_to(j, i, v);
                }
            }
            a.add_to(i, i, rng.gen_range(-6.0..6.0));
        }
        let ord = Arc::new(Ordering::rcm(&p));
        let f = SkylineLdlt::factor(&a, ord).unwrap();
        let b: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b);
        let r = a.mul_vec(&x);
        let err: f64 = r.iter().zip(&b).map(|(r, b)| (r - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        let dense = a.to_dense();
        let neg = dense
            .symmetric_eigenvalues()
            .iter()
            .filter(|v| **v < 0.0)
            .count();
        assert_eq!(f.negative_pivots(), neg);
    }

    #[test]
    fn complex_symmetric_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = random_pattern(50, 30, &mut rng);
        let mut a = SparseMatrix::<Complex64>::zeros(p.clone());
        for i in 0..50 {
            for &j in p.row(i) {
                if j < i {
                    let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    a.add_to(i, j, v);
                    a.add_to(j, i, v);
                }
            }
            a.add_to(i, i, Complex64::new(rng.gen_range(-4.0..4.0), 1.0));
        }
        let f = SkylineLdlt::factor(&a, Arc::new(Ordering::rcm(&p))).unwrap();
        let b: Vec<Complex64> = (0..50).map(|i| Complex64::new(1.0, i as f64)).collect();
        let x = f.solve(&b);
        let dense: DMatrix<Complex64> = a.to_dense();
        let r = &dense * DVector::from_vec(x) - DVector::from_vec(b);
        assert!(r.norm() < 1e-10);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let p = Arc::new(SparsePattern::from_couplings(3, [(0, 1), (1, 2)]));
        let mut a = SparseMatrix::<f64>::zeros(p.clone());
        // graph Laplacian of a path: singular
        for (i, j) in [(0, 1), (1, 2)] {
            a.add_to(i, i, 1.0);
            a.add_to(j, j, 1.0);
            a.add_to(i, j, -1.0);
            a.add_to(j, i, -1.0);
        }
        let err = SkylineLdlt::factor(&a, Arc::new(Ordering::identity(&p))).unwrap_err();
        assert!(matches!(err, Error::Factorization { .. }));
    }

    #[test]
    fn rcm_does_not_widen_a_shuffled_path() {
        let n = 40;
        let mut labels: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for i in (1..n).rev() {
            labels.swap(i, rng.gen_range(0..=i));
        }
        let p = SparsePattern::from_couplings(n, (1..n).map(|i| (labels[i - 1], labels[i])));
        assert_eq!(Ordering::rcm(&p).bandwidth(), 1);
        assert!(Ordering::identity(&p).bandwidth() > 1);
    }
}
