//! Block Arnoldi with full reorthogonalization, in a Euclidean or a
//! metric-weighted inner product. The symmetric case (M-self-adjoint operator in the
//! M-inner product) is block Lanczos with full reorthogonalization.

use nalgebra::{ComplexField, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Orthonormal Krylov basis and projected matrix satisfying `Op V_k = V H` with
/// `V_k` the first `dim` columns of `V`; `H` carries the residual block in its last rows.
#[derive(Debug, Clone)]
pub struct BlockArnoldi<T: nalgebra::Scalar> {
    pub basis: DMatrix<T>,
    pub h: DMatrix<T>,
    pub dim: usize,
}

impl<T: ComplexField<RealField = f64> + Copy> BlockArnoldi<T> {
    /// Square projected matrix `V_kᴴ G Op V_k`.
    pub fn square(&self) -> DMatrix<T> {
        self.h.view((0, 0), (self.dim, self.dim)).into_owned()
    }

    /// Norm of the Arnoldi residual `‖(Op − ν) V_k y‖` for a vector `y` of length `dim`.
    pub fn residual_norm(&self, y: &nalgebra::DVector<T>) -> f64 {
        let rows = self.h.nrows() - self.dim;
        if rows == 0 {
            return 0.0;
        }
        let tail = self.h.view((self.dim, 0), (rows, self.dim));
        (tail * y).norm()
    }
}

/// Runs block Arnoldi for `dim` steps (clamped to `n`) with block size `block`.
///
/// `op` applies the operator, `metric` (when given) applies the Gram matrix of the
/// inner product `⟨x, y⟩ = (G x)* y`.
pub fn block_arnoldi<T, F, G>(
    n: usize,
    dim: usize,
    block: usize,
    seed: u64,
    mut op: F,
    metric: Option<G>,
) -> Result<BlockArnoldi<T>>
where
    T: ComplexField<RealField = f64> + Copy,
    F: FnMut(&[T]) -> Result<Vec<T>>,
    G: Fn(&[T]) -> Vec<T>,
{
    if n == 0 || block == 0 {
        return Err(Error::Argument("empty Krylov problem".into()));
    }
    let dim = dim.min(n);
    let block = block.min(dim);
    let total = (dim + block).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DMatrix::<T>::zeros(n, total);
    let mut gv = DMatrix::<T>::zeros(n, total);
    let mut h = DMatrix::<T>::zeros(total, dim);

    let apply_metric = |x: &[T]| -> Vec<T> {
        match &metric {
            Some(g) => g(x),
            None => x.to_vec(),
        }
    };
    let dot = |gx: &[T], y: &[T]| -> T {
        gx.iter()
            .zip(y)
            .fold(T::zero(), |s, (a, b)| s + a.conjugate() * *b)
    };

    // Orthogonalizes `w` against columns 0..upto (twice) and returns the coefficients.
    let orthogonalize = |w: &mut [T], v: &DMatrix<T>, gv: &DMatrix<T>, upto: usize| -> Vec<T> {
        let mut coeffs = vec![T::zero(); upto];
        for _ in 0..2 {
            for k in 0..upto {
                let c = dot(gv.column(k).as_slice(), w);
                coeffs[k] += c;
                for (wi, vi) in w.iter_mut().zip(v.column(k).iter()) {
                    *wi -= c * *vi;
                }
            }
        }
        coeffs
    };

    let fill = |col: usize,
                    mut w: Vec<T>,
                    v: &mut DMatrix<T>,
                    gv: &mut DMatrix<T>,
                    rng: &mut ChaCha8Rng|
     -> T {
        let before = dot(&apply_metric(&w), &w).modulus().sqrt();
        orthogonalize(&mut w, v, gv, col);
        let mut gw = apply_metric(&w);
        let mut nrm = dot(&gw, &w).modulus().sqrt();
        let mut coeff = T::from_real(nrm);
        if !(nrm > 1e-10 * before.max(1e-300)) {
            // breakdown or deflation: continue with a fresh random direction
            loop {
                w = (0..n).map(|_| T::from_real(rng.gen_range(-1.0..1.0))).collect();
                orthogonalize(&mut w, v, gv, col);
                gw = apply_metric(&w);
                nrm = dot(&gw, &w).modulus().sqrt();
                if nrm > 1e-8 {
                    break;
                }
            }
            coeff = T::zero();
        }
        let inv = T::from_real(1.0 / nrm);
        for i in 0..n {
            v[(i, col)] = w[i] * inv;
            gv[(i, col)] = gw[i] * inv;
        }
        coeff
    };

    for c in 0..block {
        let w: Vec<T> = (0..n).map(|_| T::from_real(rng.gen_range(-1.0..1.0))).collect();
        fill(c, w, &mut v, &mut gv, &mut rng);
    }

    let mut start = 0;
    while start < dim {
        let end = (start + block).min(dim);
        let filled = (end + block).min(total);
        let mut images: Vec<Vec<T>> = Vec::with_capacity(end - start);
        for c in start..end {
            let w = op(v.column(c).as_slice())?;
            if w.iter().any(|x| !x.modulus().is_finite()) {
                return Err(Error::Numerical("non-finite Krylov vector".into()));
            }
            images.push(w);
        }
        for (offset, mut w) in images.into_iter().enumerate() {
            let c = start + offset;
            let target = end + offset;
            let coeffs = orthogonalize(&mut w, &v, &gv, target.min(filled));
            for (k, cf) in coeffs.into_iter().enumerate() {
                h[(k, c)] = cf;
            }
            if target < filled {
                let nrm = fill(target, w, &mut v, &mut gv, &mut rng);
                h[(target, c)] = nrm;
            }
        }
        start = end;
    }
    Ok(BlockArnoldi { basis: v, h, dim })
}
