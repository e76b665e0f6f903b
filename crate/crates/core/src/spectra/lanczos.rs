//! Restarted Lanczos with full reorthogonalization for the lowest eigenpair of a
//! Hermitian operator given only through its action on vectors.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SpectraError;
use crate::scalar::{Cplx, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Krylov dimension per restart cycle.
    pub max_iter: usize,
    /// Relative residual target `||Hx - theta x|| <= tol * max(1, |theta|)`.
    pub tol: f64,
    pub restarts: usize,
    /// Seed of the deterministic start vector.
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            max_iter: 200,
            tol: 1e-10,
            restarts: 20,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LanczosResult<T: Real> {
    pub value: T,
    pub vector: DVector<Cplx<T>>,
    pub residual: T,
    pub iterations: usize,
}

fn project_out<T: Real>(v: &mut DVector<Cplx<T>>, against: &[DVector<Cplx<T>>]) {
    for u in against {
        let overlap = u.dotc(v);
        v.axpy(-overlap, u, Cplx::new(T::one(), T::zero()));
    }
}

fn normalize<T: Real>(v: &mut DVector<Cplx<T>>) -> T {
    let n = v.norm();
    if n > T::zero() {
        v.unscale_mut(n);
    }
    n
}

/// Lowest eigenpair of `apply` on a `dim`-dimensional space, restricted to the
/// orthogonal complement of `deflate` (which must be orthonormal).
pub fn lanczos_lowest<T: Real>(
    dim: usize,
    apply: &dyn Fn(&DVector<Cplx<T>>, &mut DVector<Cplx<T>>),
    deflate: &[DVector<Cplx<T>>],
    opts: &LanczosOptions,
) -> Result<LanczosResult<T>, SpectraError> {
    if deflate.len() >= dim {
        return Err(SpectraError::DimensionMismatch(format!(
            "cannot deflate {} vectors from a {dim}-dimensional space",
            deflate.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start = DVector::from_fn(dim, |_, _| Cplx::new(T::of(rng.random_range(-1.0..1.0)), T::zero()));
    project_out(&mut start, deflate);
    normalize(&mut start);

    let tol = T::of(opts.tol);
    let krylov_cap = opts.max_iter.min(dim - deflate.len()).max(1);
    let mut total_iter = 0;
    let mut best: Option<LanczosResult<T>> = None;

    for _ in 0..=opts.restarts {
        let mut basis: Vec<DVector<Cplx<T>>> = vec![start.clone()];
        let mut alphas: Vec<T> = Vec::new();
        let mut betas: Vec<T> = Vec::new();
        let mut w = DVector::zeros(dim);
        let mut ritz = (T::zero(), DVector::<T>::zeros(1));

        for k in 0..krylov_cap {
            apply(&basis[k], &mut w);
            total_iter += 1;
            let alpha = basis[k].dotc(&w).re;
            alphas.push(alpha);
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                project_out(&mut w, &basis);
                project_out(&mut w, deflate);
            }
            let beta = w.norm();

            let m = alphas.len();
            let t = DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    alphas[i]
                } else if i + 1 == j {
                    betas[i]
                } else if j + 1 == i {
                    betas[j]
                } else {
                    T::zero()
                }
            });
            let eig = SymmetricEigen::new(t);
            let (imin, &theta) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite Ritz values"))
                .expect("non-empty tridiagonal");
            let s = eig.eigenvectors.column(imin).into_owned();
            let estimate = beta * s[m - 1].abs();
            ritz = (theta, s);

            let breakdown = beta <= T::eps() * T::of(100.0) * (T::one() + theta.abs());
            if breakdown || estimate <= tol * T::one().max(theta.abs()) * T::of(0.1) || k + 1 == krylov_cap {
                break;
            }
            betas.push(beta);
            basis.push(w.unscale(beta));
        }

        let (_, s) = ritz;
        let mut x = DVector::zeros(dim);
        for (i, v) in basis.iter().enumerate().take(s.len()) {
            x.axpy(Cplx::new(s[i], T::zero()), v, Cplx::new(T::one(), T::zero()));
        }
        project_out(&mut x, deflate);
        normalize(&mut x);
        apply(&x, &mut w);
        let value = x.dotc(&w).re;
        let residual = (&w - &x * Cplx::new(value, T::zero())).norm();
        let result = LanczosResult {
            value,
            vector: x.clone(),
            residual,
            iterations: total_iter,
        };
        let done = residual <= tol * T::one().max(value.abs());
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(result);
        }
        if done {
            return Ok(best.expect("just stored"));
        }
        start = x;
    }

    let b = best.expect("at least one cycle ran");
    Err(SpectraError::NonConvergence {
        residual: b.residual.as_f64(),
        iterations: b.iterations,
    })
}
