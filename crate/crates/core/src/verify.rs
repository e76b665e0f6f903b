//! Finite-difference and spectral checks of the relative-entropy derivatives.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::relent::{DataMoments, Order, RelEntError, SubsystemModel};

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Central difference with one Richardson extrapolation: `(4 D(h/2) - D(h)) / 3`.
pub fn richardson<E>(f: impl Fn(&[f64]) -> Result<f64, E>, w: &[f64], i: usize, h: f64) -> Result<f64, E> {
    let d = |h: f64| -> Result<f64, E> {
        let mut p = w.to_vec();
        let mut m = w.to_vec();
        p[i] += h;
        m[i] -= h;
        Ok((f(&p)? - f(&m)?) / (2.0 * h))
    };
    Ok((4.0 * d(h / 2.0)? - d(h)?) / 3.0)
}

/// `||a - b||_inf / max(||b||_inf, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = b.iter().fold(floor, |m, y| m.max(y.abs()));
    diff / scale
}

#[derive(Debug, Clone)]
pub struct DerivativeCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub relative_error: f64,
}

/// Analytic gradient against finite differences of the value.
pub fn check_gradient(
    model: &SubsystemModel<f64>,
    data: &DataMoments<f64>,
    w: &[f64],
    h: f64,
) -> Result<DerivativeCheck, RelEntError> {
    let analytic: Vec<f64> = model.gradient(data, w)?.iter().copied().collect();
    let f = |x: &[f64]| model.relative_entropy(data, x);
    let numeric = (0..w.len())
        .map(|i| richardson(f, w, i, h))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DerivativeCheck {
        relative_error: relative_error(&numeric, &analytic, 1e-6),
        analytic,
        numeric,
    })
}

/// Kubo-Mori Hessian against the finite-difference Jacobian of the gradient,
/// compared entrywise (row-major).
pub fn check_hessian(
    model: &SubsystemModel<f64>,
    data: &DataMoments<f64>,
    w: &[f64],
    h: f64,
) -> Result<DerivativeCheck, RelEntError> {
    let k = w.len();
    let xi = model.hessian(data, w)?;
    let mut jac = DMatrix::zeros(k, k);
    for j in 0..k {
        for i in 0..k {
            let gi = |x: &[f64]| model.gradient(data, x).map(|g| g[i]);
            jac[(i, j)] = richardson(gi, w, j, h)?;
        }
    }
    let analytic: Vec<f64> = xi.transpose().iter().copied().collect();
    let numeric: Vec<f64> = jac.transpose().iter().copied().collect();
    Ok(DerivativeCheck {
        relative_error: relative_error(&numeric, &analytic, 1e-6),
        analytic,
        numeric,
    })
}

/// Smallest Hessian eigenvalue divided by the Hessian's spectral norm
/// (non-negative for a PSD matrix).
pub fn psd_margin(xi: &DMatrix<f64>) -> f64 {
    let e = SymmetricEigen::new(xi.clone()).eigenvalues;
    let norm = e.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if norm == 0.0 {
        return 0.0;
    }
    e.iter().fold(f64::INFINITY, |m, &x| m.min(x)) / norm
}

pub const CONVEXITY_POINTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Largest violation `S(t w1 + (1-t) w2) - t S(w1) - (1-t) S(w2)` over `CONVEXITY_POINTS`.
pub fn convexity_violation(
    model: &SubsystemModel<f64>,
    data: &DataMoments<f64>,
    w1: &[f64],
    w2: &[f64],
) -> Result<f64, RelEntError> {
    let s1 = model.relative_entropy(data, w1)?;
    let s2 = model.relative_entropy(data, w2)?;
    let mut worst = f64::NEG_INFINITY;
    for t in CONVEXITY_POINTS {
        let w: Vec<f64> = w1.iter().zip(w2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let s = model.relative_entropy(data, &w)?;
        worst = worst.max(s - t * s1 - (1.0 - t) * s2);
    }
    Ok(worst)
}

/// Largest distance between sorted eigenvalues of the data density matrix
/// (`rho_spectrum`, descending) and of `sigma(w)`.
pub fn spectral_distance(
    model: &SubsystemModel<f64>,
    rho_spectrum: &[f64],
    w: &[f64],
) -> Result<f64, RelEntError> {
    let sigma = model.gibbs(w)?;
    let mut s: Vec<f64> = sigma.populations.iter().flat_map(|p| p.iter().copied()).collect();
    s.sort_by(|a, b| b.partial_cmp(a).expect("finite populations"));
    Ok(s.iter()
        .zip(rho_spectrum)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}

pub fn gradient_norm(model: &SubsystemModel<f64>, data: &DataMoments<f64>, w: &[f64]) -> Result<f64, RelEntError> {
    Ok(model.evaluate(data, w, Order::Gradient)?.gradient.norm())
}
