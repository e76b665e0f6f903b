//! Independent dense references: hand-written spin matrices, Kronecker products
//! and reshaped partial traces, sharing no code with the library's operator builders.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;

pub fn spin_ops(twice_s: usize) -> [DMatrix<C>; 3] {
    let z = C::new(0.0, 0.0);
    match twice_s {
        1 => [
            DMatrix::from_row_slice(2, 2, &[z, C::new(0.5, 0.0), C::new(0.5, 0.0), z]),
            DMatrix::from_row_slice(2, 2, &[z, C::new(0.0, -0.5), C::new(0.0, 0.5), z]),
            DMatrix::from_row_slice(2, 2, &[C::new(0.5, 0.0), z, z, C::new(-0.5, 0.0)]),
        ],
        2 => {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            let x = DMatrix::from_row_slice(3, 3, &[z, C::new(r, 0.0), z, C::new(r, 0.0), z, C::new(r, 0.0), z, C::new(r, 0.0), z]);
            let y = DMatrix::from_row_slice(
                3,
                3,
                &[z, C::new(0.0, -r), z, C::new(0.0, r), z, C::new(0.0, -r), z, C::new(0.0, r), z],
            );
            let zz = DMatrix::from_diagonal(&DVector::from_vec(vec![C::new(1.0, 0.0), z, C::new(-1.0, 0.0)]));
            [x, y, zz]
        }
        _ => unreachable!(),
    }
}

/// `op` on `site` (site 0 is the leftmost Kronecker factor) of an `n`-site chain.
pub fn embed(op: &DMatrix<C>, site: usize, n: usize) -> DMatrix<C> {
    let d = op.nrows();
    let mut out = DMatrix::from_element(1, 1, C::new(1.0, 0.0));
    for s in 0..n {
        let f = if s == site { op.clone() } else { DMatrix::identity(d, d) };
        out = out.kronecker(&f);
    }
    out
}

/// `sum_r weight(r) S^a_r S^b_{r+1}` over open-chain bonds `(r, r+1)` with `r + 1 < n`.
pub fn bond_sum(twice_s: usize, n: usize, a: usize, b: usize, weight: impl Fn(usize) -> f64) -> DMatrix<C> {
    let ops = spin_ops(twice_s);
    let d = ops[0].nrows();
    let dim = d.pow(n as u32);
    let mut h = DMatrix::zeros(dim, dim);
    for r in 0..n - 1 {
        h += embed(&ops[a], r, n) * embed(&ops[b], r + 1, n) * C::new(weight(r), 0.0);
    }
    h
}

/// `Tr_B |psi><psi|` by reshaping: configuration `c = a * dim_b + b`.
pub fn partial_trace(psi: &DVector<C>, dim_a: usize) -> DMatrix<C> {
    let dim_b = psi.len() / dim_a;
    let m = DMatrix::from_fn(dim_a, dim_b, |a, b| psi[a * dim_b + b]);
    &m * m.adjoint()
}
