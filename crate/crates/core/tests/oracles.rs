mod common;

use bwsearch::lattice::{Geometry, Ramp, Spin};
use bwsearch::operators::OperatorBasis;
use bwsearch::relent::SubsystemModel;
use bwsearch::spectra::{
    build_operator, ground_state, reduced_density_matrix, ConfigSpace, GroundStateOptions, StateVector, Support,
};
use bwsearch::{BasisKind, Family, ModelSpec, Problem};
use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64 as C;
use proptest::prelude::*;

fn xxz_state(l: usize, spin: Spin, delta: f64) -> (Geometry, StateVector<f64>) {
    let g = Geometry::chain(l, spin).unwrap();
    let b = OperatorBasis::u1(spin);
    let h = build_operator(&g, &b, &b.xxz_weights(delta).unwrap(), Ramp::Uniform, Support::FullLattice).unwrap();
    (g.clone(), ground_state(&h, &GroundStateOptions::default()).unwrap().state)
}

#[test]
fn zz_moment_matches_dense_expectation_at_l12() {
    let l = 12;
    let p = Problem::<f64>::new(&ModelSpec::new(Family::XxzHalf, l, 1.0), BasisKind::U1, Ramp::Bw).unwrap();
    let psi = p.input.state.to_full();
    let rho = common::partial_trace(&psi, 1 << (l / 2));
    // bond (r, r+1) inside A carries its distance to the cut, L/2 - 1 - r
    let h = common::bond_sum(1, l / 2, 2, 2, |r| (l / 2 - 1 - r) as f64);
    let oracle = (&rho * &h).trace().re;
    let zz = p.basis.group_index("zz").unwrap();
    assert!((p.data.moments[zz] - oracle).abs() < 1e-10, "{} vs {oracle}", p.data.moments[zz]);

    let hxy = common::bond_sum(1, l / 2, 0, 0, |r| (l / 2 - 1 - r) as f64)
        + common::bond_sum(1, l / 2, 1, 1, |r| (l / 2 - 1 - r) as f64);
    let oracle_xy = (&rho * &hxy).trace().re;
    assert!((p.data.moments[0] - oracle_xy).abs() < 1e-10);
}

#[test]
fn partial_trace_matches_reshape_oracle() {
    for (l, spin, twice) in [(8, Spin::Half, 1usize), (6, Spin::One, 2)] {
        let (g, psi) = xxz_state(l, spin, 0.6);
        let rho = reduced_density_matrix(&psi, g.bipartition()).unwrap();
        let dim_a = (twice + 1).pow((l / 2) as u32);
        let oracle = common::partial_trace(&psi.to_full(), dim_a);
        assert!((rho.to_dense_full() - oracle).camax() < 1e-13);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn cft_ramp_moment_matches_dense_oracle() {
    let l = 8;
    let (g, psi) = xxz_state(l, Spin::Half, 1.0);
    let basis = OperatorBasis::u1(Spin::Half);
    let model = SubsystemModel::<f64>::new(&g, &basis, Ramp::Cft).unwrap();
    let data = model.moments_from_state(&g, &psi).unwrap();
    let rho = common::partial_trace(&psi.to_full(), 16);
    let lf = l as f64;
    // the sine ramp evaluated at the bond's cut distance
    let w = |r: usize| lf / std::f64::consts::PI * (std::f64::consts::PI * (l / 2 - 1 - r) as f64 / lf).sin();
    let h = common::bond_sum(1, l / 2, 2, 2, w);
    assert!((data.moments[1] - (&rho * &h).trace().re).abs() < 1e-12);
}

#[test]
fn spin_one_hamiltonian_matches_kron_oracle() {
    let l = 4;
    let g = Geometry::chain(l, Spin::One).unwrap();
    let basis = OperatorBasis::u1(Spin::One);
    let h = build_operator::<f64>(&g, &basis, &[1.0, 0.5], Ramp::Uniform, Support::FullLattice).unwrap();
    let oracle = common::bond_sum(2, l, 0, 0, |_| 1.0)
        + common::bond_sum(2, l, 1, 1, |_| 1.0)
        + common::bond_sum(2, l, 2, 2, |_| 0.5);
    assert!((h.to_dense_full() - oracle).camax() < 1e-14);
}

fn random_state(space: ConfigSpace, amps: &[(f64, f64)]) -> StateVector<f64> {
    let v = DVector::from_iterator(amps.len(), amps.iter().map(|&(re, im)| C::new(re, im)));
    let n = v.norm();
    StateVector::from_full(space, &v.unscale(n)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn schmidt_spectra_of_both_halves_agree(amps in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64)) {
        let space = ConfigSpace::new(Spin::Half, 6);
        let g = Geometry::chain(6, Spin::Half).unwrap();
        let psi = random_state(space, &amps);
        let rho_a = reduced_density_matrix(&psi, g.bipartition()).unwrap();
        // B's reduced matrix from the transposed reshape
        let full = psi.to_full();
        let m = nalgebra::DMatrix::from_fn(8, 8, |a, b| full[a * 8 + b]);
        let rho_b = m.transpose() * m.conjugate();
        let mut sb: Vec<f64> = SymmetricEigen::new(rho_b).eigenvalues.iter().copied().collect();
        sb.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let sa = rho_a.spectrum();
        for (x, y) in sa.iter().zip(&sb) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!((rho_a.entropy() - rho_a.spectrum().iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn gibbs_state_is_normalized(w in prop::collection::vec(-6.0f64..6.0, 12)) {
        let g = Geometry::chain(8, Spin::Half).unwrap();
        let model = SubsystemModel::<f64>::new(&g, &OperatorBasis::full(Spin::Half), Ramp::Bw).unwrap();
        let sigma = model.gibbs(&w).unwrap();
        prop_assert!((sigma.trace() - 1.0).abs() < 1e-12);
        let dm = sigma.density_matrix();
        prop_assert!((dm.trace() - 1.0).abs() < 1e-12);
        prop_assert!(dm.hermiticity_defect() < 1e-12);
        prop_assert!(dm.spectrum().iter().all(|&p| p > -1e-14));
    }
}
