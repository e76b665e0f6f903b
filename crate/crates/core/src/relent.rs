//! Relative entropy `S(rho | sigma(w))` between a reduced density matrix and the
//! Gibbs state of a ramped subsystem ansatz `H(w) = sum_alpha w_alpha h_alpha`,
//! with its gradient and Kubo-Mori Hessian in the couplings.
//!
//! `S` is evaluated as `Tr(rho log rho) + sum_alpha w_alpha M_alpha + log Z(w)` with
//! `M_alpha = Tr(rho h_alpha)`, so `log sigma` is never formed.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::lattice::{Geometry, LatticeError, Ramp, TermLocation};
use crate::operators::OperatorBasis;
use crate::scalar::{modulus, Cplx, Real};
use crate::spectra::operator::check_support;
use crate::spectra::{
    ramped_group_terms, reduced_density_matrix, BlockedOperator, ConfigSpace, DenseBlock, DensityMatrix,
    EigenSystem, GibbsState, LocalTerm, Sector, SpectraError, StateVector, Support, DENSE_CAPACITY,
};

/// Divided differences closer than this use the diagonal limit.
pub const DEGENERACY_GAP: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum RelEntError {
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error("{expected} couplings expected, got {got}")]
    GroupCount { expected: usize, got: usize },
    #[error("density matrix does not fit the ansatz block structure: {0}")]
    StructuralMismatch(String),
}

impl From<LatticeError> for RelEntError {
    fn from(e: LatticeError) -> Self {
        RelEntError::Spectra(e.into())
    }
}

/// Sufficient statistics of the data: `M_alpha = Tr(rho h_alpha)` and `Tr(rho log rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMoments<T: Real> {
    pub moments: DVector<T>,
    pub neg_entropy: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

#[derive(Debug, Clone)]
pub struct RelEntReport<T: Real> {
    pub value: T,
    /// `M_alpha - <h_alpha>_sigma`; empty for value-only evaluations.
    pub gradient: DVector<T>,
    pub hessian: Option<DMatrix<T>>,
    pub log_z: T,
    /// `<h_alpha>_sigma`; empty for value-only evaluations.
    pub thermal: DVector<T>,
}

/// Ramped group operators `h_alpha` restricted to subsystem A, stored as dense blocks.
#[derive(Debug, Clone)]
pub struct SubsystemModel<T: Real> {
    space: ConfigSpace,
    blocked: bool,
    sectors: Vec<(Sector, Vec<u64>)>,
    /// `[group][block]`
    groups: Vec<Vec<DMatrix<Cplx<T>>>>,
    /// Local terms of each group, in site labels shared by the full lattice.
    terms: Vec<Vec<LocalTerm<T>>>,
    full_space: ConfigSpace,
}

impl<T: Real> SubsystemModel<T> {
    /// Model with the positional weights of `ramp` (BW or CFT).
    pub fn new(geometry: &Geometry, basis: &OperatorBasis, ramp: Ramp) -> Result<Self, RelEntError> {
        check_support(ramp, Support::SubsystemA)?;
        Self::with_weights(geometry, basis, &|loc| geometry.ramp_weight(loc, ramp))
    }

    /// Model with an arbitrary positional weight per term location.
    pub fn with_weights(
        geometry: &Geometry,
        basis: &OperatorBasis,
        weight_of: &dyn Fn(TermLocation) -> Result<f64, LatticeError>,
    ) -> Result<Self, RelEntError> {
        if basis.spin() != geometry.spin() {
            return Err(SpectraError::DimensionMismatch(format!(
                "basis spin {} on a spin-{} lattice",
                basis.spin(),
                geometry.spin()
            ))
            .into());
        }
        let space = ConfigSpace::new(geometry.spin(), geometry.n_sites_a());
        let blocked = basis.conserves_sz();
        let terms: Vec<Vec<LocalTerm<T>>> = (0..basis.group_count())
            .map(|g| ramped_group_terms(geometry, basis, g, Support::SubsystemA, weight_of))
            .collect::<Result<_, _>>()?;
        let operators: Vec<BlockedOperator<T>> = terms
            .par_iter()
            .map(|t| BlockedOperator::assemble(space, blocked, t))
            .collect();
        let sectors: Vec<(Sector, Vec<u64>)> = operators[0]
            .blocks()
            .iter()
            .map(|b| (b.sector(), b.basis.configs.clone()))
            .collect();
        if let Some((_, c)) = sectors.iter().find(|(_, c)| c.len() > DENSE_CAPACITY) {
            return Err(SpectraError::Capacity {
                dim: c.len(),
                cutoff: DENSE_CAPACITY,
            }
            .into());
        }
        let groups = operators
            .iter()
            .map(|op| op.blocks().iter().map(|b| b.matrix.to_dense()).collect())
            .collect();
        Ok(SubsystemModel {
            space,
            blocked,
            sectors,
            groups,
            terms,
            full_space: ConfigSpace::new(geometry.spin(), geometry.n_sites()),
        })
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn space(&self) -> ConfigSpace {
        self.space
    }

    pub fn sectors(&self) -> &[(Sector, Vec<u64>)] {
        &self.sectors
    }

    /// Dense block `b` of `h_alpha`.
    pub fn group_block(&self, alpha: usize, b: usize) -> &DMatrix<Cplx<T>> {
        &self.groups[alpha][b]
    }

    fn check_len(&self, w: &[T]) -> Result<(), RelEntError> {
        if w.len() == self.group_count() {
            Ok(())
        } else {
            Err(RelEntError::GroupCount {
                expected: self.group_count(),
                got: w.len(),
            })
        }
    }

    /// Dense blocks of `H(w) = sum_alpha w_alpha h_alpha`.
    pub fn hamiltonian_blocks(&self, w: &[T]) -> Result<Vec<DenseBlock<T>>, RelEntError> {
        self.check_len(w)?;
        Ok(self
            .sectors
            .iter()
            .enumerate()
            .map(|(b, (sector, configs))| {
                let n = configs.len();
                let mut m = DMatrix::zeros(n, n);
                for (alpha, &wa) in w.iter().enumerate() {
                    if wa != T::zero() {
                        m += &self.groups[alpha][b] * Cplx::new(wa, T::zero());
                    }
                }
                DenseBlock {
                    sector: *sector,
                    configs: configs.clone(),
                    matrix: m,
                }
            })
            .collect())
    }

    pub fn gibbs(&self, w: &[T]) -> Result<GibbsState<T>, RelEntError> {
        let eig = EigenSystem::new(self.space, self.hamiltonian_blocks(w)?)?;
        Ok(GibbsState::from_eigensystem(eig))
    }

    /// Moments from a reduced density matrix on A.
    pub fn moments_from_density(&self, rho: &DensityMatrix<T>) -> Result<DataMoments<T>, RelEntError> {
        if rho.space() != self.space {
            return Err(RelEntError::StructuralMismatch(format!(
                "density matrix on {} sites, subsystem has {}",
                rho.space().n_sites,
                self.space.n_sites
            )));
        }
        self.check_structure(rho)?;
        let restricted: Vec<DMatrix<Cplx<T>>> = self.sectors.iter().map(|(_, c)| rho.restrict(c)).collect();
        let moments = DVector::from_iterator(
            self.group_count(),
            self.groups.iter().map(|blocks| {
                blocks
                    .iter()
                    .zip(&restricted)
                    .map(|(h, r)| trace_product(r, h))
                    .fold(T::zero(), |a, b| a + b)
            }),
        );
        Ok(DataMoments {
            moments,
            neg_entropy: rho.neg_entropy(),
        })
    }

    /// Moments as expectation values in the full-lattice state; the entropy term
    /// still needs the reduced density matrix.
    pub fn moments_from_state(&self, geometry: &Geometry, state: &StateVector<T>) -> Result<DataMoments<T>, RelEntError> {
        if state.space() != self.full_space {
            return Err(RelEntError::StructuralMismatch("state does not live on the model lattice".into()));
        }
        let blocked = self.blocked && state.sector() != Sector::Full;
        let moments = self
            .terms
            .par_iter()
            .map(|t| {
                let op = BlockedOperator::assemble(self.full_space, blocked, t);
                state.expectation(&op)
            })
            .collect::<Result<Vec<T>, _>>()?;
        let rho = reduced_density_matrix(state, geometry.bipartition())?;
        Ok(DataMoments {
            moments: DVector::from_vec(moments),
            neg_entropy: rho.neg_entropy(),
        })
    }

    /// Every nonzero element of `rho` must couple configurations of one ansatz block.
    fn check_structure(&self, rho: &DensityMatrix<T>) -> Result<(), RelEntError> {
        if !self.blocked {
            return Ok(());
        }
        let tiny = T::of(1e-14);
        for blk in rho.blocks() {
            let m2: Vec<i32> = blk.configs.iter().map(|&c| self.space.magnetization(c)).collect();
            for i in 0..blk.configs.len() {
                for j in 0..blk.configs.len() {
                    if m2[i] != m2[j] && modulus(blk.matrix[(i, j)]) > tiny {
                        return Err(RelEntError::StructuralMismatch(format!(
                            "coherence between 2Sz = {} and 2Sz = {}",
                            m2[i], m2[j]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `S`, and on request its gradient and Hessian, at couplings `w`.
    pub fn evaluate(&self, data: &DataMoments<T>, w: &[T], order: Order) -> Result<RelEntReport<T>, RelEntError> {
        self.check_len(w)?;
        self.check_len(data.moments.as_slice())?;
        let gibbs = self.gibbs(w)?;
        let energy = w
            .iter()
            .zip(data.moments.iter())
            .fold(T::zero(), |acc, (&wa, &m)| acc + wa * m);
        let value = data.neg_entropy + energy + gibbs.log_z;
        if order == Order::Value {
            return Ok(RelEntReport {
                value,
                gradient: DVector::zeros(0),
                hessian: None,
                log_z: gibbs.log_z,
                thermal: DVector::zeros(0),
            });
        }
        let k = self.group_count();
        let with_hessian = order == Order::Hessian;
        // per-block contributions, reduced in block order
        let parts: Vec<(DVector<T>, Option<DMatrix<T>>)> = gibbs
            .eigensystem
            .blocks
            .par_iter()
            .zip(gibbs.populations.par_iter())
            .enumerate()
            .map(|(b, (eb, p))| {
                let rotated: Vec<DMatrix<Cplx<T>>> = (0..k).map(|a| eb.rotate(&self.groups[a][b])).collect();
                let mean = DVector::from_iterator(
                    k,
                    rotated.iter().map(|a| {
                        (0..p.len()).fold(T::zero(), |acc, i| acc + p[i] * a[(i, i)].re)
                    }),
                );
                let second = with_hessian.then(|| {
                    let phi = divided_differences(&eb.eigenvalues, p);
                    let weighted: Vec<DMatrix<Cplx<T>>> = rotated
                        .iter()
                        .map(|a| a.zip_map(&phi, |z, f| z * Cplx::new(f, T::zero())))
                        .collect();
                    let mut xi = DMatrix::zeros(k, k);
                    for a in 0..k {
                        for c in a..k {
                            let v = weighted[a]
                                .iter()
                                .zip(rotated[c].iter())
                                .fold(T::zero(), |acc, (x, y)| acc + (x * y.conj()).re);
                            xi[(a, c)] = v;
                            xi[(c, a)] = v;
                        }
                    }
                    xi
                });
                (mean, second)
            })
            .collect();

        let mut thermal = DVector::zeros(k);
        let mut second = with_hessian.then(|| DMatrix::zeros(k, k));
        for (mean, xi) in parts {
            thermal += mean;
            if let (Some(acc), Some(xi)) = (second.as_mut(), xi) {
                *acc += xi;
            }
        }
        let hessian = second.map(|s| s - &thermal * thermal.transpose());
        Ok(RelEntReport {
            value,
            gradient: &data.moments - &thermal,
            hessian,
            log_z: gibbs.log_z,
            thermal,
        })
    }

    pub fn relative_entropy(&self, data: &DataMoments<T>, w: &[T]) -> Result<T, RelEntError> {
        Ok(self.evaluate(data, w, Order::Value)?.value)
    }

    pub fn gradient(&self, data: &DataMoments<T>, w: &[T]) -> Result<DVector<T>, RelEntError> {
        Ok(self.evaluate(data, w, Order::Gradient)?.gradient)
    }

    pub fn hessian(&self, data: &DataMoments<T>, w: &[T]) -> Result<DMatrix<T>, RelEntError> {
        Ok(self
            .evaluate(data, w, Order::Hessian)?
            .hessian
            .expect("requested"))
    }
}

/// Moments of a state for the given ansatz, computed once before optimization.
pub fn data_moments<T: Real>(
    state: &StateVector<T>,
    basis: &OperatorBasis,
    geometry: &Geometry,
    ramp: Ramp,
) -> Result<DataMoments<T>, RelEntError> {
    let model = SubsystemModel::new(geometry, basis, ramp)?;
    model.moments_from_state(geometry, state)
}

/// `Re Tr(A B)` for Hermitian blocks.
fn trace_product<T: Real>(a: &DMatrix<Cplx<T>>, b: &DMatrix<Cplx<T>>) -> T {
    // Tr(AB) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij)
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (x, y)| acc + (x * y.conj()).re)
}

/// `phi_ij = (p_i - p_j) / (lambda_j - lambda_i)`, or `p_i` on near-degenerate pairs.
fn divided_differences<T: Real>(lambda: &DVector<T>, p: &DVector<T>) -> DMatrix<T> {
    let n = lambda.len();
    let gap = T::of(DEGENERACY_GAP);
    DMatrix::from_fn(n, n, |i, j| {
        let d = lambda[j] - lambda[i];
        if d.abs() < gap {
            p[i]
        } else {
            (p[i] - p[j]) / d
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Spin;
    use crate::spectra::{build_operator, ground_state, GroundStateOptions};
    use nalgebra::SymmetricEigen;

    fn xxz_ground(l: usize, spin: Spin, delta: f64) -> (Geometry, StateVector<f64>) {
        let g = Geometry::chain(l, spin).unwrap();
        let basis = OperatorBasis::u1(spin);
        let h = build_operator(&g, &basis, &[1.0, delta], Ramp::Uniform, Support::FullLattice).unwrap();
        let gs = ground_state(&h, &GroundStateOptions::default()).unwrap();
        (g, gs.state)
    }

    /// `Tr(rho log rho) - Tr(rho log sigma)` with dense matrix logarithms.
    fn dense_relative_entropy(rho: &DMatrix<Cplx<f64>>, sigma: &DMatrix<Cplx<f64>>) -> f64 {
        let log = |m: &DMatrix<Cplx<f64>>| {
            let e = SymmetricEigen::new(m.clone());
            let d = e.eigenvalues.map(|x| Cplx::new(x.max(1e-300).ln(), 0.0));
            &e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.adjoint()
        };
        (rho * (log(rho) - log(sigma))).trace().re
    }

    #[test]
    fn singlet_pair_entropy_and_product_state() {
        let g = Geometry::chain(4, Spin::Half).unwrap();
        let space = ConfigSpace::new(Spin::Half, 4);
        let basis = OperatorBasis::u1(Spin::Half);
        // up x singlet(1,2) x up: A = {0, 1} holds half of the singlet
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut full = DVector::zeros(16);
        full[0b0010] = Cplx::new(s, 0.0);
        full[0b0100] = Cplx::new(-s, 0.0);
        let singlet = StateVector::from_full(space, &full).unwrap();
        let m = data_moments(&singlet, &basis, &g, Ramp::Bw).unwrap();
        assert!((m.neg_entropy + std::f64::consts::LN_2).abs() < 1e-12);

        let up = StateVector::<f64>::product(space, 0);
        let m = data_moments(&up, &basis, &g, Ramp::Bw).unwrap();
        assert!(m.neg_entropy.abs() < 1e-14);
        // all up: <zz> = 1/4 on the single A bond, which has weight 1
        assert!((m.moments[1] - 0.25).abs() < 1e-14);
        assert!(m.moments[0].abs() < 1e-14);
    }

    #[test]
    fn moment_routes_agree() {
        for (l, spin, basis) in [
            (8, Spin::Half, OperatorBasis::full(Spin::Half)),
            (8, Spin::Half, OperatorBasis::u1(Spin::Half)),
            (6, Spin::One, OperatorBasis::u1(Spin::One)),
        ] {
            let (g, psi) = xxz_ground(l, spin, 0.7);
            let model = SubsystemModel::<f64>::new(&g, &basis, Ramp::Bw).unwrap();
            let a = model.moments_from_state(&g, &psi).unwrap();
            let rho = reduced_density_matrix(&psi, g.bipartition()).unwrap();
            let b = model.moments_from_density(&rho).unwrap();
            assert!((&a.moments - &b.moments).amax() < 1e-10);
            assert_eq!(a.neg_entropy, b.neg_entropy);
        }
    }

    #[test]
    fn value_matches_dense_logarithm_oracle() {
        let (g, psi) = xxz_ground(6, Spin::Half, 1.0);
        let basis = OperatorBasis::full(Spin::Half);
        let model = SubsystemModel::<f64>::new(&g, &basis, Ramp::Bw).unwrap();
        let data = model.moments_from_state(&g, &psi).unwrap();
        let rho = reduced_density_matrix(&psi, g.bipartition()).unwrap().to_dense_full();
        let w = [3.0, 0.1, -0.2, 0.3, 2.5, 0.0, 0.4, 0.0, 4.5, 0.2, -0.1, 0.05];
        let s = model.relative_entropy(&data, &w).unwrap();
        let sigma = model.gibbs(&w).unwrap().density_matrix().to_dense_full();
        let oracle = dense_relative_entropy(&rho, &sigma);
        assert!((s - oracle).abs() < 1e-9, "{s} vs {oracle}");
        assert!(s > 0.0);
    }

    #[test]
    fn exact_entanglement_hamiltonian_gives_zero() {
        let g = Geometry::chain(8, Spin::Half).unwrap();
        let basis = OperatorBasis::u1(Spin::Half);
        let model = SubsystemModel::<f64>::new(&g, &basis, Ramp::Bw).unwrap();
        let w = [3.7, 4.1];
        let rho = model.gibbs(&w).unwrap().density_matrix();
        let data = model.moments_from_density(&rho).unwrap();
        let r = model.evaluate(&data, &w, Order::Gradient).unwrap();
        assert!(r.value.abs() < 1e-10, "{}", r.value);
        assert!(r.gradient.amax() < 1e-10);
    }

    #[test]
    fn zero_couplings_give_moments_as_gradient() {
        let (g, psi) = xxz_ground(8, Spin::Half, 1.0);
        let basis = OperatorBasis::full(Spin::Half);
        let model = SubsystemModel::<f64>::new(&g, &basis, Ramp::Bw).unwrap();
        let data = model.moments_from_state(&g, &psi).unwrap();
        let r = model.evaluate(&data, &[0.0; 12], Order::Gradient).unwrap();
        assert!((&r.gradient - &data.moments).amax() < 1e-12);
        // log Z(0) = |A| ln 2
        assert!((r.log_z - 4.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn commuting_field_variance() {
        // A = {0, 1} with site weights 2 and 1: H = w (2 S^z_0 + S^z_1)
        let g = Geometry::chain(4, Spin::Half).unwrap();
        let basis = OperatorBasis::full(Spin::Half);
        let model = SubsystemModel::<f64>::new(&g, &basis, Ramp::Bw).unwrap();
        let z = basis.group_index("z").unwrap();
        let data = DataMoments {
            moments: DVector::zeros(12),
            neg_entropy: 0.0,
        };
        let xi = model.hessian(&data, &[0.0; 12]).unwrap();
        assert!((xi[(z, z)] - 1.25).abs() < 1e-14);
        let mut w = [0.0; 12];
        w[z] = 1.3;
        let xi = model.hessian(&data, &w).unwrap();
        let sech2 = |x: f64| 1.0 / (x.cosh() * x.cosh());
        let exact = sech2(1.3) + 0.25 * sech2(0.65);
        assert!((xi[(z, z)] - exact).abs() < 1e-13);
    }

    #[test]
    fn coherent_density_matrix_is_a_structural_mismatch() {
        let g = Geometry::chain(4, Spin::Half).unwrap();
        let basis = OperatorBasis::u1(Spin::Half);
        let model = SubsystemModel::<f64>::new(&g, &basis, Ramp::Bw).unwrap();
        let space = model.space();
        // |+>|+> on A: coherences across magnetizations
        let m = DMatrix::from_element(4, 4, Cplx::new(0.25, 0.0));
        let rho = DensityMatrix::new(
            space,
            vec![crate::spectra::DensityBlock {
                sector: Sector::Full,
                configs: vec![0, 1, 2, 3],
                matrix: m,
            }],
        )
        .unwrap();
        assert!(matches!(model.moments_from_density(&rho), Err(RelEntError::StructuralMismatch(_))));
        assert!(matches!(
            model.relative_entropy(&DataMoments { moments: DVector::zeros(3), neg_entropy: 0.0 }, &[1.0, 1.0]),
            Err(RelEntError::GroupCount { .. })
        ));
    }

    #[test]
    fn uniform_ramp_is_rejected() {
        let g = Geometry::chain(4, Spin::Half).unwrap();
        let r = SubsystemModel::<f64>::new(&g, &OperatorBasis::u1(Spin::Half), Ramp::Uniform);
        assert!(r.is_err());
    }
}
