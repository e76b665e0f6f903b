use nalgebra::{DMatrix, DVector};
use num_traits::Zero;
use rayon::prelude::*;

use super::sector::{ConfigSpace, Sector, SectorBasis};
use super::SpectraError;
use crate::lattice::{Geometry, LatticeError, Ramp, TermLocation};
use crate::operators::{is_zero_matrix, OperatorBasis, SpinAlgebra};
use crate::scalar::{modulus, Cplx, Real};

/// Where a built operator lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// All sites, all bonds.
    FullLattice,
    /// Only terms lying entirely inside subsystem A, acting on A's Hilbert space.
    SubsystemA,
}

/// A weighted local operator on one or two sites, stored sparsely by input state.
#[derive(Debug, Clone)]
pub struct LocalTerm<T: Real> {
    pub sites: Vec<usize>,
    pub location: TermLocation,
    /// Positional weight (ramp) times coupling.
    pub weight: T,
    by_input: Vec<Vec<(usize, Cplx<T>)>>,
}

impl<T: Real> LocalTerm<T> {
    pub fn new(sites: Vec<usize>, location: TermLocation, weight: T, matrix: &DMatrix<Cplx<T>>) -> Self {
        let n = matrix.nrows();
        let by_input = (0..n)
            .map(|col| {
                (0..n)
                    .filter(|&row| !matrix[(row, col)].is_zero())
                    .map(|row| (row, matrix[(row, col)]))
                    .collect()
            })
            .collect();
        LocalTerm {
            sites,
            location,
            weight,
            by_input,
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        LocalTerm {
            weight: self.weight * factor,
            ..self.clone()
        }
    }

    /// Apply to a product configuration, calling `emit(new_config, amplitude)`.
    fn act(&self, space: &ConfigSpace, config: u64, mut emit: impl FnMut(u64, Cplx<T>)) {
        let d = space.local_dim();
        let mut local_in = 0u64;
        let mut base = config;
        for &s in &self.sites {
            let digit = space.digit(config, s);
            local_in = local_in * d + digit;
            base -= digit * space.stride(s);
        }
        for &(out, amp) in &self.by_input[local_in as usize] {
            let mut c = base;
            let mut rest = out as u64;
            for &s in self.sites.iter().rev() {
                c += (rest % d) * space.stride(s);
                rest /= d;
            }
            emit(c, amp * Cplx::new(self.weight, T::zero()));
        }
    }
}

/// Ramp-weighted local terms of a single coupling group. `weight_of` supplies the
/// positional factor for each term location.
pub fn ramped_group_terms<T: Real>(
    geometry: &Geometry,
    basis: &OperatorBasis,
    group: usize,
    support: Support,
    weight_of: &dyn Fn(TermLocation) -> Result<f64, LatticeError>,
) -> Result<Vec<LocalTerm<T>>, SpectraError> {
    let algebra = SpinAlgebra::<T>::new(geometry.spin());
    let in_support = |loc| support == Support::FullLattice || geometry.location_in_a(loc);
    let mut terms = Vec::new();
    for (i, bond) in geometry.bonds().iter().enumerate() {
        let loc = TermLocation::Bond(i);
        if !in_support(loc) {
            continue;
        }
        if let Some(m) = basis.pair_matrix(&algebra, group, bond.kind) {
            if !is_zero_matrix(&m) {
                let w = T::of(weight_of(loc)?);
                terms.push(LocalTerm::new(vec![bond.a, bond.b], loc, w, &m));
            }
        }
    }
    if let Some(m) = basis.site_matrix(&algebra, group) {
        for site in 0..geometry.n_sites() {
            let loc = TermLocation::Site(site);
            if !in_support(loc) {
                continue;
            }
            let w = T::of(weight_of(loc)?);
            terms.push(LocalTerm::new(vec![site], loc, w, &m));
        }
    }
    Ok(terms)
}

pub(crate) fn check_support(ramp: Ramp, support: Support) -> Result<(), SpectraError> {
    match (support, ramp) {
        (Support::FullLattice, Ramp::Uniform) | (Support::SubsystemA, Ramp::Bw | Ramp::Cft) => Ok(()),
        (Support::FullLattice, r) => Err(SpectraError::InvalidSupport(format!(
            "{r} ramp requires the subsystem-A support"
        ))),
        (Support::SubsystemA, r) => Err(SpectraError::InvalidSupport(format!(
            "{r} ramp is not an entanglement-Hamiltonian profile"
        ))),
    }
}

/// Build `sum_alpha w_alpha sum_r ramp(r) O_{alpha,r}` as a sector-blocked sparse operator.
/// Blocks follow magnetization when every group of `basis` conserves `S^z`;
/// otherwise the operator is a single full block.
pub fn build_operator<T: Real>(
    geometry: &Geometry,
    basis: &OperatorBasis,
    weights: &[f64],
    ramp: Ramp,
    support: Support,
) -> Result<BlockedOperator<T>, SpectraError> {
    if weights.len() != basis.group_count() {
        return Err(SpectraError::DimensionMismatch(format!(
            "{} weights for {} coupling groups",
            weights.len(),
            basis.group_count()
        )));
    }
    if basis.spin() != geometry.spin() {
        return Err(SpectraError::DimensionMismatch(format!(
            "basis spin {} on a spin-{} lattice",
            basis.spin(),
            geometry.spin()
        )));
    }
    check_support(ramp, support)?;
    let weight_of = |loc| geometry.ramp_weight(loc, ramp);
    let mut terms = Vec::new();
    for (g, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for t in ramped_group_terms::<T>(geometry, basis, g, support, &weight_of)? {
            terms.push(t.scaled(T::of(w)));
        }
    }
    let n = match support {
        Support::FullLattice => geometry.n_sites(),
        Support::SubsystemA => geometry.n_sites_a(),
    };
    let space = ConfigSpace::new(geometry.spin(), n);
    Ok(BlockedOperator::assemble(space, basis.conserves_sz(), &terms))
}

/// Compressed-row Hermitian matrix.
#[derive(Debug, Clone)]
pub struct SparseHermitian<T: Real> {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Cplx<T>>,
}

impl<T: Real> SparseHermitian<T> {
    fn from_rows(rows: Vec<Vec<(usize, Cplx<T>)>>) -> Self {
        let dim = rows.len();
        let mut indptr = Vec::with_capacity(dim + 1);
        indptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in rows {
            for (j, v) in row {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        SparseHermitian {
            dim,
            indptr,
            indices,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Cplx<T>)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn matvec(&self, x: &DVector<Cplx<T>>, y: &mut DVector<Cplx<T>>) {
        y.as_mut_slice()
            .par_iter_mut()
            .with_min_len(256)
            .enumerate()
            .for_each(|(i, yi)| {
                *yi = self.row(i).fold(Cplx::zero(), |acc, (j, v)| acc + v * x[j]);
            });
    }

    pub fn to_dense(&self) -> DMatrix<Cplx<T>> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().map(|z| modulus(*z)).fold(T::zero(), |a, b| a.max(b))
    }
}

#[derive(Debug, Clone)]
pub struct OperatorBlock<T: Real> {
    pub basis: SectorBasis,
    pub matrix: SparseHermitian<T>,
}

impl<T: Real> OperatorBlock<T> {
    pub fn sector(&self) -> Sector {
        self.basis.sector
    }
}

/// Hermitian operator stored block-diagonally over magnetization sectors.
#[derive(Debug, Clone)]
pub struct BlockedOperator<T: Real> {
    space: ConfigSpace,
    blocks: Vec<OperatorBlock<T>>,
}

impl<T: Real> BlockedOperator<T> {
    /// Assemble from Hermitian local terms. With `blocked`, every term must conserve magnetization.
    pub fn assemble(space: ConfigSpace, blocked: bool, terms: &[LocalTerm<T>]) -> Self {
        let bases = if blocked { space.sectors() } else { vec![space.full()] };
        let blocks = bases
            .into_par_iter()
            .map(|basis| {
                let rows = basis
                    .configs
                    .par_iter()
                    .with_min_len(64)
                    .map(|&c| {
                        let mut row: Vec<(usize, Cplx<T>)> = Vec::new();
                        for t in terms {
                            t.act(&space, c, |c2, amp| {
                                let i = basis
                                    .index_of(c2)
                                    .expect("term leaves its magnetization sector");
                                // column c of H conjugated is row c
                                row.push((i, amp.conj()));
                            });
                        }
                        row.sort_by_key(|&(i, _)| i);
                        let mut merged: Vec<(usize, Cplx<T>)> = Vec::with_capacity(row.len());
                        for (i, v) in row {
                            match merged.last_mut() {
                                Some((j, acc)) if *j == i => *acc += v,
                                _ => merged.push((i, v)),
                            }
                        }
                        merged.retain(|(_, v)| !v.is_zero());
                        merged
                    })
                    .collect();
                OperatorBlock {
                    basis,
                    matrix: SparseHermitian::from_rows(rows),
                }
            })
            .collect();
        BlockedOperator { space, blocks }
    }

    pub fn space(&self) -> ConfigSpace {
        self.space
    }

    pub fn blocks(&self) -> &[OperatorBlock<T>] {
        &self.blocks
    }

    pub fn block(&self, sector: Sector) -> Option<&OperatorBlock<T>> {
        self.blocks.iter().find(|b| b.sector() == sector)
    }

    pub fn is_blocked(&self) -> bool {
        !matches!(self.blocks.first(), Some(b) if b.sector() == Sector::Full)
    }

    /// Dense matrix over the whole space, rows and columns in configuration order.
    pub fn to_dense_full(&self) -> DMatrix<Cplx<T>> {
        let n = self.space.dim() as usize;
        let mut m = DMatrix::zeros(n, n);
        for b in &self.blocks {
            for i in 0..b.basis.dim() {
                for (j, v) in b.matrix.row(i) {
                    m[(b.basis.configs[i] as usize, b.basis.configs[j] as usize)] += v;
                }
            }
        }
        m
    }

    /// Largest matrix entry magnitude over all blocks.
    pub fn max_abs(&self) -> T {
        self.blocks
            .iter()
            .map(|b| b.matrix.max_abs())
            .fold(T::zero(), |a, b| a.max(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Spin;
    use crate::operators::Axis;

    type C = Cplx<f64>;

    /// Dense Kronecker-product construction: an oracle independent of the sparse path.
    fn kron_chain(l: usize, spin: Spin, ops: &[(usize, &DMatrix<C>)]) -> DMatrix<C> {
        let alg = SpinAlgebra::<f64>::new(spin);
        let mut m = DMatrix::<C>::identity(1, 1);
        for site in 0..l {
            let local = ops
                .iter()
                .find(|(s, _)| *s == site)
                .map(|(_, o)| (*o).clone())
                .unwrap_or_else(|| alg.identity());
            m = m.kronecker(&local);
        }
        m
    }

    fn dense_xxz(l: usize, spin: Spin, delta: f64) -> DMatrix<C> {
        let a = SpinAlgebra::<f64>::new(spin);
        let mut h = DMatrix::<C>::zeros(spin.dim().pow(l as u32), spin.dim().pow(l as u32));
        for r in 0..l - 1 {
            for (ax, c) in [(Axis::X, 1.0), (Axis::Y, 1.0), (Axis::Z, delta)] {
                h += kron_chain(l, spin, &[(r, a.axis(ax)), (r + 1, a.axis(ax))]) * C::new(c, 0.0);
            }
        }
        h
    }

    fn max_diff(a: &DMatrix<C>, b: &DMatrix<C>) -> f64 {
        (a - b).iter().map(|z| modulus(*z)).fold(0.0, f64::max)
    }

    #[test]
    fn blocked_build_matches_dense_kron() {
        for (l, spin) in [(4, Spin::Half), (6, Spin::Half), (4, Spin::One)] {
            let g = Geometry::chain(l, spin).unwrap();
            let basis = OperatorBasis::u1(spin);
            let h: BlockedOperator<f64> =
                build_operator(&g, &basis, &[1.0, 0.8], Ramp::Uniform, Support::FullLattice).unwrap();
            assert_eq!(h.blocks().len(), (spin.twice() as usize) * l + 1);
            assert!(max_diff(&h.to_dense_full(), &dense_xxz(l, spin, 0.8)) < 1e-12);
        }
    }

    #[test]
    fn full_basis_with_symmetry_breaking_weight_is_one_block() {
        let g = Geometry::chain(4, Spin::Half).unwrap();
        let basis = OperatorBasis::full(Spin::Half);
        let mut w = basis.xxz_weights(1.0).unwrap();
        w[basis.group_index("xz").unwrap()] = 0.3;
        w[basis.group_index("y").unwrap()] = -0.2;
        let h: BlockedOperator<f64> =
            build_operator(&g, &basis, &w, Ramp::Uniform, Support::FullLattice).unwrap();
        assert_eq!(h.blocks().len(), 1);
        assert_eq!(h.blocks()[0].sector(), Sector::Full);
        let a = SpinAlgebra::<f64>::new(Spin::Half);
        let mut reference = dense_xxz(4, Spin::Half, 1.0);
        for r in 0..3 {
            reference += kron_chain(4, Spin::Half, &[(r, &a.sx), (r + 1, &a.sz)]) * C::new(0.3, 0.0);
        }
        for r in 0..4 {
            reference += kron_chain(4, Spin::Half, &[(r, &a.sy)]) * C::new(-0.2, 0.0);
        }
        let dense = h.to_dense_full();
        assert!(max_diff(&dense, &reference) < 1e-12);
        assert!(max_diff(&dense, &dense.adjoint()) < 1e-15);
    }

    #[test]
    fn subsystem_operator_uses_ramp() {
        let g = Geometry::chain(8, Spin::Half).unwrap();
        let basis = OperatorBasis::u1(Spin::Half);
        let h: BlockedOperator<f64> =
            build_operator(&g, &basis, &[1.0, 1.0], Ramp::Bw, Support::SubsystemA).unwrap();
        assert_eq!(h.space().n_sites, 4);
        let a = SpinAlgebra::<f64>::new(Spin::Half);
        let mut reference = DMatrix::<C>::zeros(16, 16);
        // bonds (1,2), (2,3), (3,4) at weights 3, 2, 1
        for (r, n) in [(0usize, 3.0), (1, 2.0), (2, 1.0)] {
            for ax in Axis::ALL {
                reference += kron_chain(4, Spin::Half, &[(r, a.axis(ax)), (r + 1, a.axis(ax))]) * C::new(n, 0.0);
            }
        }
        assert!(max_diff(&h.to_dense_full(), &reference) < 1e-12);
    }

    #[test]
    fn ramp_support_mismatch_is_rejected() {
        let g = Geometry::chain(8, Spin::Half).unwrap();
        let basis = OperatorBasis::u1(Spin::Half);
        let err = build_operator::<f64>(&g, &basis, &[1.0, 1.0], Ramp::Bw, Support::FullLattice);
        assert!(matches!(err, Err(SpectraError::InvalidSupport(_))));
        let err = build_operator::<f64>(&g, &basis, &[1.0], Ramp::Uniform, Support::FullLattice);
        assert!(matches!(err, Err(SpectraError::DimensionMismatch(_))));
    }
}
