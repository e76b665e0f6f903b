use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::Zero;

use super::operator::BlockedOperator;
use super::sector::{ConfigSpace, Sector};
use super::state::StateVector;
use super::SpectraError;
use crate::lattice::Bipartition;
use crate::scalar::{modulus, Cplx, Real};

/// One Hermitian block of a density matrix, over a sorted list of configurations.
#[derive(Debug, Clone)]
pub struct DensityBlock<T: Real> {
    pub sector: Sector,
    pub configs: Vec<u64>,
    pub matrix: DMatrix<Cplx<T>>,
}

/// Block-diagonal density matrix on a (sub)system.
#[derive(Debug, Clone)]
pub struct DensityMatrix<T: Real> {
    space: ConfigSpace,
    blocks: Vec<DensityBlock<T>>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(space: ConfigSpace, blocks: Vec<DensityBlock<T>>) -> Result<Self, SpectraError> {
        for b in &blocks {
            if b.matrix.nrows() != b.configs.len() || b.matrix.ncols() != b.configs.len() {
                return Err(SpectraError::DimensionMismatch(format!(
                    "block {} has {} configurations but a {}x{} matrix",
                    b.sector,
                    b.configs.len(),
                    b.matrix.nrows(),
                    b.matrix.ncols()
                )));
            }
        }
        Ok(DensityMatrix { space, blocks })
    }

    pub fn space(&self) -> ConfigSpace {
        self.space
    }

    pub fn blocks(&self) -> &[DensityBlock<T>] {
        &self.blocks
    }

    pub fn trace(&self) -> T {
        self.blocks
            .iter()
            .map(|b| b.matrix.trace().re)
            .fold(T::zero(), |a, b| a + b)
    }

    /// Eigenvalues of every block, merged and sorted descending.
    pub fn spectrum(&self) -> Vec<T> {
        let mut all: Vec<T> = self
            .blocks
            .iter()
            .flat_map(|b| SymmetricEigen::new(b.matrix.clone()).eigenvalues.iter().copied().collect::<Vec<_>>())
            .collect();
        all.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
        all
    }

    /// `Tr(rho log rho)` with `0 log 0 = 0`; non-positive eigenvalues contribute nothing.
    pub fn neg_entropy(&self) -> T {
        self.spectrum()
            .into_iter()
            .filter(|&p| p > T::zero())
            .fold(T::zero(), |acc, p| acc + p * p.ln())
    }

    /// Von Neumann entropy `-Tr(rho log rho)`.
    pub fn entropy(&self) -> T {
        -self.neg_entropy()
    }

    /// Matrix elements `rho_{c, c'}` for `c, c'` in `configs` (zero across blocks).
    pub fn restrict(&self, configs: &[u64]) -> DMatrix<Cplx<T>> {
        let mut where_is: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
        for (bi, b) in self.blocks.iter().enumerate() {
            for (i, &c) in b.configs.iter().enumerate() {
                where_is.insert(c, (bi, i));
            }
        }
        let located: Vec<Option<(usize, usize)>> = configs.iter().map(|c| where_is.get(c).copied()).collect();
        DMatrix::from_fn(configs.len(), configs.len(), |i, j| match (located[i], located[j]) {
            (Some((bi, ii)), Some((bj, jj))) if bi == bj => self.blocks[bi].matrix[(ii, jj)],
            _ => Cplx::zero(),
        })
    }

    /// Configurations carrying a nonzero diagonal weight or belonging to a stored block.
    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        self.blocks.iter().flat_map(|b| b.configs.iter().copied())
    }

    pub fn to_dense_full(&self) -> DMatrix<Cplx<T>> {
        let all: Vec<u64> = (0..self.space.dim()).collect();
        self.restrict(&all)
    }

    /// `Tr(rho O)` for a blocked operator on the same space.
    pub fn expectation(&self, op: &BlockedOperator<T>) -> Result<T, SpectraError> {
        if op.space() != self.space {
            return Err(SpectraError::DimensionMismatch(
                "operator and density matrix live on different spaces".into(),
            ));
        }
        let mut acc = Cplx::<T>::zero();
        for block in op.blocks() {
            let rho = self.restrict(&block.basis.configs);
            for i in 0..block.basis.dim() {
                for (j, v) in block.matrix.row(i) {
                    acc += v * rho[(j, i)];
                }
            }
        }
        Ok(acc.re)
    }

    /// Largest deviation from Hermiticity over the blocks.
    pub fn hermiticity_defect(&self) -> T {
        self.blocks
            .iter()
            .flat_map(|b| (&b.matrix - b.matrix.adjoint()).iter().map(|z| modulus(*z)).collect::<Vec<_>>())
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// `Tr_B |psi><psi|` for a state whose sites are ordered A first.
///
/// A state of fixed magnetization gives blocks labelled by the magnetization of A,
/// each spanning every A configuration of that magnetization; otherwise the result
/// is a single full block.
pub fn reduced_density_matrix<T: Real>(
    state: &StateVector<T>,
    bipartition: &Bipartition,
) -> Result<DensityMatrix<T>, SpectraError> {
    let space = state.space();
    let n_a = bipartition.a().len();
    if bipartition.a() != (0..n_a).collect::<Vec<_>>().as_slice()
        || n_a + bipartition.b().len() != space.n_sites
    {
        return Err(SpectraError::DimensionMismatch(format!(
            "bipartition with |A| = {n_a}, |B| = {} does not split a {}-site state with A first",
            bipartition.b().len(),
            space.n_sites
        )));
    }
    let norm = state.norm();
    if (norm - T::one()).abs() > T::of(1e-10) {
        return Err(SpectraError::NotNormalized(norm.as_f64()));
    }
    let space_a = ConfigSpace::new(space.spin, n_a);
    let dim_b = ConfigSpace::new(space.spin, space.n_sites - n_a).dim();

    // group amplitudes by the B configuration
    let mut by_b: BTreeMap<u64, Vec<(u64, Cplx<T>)>> = BTreeMap::new();
    for (i, &c) in state.basis().configs.iter().enumerate() {
        let amp = state.amplitudes()[i];
        if !amp.is_zero() {
            by_b.entry(c % dim_b).or_default().push((c / dim_b, amp));
        }
    }

    let layouts: Vec<(Sector, Vec<u64>)> = match state.sector() {
        Sector::Magnetization(_) => {
            let mut mags: Vec<i32> = by_b
                .values()
                .flatten()
                .map(|&(a, _)| space_a.magnetization(a))
                .collect();
            mags.sort_unstable();
            mags.dedup();
            mags.into_iter()
                .map(|m| (Sector::Magnetization(m), space_a.sector(m).configs))
                .collect()
        }
        Sector::Full => vec![(Sector::Full, space_a.full().configs)],
    };

    let mut blocks: Vec<DensityBlock<T>> = layouts
        .into_iter()
        .map(|(sector, configs)| DensityBlock {
            sector,
            matrix: DMatrix::zeros(configs.len(), configs.len()),
            configs,
        })
        .collect();
    let table: BTreeMap<u64, (usize, usize)> = blocks
        .iter()
        .enumerate()
        .flat_map(|(bi, b)| b.configs.iter().enumerate().map(move |(i, &c)| (c, (bi, i))))
        .collect();
    // within a magnetization sector, a shared B configuration fixes A's magnetization
    for amps in by_b.values() {
        for &(a, x) in amps {
            let (bi, i) = table[&a];
            for &(a2, y) in amps {
                let (bj, j) = table[&a2];
                if bi == bj {
                    blocks[bi].matrix[(i, j)] += x * y.conj();
                }
            }
        }
    }
    DensityMatrix::new(space_a, blocks)
}
