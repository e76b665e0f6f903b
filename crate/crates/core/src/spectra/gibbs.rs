use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::density::{DensityBlock, DensityMatrix};
use super::operator::BlockedOperator;
use super::sector::{ConfigSpace, Sector};
use super::SpectraError;
use crate::scalar::{modulus, Cplx, Real};

/// Largest block handled by dense diagonalization.
pub const DENSE_CAPACITY: usize = 4096;

/// Dense Hermitian block awaiting diagonalization.
#[derive(Debug, Clone)]
pub struct DenseBlock<T: Real> {
    pub sector: Sector,
    pub configs: Vec<u64>,
    pub matrix: DMatrix<Cplx<T>>,
}

#[derive(Debug, Clone)]
pub struct EigenBlock<T: Real> {
    pub sector: Sector,
    pub configs: Vec<u64>,
    /// Ascending.
    pub eigenvalues: DVector<T>,
    /// Orthonormal eigenvectors as columns, matching `eigenvalues`.
    pub eigenvectors: DMatrix<Cplx<T>>,
}

impl<T: Real> EigenBlock<T> {
    fn from_dense(block: DenseBlock<T>) -> Self {
        let n = block.matrix.nrows();
        let eig = SymmetricEigen::new(block.matrix);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .expect("finite eigenvalues")
        });
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        EigenBlock {
            sector: block.sector,
            configs: block.configs,
            eigenvalues,
            eigenvectors,
        }
    }

    /// `V^dagger M V` for a matrix on this block.
    pub fn rotate(&self, m: &DMatrix<Cplx<T>>) -> DMatrix<Cplx<T>> {
        self.eigenvectors.adjoint() * m * &self.eigenvectors
    }

    /// Max-entry residual of `H - V diag(lambda) V^dagger` against the original block.
    pub fn reconstruction_residual(&self, h: &DMatrix<Cplx<T>>) -> T {
        let lam = DMatrix::from_diagonal(&self.eigenvalues.map(|x| Cplx::new(x, T::zero())));
        let rebuilt = &self.eigenvectors * lam * self.eigenvectors.adjoint();
        (h - rebuilt).iter().map(|z| modulus(*z)).fold(T::zero(), |a, b| a.max(b))
    }
}

/// Per-block eigendecomposition of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct EigenSystem<T: Real> {
    pub space: ConfigSpace,
    pub blocks: Vec<EigenBlock<T>>,
}

impl<T: Real> EigenSystem<T> {
    pub fn new(space: ConfigSpace, blocks: Vec<DenseBlock<T>>) -> Result<Self, SpectraError> {
        if let Some(b) = blocks.iter().find(|b| b.configs.len() > DENSE_CAPACITY) {
            return Err(SpectraError::Capacity {
                dim: b.configs.len(),
                cutoff: DENSE_CAPACITY,
            });
        }
        let blocks = blocks.into_par_iter().map(EigenBlock::from_dense).collect();
        Ok(EigenSystem { space, blocks })
    }

    pub fn min_eigenvalue(&self) -> T {
        self.blocks
            .iter()
            .filter(|b| !b.eigenvalues.is_empty())
            .map(|b| b.eigenvalues[0])
            .fold(T::max_value().expect("bounded float"), |a, b| a.min(b))
    }
}

/// `sigma = exp(-H) / Z` held in the eigenbasis of `H`.
#[derive(Debug, Clone)]
pub struct GibbsState<T: Real> {
    pub eigensystem: EigenSystem<T>,
    /// Boltzmann populations per block, summing to one overall.
    pub populations: Vec<DVector<T>>,
    pub log_z: T,
}

impl<T: Real> GibbsState<T> {
    /// Populations are formed after shifting by the global lowest eigenvalue;
    /// `log_z` adds the shift back.
    pub fn from_eigensystem(eigensystem: EigenSystem<T>) -> Self {
        let shift = eigensystem.min_eigenvalue();
        let mut populations: Vec<DVector<T>> = eigensystem
            .blocks
            .iter()
            .map(|b| b.eigenvalues.map(|l| (-(l - shift)).exp()))
            .collect();
        let z: T = populations.iter().map(|p| p.sum()).fold(T::zero(), |a, b| a + b);
        for p in &mut populations {
            p.unscale_mut(z);
        }
        GibbsState {
            eigensystem,
            populations,
            log_z: z.ln() - shift,
        }
    }

    pub fn trace(&self) -> T {
        self.populations.iter().map(|p| p.sum()).fold(T::zero(), |a, b| a + b)
    }

    /// `sigma` assembled as a block density matrix.
    pub fn density_matrix(&self) -> DensityMatrix<T> {
        let blocks = self
            .eigensystem
            .blocks
            .iter()
            .zip(&self.populations)
            .map(|(b, p)| {
                let d = DMatrix::from_diagonal(&p.map(|x| Cplx::new(x, T::zero())));
                DensityBlock {
                    sector: b.sector,
                    configs: b.configs.clone(),
                    matrix: &b.eigenvectors * d * b.eigenvectors.adjoint(),
                }
            })
            .collect();
        DensityMatrix::new(self.eigensystem.space, blocks).expect("eigenblocks are square")
    }

    /// `Tr(sigma O)` for per-block dense matrices aligned with the eigenblocks.
    pub fn expectation_blocks(&self, op_blocks: &[DMatrix<Cplx<T>>]) -> T {
        self.eigensystem
            .blocks
            .iter()
            .zip(&self.populations)
            .zip(op_blocks)
            .map(|((b, p), m)| {
                let mv = m * &b.eigenvectors;
                (0..p.len())
                    .map(|i| p[i] * b.eigenvectors.column(i).dotc(&mv.column(i)).re)
                    .fold(T::zero(), |a, x| a + x)
            })
            .fold(T::zero(), |a, b| a + b)
    }

    /// `Tr(sigma O)` for a blocked operator on the same space.
    pub fn expectation(&self, op: &BlockedOperator<T>) -> Result<T, SpectraError> {
        self.density_matrix().expectation(op)
    }
}

/// Dense blocks of a blocked operator, in its block order.
pub fn dense_blocks<T: Real>(h: &BlockedOperator<T>) -> Vec<DenseBlock<T>> {
    h.blocks()
        .iter()
        .map(|b| DenseBlock {
            sector: b.sector(),
            configs: b.basis.configs.clone(),
            matrix: b.matrix.to_dense(),
        })
        .collect()
}

/// Gibbs state `exp(-H_A) / Z_A` of a subsystem operator, by full per-block diagonalization.
pub fn gibbs_state<T: Real>(h: &BlockedOperator<T>) -> Result<GibbsState<T>, SpectraError> {
    if let Some(b) = h.blocks().iter().find(|b| b.basis.dim() > DENSE_CAPACITY) {
        return Err(SpectraError::Capacity {
            dim: b.basis.dim(),
            cutoff: DENSE_CAPACITY,
        });
    }
    let eigensystem = EigenSystem::new(h.space(), dense_blocks(h))?;
    Ok(GibbsState::from_eigensystem(eigensystem))
}
