//! Exact diagonalization: sector-blocked operators, ground states, reduced
//! density matrices and Gibbs states of subsystem operators.

pub mod density;
pub mod gibbs;
pub mod io;
pub mod lanczos;
pub mod operator;
pub mod sector;
pub mod state;

use thiserror::Error;

use crate::lattice::LatticeError;

pub use density::{reduced_density_matrix, DensityBlock, DensityMatrix};
pub use gibbs::{gibbs_state, DenseBlock, EigenBlock, EigenSystem, GibbsState, DENSE_CAPACITY};
pub use lanczos::{lanczos_lowest, LanczosOptions, LanczosResult};
pub use operator::{build_operator, ramped_group_terms, BlockedOperator, LocalTerm, SparseHermitian, Support};
pub use sector::{ConfigSpace, Sector, SectorBasis};
pub use state::{ground_state, lowest_states, GroundState, GroundStateOptions, StateVector};

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("block of dimension {dim} exceeds the dense-diagonalization capacity {cutoff}")]
    Capacity { dim: usize, cutoff: usize },
    #[error("Lanczos did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("sector mismatch: {0}")]
    SectorMismatch(String),
    #[error("invalid support: {0}")]
    InvalidSupport(String),
    #[error("state norm {0} differs from 1")]
    NotNormalized(f64),
    #[error("container format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
