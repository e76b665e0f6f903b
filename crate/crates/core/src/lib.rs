//! Parent-Hamiltonian reconstruction from the entanglement structure of a
//! ground state: lattices and bipartitions, local operator bases, exact
//! diagonalization, and relative-entropy minimization over
//! Bisognano-Wichmann type ansatze.

pub mod lattice;
pub mod operators;
pub mod optimize;
pub mod problem;
pub mod relent;
pub mod scalar;
pub mod scan;
pub mod spectra;
pub mod verify;

pub use lattice::{Bipartition, Geometry, LatticeError, Ramp, Spin};
pub use operators::{BasisKind, OperatorBasis};
pub use optimize::{extract_parent, minimize, Method, OptimizerConfig, ParentReport, Status, Trajectory};
pub use problem::{Family, ModelSpec, Problem};
pub use relent::{DataMoments, RelEntError, RelEntReport, SubsystemModel};
pub use scalar::{Cplx, Real};
pub use spectra::{Sector, SpectraError};

pub type BlockedOperatorF64 = spectra::BlockedOperator<f64>;
pub type StateVectorF64 = spectra::StateVector<f64>;
pub type DensityMatrixF64 = spectra::DensityMatrix<f64>;
pub type GibbsStateF64 = spectra::GibbsState<f64>;
pub type SubsystemModelF64 = SubsystemModel<f64>;
pub type DataMomentsF64 = DataMoments<f64>;
pub type ProblemF64 = Problem<f64>;
