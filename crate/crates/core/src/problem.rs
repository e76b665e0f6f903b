//! Benchmark inputs: build the input Hamiltonian, take its ground (or an excited)
//! state, and prepare the ansatz model with the data moments.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::lattice::{Geometry, LatticeError, Ramp, Spin, DEFAULT_ED_LIMIT};
use crate::operators::{BasisKind, OperatorBasis};
use crate::relent::{DataMoments, RelEntError, SubsystemModel};
use crate::scalar::Real;
use crate::spectra::{
    build_operator, ground_state, lowest_states, GroundStateOptions, Sector, SpectraError, StateVector, Support,
};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    RelEnt(#[from] RelEntError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    XxzHalf,
    XxzOne,
    Bilayer,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::XxzHalf => "xxz-half",
            Family::XxzOne => "xxz-one",
            Family::Bilayer => "bilayer",
        })
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "xxz-half" => Ok(Family::XxzHalf),
            "xxz-one" => Ok(Family::XxzOne),
            "bilayer" => Ok(Family::Bilayer),
            other => Err(format!("unknown model family {other:?} (expected xxz-half, xxz-one or bilayer)")),
        }
    }
}

/// Input model and the state fed to the reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub family: Family,
    pub length: usize,
    /// `Delta` for the chains, `g` for the bilayer.
    pub ratio: f64,
    /// Restrict the input state to this magnetization sector.
    pub sector: Option<Sector>,
    /// 0 for the ground state, `k` for the `k`-th excitation within its sector.
    pub excitation: usize,
    pub ed_limit: u64,
}

impl ModelSpec {
    pub fn new(family: Family, length: usize, ratio: f64) -> Self {
        ModelSpec {
            family,
            length,
            ratio,
            sector: None,
            excitation: 0,
            ed_limit: DEFAULT_ED_LIMIT,
        }
    }

    pub fn geometry(&self) -> Result<Geometry, LatticeError> {
        match self.family {
            Family::XxzHalf => Geometry::chain_with_limit(self.length, Spin::Half, self.ed_limit),
            Family::XxzOne => Geometry::chain_with_limit(self.length, Spin::One, self.ed_limit),
            Family::Bilayer => Geometry::bilayer_cylinder_with_limit(self.length, self.ed_limit),
        }
    }

    /// Basis and weights of the input Hamiltonian.
    pub fn input_couplings(&self, spin: Spin) -> (OperatorBasis, Vec<f64>) {
        match self.family {
            Family::Bilayer => {
                let b = OperatorBasis::bilayer();
                let w = b.bilayer_weights(self.ratio).expect("bilayer basis");
                (b, w)
            }
            Family::XxzHalf | Family::XxzOne => {
                let b = OperatorBasis::u1(spin);
                let w = b.xxz_weights(self.ratio).expect("u1 basis");
                (b, w)
            }
        }
    }

    /// Ansatz basis compatible with the family.
    pub fn default_basis(&self) -> BasisKind {
        match self.family {
            Family::Bilayer => BasisKind::Bilayer,
            _ => BasisKind::U1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InputState<T: Real> {
    pub geometry: Geometry,
    pub state: StateVector<T>,
    pub energy: T,
    /// Lowest level is degenerate within the chosen sector.
    pub degenerate: bool,
}

pub fn input_state<T: Real>(spec: &ModelSpec) -> Result<InputState<T>, ProblemError> {
    let geometry = spec.geometry()?;
    let (basis, w) = spec.input_couplings(geometry.spin());
    let h = build_operator::<T>(&geometry, &basis, &w, Ramp::Uniform, Support::FullLattice)?;
    let opts = GroundStateOptions {
        sector: spec.sector,
        ..GroundStateOptions::default()
    };
    let gs = ground_state(&h, &opts)?;
    if spec.excitation == 0 {
        return Ok(InputState {
            geometry,
            state: gs.state,
            energy: gs.energy,
            degenerate: gs.degenerate,
        });
    }
    let mut states = lowest_states(&h, gs.sector, spec.excitation + 1, &opts)?;
    if states.len() <= spec.excitation {
        return Err(ProblemError::Invalid(format!(
            "sector {} has fewer than {} states",
            gs.sector,
            spec.excitation + 1
        )));
    }
    let (energy, state) = states.swap_remove(spec.excitation);
    Ok(InputState {
        geometry,
        state,
        energy,
        degenerate: false,
    })
}

/// Everything a reconstruction needs: the ansatz model and the data moments.
#[derive(Debug, Clone)]
pub struct Problem<T: Real> {
    pub input: InputState<T>,
    pub basis: OperatorBasis,
    pub ramp: Ramp,
    pub model: SubsystemModel<T>,
    pub data: DataMoments<T>,
}

impl<T: Real> Problem<T> {
    pub fn new(spec: &ModelSpec, basis: BasisKind, ramp: Ramp) -> Result<Self, ProblemError> {
        let input = input_state::<T>(spec)?;
        Self::from_input(input, basis, ramp)
    }

    pub fn from_input(input: InputState<T>, basis: BasisKind, ramp: Ramp) -> Result<Self, ProblemError> {
        let spin = input.geometry.spin();
        if basis == BasisKind::Bilayer && input.geometry.kind() != crate::lattice::GeometryKind::BilayerCylinder {
            return Err(ProblemError::Invalid("the bilayer basis needs the bilayer geometry".into()));
        }
        let basis = OperatorBasis::from_kind(basis, spin);
        let model = SubsystemModel::new(&input.geometry, &basis, ramp)?;
        let data = model.moments_from_state(&input.geometry, &input.state)?;
        Ok(Problem {
            input,
            basis,
            ramp,
            model,
            data,
        })
    }
}
