use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_traits::Zero;
use rayon::prelude::*;

use super::lanczos::{lanczos_lowest, LanczosOptions};
use super::operator::{BlockedOperator, OperatorBlock};
use super::sector::{ConfigSpace, Sector, SectorBasis};
use super::SpectraError;
use crate::scalar::{modulus, Cplx, Real};

/// Amplitudes over the configurations of one block.
#[derive(Debug, Clone)]
pub struct StateVector<T: Real> {
    space: ConfigSpace,
    basis: SectorBasis,
    amplitudes: DVector<Cplx<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn new(space: ConfigSpace, basis: SectorBasis, amplitudes: DVector<Cplx<T>>) -> Result<Self, SpectraError> {
        if basis.dim() != amplitudes.len() {
            return Err(SpectraError::DimensionMismatch(format!(
                "{} amplitudes for a {}-dimensional block",
                amplitudes.len(),
                basis.dim()
            )));
        }
        Ok(StateVector {
            space,
            basis,
            amplitudes,
        })
    }

    /// A single product configuration, placed in its magnetization sector.
    pub fn product(space: ConfigSpace, config: u64) -> Self {
        let basis = SectorBasis {
            sector: Sector::Magnetization(space.magnetization(config)),
            configs: vec![config],
        };
        StateVector {
            space,
            basis,
            amplitudes: DVector::from_element(1, Cplx::new(T::one(), T::zero())),
        }
    }

    /// From a dense vector over every configuration; zero entries are dropped.
    pub fn from_full(space: ConfigSpace, full: &DVector<Cplx<T>>) -> Result<Self, SpectraError> {
        if full.len() as u64 != space.dim() {
            return Err(SpectraError::DimensionMismatch(format!(
                "{} amplitudes for a {}-dimensional space",
                full.len(),
                space.dim()
            )));
        }
        let configs: Vec<u64> = (0..space.dim()).filter(|&c| !full[c as usize].is_zero()).collect();
        let mags: Vec<i32> = configs.iter().map(|&c| space.magnetization(c)).collect();
        let sector = match mags.first() {
            Some(&m) if mags.iter().all(|&x| x == m) => Sector::Magnetization(m),
            _ => Sector::Full,
        };
        let amplitudes = DVector::from_iterator(configs.len(), configs.iter().map(|&c| full[c as usize]));
        Ok(StateVector {
            space,
            basis: SectorBasis { sector, configs },
            amplitudes,
        })
    }

    pub fn space(&self) -> ConfigSpace {
        self.space
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn sector(&self) -> Sector {
        self.basis.sector
    }

    pub fn amplitudes(&self) -> &DVector<Cplx<T>> {
        &self.amplitudes
    }

    pub fn norm(&self) -> T {
        self.amplitudes.norm()
    }

    pub fn amplitude(&self, config: u64) -> Cplx<T> {
        self.basis
            .index_of(config)
            .map_or(Cplx::zero(), |i| self.amplitudes[i])
    }

    pub fn to_full(&self) -> DVector<Cplx<T>> {
        let mut v = DVector::zeros(self.space.dim() as usize);
        for (i, &c) in self.basis.configs.iter().enumerate() {
            v[c as usize] = self.amplitudes[i];
        }
        v
    }

    /// `<psi| H |psi>` for a blocked operator on the same space.
    pub fn expectation(&self, op: &BlockedOperator<T>) -> Result<T, SpectraError> {
        if op.space() != self.space {
            return Err(SpectraError::DimensionMismatch(
                "operator and state live on different spaces".into(),
            ));
        }
        let mut acc = Cplx::<T>::zero();
        for block in op.blocks() {
            let local: Vec<(usize, Cplx<T>)> = block
                .basis
                .configs
                .iter()
                .enumerate()
                .filter_map(|(i, &c)| self.basis.index_of(c).map(|k| (i, self.amplitudes[k])))
                .collect();
            if local.is_empty() {
                continue;
            }
            let mut x = DVector::zeros(block.basis.dim());
            for &(i, a) in &local {
                x[i] = a;
            }
            let mut y = DVector::zeros(block.basis.dim());
            block.matrix.matvec(&x, &mut y);
            acc += x.dotc(&y);
        }
        Ok(acc.re)
    }

    /// Multiply by a global phase so the largest-magnitude amplitude (first one on ties)
    /// is real and positive.
    pub fn fix_phase(&mut self) {
        let Some(max) = self.amplitudes.iter().map(|z| modulus(*z)).reduce(|a, b| a.max(b)) else {
            return;
        };
        if max.is_zero() {
            return;
        }
        let cutoff = max * (T::one() - T::of(1e-9));
        let pivot = self
            .amplitudes
            .iter()
            .find(|z| modulus(**z) >= cutoff)
            .copied()
            .expect("maximum exists");
        let phase = pivot.conj().unscale(modulus(pivot));
        for a in self.amplitudes.iter_mut() {
            *a *= phase;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundStateOptions {
    /// Blocks up to this dimension are diagonalized densely; larger ones use Lanczos.
    pub dense_cutoff: usize,
    pub lanczos: LanczosOptions,
    /// Restrict the search to one sector.
    pub sector: Option<Sector>,
    /// Eigenvalues closer than this are treated as degenerate.
    pub degeneracy_tol: f64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions {
            dense_cutoff: 256,
            lanczos: LanczosOptions::default(),
            sector: None,
            degeneracy_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState<T: Real> {
    pub energy: T,
    pub state: StateVector<T>,
    pub sector: Sector,
    /// The two lowest levels of the chosen sector are closer than the tolerance.
    pub degenerate: bool,
    /// Gap to the next level in the chosen sector, when it was computed.
    pub sector_gap: Option<T>,
    pub residual: T,
    /// Lowest energy found in every searched sector.
    pub sector_energies: Vec<(Sector, T)>,
}

/// Lowest `k` eigenpairs of one block, in ascending order.
fn block_lowest<T: Real>(
    block: &OperatorBlock<T>,
    k: usize,
    opts: &GroundStateOptions,
) -> Result<Vec<(T, DVector<Cplx<T>>, T)>, SpectraError> {
    let dim = block.basis.dim();
    let k = k.min(dim);
    if dim <= opts.dense_cutoff {
        let eig = SymmetricEigen::new(block.matrix.to_dense());
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("finite"));
        let mut out: Vec<(T, DVector<Cplx<T>>, T)> = order
            .iter()
            .take(k)
            .map(|&i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned(), T::zero()))
            .collect();
        // deterministic representative of a degenerate lowest level
        let tol = T::of(opts.degeneracy_tol);
        let lowest = eig.eigenvalues[order[0]];
        let multiplet: Vec<usize> = order
            .iter()
            .copied()
            .take_while(|&i| eig.eigenvalues[i] - lowest < tol)
            .collect();
        if multiplet.len() > 1 {
            let sub = DMatrix::from_columns(
                &multiplet
                    .iter()
                    .map(|&i| eig.eigenvectors.column(i).into_owned())
                    .collect::<Vec<_>>(),
            );
            out[0].1 = canonical_in_subspace(&sub);
        }
        return Ok(out);
    }
    let apply = |x: &DVector<Cplx<T>>, y: &mut DVector<Cplx<T>>| block.matrix.matvec(x, y);
    let mut found: Vec<(T, DVector<Cplx<T>>, T)> = Vec::with_capacity(k);
    for _ in 0..k {
        let deflate: Vec<DVector<Cplx<T>>> = found.iter().map(|f| f.1.clone()).collect();
        let r = lanczos_lowest(dim, &apply, &deflate, &opts.lanczos)?;
        found.push((r.value, r.vector, r.residual));
    }
    Ok(found)
}

/// The vector of a degenerate eigenspace that vanishes on the lexicographically
/// earliest configurations reachable by elimination.
fn canonical_in_subspace<T: Real>(sub: &DMatrix<Cplx<T>>) -> DVector<Cplx<T>> {
    let mut cols: Vec<DVector<Cplx<T>>> = sub.column_iter().map(|c| c.into_owned()).collect();
    let mut active: Vec<usize> = (0..cols.len()).collect();
    let tiny = T::of(1e-8);
    for row in 0..sub.nrows() {
        if active.len() == 1 {
            break;
        }
        let Some((pos, &pivot)) = active
            .iter()
            .enumerate()
            .filter(|(_, &c)| modulus(cols[c][row]) > tiny)
            .max_by(|a, b| modulus(cols[*a.1][row]).partial_cmp(&modulus(cols[*b.1][row])).expect("finite"))
        else {
            continue;
        };
        active.remove(pos);
        let pv = cols[pivot].clone();
        for &c in &active {
            let f = cols[c][row] / pv[row];
            cols[c].axpy(-f, &pv, Cplx::new(T::one(), T::zero()));
        }
    }
    let mut v = cols[active[0]].clone();
    let n = v.norm();
    v.unscale_mut(n);
    v
}

/// Lowest eigenpair across sectors (or in the requested sector).
///
/// Ties between sectors within the degeneracy tolerance go to the sector with the
/// smallest `|S^z|`, then the lower magnetization.
pub fn ground_state<T: Real>(
    h: &BlockedOperator<T>,
    opts: &GroundStateOptions,
) -> Result<GroundState<T>, SpectraError> {
    let blocks: Vec<&OperatorBlock<T>> = match opts.sector {
        Some(s) => vec![h
            .block(s)
            .ok_or_else(|| SpectraError::SectorMismatch(format!("operator has no block {s}")))?],
        None => h.blocks().iter().filter(|b| b.basis.dim() > 0).collect(),
    };
    let lowest: Vec<(Sector, T)> = blocks
        .par_iter()
        .map(|b| block_lowest(b, 1, opts).map(|v| (b.sector(), v[0].0)))
        .collect::<Result<_, _>>()?;
    let emin = lowest
        .iter()
        .map(|&(_, e)| e)
        .reduce(|a, b| a.min(b))
        .ok_or_else(|| SpectraError::SectorMismatch("operator has no blocks".into()))?;
    let tol = T::of(opts.degeneracy_tol) * T::one().max(emin.abs());
    let rank = |s: Sector| match s {
        Sector::Full => (0, 0),
        Sector::Magnetization(m) => (m.abs(), m),
    };
    let chosen = lowest
        .iter()
        .filter(|&&(_, e)| e - emin <= tol)
        .map(|&(s, _)| s)
        .min_by_key(|&s| rank(s))
        .expect("minimum exists");
    let block = h.block(chosen).expect("chosen from the operator's own blocks");
    let pairs = block_lowest(block, 2, opts)?;
    let (energy, vector, residual) = pairs[0].clone();
    let sector_gap = pairs.get(1).map(|p| p.0 - energy);
    let degenerate = sector_gap.is_some_and(|g| g < T::of(opts.degeneracy_tol));
    let mut state = StateVector::new(h.space(), block.basis.clone(), vector)?;
    state.fix_phase();
    Ok(GroundState {
        energy,
        state,
        sector: chosen,
        degenerate,
        sector_gap,
        residual,
        sector_energies: lowest,
    })
}

/// The `k` lowest eigenstates of one sector, phase fixed, ascending in energy.
pub fn lowest_states<T: Real>(
    h: &BlockedOperator<T>,
    sector: Sector,
    k: usize,
    opts: &GroundStateOptions,
) -> Result<Vec<(T, StateVector<T>)>, SpectraError> {
    let block = h
        .block(sector)
        .ok_or_else(|| SpectraError::SectorMismatch(format!("operator has no block {sector}")))?;
    block_lowest(block, k, opts)?
        .into_iter()
        .map(|(e, v, _)| {
            let mut s = StateVector::new(h.space(), block.basis.clone(), v)?;
            s.fix_phase();
            Ok((e, s))
        })
        .collect()
}
