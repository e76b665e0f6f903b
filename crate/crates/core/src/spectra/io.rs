//! Binary container for states and density-matrix blocks.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      [u8; 4]   b"BWSC"
//! version    u32       1
//! payload    u8        0 = state vector, 1 = density matrix
//! spin       u8        2s
//! n_sites    u32
//! n_blocks   u32
//! sector table, n_blocks entries:
//!     kind   u8        0 = full, 1 = fixed 2S^z
//!     m2     i32       2S^z (0 for full)
//!     dim    u64
//!     configs [u64; dim]
//! data, per block in table order:
//!     state:   dim complex amplitudes
//!     density: dim x dim complex entries, row-major
//! ```
//!
//! A complex number is stored as two IEEE-754 doubles, real part first.
//! A state file holds exactly one block.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use super::density::{DensityBlock, DensityMatrix};
use super::sector::{ConfigSpace, Sector, SectorBasis};
use super::state::StateVector;
use super::SpectraError;
use crate::lattice::Spin;
use crate::scalar::{Cplx, Real};

pub const MAGIC: [u8; 4] = *b"BWSC";
pub const VERSION: u32 = 1;

const PAYLOAD_STATE: u8 = 0;
const PAYLOAD_DENSITY: u8 = 1;

struct Header {
    payload: u8,
    space: ConfigSpace,
    table: Vec<(Sector, Vec<u64>)>,
}

fn write_header<W: Write>(w: &mut W, payload: u8, space: ConfigSpace, table: &[(Sector, &[u64])]) -> std::io::Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[payload, space.spin.twice() as u8])?;
    w.write_all(&(space.n_sites as u32).to_le_bytes())?;
    w.write_all(&(table.len() as u32).to_le_bytes())?;
    for (sector, configs) in table {
        let (kind, m2) = match sector {
            Sector::Full => (0u8, 0i32),
            Sector::Magnetization(m) => (1u8, *m),
        };
        w.write_all(&[kind])?;
        w.write_all(&m2.to_le_bytes())?;
        w.write_all(&(configs.len() as u64).to_le_bytes())?;
        for c in *configs {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N], SpectraError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, SpectraError> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, SpectraError> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_cplx<R: Read, T: Real>(r: &mut R) -> Result<Cplx<T>, SpectraError> {
    let re = f64::from_le_bytes(read_array(r)?);
    let im = f64::from_le_bytes(read_array(r)?);
    Ok(Cplx::new(T::of(re), T::of(im)))
}

fn write_cplx<W: Write, T: Real>(w: &mut W, z: Cplx<T>) -> std::io::Result<()> {
    w.write_all(&z.re.as_f64().to_le_bytes())?;
    w.write_all(&z.im.as_f64().to_le_bytes())
}

fn read_header<R: Read>(r: &mut R) -> Result<Header, SpectraError> {
    let magic: [u8; 4] = read_array(r)?;
    if magic != MAGIC {
        return Err(SpectraError::Format(format!("bad magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(SpectraError::Format(format!("unsupported version {version}")));
    }
    let [payload, twice_s] = read_array(r)?;
    let spin = match twice_s {
        1 => Spin::Half,
        2 => Spin::One,
        other => return Err(SpectraError::Format(format!("unsupported spin 2s = {other}"))),
    };
    let n_sites = read_u32(r)? as usize;
    let space = ConfigSpace::new(spin, n_sites);
    let n_blocks = read_u32(r)? as usize;
    let mut table = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        let [kind] = read_array(r)?;
        let m2 = i32::from_le_bytes(read_array(r)?);
        let sector = match kind {
            0 => Sector::Full,
            1 => Sector::Magnetization(m2),
            other => return Err(SpectraError::Format(format!("unknown sector kind {other}"))),
        };
        let dim = read_u64(r)?;
        if dim > space.dim() {
            return Err(SpectraError::Format(format!(
                "block of dimension {dim} in a space of dimension {}",
                space.dim()
            )));
        }
        let mut configs = Vec::with_capacity(dim as usize);
        for _ in 0..dim {
            let c = read_u64(r)?;
            if c >= space.dim() {
                return Err(SpectraError::Format(format!("configuration {c} out of range")));
            }
            configs.push(c);
        }
        if configs.windows(2).any(|p| p[0] >= p[1]) {
            return Err(SpectraError::Format("configurations must be strictly ascending".into()));
        }
        table.push((sector, configs));
    }
    Ok(Header { payload, space, table })
}

pub fn write_state<W: Write, T: Real>(w: &mut W, state: &StateVector<T>) -> Result<(), SpectraError> {
    let basis = state.basis();
    write_header(w, PAYLOAD_STATE, state.space(), &[(basis.sector, &basis.configs)])?;
    for &z in state.amplitudes().iter() {
        write_cplx(w, z)?;
    }
    Ok(())
}

pub fn read_state<R: Read, T: Real>(r: &mut R) -> Result<StateVector<T>, SpectraError> {
    let header = read_header(r)?;
    if header.payload != PAYLOAD_STATE {
        return Err(SpectraError::Format("container does not hold a state".into()));
    }
    let [(sector, configs)]: [(Sector, Vec<u64>); 1] = header
        .table
        .try_into()
        .map_err(|_| SpectraError::Format("a state container holds exactly one block".into()))?;
    let mut amps = DVector::zeros(configs.len());
    for a in amps.iter_mut() {
        *a = read_cplx(r)?;
    }
    StateVector::new(header.space, SectorBasis { sector, configs }, amps)
}

pub fn write_density<W: Write, T: Real>(w: &mut W, rho: &DensityMatrix<T>) -> Result<(), SpectraError> {
    let table: Vec<(Sector, &[u64])> = rho.blocks().iter().map(|b| (b.sector, b.configs.as_slice())).collect();
    write_header(w, PAYLOAD_DENSITY, rho.space(), &table)?;
    for b in rho.blocks() {
        let n = b.configs.len();
        for i in 0..n {
            for j in 0..n {
                write_cplx(w, b.matrix[(i, j)])?;
            }
        }
    }
    Ok(())
}

pub fn read_density<R: Read, T: Real>(r: &mut R) -> Result<DensityMatrix<T>, SpectraError> {
    let header = read_header(r)?;
    if header.payload != PAYLOAD_DENSITY {
        return Err(SpectraError::Format("container does not hold a density matrix".into()));
    }
    let mut blocks = Vec::with_capacity(header.table.len());
    for (sector, configs) in header.table {
        let n = configs.len();
        let mut matrix = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                matrix[(i, j)] = read_cplx(r)?;
            }
        }
        blocks.push(DensityBlock { sector, configs, matrix });
    }
    DensityMatrix::new(header.space, blocks)
}
