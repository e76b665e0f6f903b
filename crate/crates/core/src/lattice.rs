//! Lattice geometries, the half-system bipartition, and positional ramp weights.
//!
//! Sites are stored with subsystem A first, so a configuration index splits
//! into an A part (high digits) and a B part (low digits).
//!
//! Ramp weights are measured from the entanglement cut. In a chain of `L`
//! sites the site of A adjacent to the cut sits at distance `n = 1`; a bond
//! joining distances `n` and `n + 1` carries weight `n`, and the bond that
//! crosses the cut would carry weight zero and is not part of the subsystem
//! operator. On the bilayer cylinder the column of A adjacent to the cut is
//! `i_x = 1`; bonds perpendicular to the cut get `i_x` and bonds living in a
//! single column (parallel or inter-layer) get `i_x - 1/2`.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

/// Default cap on the full Hilbert-space dimension accepted for exact diagonalization.
pub const DEFAULT_ED_LIMIT: u64 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("system length {0} must be even")]
    OddLength(usize),
    #[error("system length {0} is too small, need at least 4")]
    TooSmall(usize),
    #[error("Hilbert space of {sites} sites with local dimension {local_dim} exceeds the ED limit {limit}")]
    CapacityExceeded {
        sites: usize,
        local_dim: usize,
        limit: u64,
    },
    #[error("{ramp} ramp is not defined on the {kind} geometry")]
    UnsupportedRamp { ramp: Ramp, kind: GeometryKind },
    #[error("term {0:?} does not lie inside subsystem A")]
    OutsideSubsystem(TermLocation),
    #[error("term {0:?} does not exist in this geometry")]
    UnknownTerm(TermLocation),
}

/// Spin representation carried by every site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Half,
    One,
}

impl Spin {
    /// Local Hilbert-space dimension `2s + 1`.
    pub fn dim(self) -> usize {
        match self {
            Spin::Half => 2,
            Spin::One => 3,
        }
    }

    /// `2s`, handy for integer magnetization bookkeeping.
    pub fn twice(self) -> i32 {
        match self {
            Spin::Half => 1,
            Spin::One => 2,
        }
    }

    pub fn value(self) -> f64 {
        f64::from(self.twice()) / 2.0
    }

    pub fn from_value(s: f64) -> Option<Spin> {
        if s == 0.5 {
            Some(Spin::Half)
        } else if s == 1.0 {
            Some(Spin::One)
        } else {
            None
        }
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spin::Half => f.write_str("1/2"),
            Spin::One => f.write_str("1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryKind {
    Chain,
    BilayerCylinder,
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryKind::Chain => f.write_str("chain"),
            GeometryKind::BilayerCylinder => f.write_str("bilayer-cylinder"),
        }
    }
}

/// Integer coordinates of a site, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteCoord {
    Chain { r: usize },
    Bilayer { ix: usize, iy: usize, layer: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Site {
    pub coord: SiteCoord,
    pub in_a: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondKind {
    /// Nearest neighbours along a chain.
    Chain,
    /// Intra-layer bond along x, crossing columns.
    Perpendicular,
    /// Intra-layer bond along the periodic y direction, inside one column.
    Parallel,
    /// Vertical bond between the two layers.
    InterLayer,
}

impl BondKind {
    pub fn is_intra_layer(self) -> bool {
        !matches!(self, BondKind::InterLayer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub kind: BondKind,
}

/// Positional profile multiplying each local term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ramp {
    Uniform,
    Bw,
    Cft,
}

impl fmt::Display for Ramp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ramp::Uniform => f.write_str("uniform"),
            Ramp::Bw => f.write_str("bw"),
            Ramp::Cft => f.write_str("cft"),
        }
    }
}

impl std::str::FromStr for Ramp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Ramp::Uniform),
            "bw" => Ok(Ramp::Bw),
            "cft" => Ok(Ramp::Cft),
            other => Err(format!("unknown ramp '{other}', expected uniform | bw | cft")),
        }
    }
}

/// A local term's position: a site index or a bond index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermLocation {
    Site(usize),
    Bond(usize),
}

/// Split of the sites into subsystem A and its complement B.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    a: Vec<usize>,
    b: Vec<usize>,
}

impl Bipartition {
    pub fn a(&self) -> &[usize] {
        &self.a
    }

    pub fn b(&self) -> &[usize] {
        &self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    kind: GeometryKind,
    spin: Spin,
    length: usize,
    sites: Vec<Site>,
    bonds: Vec<Bond>,
    bipartition: Bipartition,
}

fn check_length(l: usize) -> Result<(), LatticeError> {
    if l % 2 != 0 {
        return Err(LatticeError::OddLength(l));
    }
    if l < 4 {
        return Err(LatticeError::TooSmall(l));
    }
    Ok(())
}

fn check_capacity(sites: usize, spin: Spin, limit: u64) -> Result<(), LatticeError> {
    let dim = (spin.dim() as u128).checked_pow(sites as u32);
    match dim {
        Some(d) if d <= u128::from(limit) => Ok(()),
        _ => Err(LatticeError::CapacityExceeded {
            sites,
            local_dim: spin.dim(),
            limit,
        }),
    }
}

impl Geometry {
    /// Open chain of `l` sites with nearest-neighbour bonds; A is the left half.
    pub fn chain(l: usize, spin: Spin) -> Result<Self, LatticeError> {
        Self::chain_with_limit(l, spin, DEFAULT_ED_LIMIT)
    }

    pub fn chain_with_limit(l: usize, spin: Spin, limit: u64) -> Result<Self, LatticeError> {
        check_length(l)?;
        check_capacity(l, spin, limit)?;
        let half = l / 2;
        let sites = (1..=l)
            .map(|r| Site {
                coord: SiteCoord::Chain { r },
                in_a: r <= half,
            })
            .collect();
        let bonds = (0..l - 1)
            .map(|i| Bond {
                a: i,
                b: i + 1,
                kind: BondKind::Chain,
            })
            .collect();
        Ok(Geometry {
            kind: GeometryKind::Chain,
            spin,
            length: l,
            sites,
            bonds,
            bipartition: Bipartition {
                a: (0..half).collect(),
                b: (half..l).collect(),
            },
        })
    }

    /// Spin-1/2 bilayer on an `l x l/2` cylinder, open along x and periodic along y.
    pub fn bilayer_cylinder(l: usize) -> Result<Self, LatticeError> {
        Self::bilayer_cylinder_with_limit(l, DEFAULT_ED_LIMIT)
    }

    pub fn bilayer_cylinder_with_limit(l: usize, limit: u64) -> Result<Self, LatticeError> {
        check_length(l)?;
        let ly = l / 2;
        let n_sites = 2 * l * ly;
        check_capacity(n_sites, Spin::Half, limit)?;

        let half = l / 2;
        let per_half = 2 * half * ly;
        // A block (ix <= L/2) first, then B; within a block: layer, column, row.
        let index = |ix: usize, iy: usize, layer: usize| -> usize {
            let (offset, col) = if ix <= half { (0, ix - 1) } else { (per_half, ix - 1 - half) };
            offset + ((layer - 1) * half + col) * ly + (iy - 1)
        };

        let mut sites = vec![
            Site {
                coord: SiteCoord::Chain { r: 0 },
                in_a: false,
            };
            n_sites
        ];
        for layer in 1..=2 {
            for ix in 1..=l {
                for iy in 1..=ly {
                    sites[index(ix, iy, layer)] = Site {
                        coord: SiteCoord::Bilayer { ix, iy, layer },
                        in_a: ix <= half,
                    };
                }
            }
        }

        let mut bonds = Vec::new();
        for layer in 1..=2 {
            for ix in 1..=l {
                for iy in 1..=ly {
                    let here = index(ix, iy, layer);
                    if ix < l {
                        bonds.push(Bond {
                            a: here,
                            b: index(ix + 1, iy, layer),
                            kind: BondKind::Perpendicular,
                        });
                    }
                    let up = if iy == ly { 1 } else { iy + 1 };
                    bonds.push(Bond {
                        a: here,
                        b: index(ix, up, layer),
                        kind: BondKind::Parallel,
                    });
                }
            }
        }
        for ix in 1..=l {
            for iy in 1..=ly {
                bonds.push(Bond {
                    a: index(ix, iy, 1),
                    b: index(ix, iy, 2),
                    kind: BondKind::InterLayer,
                });
            }
        }

        Ok(Geometry {
            kind: GeometryKind::BilayerCylinder,
            spin: Spin::Half,
            length: l,
            sites,
            bonds,
            bipartition: Bipartition {
                a: (0..per_half).collect(),
                b: (per_half..n_sites).collect(),
            },
        })
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    /// Linear size `L`.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bipartition(&self) -> &Bipartition {
        &self.bipartition
    }

    /// Number of sites in subsystem A.
    pub fn n_sites_a(&self) -> usize {
        self.bipartition.a.len()
    }

    /// Full Hilbert-space dimension as a float (may exceed `u64`).
    pub fn hilbert_dim(&self) -> f64 {
        (self.spin.dim() as f64).powi(self.sites.len() as i32)
    }

    pub fn location_in_a(&self, loc: TermLocation) -> bool {
        match loc {
            TermLocation::Site(s) => self.sites.get(s).is_some_and(|x| x.in_a),
            TermLocation::Bond(b) => self
                .bonds
                .get(b)
                .is_some_and(|bd| self.sites[bd.a].in_a && self.sites[bd.b].in_a),
        }
    }

    /// Distance of a site of A from the cut: 1 for the site (or column) adjacent to it.
    fn cut_distance(&self, site: usize) -> usize {
        let half = self.length / 2;
        match self.sites[site].coord {
            SiteCoord::Chain { r } => half + 1 - r,
            SiteCoord::Bilayer { ix, .. } => half + 1 - ix,
        }
    }

    /// Ramp weight of a local term. `Uniform` is accepted anywhere; `Bw` and
    /// `Cft` require the term to sit inside A, and `Cft` is 1D only.
    pub fn ramp_weight(&self, loc: TermLocation, ramp: Ramp) -> Result<f64, LatticeError> {
        let exists = match loc {
            TermLocation::Site(s) => s < self.sites.len(),
            TermLocation::Bond(b) => b < self.bonds.len(),
        };
        if !exists {
            return Err(LatticeError::UnknownTerm(loc));
        }
        if ramp == Ramp::Uniform {
            return Ok(1.0);
        }
        if ramp == Ramp::Cft && self.kind != GeometryKind::Chain {
            return Err(LatticeError::UnsupportedRamp {
                ramp,
                kind: self.kind,
            });
        }
        if !self.location_in_a(loc) {
            return Err(LatticeError::OutsideSubsystem(loc));
        }

        let position = match (self.kind, loc) {
            (GeometryKind::Chain, TermLocation::Site(s)) => self.cut_distance(s) as f64,
            (GeometryKind::Chain, TermLocation::Bond(b)) => {
                let bond = self.bonds[b];
                self.cut_distance(bond.a).min(self.cut_distance(bond.b)) as f64
            }
            (GeometryKind::BilayerCylinder, TermLocation::Site(s)) => {
                self.cut_distance(s) as f64 - 0.5
            }
            (GeometryKind::BilayerCylinder, TermLocation::Bond(b)) => {
                let bond = self.bonds[b];
                let (da, db) = (self.cut_distance(bond.a), self.cut_distance(bond.b));
                match bond.kind {
                    BondKind::Perpendicular => da.min(db) as f64,
                    _ => da as f64 - 0.5,
                }
            }
        };

        Ok(match ramp {
            Ramp::Bw => position,
            Ramp::Cft => {
                let l = self.length as f64;
                l / PI * (PI * position / l).sin()
            }
            Ramp::Uniform => unreachable!(),
        })
    }
}
