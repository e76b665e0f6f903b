//! Spin matrices and the local operator bases a Hamiltonian ansatz is expanded in.

use std::fmt;

use nalgebra::DMatrix;
use num_traits::Zero;

use crate::lattice::{BondKind, Spin};
use crate::scalar::{cplx, creal, modulus, Cplx, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    fn letter(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

/// Spin-s matrices in the `S^z` eigenbasis, ordered `m = s, s-1, .., -s`.
#[derive(Debug, Clone)]
pub struct SpinAlgebra<T: Real> {
    pub spin: Spin,
    pub sx: DMatrix<Cplx<T>>,
    pub sy: DMatrix<Cplx<T>>,
    pub sz: DMatrix<Cplx<T>>,
}

impl<T: Real> SpinAlgebra<T> {
    pub fn new(spin: Spin) -> Self {
        let d = spin.dim();
        let s = spin.value();
        let mut sp = DMatrix::<Cplx<T>>::zeros(d, d);
        let mut sz = DMatrix::<Cplx<T>>::zeros(d, d);
        for k in 0..d {
            let m = s - k as f64;
            sz[(k, k)] = creal(T::of(m));
            if k > 0 {
                // <m+1| S^+ |m>
                sp[(k - 1, k)] = creal(T::of((s * (s + 1.0) - m * (m + 1.0)).sqrt()));
            }
        }
        let sm = sp.adjoint();
        let half = T::of(0.5);
        let sx = (&sp + &sm).map(|z| z * half);
        // S^y = (S^+ - S^-) / 2i
        let sy = (&sp - &sm).map(|z| z * cplx(T::zero(), -half));
        SpinAlgebra { spin, sx, sy, sz }
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }

    pub fn axis(&self, a: Axis) -> &DMatrix<Cplx<T>> {
        match a {
            Axis::X => &self.sx,
            Axis::Y => &self.sy,
            Axis::Z => &self.sz,
        }
    }

    pub fn identity(&self) -> DMatrix<Cplx<T>> {
        DMatrix::identity(self.dim(), self.dim())
    }
}

/// Convenience constructor matching the operation name used across the crate.
pub fn spin_matrices<T: Real>(spin: Spin) -> SpinAlgebra<T> {
    SpinAlgebra::new(spin)
}

/// Local shape of a basis term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermShape {
    Site(Axis),
    Pair(Axis, Axis),
}

/// Which bonds a two-site descriptor lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondClass {
    Any,
    IntraLayer,
    InterLayer,
}

impl BondClass {
    fn admits(self, kind: BondKind) -> bool {
        match self {
            BondClass::Any => true,
            BondClass::IntraLayer => kind.is_intra_layer(),
            BondClass::InterLayer => kind == BondKind::InterLayer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermDescriptor {
    pub shape: TermShape,
    pub bonds: BondClass,
    /// Coupling group this term contributes to.
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingGroup {
    pub label: String,
    /// Same-axis spin-exchange group; eligible as the energy-scale reference.
    pub symmetric: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    Full,
    U1,
    Bilayer,
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisKind::Full => "full",
            BasisKind::U1 => "u1",
            BasisKind::Bilayer => "bilayer",
        })
    }
}

impl std::str::FromStr for BasisKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(BasisKind::Full),
            "u1" => Ok(BasisKind::U1),
            "bilayer" => Ok(BasisKind::Bilayer),
            other => Err(format!("unknown basis '{other}', expected full | u1 | bilayer")),
        }
    }
}

/// Ordered list of local terms, grouped into independent couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBasis {
    kind: BasisKind,
    spin: Spin,
    descriptors: Vec<TermDescriptor>,
    groups: Vec<CouplingGroup>,
    reference: usize,
}

fn pair(a: Axis, b: Axis, bonds: BondClass, group: usize) -> TermDescriptor {
    TermDescriptor {
        shape: TermShape::Pair(a, b),
        bonds,
        group,
    }
}

impl OperatorBasis {
    /// All nine nearest-neighbour products `S^a S^b` and the three `S^a`, one coupling each.
    /// Quadratic single-site terms `(S^a)^2` are not included for spin 1.
    pub fn full(spin: Spin) -> Self {
        let mut descriptors = Vec::with_capacity(12);
        let mut groups = Vec::with_capacity(12);
        for a in Axis::ALL {
            for b in Axis::ALL {
                descriptors.push(pair(a, b, BondClass::Any, groups.len()));
                groups.push(CouplingGroup {
                    label: format!("{}{}", a.letter(), b.letter()),
                    symmetric: a == b,
                });
            }
        }
        for a in Axis::ALL {
            descriptors.push(TermDescriptor {
                shape: TermShape::Site(a),
                bonds: BondClass::Any,
                group: groups.len(),
            });
            groups.push(CouplingGroup {
                label: a.letter().to_string(),
                symmetric: false,
            });
        }
        OperatorBasis {
            kind: BasisKind::Full,
            spin,
            descriptors,
            groups,
            reference: 0,
        }
    }

    /// XXZ-symmetric basis: one shared coupling for `S^x S^x + S^y S^y`, one for `S^z S^z`.
    pub fn u1(spin: Spin) -> Self {
        OperatorBasis {
            kind: BasisKind::U1,
            spin,
            descriptors: vec![
                pair(Axis::X, Axis::X, BondClass::Any, 0),
                pair(Axis::Y, Axis::Y, BondClass::Any, 0),
                pair(Axis::Z, Axis::Z, BondClass::Any, 1),
            ],
            groups: vec![
                CouplingGroup {
                    label: "xx+yy".into(),
                    symmetric: true,
                },
                CouplingGroup {
                    label: "zz".into(),
                    symmetric: true,
                },
            ],
            reference: 0,
        }
    }

    /// Intra-layer and inter-layer Heisenberg exchange, spin 1/2.
    pub fn bilayer() -> Self {
        let mut descriptors = Vec::with_capacity(6);
        for (group, class) in [(0, BondClass::IntraLayer), (1, BondClass::InterLayer)] {
            for a in Axis::ALL {
                descriptors.push(pair(a, a, class, group));
            }
        }
        OperatorBasis {
            kind: BasisKind::Bilayer,
            spin: Spin::Half,
            descriptors,
            groups: vec![
                CouplingGroup {
                    label: "intra".into(),
                    symmetric: true,
                },
                CouplingGroup {
                    label: "inter".into(),
                    symmetric: true,
                },
            ],
            reference: 0,
        }
    }

    pub fn from_kind(kind: BasisKind, spin: Spin) -> Self {
        match kind {
            BasisKind::Full => Self::full(spin),
            BasisKind::U1 => Self::u1(spin),
            BasisKind::Bilayer => Self::bilayer(),
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    pub fn descriptors(&self) -> &[TermDescriptor] {
        &self.descriptors
    }

    pub fn groups(&self) -> &[CouplingGroup] {
        &self.groups
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    /// Group whose coupling sets the overall scale (`J = 1`).
    pub fn reference_group(&self) -> usize {
        self.reference
    }

    pub fn group_index(&self, label: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.label == label)
    }

    /// Couplings that reproduce the XXZ chain `XX + YY + delta ZZ`.
    pub fn xxz_weights(&self, delta: f64) -> Option<Vec<f64>> {
        let mut w = vec![0.0; self.group_count()];
        match self.kind {
            BasisKind::Full => {
                w[self.group_index("xx")?] = 1.0;
                w[self.group_index("yy")?] = 1.0;
                w[self.group_index("zz")?] = delta;
            }
            BasisKind::U1 => {
                w[0] = 1.0;
                w[1] = delta;
            }
            BasisKind::Bilayer => return None,
        }
        Some(w)
    }

    /// Couplings of the bilayer Heisenberg model with inter-layer ratio `g`.
    pub fn bilayer_weights(&self, g: f64) -> Option<Vec<f64>> {
        (self.kind == BasisKind::Bilayer).then(|| vec![1.0, g])
    }

    /// Combined two-site matrix of `group` on a bond of the given kind (`d^2 x d^2`,
    /// first site as the high digit), or `None` when the group has no term there.
    pub fn pair_matrix<T: Real>(
        &self,
        algebra: &SpinAlgebra<T>,
        group: usize,
        kind: BondKind,
    ) -> Option<DMatrix<Cplx<T>>> {
        let mut acc: Option<DMatrix<Cplx<T>>> = None;
        for desc in &self.descriptors {
            if desc.group != group || !desc.bonds.admits(kind) {
                continue;
            }
            if let TermShape::Pair(a, b) = desc.shape {
                let m = algebra.axis(a).kronecker(algebra.axis(b));
                acc = Some(match acc {
                    Some(x) => x + m,
                    None => m,
                });
            }
        }
        acc
    }

    /// Combined single-site matrix of `group`, if it has site terms.
    pub fn site_matrix<T: Real>(&self, algebra: &SpinAlgebra<T>, group: usize) -> Option<DMatrix<Cplx<T>>> {
        let mut acc: Option<DMatrix<Cplx<T>>> = None;
        for desc in &self.descriptors {
            if desc.group != group {
                continue;
            }
            if let TermShape::Site(a) = desc.shape {
                let m = algebra.axis(a).clone();
                acc = Some(match acc {
                    Some(x) => x + m,
                    None => m,
                });
            }
        }
        acc
    }

    /// True when every group's local operator commutes with the local total `S^z`,
    /// so operators built from the basis are block diagonal in magnetization.
    pub fn conserves_sz(&self) -> bool {
        let algebra = SpinAlgebra::<f64>::new(self.spin);
        let id = algebra.identity();
        let sz2 = algebra.sz.kronecker(&id) + id.kronecker(&algebra.sz);
        let kinds = [BondKind::Chain, BondKind::Perpendicular, BondKind::Parallel, BondKind::InterLayer];
        (0..self.group_count()).all(|g| {
            let pairs_ok = kinds.iter().all(|&k| {
                self.pair_matrix(&algebra, g, k)
                    .is_none_or(|m| commutator_norm(&m, &sz2) < 1e-12)
            });
            let site_ok = self
                .site_matrix(&algebra, g)
                .is_none_or(|m| commutator_norm(&m, &algebra.sz) < 1e-12);
            pairs_ok && site_ok
        })
    }
}

fn commutator_norm<T: Real>(a: &DMatrix<Cplx<T>>, b: &DMatrix<Cplx<T>>) -> f64 {
    (a * b - b * a)
        .iter()
        .map(|z| modulus(*z).as_f64())
        .fold(0.0, f64::max)
}

/// Largest entry magnitude of `m - m^dagger`.
pub fn hermiticity_defect<T: Real>(m: &DMatrix<Cplx<T>>) -> f64 {
    let adj = m.adjoint();
    (m - adj)
        .iter()
        .map(|z| modulus(*z).as_f64())
        .fold(0.0, f64::max)
}

pub(crate) fn is_zero_matrix<T: Real>(m: &DMatrix<Cplx<T>>) -> bool {
    m.iter().all(|z| z.is_zero())
}
