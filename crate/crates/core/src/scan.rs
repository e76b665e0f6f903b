//! Relative-entropy landscapes over one or two ansatz parameters.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::operators::{BasisKind, OperatorBasis};
use crate::relent::{DataMoments, Order, RelEntError, SubsystemModel};
use crate::scalar::Real;

/// Scan coordinate. `Ratio` is the anisotropy `Delta` for spin-chain bases and the
/// layer coupling ratio `g` for the bilayer basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    Beta,
    Ratio,
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parameter::Beta => "beta",
            Parameter::Ratio => "ratio",
        })
    }
}

impl FromStr for Parameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "beta" => Ok(Parameter::Beta),
            "ratio" | "delta" | "g" => Ok(Parameter::Ratio),
            other => Err(format!("unknown scan parameter {other:?} (expected beta, delta or g)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub parameter: Parameter,
    pub values: Vec<f64>,
}

/// `lo, lo + step, ...` up to `hi` inclusive, without accumulating rounding.
pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || hi < lo {
        return Vec::new();
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

/// Couplings `beta * (XXZ or bilayer weights at ratio)` for the given basis.
pub fn couplings(basis: &OperatorBasis, beta: f64, ratio: f64) -> Vec<f64> {
    let shape = match basis.kind() {
        BasisKind::Bilayer => basis.bilayer_weights(ratio),
        BasisKind::Full | BasisKind::U1 => basis.xxz_weights(ratio),
    }
    .expect("every basis kind has a one-ratio family");
    shape.into_iter().map(|x| beta * x).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    /// Parameter values in axis order.
    pub params: Vec<f64>,
    pub value: f64,
    pub gradient_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    pub parameters: Vec<Parameter>,
    /// Row-major over the axes, first axis slowest.
    pub points: Vec<ScanPoint>,
}

impl Landscape {
    /// Lowest point; the earliest one on exact ties.
    pub fn argmin(&self) -> Option<&ScanPoint> {
        self.points
            .iter()
            .reduce(|best, p| if p.value < best.value { p } else { best })
    }

    /// Number of interior strict local minima along a one-dimensional scan.
    pub fn local_minima_1d(&self) -> usize {
        let v: Vec<f64> = self.points.iter().map(|p| p.value).collect();
        (0..v.len())
            .filter(|&i| (i == 0 || v[i] < v[i - 1]) && (i + 1 == v.len() || v[i] < v[i + 1]))
            .count()
    }
}

/// Evaluate `S` on the grid spanned by `axes`; parameters without an axis take
/// the value in `fixed` (`beta`, `ratio`).
pub fn scan<T: Real>(
    model: &SubsystemModel<T>,
    data: &DataMoments<T>,
    basis: &OperatorBasis,
    axes: &[Axis],
    fixed: (f64, f64),
    with_gradient: bool,
) -> Result<Landscape, RelEntError> {
    let mut grid_points: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        grid_points = grid_points
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    let order = if with_gradient { Order::Gradient } else { Order::Value };
    let points = grid_points
        .into_par_iter()
        .map(|params| {
            let (mut beta, mut ratio) = fixed;
            for (axis, &v) in axes.iter().zip(&params) {
                match axis.parameter {
                    Parameter::Beta => beta = v,
                    Parameter::Ratio => ratio = v,
                }
            }
            let w: Vec<T> = couplings(basis, beta, ratio).into_iter().map(T::of).collect();
            let r = model.evaluate(data, &w, order)?;
            Ok(ScanPoint {
                params,
                value: r.value.as_f64(),
                gradient_norm: with_gradient.then(|| r.gradient.norm().as_f64()),
            })
        })
        .collect::<Result<Vec<_>, RelEntError>>()?;
    Ok(Landscape {
        parameters: axes.iter().map(|a| a.parameter).collect(),
        points,
    })
}
