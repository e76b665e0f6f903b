//! Verification suites run by `bwsearch check` against the configured model.

use bwsearch::relent::{RelEntError, SubsystemModel};
use bwsearch::scan::couplings;
use bwsearch::spectra::reduced_density_matrix;
use bwsearch::verify::{check_gradient, check_hessian, convexity_violation, psd_margin, FD_STEP};
use bwsearch::{Cplx, ProblemF64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::CliError;

pub const GRADIENT_TOL: f64 = 1e-6;
pub const HESSIAN_TOL: f64 = 1e-5;
pub const PSD_TOL: f64 = 1e-8;
pub const NORMALIZATION_TOL: f64 = 1e-12;
pub const ORACLE_TOL: f64 = 1e-12;
pub const CONVEXITY_TOL: f64 = 1e-9;
/// Gradient norm allowed at the generating couplings of synthetic Gibbs data.
pub const STATIONARITY_TOL: f64 = 1e-8;
/// Largest full Hilbert space handed to the reshape oracle.
pub const ORACLE_DIM: usize = 1 << 16;

const POINTS: usize = 8;
const PAIRS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn draws(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..k).map(|_| rng.random_range(-1.0..5.0)).collect()).collect()
}

fn max(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

pub fn run_checks(config: &RunConfig, problem: &ProblemF64) -> Result<Vec<SuiteResult>, CliError> {
    let model = &problem.model;
    let data = &problem.data;
    let k = model.group_count();
    let mut rng = ChaCha8Rng::seed_from_u64(config.optimizer.seed);
    let points = draws(&mut rng, POINTS, k);
    let mut out = Vec::new();

    // Finite differences only see the model's own ramp, so the gradient suite
    // also checks stationarity at the couplings that generated synthetic data
    // with the reference ramp.
    let fd = points
        .par_iter()
        .map(|w| check_gradient(model, data, w, FD_STEP).map(|c| c.relative_error))
        .collect::<Result<Vec<_>, RelEntError>>()?;
    let fd = max(fd);
    let g = &problem.input.geometry;
    let reference = SubsystemModel::<f64>::new(g, &problem.basis, problem.ramp)?;
    let w_star = couplings(&problem.basis, 4.0, config.ratio()?);
    let rho = reference.gibbs(&w_star)?.density_matrix();
    let synthetic = model.moments_from_density(&rho)?;
    let stationary = model.gradient(&synthetic, &w_star)?.norm();
    out.push(SuiteResult {
        name: "gradient",
        passed: fd < GRADIENT_TOL && stationary < STATIONARITY_TOL,
        detail: format!(
            "max relative error vs finite differences {fd:.2e} (< {GRADIENT_TOL:e}); |grad S| at generating couplings {stationary:.2e} (< {STATIONARITY_TOL:e})"
        ),
    });

    let hess = points[..POINTS / 2]
        .par_iter()
        .map(|w| {
            let c = check_hessian(model, data, w, FD_STEP)?;
            let margin = psd_margin(&model.hessian(data, w)?);
            Ok((c.relative_error, margin))
        })
        .collect::<Result<Vec<_>, RelEntError>>()?;
    let err = max(hess.iter().map(|h| h.0));
    let margin = hess.iter().map(|h| h.1).fold(f64::INFINITY, f64::min);
    out.push(SuiteResult {
        name: "hessian",
        passed: err < HESSIAN_TOL && margin >= -PSD_TOL,
        detail: format!(
            "max relative error vs gradient Jacobian {err:.2e} (< {HESSIAN_TOL:e}); min eigenvalue / norm {margin:.2e} (>= -{PSD_TOL:e})"
        ),
    });

    let mut worst = 0.0f64;
    for w in &points {
        let sigma = model.gibbs(w)?;
        let dm = sigma.density_matrix();
        let negative = dm.spectrum().iter().fold(0.0f64, |m, &p| m.max(-p));
        worst = worst
            .max((sigma.trace() - 1.0).abs())
            .max((dm.trace() - 1.0).abs())
            .max(dm.hermiticity_defect())
            .max(negative);
    }
    out.push(SuiteResult {
        name: "gibbs-normalization",
        passed: worst < NORMALIZATION_TOL,
        detail: format!("max |Tr sigma - 1|, Hermiticity defect, negative weight {worst:.2e} (< {NORMALIZATION_TOL:e})"),
    });

    let rdm = reduced_density_matrix(&problem.input.state, g.bipartition())?;
    let routes = model.moments_from_density(&rdm)?;
    let moment_gap = (&routes.moments - &data.moments).amax() + (routes.neg_entropy - data.neg_entropy).abs();
    let full_dim = g.hilbert_dim();
    let (reshape_gap, note) = if full_dim <= ORACLE_DIM as f64 {
        let psi = problem.input.state.to_full();
        let dim_a = g.spin().dim().pow(g.n_sites_a() as u32);
        let dim_b = psi.len() / dim_a;
        let m = DMatrix::<Cplx<f64>>::from_fn(dim_a, dim_b, |a, b| psi[a * dim_b + b]);
        let oracle = &m * m.adjoint();
        ((rdm.to_dense_full() - oracle).camax(), String::new())
    } else {
        (0.0, format!("; reshape oracle skipped above dimension {ORACLE_DIM}"))
    };
    out.push(SuiteResult {
        name: "partial-trace",
        passed: reshape_gap < ORACLE_TOL && moment_gap < 1e-10,
        detail: format!(
            "reduced density matrix vs reshape oracle {reshape_gap:.2e} (< {ORACLE_TOL:e}); moments from RDM vs full lattice {moment_gap:.2e} (< 1e-10){note}"
        ),
    });

    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..PAIRS)
        .map(|_| {
            let mut d = draws(&mut rng, 2, k);
            let b = d.pop().expect("two draws");
            (d.pop().expect("two draws"), b)
        })
        .collect();
    let viol = pairs
        .par_iter()
        .map(|(a, b)| convexity_violation(model, data, a, b))
        .collect::<Result<Vec<_>, RelEntError>>()?;
    let viol = max(viol);
    out.push(SuiteResult {
        name: "convexity",
        passed: viol <= CONVEXITY_TOL,
        detail: format!("max violation over {PAIRS} segments {viol:.2e} (<= {CONVEXITY_TOL:e})"),
    });
    Ok(out)
}
