//! Descent over the coupling space: adaptive-step gradient descent and Newton
//! descent on the relative entropy, and extraction of `(beta, J)` from the result.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::operators::OperatorBasis;
use crate::relent::{DataMoments, Order, RelEntError, RelEntReport, SubsystemModel};
use crate::scalar::Real;
use crate::spectra::SpectraError;

/// Couplings with `|J| / |beta|` below this are reported as zero.
pub const ZERO_COUPLING: f64 = 1e-3;
/// Reference couplings smaller than this cannot fix the normalization.
pub const REFERENCE_FLOOR: f64 = 1e-6;
/// Allowed increase of `S` on an accepted step.
pub const MONOTONE_SLACK: f64 = 1e-12;
/// Terminal `S` above this means the data is not a Gibbs state of the ansatz.
pub const RESIDUAL_ENTROPY_FLAG: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    RelEnt(#[from] RelEntError),
    #[error("no coupling large enough to fix the normalization (largest |w| = {0:e})")]
    NoReference(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    AdaptiveGd,
    Newton,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::AdaptiveGd => "adaptive-gd",
            Method::Newton => "newton",
        })
    }
}

impl FromStr for Method {
    type Err = OptimizeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adaptive-gd" | "gd" => Ok(Method::AdaptiveGd),
            "newton" => Ok(Method::Newton),
            other => Err(OptimizeError::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Initial step factor.
    pub eta0: f64,
    /// Convergence threshold on the step error.
    pub threshold: f64,
    pub max_steps: usize,
    /// Initial couplings are drawn uniformly from `[init_low, init_high]`.
    pub init_low: f64,
    pub init_high: f64,
    pub seed: u64,
    /// The update norm is stationary when it moved by less than `stationary_tol`
    /// (relative) over the last `stationary_window` steps.
    pub stationary_window: usize,
    pub stationary_tol: f64,
    /// With `Some(r)`, a stationary update norm only counts when the net
    /// displacement over the window is below `r` times the path length, so
    /// steady progress along a shallow valley keeps its step. `None` halves on
    /// the update norm alone.
    pub oscillation_ratio: Option<f64>,
    /// Newton: diagonal shift floor for the Hessian.
    pub ridge: f64,
    pub max_halvings: usize,
    /// When set, convergence also needs `|S_n - S_{n-1}|` below this.
    pub entropy_tol: Option<f64>,
    /// Coordinates held at their initial value.
    pub frozen: Vec<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: Method::AdaptiveGd,
            eta0: 4.0,
            threshold: 1e-3,
            max_steps: 1000,
            init_low: 2.0,
            init_high: 6.0,
            seed: 0,
            stationary_window: 3,
            stationary_tol: 0.01,
            oscillation_ratio: Some(0.5),
            ridge: 1e-8,
            max_halvings: 30,
            entropy_tol: None,
            frozen: Vec::new(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |m: &str| Err(OptimizeError::InvalidConfig(m.into()));
        if !(self.threshold > 0.0) {
            return bad("threshold must be positive");
        }
        if !(self.eta0 > 0.0) {
            return bad("eta0 must be positive");
        }
        if !(self.init_low < self.init_high) || !self.init_low.is_finite() || !self.init_high.is_finite() {
            return bad("initial interval needs low < high");
        }
        if self.stationary_window < 2 {
            return bad("stationary window must cover at least 2 steps");
        }
        if !(self.ridge > 0.0) {
            return bad("ridge must be positive");
        }
        if self.oscillation_ratio.is_some_and(|r| !(r > 0.0 && r <= 1.0)) {
            return bad("oscillation ratio must lie in (0, 1]");
        }
        if self.entropy_tol.is_some_and(|t| !(t > 0.0)) {
            return bad("entropy tolerance must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Converged,
    MaxSteps,
    CapacityError(String),
}

impl Status {
    pub fn is_converged(&self) -> bool {
        *self == Status::Converged
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Converged => f.write_str("converged"),
            Status::MaxSteps => f.write_str("max-steps"),
            Status::CapacityError(m) => write!(f, "capacity-error: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub w: Vec<f64>,
    pub value: f64,
    pub error: f64,
    /// Step factor (adaptive-gd) or step length (newton) in force at this step.
    pub eta: f64,
    /// Wall time since the start of the run.
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub status: Status,
}

impl Trajectory {
    pub fn last(&self) -> &StepRecord {
        self.records.last().expect("a trajectory holds its starting point")
    }

    pub fn final_couplings(&self) -> &[f64] {
        &self.last().w
    }

    pub fn steps(&self) -> usize {
        self.last().step
    }

    /// First step at which `pred` holds, if any.
    pub fn first_step(&self, pred: impl Fn(&StepRecord) -> bool) -> Option<usize> {
        self.records.iter().find(|r| pred(r)).map(|r| r.step)
    }
}

/// True when a terminal relative entropy is too large to call the fit exact.
pub fn nonzero_divergence(value: f64) -> bool {
    value > RESIDUAL_ENTROPY_FLAG
}

/// Uniform draws on the configured interval, one per coupling group.
pub fn init_couplings(config: &OptimizerConfig, groups: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..groups)
        .map(|_| rng.random_range(config.init_low..=config.init_high))
        .collect()
}

/// `||eta * gradient||`.
pub fn step_error<T: Real>(gradient: &DVector<T>, eta: T) -> T {
    gradient.norm() * eta.abs()
}

fn to_f64<T: Real>(v: &DVector<T>) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

struct Run<'a, T: Real> {
    model: &'a SubsystemModel<T>,
    data: &'a DataMoments<T>,
    config: &'a OptimizerConfig,
    free: Vec<bool>,
    start: Instant,
    records: Vec<StepRecord>,
}

enum Eval<T: Real> {
    Ok(RelEntReport<T>),
    Capacity(String),
}

impl<'a, T: Real> Run<'a, T> {
    fn new(
        model: &'a SubsystemModel<T>,
        data: &'a DataMoments<T>,
        w0: &[T],
        config: &'a OptimizerConfig,
    ) -> Result<Self, OptimizeError> {
        config.validate()?;
        let k = model.group_count();
        if w0.len() != k {
            return Err(RelEntError::GroupCount {
                expected: k,
                got: w0.len(),
            }
            .into());
        }
        let mut free = vec![true; k];
        for &i in &config.frozen {
            *free
                .get_mut(i)
                .ok_or_else(|| OptimizeError::InvalidConfig(format!("frozen index {i} out of range")))? = false;
        }
        Ok(Run {
            model,
            data,
            config,
            free,
            start: Instant::now(),
            records: Vec::new(),
        })
    }

    fn eval(&self, w: &DVector<T>, order: Order) -> Result<Eval<T>, OptimizeError> {
        match self.model.evaluate(self.data, w.as_slice(), order) {
            Ok(mut r) => {
                for (g, &f) in r.gradient.iter_mut().zip(&self.free) {
                    if !f {
                        *g = T::zero();
                    }
                }
                Ok(Eval::Ok(r))
            }
            Err(RelEntError::Spectra(e @ SpectraError::Capacity { .. })) => Ok(Eval::Capacity(e.to_string())),
            Err(e) => Err(e.into()),
        }
    }

    fn record(&mut self, step: usize, w: &DVector<T>, value: T, error: T, eta: T) {
        self.records.push(StepRecord {
            step,
            w: to_f64(w),
            value: value.as_f64(),
            error: error.as_f64(),
            eta: eta.as_f64(),
            ms: self.start.elapsed().as_secs_f64() * 1e3,
        });
    }

    fn finish(self, status: Status) -> Trajectory {
        Trajectory {
            records: self.records,
            status,
        }
    }

    fn converged(&self, error: T, value: T, previous: Option<T>) -> bool {
        if error >= T::of(self.config.threshold) {
            return false;
        }
        match self.config.entropy_tol {
            None => true,
            Some(tol) => previous.is_some_and(|p| (value - p).abs() < T::of(tol)),
        }
    }

    fn increased(&self, new: T, old: T) -> bool {
        new > old + T::of(MONOTONE_SLACK)
    }
}

macro_rules! eval_or_stop {
    ($run:expr, $w:expr, $order:expr) => {
        match $run.eval($w, $order)? {
            Eval::Ok(r) => r,
            Eval::Capacity(m) => return Ok($run.finish(Status::CapacityError(m))),
        }
    };
}

/// Adaptive-step gradient descent `w <- w - eta grad S`.
///
/// `eta` halves whenever the update norm exceeds the running reference (which then
/// takes the new norm) or stops moving; a step that raises `S` is retried with half
/// the step factor.
pub fn adaptive_gd<T: Real>(
    model: &SubsystemModel<T>,
    data: &DataMoments<T>,
    w0: &[T],
    config: &OptimizerConfig,
) -> Result<Trajectory, OptimizeError> {
    let mut run = Run::new(model, data, w0, config)?;
    let mut w = DVector::from_column_slice(w0);
    let mut eta = T::of(config.eta0);
    let mut reference = T::of(10.0);
    // (update norm, couplings before the update)
    let mut history: VecDeque<(T, DVector<T>)> = VecDeque::with_capacity(config.stationary_window);

    let mut current = eval_or_stop!(run, &w, Order::Gradient);
    let mut previous_value: Option<T> = None;
    let mut error = step_error(&current.gradient, eta);
    run.record(0, &w, current.value, error, eta);

    for step in 1..=config.max_steps {
        if run.converged(error, current.value, previous_value) {
            return Ok(run.finish(Status::Converged));
        }
        let mut halvings = 0;
        let (next_w, next) = loop {
            let candidate = &w - &current.gradient * eta;
            let r = eval_or_stop!(run, &candidate, Order::Gradient);
            if !run.increased(r.value, current.value) {
                break (candidate, r);
            }
            halvings += 1;
            if halvings > config.max_halvings {
                return Ok(run.finish(Status::MaxSteps));
            }
            eta /= T::of(2.0);
        };
        let update = (&next_w - &w).norm();

        if history.len() == config.stationary_window {
            history.pop_front();
        }
        history.push_back((update, w.clone()));
        let stationary = history.len() == config.stationary_window && {
            let hi = history.iter().fold(T::zero(), |a, b| a.max(b.0));
            let lo = history.iter().fold(hi, |a, b| a.min(b.0));
            let flat = hi - lo < T::of(config.stationary_tol) * hi;
            flat && config.oscillation_ratio.is_none_or(|r| {
                let path = history.iter().fold(T::zero(), |a, b| a + b.0);
                (&next_w - &history[0].1).norm() < T::of(r) * path
            })
        };
        if update > reference || stationary {
            eta /= T::of(2.0);
            reference = update;
            history.clear();
        }

        previous_value = Some(current.value);
        w = next_w;
        current = next;
        error = step_error(&current.gradient, eta);
        run.record(step, &w, current.value, error, eta);
    }
    let status = if run.converged(error, current.value, previous_value) {
        Status::Converged
    } else {
        Status::MaxSteps
    };
    Ok(run.finish(status))
}

/// Newton direction on the free coordinates, with the Hessian shifted to be safely
/// positive definite when its smallest eigenvalue falls below the ridge.
fn newton_direction<T: Real>(hessian: &DMatrix<T>, gradient: &DVector<T>, free: &[bool], ridge: T) -> DVector<T> {
    let idx: Vec<usize> = (0..free.len()).filter(|&i| free[i]).collect();
    let n = idx.len();
    let h = DMatrix::from_fn(n, n, |i, j| hessian[(idx[i], idx[j])]);
    let g = DVector::from_fn(n, |i, _| gradient[idx[i]]);
    let eig = SymmetricEigen::new(h);
    let min = eig.eigenvalues.iter().copied().fold(T::max_value().expect("bounded"), |a, b| a.min(b));
    let shift = if min < ridge { ridge + (-min).max(T::zero()) } else { T::zero() };
    // solve in the eigenbasis: d = V (Lambda + shift)^-1 V^T g
    let coeffs = eig.eigenvectors.transpose() * g;
    let scaled = DVector::from_fn(n, |i, _| coeffs[i] / (eig.eigenvalues[i] + shift));
    let d_free = &eig.eigenvectors * scaled;
    let mut d = DVector::zeros(free.len());
    for (k, &i) in idx.iter().enumerate() {
        d[i] = d_free[k];
    }
    d
}

/// Newton descent `w <- w - Xi^-1 grad S` with the Kubo-Mori Hessian `Xi`.
/// The step error is `||Xi^-1 grad S||`.
pub fn newton<T: Real>(
    model: &SubsystemModel<T>,
    data: &DataMoments<T>,
    w0: &[T],
    config: &OptimizerConfig,
) -> Result<Trajectory, OptimizeError> {
    let mut run = Run::new(model, data, w0, config)?;
    let ridge = T::of(config.ridge);
    let mut w = DVector::from_column_slice(w0);
    let mut current = eval_or_stop!(run, &w, Order::Hessian);
    let mut previous_value: Option<T> = None;
    let mut length = T::one();

    for step in 0..=config.max_steps {
        let hessian = current.hessian.as_ref().expect("requested");
        let mut direction = newton_direction(hessian, &current.gradient, &run.free, ridge);
        let error = direction.norm();
        if step == 0 {
            run.record(0, &w, current.value, error, length);
        } else {
            run.records.last_mut().expect("recorded").error = error.as_f64();
        }
        if run.converged(error, current.value, previous_value) {
            return Ok(run.finish(Status::Converged));
        }
        if step == config.max_steps {
            break;
        }
        // not a descent direction: fall back to a plain gradient step
        if current.gradient.dot(&direction) <= T::zero() {
            direction = &current.gradient * T::of(config.eta0);
        }
        length = T::one();
        let mut halvings = 0;
        let (next_w, next) = loop {
            let candidate = &w - &direction * length;
            let r = eval_or_stop!(run, &candidate, Order::Hessian);
            if !run.increased(r.value, current.value) {
                break (candidate, r);
            }
            halvings += 1;
            if halvings > config.max_halvings {
                return Ok(run.finish(Status::MaxSteps));
            }
            length /= T::of(2.0);
        };
        previous_value = Some(current.value);
        w = next_w;
        current = next;
        // error filled in at the top of the next iteration
        run.record(step + 1, &w, current.value, T::zero(), length);
    }
    Ok(run.finish(Status::MaxSteps))
}

/// Run the configured method.
pub fn minimize<T: Real>(
    model: &SubsystemModel<T>,
    data: &DataMoments<T>,
    w0: &[T],
    config: &OptimizerConfig,
) -> Result<Trajectory, OptimizeError> {
    match config.method {
        Method::AdaptiveGd => adaptive_gd(model, data, w0, config),
        Method::Newton => newton(model, data, w0, config),
    }
}

/// Independent runs from random starts, one per seed, in seed order.
pub fn minimize_seeds<T: Real>(
    model: &SubsystemModel<T>,
    data: &DataMoments<T>,
    config: &OptimizerConfig,
    seeds: &[u64],
) -> Result<Vec<Trajectory>, OptimizeError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = OptimizerConfig {
                seed,
                ..config.clone()
            };
            let w0: Vec<T> = init_couplings(&cfg, model.group_count())
                .into_iter()
                .map(T::of)
                .collect();
            minimize(model, data, &w0, &cfg)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub label: String,
    pub w: f64,
    /// `w / beta`, zeroed when below the reporting floor.
    pub j: f64,
}

/// `(beta, J)` read off converged couplings `w_alpha = beta J_alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParentReport {
    pub beta: f64,
    pub reference: String,
    /// Set when the basis reference coupling was too small and another group fixed the scale.
    pub substituted_from: Option<String>,
    pub couplings: Vec<Coupling>,
}

impl ParentReport {
    pub fn j(&self, label: &str) -> Option<f64> {
        self.couplings.iter().find(|c| c.label == label).map(|c| c.j)
    }

    /// The reconstructed Hamiltonian with uniform weights, one term per surviving group.
    pub fn hamiltonian(&self) -> String {
        let terms: Vec<String> = self
            .couplings
            .iter()
            .filter(|c| c.j != 0.0)
            .map(|c| format!("{:+.6} [{}]", c.j, c.label))
            .collect();
        if terms.is_empty() {
            "H_rec = 0".into()
        } else {
            format!("H_rec = sum_r ( {} )", terms.join(" "))
        }
    }
}

impl fmt::Display for ParentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "beta = {:.8} (from {})", self.beta, self.reference)?;
        if let Some(orig) = &self.substituted_from {
            writeln!(f, "reference {orig} vanished; normalized by {} instead", self.reference)?;
        }
        for c in &self.couplings {
            writeln!(f, "  J[{}] = {:.8}   (w = {:.10})", c.label, c.j, c.w)?;
        }
        write!(f, "{}", self.hamiltonian())
    }
}

pub fn extract_parent(w: &[f64], basis: &OperatorBasis) -> Result<ParentReport, OptimizeError> {
    if w.len() != basis.group_count() {
        return Err(RelEntError::GroupCount {
            expected: basis.group_count(),
            got: w.len(),
        }
        .into());
    }
    let groups = basis.groups();
    let preferred = basis.reference_group();
    let (reference, substituted_from) = if w[preferred].abs() >= REFERENCE_FLOOR {
        (preferred, None)
    } else {
        let best = (0..w.len())
            .filter(|&i| i != preferred && groups[i].symmetric)
            .max_by(|&a, &b| w[a].abs().partial_cmp(&w[b].abs()).expect("finite couplings"));
        match best {
            Some(i) if w[i].abs() >= REFERENCE_FLOOR => (i, Some(groups[preferred].label.clone())),
            _ => {
                let largest = w.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                return Err(OptimizeError::NoReference(largest));
            }
        }
    };
    let beta = w[reference];
    let couplings = groups
        .iter()
        .zip(w)
        .map(|(g, &wa)| {
            let j = wa / beta;
            Coupling {
                label: g.label.clone(),
                w: wa,
                j: if j.abs() < ZERO_COUPLING { 0.0 } else { j },
            }
        })
        .collect();
    Ok(ParentReport {
        beta,
        reference: groups[reference].label.clone(),
        substituted_from,
        couplings,
    })
}
