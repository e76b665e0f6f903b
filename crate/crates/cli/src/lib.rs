//! Library side of the `bwsearch` command: configuration, the three
//! subcommands and their output files.

pub mod check;
pub mod config;
pub mod output;

use std::fmt;
use std::path::Path;

use bwsearch::lattice::Ramp;
use bwsearch::optimize::{init_couplings, nonzero_divergence, OptimizeError, Status};
use bwsearch::problem::ProblemError;
use bwsearch::relent::{RelEntError, SubsystemModel};
use bwsearch::spectra::SpectraError;
use bwsearch::scan::{scan, Landscape};
use bwsearch::{extract_parent, minimize, BasisKind, Family, ProblemF64};

pub use config::{ConfigError, Overrides, RunConfig, ED_LIMIT_ENV};
pub use output::Summary;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// A check suite failed, the run did not converge, or a runtime error occurred.
    pub const FAILURE: i32 = 1;
    /// The configuration is invalid.
    pub const CONFIG: i32 = 2;
    /// A block exceeded the dense-diagonalization capacity.
    pub const CAPACITY: i32 = 3;
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Capacity(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Capacity(_) => exit::CAPACITY,
            CliError::Runtime(_) => exit::FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "invalid configuration: {e}"),
            CliError::Capacity(m) => write!(f, "capacity error: {m}"),
            CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

fn classify(capacity: bool, msg: String) -> CliError {
    if capacity {
        CliError::Capacity(msg)
    } else {
        CliError::Runtime(msg)
    }
}

fn relent_capacity(e: &RelEntError) -> bool {
    matches!(e, RelEntError::Spectra(SpectraError::Capacity { .. }))
}

impl From<RelEntError> for CliError {
    fn from(e: RelEntError) -> Self {
        classify(relent_capacity(&e), e.to_string())
    }
}

impl From<SpectraError> for CliError {
    fn from(e: SpectraError) -> Self {
        classify(matches!(e, SpectraError::Capacity { .. }), e.to_string())
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        let capacity = match &e {
            ProblemError::Spectra(s) => matches!(s, SpectraError::Capacity { .. }),
            ProblemError::RelEnt(r) => relent_capacity(r),
            _ => false,
        };
        classify(capacity, e.to_string())
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        let capacity = matches!(&e, OptimizeError::RelEnt(r) if relent_capacity(r));
        classify(capacity, e.to_string())
    }
}

/// Run `f` on a pool with the configured number of workers.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Input state, ansatz model and data moments for a validated configuration.
pub fn build_problem(config: &RunConfig) -> Result<ProblemF64, CliError> {
    let spec = config.model_spec()?;
    let basis = config.basis()?;
    let ramp = config.ramp()?;
    config.validate_output()?;
    if (basis == BasisKind::Bilayer) != (spec.family == Family::Bilayer) {
        return Err(ConfigError::Field(
            "ansatz.basis".into(),
            format!("basis {} does not fit model family {}", config.ansatz.basis, spec.family),
        )
        .into());
    }
    if basis == BasisKind::Bilayer && ramp == Ramp::Cft {
        return Err(ConfigError::Field("ansatz.ramp".into(), "the cft ramp is defined for chains only".into()).into());
    }
    let offset = config.ansatz.ramp_offset;
    if !offset.is_finite() {
        return Err(ConfigError::Field("ansatz.ramp_offset".into(), "must be finite".into()).into());
    }
    let mut problem = ProblemF64::new(&spec, basis, ramp)?;
    if offset != 0.0 {
        let g = &problem.input.geometry;
        problem.model = SubsystemModel::with_weights(g, &problem.basis, &|loc| g.ramp_weight(loc, ramp).map(|x| x + offset))
            ?;
        problem.data = problem.model.moments_from_state(g, &problem.input.state)?;
    }
    Ok(problem)
}

pub fn group_labels(problem: &ProblemF64) -> Vec<String> {
    problem.basis.groups().iter().map(|g| g.label.clone()).collect()
}

/// Result of `reconstruct`: the summary that was written and the exit code.
#[derive(Debug)]
pub struct ReconstructOutcome {
    pub summary: Summary,
    pub exit_code: i32,
}

pub fn reconstruct(config: &RunConfig) -> Result<ReconstructOutcome, CliError> {
    let problem = build_problem(config)?;
    let labels = group_labels(&problem);
    let opt = config.optimizer_config(&labels)?;
    let w0 = init_couplings(&opt, labels.len());
    let trajectory = minimize(&problem.model, &problem.data, &w0, &opt)?;

    let parent = extract_parent(trajectory.final_couplings(), &problem.basis).ok();
    let last = trajectory.last();
    let summary = Summary {
        converged: trajectory.status.is_converged(),
        status: trajectory.status.to_string(),
        seed: opt.seed,
        steps: trajectory.steps(),
        relative_entropy: last.value,
        epsilon: last.error,
        nonzero_divergence: nonzero_divergence(last.value),
        beta: parent.as_ref().map(|p| p.beta),
        reference: parent.as_ref().map(|p| p.reference.clone()),
        couplings: output::couplings(&labels, &last.w, parent.as_ref()),
        input_energy: problem.input.energy,
        input_degenerate: problem.input.degenerate,
        config: config.clone(),
    };

    let dir = &config.output.dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let out = &config.output;
    let io = |r: std::io::Result<()>, name: &str| r.map_err(|e| CliError::Runtime(format!("writing {name}: {e}")));
    if out.wants("csv") {
        io(output::write_trajectory(&dir.join("trajectory.csv"), &trajectory, out.timing), "trajectory.csv")?;
    }
    if out.wants("json") {
        io(output::write_json(&dir.join("summary.json"), &summary), "summary.json")?;
    }
    if out.wants("txt") {
        io(output::write_report(&dir.join("report.txt"), &summary, parent.as_ref()), "report.txt")?;
    }

    let exit_code = match trajectory.status {
        Status::Converged => exit::OK,
        Status::MaxSteps => exit::FAILURE,
        Status::CapacityError(_) => exit::CAPACITY,
    };
    Ok(ReconstructOutcome { summary, exit_code })
}

pub fn run_scan(config: &RunConfig) -> Result<Landscape, CliError> {
    let problem = build_problem(config)?;
    let axes = config.scan_axes()?;
    let ratio = config.scan.ratio.unwrap_or(config.ratio()?);
    let land = scan(
        &problem.model,
        &problem.data,
        &problem.basis,
        &axes,
        (config.scan.beta, ratio),
        config.scan.gradient,
    )
    ?;
    let dir = &config.output.dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    output::write_landscape(&dir.join("scan.csv"), &land, &config.scan.parameters)
        .map_err(|e| CliError::Runtime(format!("writing scan.csv: {e}")))?;
    Ok(land)
}

/// Load a config file (or the defaults), then apply flags and the environment.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut config = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    config.apply(overrides)?;
    Ok(config)
}
