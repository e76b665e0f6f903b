//! Run configuration: one TOML file with `[model]`, `[ansatz]`, `[optimizer]`,
//! `[scan]` and `[output]` tables. Every key has a default, so an empty file
//! describes the XXZ `L = 12`, `Delta = 1` reconstruction in the full basis.

use std::path::{Path, PathBuf};

use bwsearch::lattice::{Ramp, DEFAULT_ED_LIMIT};
use bwsearch::scan::{grid, Axis, Parameter};
use bwsearch::spectra::Sector;
use bwsearch::{BasisKind, Family, Method, ModelSpec, OptimizerConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable overriding `model.ed_limit`.
pub const ED_LIMIT_ENV: &str = "BWSEARCH_ED_LIMIT";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    /// A field holds an unusable value; the first member names the field.
    #[error("{0}: {1}")]
    Field(String, String),
}

fn field(name: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Field(name.into(), msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worker threads for scans and checks; 0 uses every core.
    pub threads: usize,
    pub model: ModelBlock,
    pub ansatz: AnsatzBlock,
    pub optimizer: OptimizerBlock,
    pub scan: ScanBlock,
    pub output: OutputBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            threads: 1,
            model: ModelBlock::default(),
            ansatz: AnsatzBlock::default(),
            optimizer: OptimizerBlock::default(),
            scan: ScanBlock::default(),
            output: OutputBlock::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBlock {
    /// xxz-half | xxz-one | bilayer
    pub family: String,
    /// Chain length, or the linear size of the bilayer cylinder.
    pub length: usize,
    /// Anisotropy of the XXZ chains.
    pub delta: f64,
    /// Inter/intra-layer coupling ratio of the bilayer.
    pub g: f64,
    /// Total `S^z` of the input state; the global ground state when absent.
    pub sz: Option<f64>,
    /// 0 for the ground state, 1 for the next state of the same sector, ...
    pub excitation: usize,
    /// Largest full Hilbert-space dimension accepted.
    pub ed_limit: u64,
}

impl Default for ModelBlock {
    fn default() -> Self {
        ModelBlock {
            family: "xxz-half".into(),
            length: 12,
            delta: 1.0,
            g: 2.522,
            sz: None,
            excitation: 0,
            ed_limit: DEFAULT_ED_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnsatzBlock {
    /// full | u1 | bilayer
    pub basis: String,
    /// bw | cft
    pub ramp: String,
    /// Added to every ramp weight. Only useful to check that the checks catch a broken ramp.
    pub ramp_offset: f64,
}

impl Default for AnsatzBlock {
    fn default() -> Self {
        AnsatzBlock {
            basis: "full".into(),
            ramp: "bw".into(),
            ramp_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerBlock {
    /// adaptive-gd | newton
    pub method: String,
    pub eta0: f64,
    pub threshold: f64,
    pub max_steps: usize,
    pub init_low: f64,
    pub init_high: f64,
    pub seed: u64,
    pub stationary_window: usize,
    pub stationary_tol: f64,
    /// 0 disables the displacement test and halves on a stationary update norm alone.
    pub oscillation_ratio: f64,
    pub ridge: f64,
    pub max_halvings: usize,
    /// 0 disables the extra `|dS|` convergence test.
    pub entropy_tol: f64,
    /// Group labels held at their initial value.
    pub frozen: Vec<String>,
}

impl Default for OptimizerBlock {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        OptimizerBlock {
            method: d.method.to_string(),
            eta0: d.eta0,
            threshold: d.threshold,
            max_steps: d.max_steps,
            init_low: d.init_low,
            init_high: d.init_high,
            seed: d.seed,
            stationary_window: d.stationary_window,
            stationary_tol: d.stationary_tol,
            oscillation_ratio: d.oscillation_ratio.unwrap_or(0.0),
            ridge: d.ridge,
            max_halvings: d.max_halvings,
            entropy_tol: d.entropy_tol.unwrap_or(0.0),
            frozen: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanBlock {
    /// One or two of beta, delta, g.
    pub parameters: Vec<String>,
    /// `[lo, hi]` per parameter.
    pub ranges: Vec<[f64; 2]>,
    pub steps: Vec<f64>,
    /// Value of beta when it is not scanned.
    pub beta: f64,
    /// Value of delta (or g) when it is not scanned; the model's value when absent.
    pub ratio: Option<f64>,
    /// Also record the gradient norm at each point.
    pub gradient: bool,
}

impl Default for ScanBlock {
    fn default() -> Self {
        ScanBlock {
            parameters: vec!["delta".into(), "beta".into()],
            ranges: vec![[0.5, 1.5], [3.0, 5.0]],
            steps: vec![0.05, 0.05],
            beta: 4.0,
            ratio: None,
            gradient: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
    /// Any of csv, json, txt.
    pub formats: Vec<String>,
    /// Write wall-clock milliseconds into the trajectory; off keeps the file reproducible.
    pub timing: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: PathBuf::from("bwsearch-out"),
            formats: vec!["csv".into(), "json".into(), "txt".into()],
            timing: false,
        }
    }
}

impl OutputBlock {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

/// Command-line values that replace file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub threshold: Option<f64>,
    pub ed_limit: Option<String>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(s) = o.seed {
            self.optimizer.seed = s;
        }
        if let Some(d) = &o.out {
            self.output.dir = d.clone();
        }
        if let Some(t) = o.threads {
            self.threads = t;
        }
        if let Some(t) = o.threshold {
            self.optimizer.threshold = t;
        }
        if let Some(v) = &o.ed_limit {
            self.model.ed_limit = v
                .trim()
                .parse()
                .map_err(|_| field("model.ed_limit", format!("{ED_LIMIT_ENV}={v:?} is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn family(&self) -> Result<Family, ConfigError> {
        self.model.family.parse().map_err(|e: String| field("model.family", e))
    }

    pub fn basis(&self) -> Result<BasisKind, ConfigError> {
        match self.ansatz.basis.as_str() {
            "full" => Ok(BasisKind::Full),
            "u1" => Ok(BasisKind::U1),
            "bilayer" => Ok(BasisKind::Bilayer),
            other => Err(field("ansatz.basis", format!("unknown basis {other:?} (expected full, u1 or bilayer)"))),
        }
    }

    pub fn ramp(&self) -> Result<Ramp, ConfigError> {
        match self.ansatz.ramp.as_str() {
            "bw" => Ok(Ramp::Bw),
            "cft" => Ok(Ramp::Cft),
            other => Err(field("ansatz.ramp", format!("unknown ramp {other:?} (expected bw or cft)"))),
        }
    }

    /// `Delta` or `g`, whichever the family uses.
    pub fn ratio(&self) -> Result<f64, ConfigError> {
        Ok(match self.family()? {
            Family::Bilayer => self.model.g,
            _ => self.model.delta,
        })
    }

    pub fn model_spec(&self) -> Result<ModelSpec, ConfigError> {
        let family = self.family()?;
        let m = &self.model;
        if m.length == 0 || m.length % 2 == 1 {
            return Err(field("model.length", format!("must be a positive even number, got {}", m.length)));
        }
        let ratio = self.ratio()?;
        if !ratio.is_finite() {
            let name = if family == Family::Bilayer { "model.g" } else { "model.delta" };
            return Err(field(name, "must be finite"));
        }
        let sector = match m.sz {
            None => None,
            Some(sz) => {
                let m2 = 2.0 * sz;
                if !m2.is_finite() || (m2 - m2.round()).abs() > 1e-9 {
                    return Err(field("model.sz", format!("{sz} is not a multiple of 1/2")));
                }
                Some(Sector::Magnetization(m2.round() as i32))
            }
        };
        let mut spec = ModelSpec::new(family, m.length, ratio);
        spec.sector = sector;
        spec.excitation = m.excitation;
        spec.ed_limit = m.ed_limit;
        spec.geometry().map_err(|e| field("model.length", e.to_string()))?;
        Ok(spec)
    }

    pub fn optimizer_config(&self, labels: &[String]) -> Result<OptimizerConfig, ConfigError> {
        let o = &self.optimizer;
        let method: Method = o.method.parse().map_err(|e| field("optimizer.method", format!("{e}")))?;
        let frozen = o
            .frozen
            .iter()
            .map(|l| {
                labels
                    .iter()
                    .position(|x| x == l)
                    .ok_or_else(|| field("optimizer.frozen", format!("no coupling group {l:?} (groups: {})", labels.join(", "))))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let cfg = OptimizerConfig {
            method,
            eta0: o.eta0,
            threshold: o.threshold,
            max_steps: o.max_steps,
            init_low: o.init_low,
            init_high: o.init_high,
            seed: o.seed,
            stationary_window: o.stationary_window,
            stationary_tol: o.stationary_tol,
            oscillation_ratio: (o.oscillation_ratio != 0.0).then_some(o.oscillation_ratio),
            ridge: o.ridge,
            max_halvings: o.max_halvings,
            entropy_tol: (o.entropy_tol != 0.0).then_some(o.entropy_tol),
            frozen,
        };
        cfg.validate().map_err(|e| field("optimizer", e.to_string()))?;
        Ok(cfg)
    }

    pub fn scan_axes(&self) -> Result<Vec<Axis>, ConfigError> {
        let s = &self.scan;
        if s.parameters.is_empty() || s.parameters.len() > 2 {
            return Err(field("scan.parameters", format!("need one or two parameters, got {}", s.parameters.len())));
        }
        if s.ranges.len() != s.parameters.len() {
            return Err(field("scan.ranges", "need one [lo, hi] pair per parameter"));
        }
        if s.steps.len() != s.parameters.len() {
            return Err(field("scan.steps", "need one step per parameter"));
        }
        let mut axes = Vec::new();
        for ((name, [lo, hi]), &step) in s.parameters.iter().zip(&s.ranges).zip(&s.steps) {
            let parameter: Parameter = name.parse().map_err(|e: String| field("scan.parameters", e))?;
            if axes.iter().any(|a: &Axis| a.parameter == parameter) {
                return Err(field("scan.parameters", format!("{name} appears twice")));
            }
            if !(step > 0.0) {
                return Err(field("scan.steps", format!("step for {name} must be positive")));
            }
            let values = grid(*lo, *hi, step);
            if values.is_empty() {
                return Err(field("scan.ranges", format!("range [{lo}, {hi}] for {name} is empty")));
            }
            axes.push(Axis { parameter, values });
        }
        Ok(axes)
    }

    pub fn validate_output(&self) -> Result<(), ConfigError> {
        for f in &self.output.formats {
            if !["csv", "json", "txt"].contains(&f.as_str()) {
                return Err(field("output.formats", format!("unknown format {f:?} (expected csv, json or txt)")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::default();
        c.model.sz = Some(0.0);
        c.optimizer.frozen = vec!["xy".into()];
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn odd_length_names_the_field() {
        let c = RunConfig::from_toml("[model]\nlength = 11\n").unwrap();
        match c.model_spec() {
            Err(ConfigError::Field(f, _)) => assert_eq!(f, "model.length"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[model]\nlenght = 8\n").is_err());
    }

    #[test]
    fn overrides_win() {
        let mut c = RunConfig::default();
        c.apply(&Overrides {
            seed: Some(9),
            threshold: Some(1e-6),
            ed_limit: Some("1024".into()),
            ..Overrides::default()
        })
        .unwrap();
        assert_eq!((c.optimizer.seed, c.optimizer.threshold, c.model.ed_limit), (9, 1e-6, 1024));
        assert!(matches!(c.model_spec(), Err(ConfigError::Field(f, _)) if f == "model.length"));
    }

    #[test]
    fn scan_validation() {
        let mut c = RunConfig::default();
        assert_eq!(c.scan_axes().unwrap()[0].values.len(), 21);
        c.scan.ranges[1] = [5.0, 3.0];
        assert!(matches!(c.scan_axes(), Err(ConfigError::Field(f, _)) if f == "scan.ranges"));
    }
}
