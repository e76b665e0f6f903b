//! Output files. Numbers in CSV files carry 17 significant digits, lines end in LF.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use bwsearch::optimize::Trajectory;
use bwsearch::scan::Landscape;
use bwsearch::ParentReport;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Scientific notation with 16 digits after the point.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingEntry {
    pub label: String,
    pub w: f64,
    /// `w / beta`, zeroed below the reporting floor; absent without a usable reference.
    pub j: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub converged: bool,
    pub status: String,
    pub seed: u64,
    pub steps: usize,
    pub relative_entropy: f64,
    pub epsilon: f64,
    /// Terminal relative entropy too large for the state to be a Gibbs state of the ansatz.
    pub nonzero_divergence: bool,
    pub beta: Option<f64>,
    pub reference: Option<String>,
    pub couplings: Vec<CouplingEntry>,
    pub input_energy: f64,
    pub input_degenerate: bool,
    pub config: RunConfig,
}

impl Summary {
    pub fn j(&self, label: &str) -> Option<f64> {
        self.couplings.iter().find(|c| c.label == label).and_then(|c| c.j)
    }
}

pub fn couplings(labels: &[String], w: &[f64], parent: Option<&ParentReport>) -> Vec<CouplingEntry> {
    labels
        .iter()
        .zip(w)
        .enumerate()
        .map(|(i, (label, &w))| CouplingEntry {
            label: label.clone(),
            w,
            j: parent.map(|p| p.couplings[i].j),
        })
        .collect()
}

pub fn write_trajectory(path: &Path, t: &Trajectory, timing: bool) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    let k = t.records.first().map_or(0, |r| r.w.len());
    let mut header = vec!["step".to_string()];
    header.extend((1..=k).map(|i| format!("w_{i}")));
    header.extend(["S", "epsilon", "eta", "ms"].map(String::from));
    write!(f, "{}\n", header.join(","))?;
    for r in &t.records {
        let mut row = vec![r.step.to_string()];
        row.extend(r.w.iter().map(|&x| num(x)));
        row.push(num(r.value));
        row.push(num(r.error));
        row.push(num(r.eta));
        row.push(num(if timing { r.ms } else { 0.0 }));
        write!(f, "{}\n", row.join(","))?;
    }
    f.flush()
}

/// `names` label the scanned axes in order.
pub fn write_landscape(path: &Path, land: &Landscape, names: &[String]) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    let mut header = names.to_vec();
    header.push("S".into());
    let with_grad = land.points.first().is_some_and(|p| p.gradient_norm.is_some());
    if with_grad {
        header.push("grad_norm".into());
    }
    write!(f, "{}\n", header.join(","))?;
    for p in &land.points {
        let mut row: Vec<String> = p.params.iter().map(|&x| num(x)).collect();
        row.push(num(p.value));
        if let Some(g) = p.gradient_norm {
            row.push(num(g));
        }
        write!(f, "{}\n", row.join(","))?;
    }
    f.flush()
}

pub fn write_json(path: &Path, summary: &Summary) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(std::io::Error::other)?;
    std::fs::write(path, text + "\n")
}

pub fn write_report(path: &Path, s: &Summary, parent: Option<&ParentReport>) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    let c = &s.config;
    writeln!(
        f,
        "model: {} L={} {}",
        c.model.family,
        c.model.length,
        if c.model.family == "bilayer" {
            format!("g={}", c.model.g)
        } else {
            format!("delta={}", c.model.delta)
        }
    )?;
    writeln!(f, "ansatz: basis {} ramp {}", c.ansatz.basis, c.ansatz.ramp)?;
    writeln!(f, "optimizer: {} seed {} threshold {:e}", c.optimizer.method, s.seed, c.optimizer.threshold)?;
    writeln!(f, "status: {} after {} steps", s.status, s.steps)?;
    writeln!(f, "S = {:.10e}, epsilon = {:.3e}", s.relative_entropy, s.epsilon)?;
    if s.nonzero_divergence {
        writeln!(f, "warning: relative entropy stays finite; the state is not reproduced by this ansatz")?;
    }
    match parent {
        Some(p) => writeln!(f, "{p}")?,
        None => writeln!(f, "no coupling large enough to fix beta")?,
    }
    f.flush()
}
