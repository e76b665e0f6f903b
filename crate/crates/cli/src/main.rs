use std::path::PathBuf;
use std::process::ExitCode;

use bwsearch_cli::check::run_checks;
use bwsearch_cli::{build_problem, exit, load_config, reconstruct, run_scan, with_threads, CliError, Overrides, ED_LIMIT_ENV};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bwsearch", version, about = "Reconstruct parent Hamiltonians from entanglement data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the relative entropy and report the parent Hamiltonian.
    Reconstruct,
    /// Evaluate the relative entropy on a grid of (beta, Delta or g).
    Scan,
    /// Run the derivative, normalization, oracle and convexity checks.
    Check,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Convergence threshold on the step error.
    #[arg(long, global = true)]
    threshold: Option<f64>,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let overrides = Overrides {
        seed: cli.common.seed,
        out: cli.common.out,
        threads: cli.common.threads,
        threshold: cli.common.threshold,
        ed_limit: std::env::var(ED_LIMIT_ENV).ok(),
    };
    let config = load_config(cli.common.config.as_deref(), &overrides)?;
    with_threads(config.threads, || match cli.command {
        Command::Reconstruct => {
            let outcome = reconstruct(&config)?;
            let s = &outcome.summary;
            println!("status: {} after {} steps (S = {:.6e}, epsilon = {:.3e})", s.status, s.steps, s.relative_entropy, s.epsilon);
            if let Some(beta) = s.beta {
                println!("beta = {beta:.8}");
            }
            for c in &s.couplings {
                if let Some(j) = c.j {
                    println!("  J[{}] = {j:.8}", c.label);
                }
            }
            println!("wrote {}", config.output.dir.display());
            Ok(outcome.exit_code)
        }
        Command::Scan => {
            let land = run_scan(&config)?;
            if let Some(best) = land.argmin() {
                let coords: Vec<String> = config
                    .scan
                    .parameters
                    .iter()
                    .zip(&best.params)
                    .map(|(p, v)| format!("{p} = {v:.6}"))
                    .collect();
                println!("argmin: {} (S = {:.6e})", coords.join(", "), best.value);
            }
            println!("wrote {}", config.output.dir.join("scan.csv").display());
            Ok(exit::OK)
        }
        Command::Check => {
            let problem = build_problem(&config)?;
            let results = run_checks(&config, &problem)?;
            for r in &results {
                println!("[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            Ok(if results.iter().all(|r| r.passed) { exit::OK } else { exit::FAILURE })
        }
    })?
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("bwsearch: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
