//! `flocksim`: run, validate and post-process flocking scenarios.
//!
//! Exit status: 0 for a certified run, 2 when the monitor recorded
//! violations, 1 on any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use flocksim_core::scenario::Scenario;
use flocksim_core::trace::Trace;
use flocksim_core::{plots, sim, Error};

#[derive(Parser)]
#[command(name = "flocksim", version, about = "Bounded distributed flocking of unicycle robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trace.csv, trace.meta.json and plot data.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the step size in seconds.
        #[arg(long)]
        dt: Option<f64>,
        /// Override the horizon in seconds.
        #[arg(long = "T")]
        horizon: Option<f64>,
        /// Worker threads for the per-agent control evaluation.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a scenario without running it. Prints a JSON verdict.
    Validate { scenario: PathBuf },
    /// Regenerate plot data from an existing trace.
    Plots {
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_VIOLATIONS: u8 = 2;

fn load(path: &Path) -> Result<Scenario> {
    Scenario::from_file(path).with_context(|| format!("reading scenario {}", path.display()))
}

fn run(
    path: &Path,
    out: &Path,
    seed: Option<u64>,
    dt: Option<f64>,
    horizon: Option<f64>,
    threads: Option<usize>,
) -> Result<ExitCode> {
    let mut s = load(path)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(dt) = dt {
        s.dt_s = dt;
    }
    if let Some(t) = horizon {
        s.horizon_s = t;
    }
    if let Some(n) = threads {
        s.threads = n;
    }
    let prep = s.prepare()?;
    let (trace, failure) = match sim::run_prepared(&prep) {
        Ok(trace) => (trace, None),
        Err(aborted) => (aborted.trace, Some(aborted.cause)),
    };
    let csv = trace.write(out)?;
    if !trace.is_empty() {
        plots::emit_plots(&trace, out)?;
    }
    if let Some(cause) = failure {
        return Err(anyhow::Error::new(cause).context(format!("run aborted; partial trace in {}", csv.display())));
    }
    let report = trace.report();
    eprintln!(
        "{} rows, d_min {:.6} m, {} switches, {} violations -> {}",
        trace.rows.len(),
        report.d_min,
        report.switch_count,
        report.violations.len(),
        csv.display()
    );
    for v in report.violations.iter().take(10) {
        eprintln!("  step {} t={}: {}", v.step, v.t, v.kind.label());
    }
    Ok(if report.certified { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VIOLATIONS) })
}

fn validate(path: &Path) -> Result<ExitCode> {
    let s = load(path)?;
    match s.prepare() {
        Ok(prep) => {
            let verdict = serde_json::json!({
                "valid": true,
                "agents": s.agents,
                "initial_edges": prep.graph.edge_count(),
                "budget": prep.budget,
                "potential": prep.potential.params(),
            });
            println!("{}", serde_json::to_string_pretty(&verdict)?);
            Ok(ExitCode::SUCCESS)
        }
        Err(Error::Rejected { reason, detail }) => {
            let verdict = serde_json::json!({ "valid": false, "reason": reason.code(), "detail": detail });
            println!("{}", serde_json::to_string_pretty(&verdict)?);
            Ok(ExitCode::FAILURE)
        }
        Err(e) => Err(e.into()),
    }
}

fn plots_cmd(trace: &Path, out: &Path) -> Result<ExitCode> {
    let trace = Trace::read(trace).with_context(|| format!("reading trace {}", trace.display()))?;
    for path in plots::emit_plots(&trace, out)? {
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scenario, out, seed, dt, horizon, threads } => run(scenario, out, *seed, *dt, *horizon, *threads),
        Command::Validate { scenario } => validate(scenario),
        Command::Plots { trace, out } => plots_cmd(trace, out),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
