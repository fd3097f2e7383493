use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mpd3_core::harness::{
    read_trace, render_density, run_with, summarize, write_snapshot, write_trace, DecompositionMode, ExecMode, Scenario,
};
use mpd3_core::oracle::{audit_trace, AuditOptions};

#[derive(Parser)]
#[command(name = "mpd3", version, about = "Dynamic Voronoi load balancing on a simulated cluster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Mpd3,
    Static,
    Frozen,
}

#[derive(Clone, Copy, ValueEnum)]
enum Exec {
    Virtual,
    Measured,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trace.csv, snapshots and density maps.
    Run {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        snapshot_every: Option<u64>,
        #[arg(long, value_enum, default_value = "virtual")]
        exec: Exec,
    },
    /// Parse and check a scenario file.
    Validate { scenario: PathBuf },
    /// Mean elapsed time per step and final imbalance of two traces.
    Compare { a: PathBuf, b: PathBuf },
    /// Check a trace's invariants.
    Audit {
        trace: PathBuf,
        /// Slack in seconds for timing checks (use ~1e-3 for measured runs).
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { scenario, mode, seed, out, snapshot_every, exec } => {
            let mut s = Scenario::load(&scenario)?;
            if let Some(m) = mode {
                s.mode = match m {
                    Mode::Mpd3 => DecompositionMode::Mpd3,
                    Mode::Static => DecompositionMode::StaticRect,
                    Mode::Frozen => DecompositionMode::VoronoiFrozen,
                };
            }
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(k) = snapshot_every {
                s.snapshot_every = k;
            }
            let exec = match exec {
                Exec::Virtual => ExecMode::Virtual,
                Exec::Measured => ExecMode::Measured,
            };
            run_scenario(&s, exec, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { scenario } => {
            let s = Scenario::load(&scenario)?;
            println!("{}: ok ({} workers, {} steps, mode {})", s.name, s.n_workers(), s.n_steps, s.mode.as_str());
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { a, b } => {
            let sa = summarize(&read_trace(&a)?);
            let sb = summarize(&read_trace(&b)?);
            println!("{:<40} {:>8} {:>16} {:>16}", "trace", "steps", "mean_elapsed_s", "final_imbalance");
            for (p, s) in [(&a, sa), (&b, sb)] {
                println!("{:<40} {:>8} {:>16.6e} {:>16.4}", p.display(), s.steps, s.mean_elapsed, s.final_imbalance);
            }
            if sa.mean_elapsed > 0.0 {
                println!("elapsed ratio b/a: {:.4}", sb.mean_elapsed / sa.mean_elapsed);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit { trace, tolerance } => {
            let f = fs::File::open(&trace).with_context(|| format!("opening {}", trace.display()))?;
            let report = audit_trace(f, AuditOptions { time_tolerance: tolerance })
                .with_context(|| format!("auditing {}", trace.display()))?;
            for fail in &report.failures {
                println!("step {}: {}: {}", fail.step, fail.rule, fail.detail);
            }
            println!("{} checks, {} failures", report.checks, report.failures.len());
            Ok(if report.passes() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn run_scenario(s: &Scenario, exec: ExecMode, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let result = run_with(s, exec)?;
    if let Some(info) = result.settle {
        let state = if info.converged { "converged" } else { "stopped at the iteration cap" };
        println!("settling: {state} after {} iterations", info.iterations);
    }
    let trace_path = out.join("trace.csv");
    write_trace(&result.trace, &trace_path)?;
    for snap in &result.snapshots {
        write_snapshot(snap, &out.join(format!("snapshot_{:06}.csv", snap.step)))?;
        render_density(&snap.particles, s.bounds, s.density_bins, &out.join(format!("density_{:06}.ppm", snap.step)))?;
    }
    let summary = summarize(&result.trace);
    if summary.steps == 0 {
        bail!("run produced no steps");
    }
    println!(
        "{}: {} steps, mean elapsed {:.6e} s/step, final imbalance {:.4}, {} migrations",
        s.name, summary.steps, summary.mean_elapsed, summary.final_imbalance, summary.total_migrations
    );
    println!("trace written to {}", trace_path.display());
    Ok(())
}
