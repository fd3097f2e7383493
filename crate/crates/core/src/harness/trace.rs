use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::HarnessError;

pub const TRACE_HEADER: &str =
    "step,worker,n_particles,t_md,t_emd,t_comm,t_wait,t_elapsed,P,W,imbalance,migrations,energy";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerRow {
    pub n_particles: usize,
    pub t_md: f64,
    pub t_emd: f64,
    /// Communication elapsed time.
    pub t_comm: f64,
    pub t_wait: f64,
    pub t_elapsed: f64,
    pub p: f64,
    pub w: f64,
}

/// Everything recorded for one step; written as one CSV row per worker.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub workers: Vec<WorkerRow>,
    pub imbalance: f64,
    pub migrations: usize,
    pub energy: f64,
}

impl StepRecord {
    pub fn elapsed(&self) -> f64 {
        self.workers.iter().map(|w| w.t_elapsed).fold(0.0, f64::max)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.workers.iter().map(|w| w.n_particles).collect()
    }
}

pub fn write_trace_to<W: Write>(trace: &[StepRecord], out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{TRACE_HEADER}")?;
    for r in trace {
        for (i, w) in r.workers.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.step,
                i,
                w.n_particles,
                w.t_md,
                w.t_emd,
                w.t_comm,
                w.t_wait,
                w.t_elapsed,
                w.p,
                w.w,
                r.imbalance,
                r.migrations,
                r.energy
            )?;
        }
    }
    out.flush()
}

pub fn write_trace(trace: &[StepRecord], path: &Path) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io { path: path.to_path_buf(), source };
    let f = std::fs::File::create(path).map_err(io)?;
    write_trace_to(trace, f).map_err(io)
}

/// Reads a trace back, grouping rows by step. Rows of one step must be
/// contiguous and ordered by worker.
pub fn read_trace_from<R: Read>(input: R) -> Result<Vec<StepRecord>, String> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(|e| e.to_string())?;
    if header.iter().collect::<Vec<_>>().join(",") != TRACE_HEADER {
        return Err("not a trace file (header mismatch)".into());
    }
    let mut out: Vec<StepRecord> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let bad = |col: &str| format!("row {}: bad {col}", k + 2);
        let f = |i: usize, col: &str| -> Result<f64, String> {
            rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| bad(col))
        };
        let u = |i: usize, col: &str| -> Result<u64, String> {
            rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| bad(col))
        };
        let step = u(0, "step")?;
        let worker = u(1, "worker")? as usize;
        let row = WorkerRow {
            n_particles: u(2, "n_particles")? as usize,
            t_md: f(3, "t_md")?,
            t_emd: f(4, "t_emd")?,
            t_comm: f(5, "t_comm")?,
            t_wait: f(6, "t_wait")?,
            t_elapsed: f(7, "t_elapsed")?,
            p: f(8, "P")?,
            w: f(9, "W")?,
        };
        let imbalance = f(10, "imbalance")?;
        let migrations = u(11, "migrations")? as usize;
        let energy = f(12, "energy")?;
        match out.last_mut() {
            Some(last) if last.step == step => {
                if worker != last.workers.len() {
                    return Err(format!("row {}: worker {worker} out of order", k + 2));
                }
                last.workers.push(row);
            }
            _ => {
                if worker != 0 {
                    return Err(format!("row {}: step {step} does not start at worker 0", k + 2));
                }
                out.push(StepRecord { step, workers: vec![row], imbalance, migrations, energy });
            }
        }
    }
    Ok(out)
}

pub fn read_trace(path: &Path) -> Result<Vec<StepRecord>, HarnessError> {
    let f = std::fs::File::open(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    read_trace_from(f).map_err(|detail| HarnessError::Parse { path: path.to_path_buf(), detail })
}

/// Summary used by `compare`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSummary {
    pub steps: usize,
    pub mean_elapsed: f64,
    pub final_imbalance: f64,
    pub total_migrations: usize,
}

pub fn summarize(trace: &[StepRecord]) -> TraceSummary {
    let steps = trace.len();
    let mean_elapsed = if steps == 0 { 0.0 } else { trace.iter().map(StepRecord::elapsed).sum::<f64>() / steps as f64 };
    TraceSummary {
        steps,
        mean_elapsed,
        final_imbalance: trace.last().map_or(0.0, |r| r.imbalance),
        total_migrations: trace.iter().map(|r| r.migrations).sum(),
    }
}
