//! Brute-force reference implementations used to validate the fast paths,
//! plus an auditor for trace files.
//!
//! Nothing here calls into `geometry`, `md` or `balance`: the arithmetic is
//! written out independently so a shared bug cannot hide.

use std::collections::BTreeMap;
use std::io::Read;

use thiserror::Error;

use crate::geometry::Point2;
use crate::md::{ForceField, Particle};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("malformed trace: {0}")]
    Parse(String),
}

/// Owner of every point by exhaustive argmin of squared distance, lowest
/// center index on ties.
pub fn nearest_center_oracle(centers: &[Point2], points: &[Point2]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best: Option<(f64, usize)> = None;
            for (i, c) in centers.iter().enumerate() {
                let d = (p.x - c.x).powi(2) + (p.y - c.y).powi(2);
                match best {
                    Some((bd, _)) if d >= bd => {}
                    _ => best = Some((d, i)),
                }
            }
            best.map_or(0, |(_, i)| i)
        })
        .collect()
}

/// O(N^2) truncated-shifted Lennard-Jones forces.
pub fn allpairs_force_oracle(particles: &[Particle], ff: &ForceField) -> Vec<Point2> {
    let n = particles.len();
    let mut fx = vec![0.0; n];
    let mut fy = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dx = particles[i].pos.x - particles[j].pos.x;
            let dy = particles[i].pos.y - particles[j].pos.y;
            let r = (dx * dx + dy * dy).sqrt();
            if r >= ff.cutoff {
                continue;
            }
            // -dU/dr = 24 eps / r * (2 (s/r)^12 - (s/r)^6)
            let s_r = ff.sigma / r;
            let mag = 24.0 * ff.epsilon / r * (2.0 * s_r.powi(12) - s_r.powi(6));
            fx[i] += mag * dx / r;
            fy[i] += mag * dy / r;
        }
    }
    fx.into_iter().zip(fy).map(|(x, y)| Point2::new(x, y)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditFailure {
    pub step: u64,
    pub rule: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub checks: usize,
    pub failures: Vec<AuditFailure>,
}

impl AuditReport {
    pub fn passes(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions {
    /// Seconds of slack on timing inequalities and waiting >= 0.
    pub time_tolerance: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions { time_tolerance: 1e-12 }
    }
}

const COLUMNS: [&str; 13] = [
    "step",
    "worker",
    "n_particles",
    "t_md",
    "t_emd",
    "t_comm",
    "t_wait",
    "t_elapsed",
    "P",
    "W",
    "imbalance",
    "migrations",
    "energy",
];

struct Row {
    step: u64,
    worker: usize,
    n: u64,
    t: [f64; 5], // md, emd, comm, wait, elapsed
    p: f64,
    w: f64,
    rest: [f64; 2], // imbalance, energy
}

fn parse_rows<R: Read>(input: R) -> Result<Vec<Row>, OracleError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers().map_err(|e| OracleError::Parse(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != COLUMNS {
        return Err(OracleError::Parse(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| OracleError::Parse(e.to_string()))?;
        let field = |k: usize| -> Result<&str, OracleError> {
            rec.get(k).ok_or_else(|| OracleError::Parse(format!("row {}: missing {}", line + 2, COLUMNS[k])))
        };
        let int = |k: usize| -> Result<u64, OracleError> {
            field(k)?.parse().map_err(|_| OracleError::Parse(format!("row {}: bad {}", line + 2, COLUMNS[k])))
        };
        let num = |k: usize| -> Result<f64, OracleError> {
            field(k)?.parse().map_err(|_| OracleError::Parse(format!("row {}: bad {}", line + 2, COLUMNS[k])))
        };
        rows.push(Row {
            step: int(0)?,
            worker: int(1)? as usize,
            n: int(2)?,
            t: [num(3)?, num(4)?, num(5)?, num(6)?, num(7)?],
            p: num(8)?,
            w: num(9)?,
            rest: [num(10)?, num(12)?],
        });
        int(11)?;
    }
    Ok(rows)
}

/// Checks every row of a trace: P and W bounds, the timing chain,
/// non-negative waiting, finite values, one row per worker per step, and
/// a constant total particle count.
pub fn audit_trace<R: Read>(input: R, opts: AuditOptions) -> Result<AuditReport, OracleError> {
    let rows = parse_rows(input)?;
    let tol = opts.time_tolerance;
    let mut report = AuditReport::default();
    let mut fail = |step: u64, rule: &'static str, detail: String| {
        report.failures.push(AuditFailure { step, rule, detail });
    };
    let mut checks = 0usize;

    let mut by_step: BTreeMap<u64, Vec<&Row>> = BTreeMap::new();
    for r in &rows {
        by_step.entry(r.step).or_default().push(r);
        let [t_md, t_emd, t_comm, t_wait, t_el] = r.t;
        let who = format!("worker {}", r.worker);
        checks += 6;
        if !(r.t.iter().chain(&[r.p, r.w]).chain(&r.rest).all(|x| x.is_finite())) {
            fail(r.step, "finite", format!("{who}: non-finite value"));
        }
        if !(r.p > 0.0 && r.p <= 1.0) {
            fail(r.step, "P_bounds", format!("{who}: P = {}", r.p));
        }
        if !(r.w > 0.0 && r.w <= 1.0) {
            fail(r.step, "W_bounds", format!("{who}: W = {}", r.w));
        }
        let positive_md = if r.n > 0 { t_md > 0.0 } else { t_md >= 0.0 };
        if !(positive_md && t_md <= t_emd + tol && t_emd <= t_el + tol && t_comm >= -tol) {
            fail(r.step, "timing_chain", format!("{who}: t_md={t_md} t_emd={t_emd} t_elapsed={t_el}"));
        }
        if !(t_wait >= -tol) {
            fail(r.step, "waiting_nonnegative", format!("{who}: t_wait = {t_wait}"));
        }
        let sum = t_emd + t_comm + t_wait;
        if (sum - t_el).abs() > tol.max(1e-9 * t_el.abs()) {
            fail(r.step, "elapsed_decomposition", format!("{who}: t_emd+t_comm+t_wait = {sum} != {t_el}"));
        }
    }

    let mut total: Option<u64> = None;
    let mut workers: Option<Vec<usize>> = None;
    for (&step, rs) in &by_step {
        checks += 2;
        let n: u64 = rs.iter().map(|r| r.n).sum();
        match total {
            None => total = Some(n),
            Some(t) if t != n => fail(step, "conservation", format!("total {n} != {t}")),
            _ => {}
        }
        let mut ids: Vec<usize> = rs.iter().map(|r| r.worker).collect();
        ids.sort_unstable();
        match &workers {
            None => workers = Some(ids),
            Some(w) if *w != ids => fail(step, "worker_rows", format!("workers {ids:?} != {w:?}")),
            _ => {}
        }
    }
    report.checks = checks;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_center_owns_everything() {
        let pts = [Point2::new(1.0, 2.0), Point2::new(-5.0, 0.0)];
        assert_eq!(nearest_center_oracle(&[Point2::new(9.0, 9.0)], &pts), vec![0, 0]);
    }

    #[test]
    fn hand_computed_two_center_cases() {
        let c = [Point2::new(0.0, 0.0), Point2::new(4.0, 0.0)];
        let p = [Point2::new(1.0, 5.0), Point2::new(2.0, -3.0), Point2::new(3.0, 0.0)];
        // (1,5): 26 vs 34; (2,-3): 13 vs 13 tie; (3,0): 9 vs 1
        assert_eq!(nearest_center_oracle(&c, &p), vec![0, 0, 1]);
    }

    #[test]
    fn force_oracle_small_cases() {
        let ff = ForceField::default();
        assert!(allpairs_force_oracle(&[], &ff).is_empty());
        let far = [Particle::at_rest(0, Point2::ZERO), Particle::at_rest(1, Point2::new(3.0, 0.0))];
        assert_eq!(allpairs_force_oracle(&far, &ff), vec![Point2::ZERO; 2]);
        // r = 1: 24 (2 - 1) = 24, repulsive
        let near = [Particle::at_rest(0, Point2::ZERO), Particle::at_rest(1, Point2::new(1.0, 0.0))];
        let f = allpairs_force_oracle(&near, &ff);
        assert_eq!(f[0], Point2::new(-24.0, 0.0));
        assert_eq!(f[1], Point2::new(24.0, 0.0));
    }

    const HEADER: &str = "step,worker,n_particles,t_md,t_emd,t_comm,t_wait,t_elapsed,P,W,imbalance,migrations,energy\n";

    #[test]
    fn clean_trace_passes() {
        let csv = format!(
            "{HEADER}0,0,10,1,1,0.5,0.5,2,1,0.75,0,0,-3\n0,1,5,1,2,0,0,2,0.5,1,0,0,-3\n\
             1,0,9,1,1,0.5,0.5,2,1,0.75,0,1,-3\n1,1,6,1,2,0,0,2,0.5,1,0,1,-3\n"
        );
        let r = audit_trace(csv.as_bytes(), AuditOptions::default()).unwrap();
        assert!(r.passes(), "{:?}", r.failures);
        assert!(r.checks > 0);
    }

    #[test]
    fn corrupted_p_is_named() {
        let csv = format!("{HEADER}0,0,10,1,1,0.5,0.5,2,1.2,0.75,0,0,-3\n");
        let r = audit_trace(csv.as_bytes(), AuditOptions::default()).unwrap();
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].rule, "P_bounds");
    }

    #[test]
    fn lost_particles_are_flagged() {
        let csv = format!("{HEADER}0,0,10,1,1,0,1,2,1,0.5,0,0,0\n1,0,9,1,1,0,1,2,1,0.5,0,0,0\n");
        let r = audit_trace(csv.as_bytes(), AuditOptions::default()).unwrap();
        assert_eq!(r.failures.iter().map(|f| f.rule).collect::<Vec<_>>(), vec!["conservation"]);
        assert_eq!(r.failures[0].step, 1);
    }

    #[test]
    fn malformed_trace_is_a_parse_error() {
        assert!(audit_trace("a,b\n1,2\n".as_bytes(), AuditOptions::default()).is_err());
        let csv = format!("{HEADER}0,0,ten,1,1,0,1,2,1,0.5,0,0,0\n");
        assert!(matches!(audit_trace(csv.as_bytes(), AuditOptions::default()), Err(OracleError::Parse(_))));
    }
}
