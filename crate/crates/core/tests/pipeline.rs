use std::path::Path;

use mpd3_core::harness::{run, run_with, write_trace_to, DecompositionMode, ExecMode, Scenario, StepRecord};
use mpd3_core::oracle::{audit_trace, AuditOptions, AuditReport};

const SMALL: &str = r#"
name = "small_cylinders"
seed = 5
n_steps = 40
domain = [0.0, 0.0, 60.0, 30.0]
init = "two_cylinders"
cylinders = [
  { center = [16.0, 15.0], radius = 10.0, velocity = [1.0, 0.0] },
  { center = [44.0, 15.0], radius = 8.0, velocity = [-1.0, 0.0] },
]
n_workers = 4
rect_grid = [2, 2]
speeds = [1.0, 1.0, 2.0, 2.0]
loads = [{ worker = 0, start = 10, end = 20, fraction = 0.5 }]
sites = [0, 0, 1, 1]
site_link = { latency = 2e-4, bandwidth = 1.25e7 }
dt = 0.004
"#;

fn small() -> Scenario {
    Scenario::parse(SMALL, Path::new(".")).unwrap()
}

fn audit(trace: &[StepRecord], tol: f64) -> AuditReport {
    let mut buf = Vec::new();
    write_trace_to(trace, &mut buf).unwrap();
    audit_trace(buf.as_slice(), AuditOptions { time_tolerance: tol }).unwrap()
}

#[test]
fn every_mode_conserves_particles_and_audits_clean() {
    for mode in [DecompositionMode::Mpd3, DecompositionMode::StaticRect, DecompositionMode::VoronoiFrozen] {
        let mut s = small();
        s.mode = mode;
        let out = run(&s).unwrap();
        assert_eq!(out.trace.len(), 40);
        let n = out.particles.len();
        assert!(out.trace.iter().all(|r| r.counts().iter().sum::<usize>() == n));
        let report = audit(&out.trace, 1e-12);
        assert!(report.passes(), "{}: {:?}", mode.as_str(), report.failures);
        assert_eq!(out.owner.len(), n);
    }
}

#[test]
fn only_mpd3_moves_centers() {
    let mut s = small();
    let start = run(&{
        let mut z = s.clone();
        z.n_steps = 1;
        z
    })
    .unwrap()
    .decomposition
    .centers();
    for (mode, moves) in [(DecompositionMode::Mpd3, true), (DecompositionMode::VoronoiFrozen, false)] {
        s.mode = mode;
        let end = run(&s).unwrap().decomposition.centers();
        assert_eq!(end != start, moves, "{}", mode.as_str());
    }
}

#[test]
fn measured_run_satisfies_the_audit_with_clock_slack() {
    let mut s = small();
    s.n_steps = 8;
    let out = run_with(&s, ExecMode::Measured).unwrap();
    let report = audit(&out.trace, 1e-3);
    assert!(report.passes(), "{:?}", report.failures);
}
