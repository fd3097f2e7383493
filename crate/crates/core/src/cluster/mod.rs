//! Simulated heterogeneous cluster.
//!
//! Workers have a relative speed, a schedule of external load (the fraction
//! of the CPU taken by other programs), and per-peer links. In virtual mode
//! a cost model turns per-step work counts into the four times consumed by
//! the balance law, and a global barrier closes every step. Measured mode
//! runs real worker threads over the same message contract.

mod exchange;
mod measured;
mod message;

pub use exchange::{deliver_metrics, exchange, ExchangeOutcome, Inbox, Partition};
pub use measured::{MeasuredCluster, MeasuredStep};
pub use message::{MessageKind, NeighborMessage, Payload, WorkerReport};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::TimingSample;
use crate::geometry::MpId;
use crate::md::MdError;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("particle {particle} could not migrate from MP {from} to non-neighbor MP {to} within {steps} steps")]
    MigrationAcrossNonNeighbors { particle: usize, from: MpId, to: MpId, steps: u32 },
    #[error("worker {worker} failed: {reason}")]
    WorkerFailed { worker: usize, reason: String },
    #[error(transparent)]
    Md(#[from] MdError),
}

/// Point-to-point link parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    /// Seconds per message.
    pub latency: f64,
    /// Bytes per second.
    pub bandwidth: f64,
}

impl Link {
    pub const SHARED_MEMORY: Link = Link { latency: 1e-6, bandwidth: 1e9 };

    pub fn transfer_time(&self, bytes: usize) -> f64 {
        self.latency + bytes as f64 / self.bandwidth
    }
}

/// A window of steps `[start, end)` during which other programs take the
/// given fraction of a worker's CPU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadWindow {
    pub start: u64,
    pub end: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerProfile {
    pub id: usize,
    /// Work units per second, relative to the cost model's unit.
    pub speed: f64,
    pub load_schedule: Vec<LoadWindow>,
    pub default_link: Link,
    pub links: BTreeMap<usize, Link>,
}

impl WorkerProfile {
    pub fn dedicated(id: usize, speed: f64) -> Self {
        WorkerProfile {
            id,
            speed,
            load_schedule: Vec::new(),
            default_link: Link::SHARED_MEMORY,
            links: BTreeMap::new(),
        }
    }

    /// External load at `step`; overlapping windows add up, capped below 1.
    pub fn stolen_fraction(&self, step: u64) -> f64 {
        let total: f64 =
            self.load_schedule.iter().filter(|w| step >= w.start && step < w.end).map(|w| w.fraction).sum();
        total.min(0.99)
    }

    pub fn link_to(&self, peer: usize) -> Link {
        self.links.get(&peer).copied().unwrap_or(self.default_link)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(format!("worker {}: speed must be positive", self.id));
        }
        for w in &self.load_schedule {
            if !(0.0..1.0).contains(&w.fraction) {
                return Err(format!("worker {}: load fraction must lie in [0, 1)", self.id));
            }
            if w.end < w.start {
                return Err(format!("worker {}: load window ends before it starts", self.id));
            }
        }
        for link in std::iter::once(&self.default_link).chain(self.links.values()) {
            if !(link.latency > 0.0 && link.bandwidth > 0.0) {
                return Err(format!("worker {}: link parameters must be positive", self.id));
            }
        }
        Ok(())
    }
}

/// Converts work counts to seconds: one work unit takes `unit_seconds` on
/// a worker of speed 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub unit_seconds: f64,
    pub c_particle: f64,
    pub c_pair: f64,
    /// Work units per message byte (packing plus unpacking).
    pub c_msg_cpu: f64,
    /// Relative amplitude of uniform multiplicative noise on MD time.
    pub jitter: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { unit_seconds: 1e-6, c_particle: 1.0, c_pair: 0.25, c_msg_cpu: 0.01, jitter: 0.0 }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [self.unit_seconds, self.c_particle, self.c_pair, self.c_msg_cpu];
        if positive.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err("cost coefficients must be positive".into());
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return Err("jitter must lie in [0, 0.5)".into());
        }
        Ok(())
    }
}

/// What one worker did in a step, before the barrier.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepWork {
    pub n_particles: usize,
    pub n_pairs: usize,
    /// `(peer, bytes)` for every message sent.
    pub sent: Vec<(usize, usize)>,
    pub bytes_received: usize,
}

impl StepWork {
    pub fn from_messages(worker: usize, n_particles: usize, n_pairs: usize, messages: &[NeighborMessage]) -> Self {
        let mut w = StepWork { n_particles, n_pairs, ..Default::default() };
        for m in messages {
            if m.sender == worker {
                w.sent.push((m.receiver, m.size_bytes()));
            }
            if m.receiver == worker {
                w.bytes_received += m.size_bytes();
            }
        }
        w
    }
}

/// Per-worker times before the barrier.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WorkerCost {
    pub t_md: f64,
    pub t_emd: f64,
    pub comm_cpu: f64,
    pub comm_elapsed: f64,
}

/// Virtual-mode cost of one worker's step.
///
/// `t_md = unit (c_particle N + c_pair pairs) / speed`, stretched to
/// `t_emd = t_md / (1 - lambda)` by external load. Communication CPU time is
/// proportional to bytes moved and is stretched the same way; wire time
/// adds latency plus bytes over bandwidth per sent message. `noise`
/// multiplies the MD time (1.0 for none).
pub fn simulate_step_cost(
    worker: &WorkerProfile,
    work: &StepWork,
    step: u64,
    cost: &CostModel,
    noise: f64,
) -> WorkerCost {
    let lambda = worker.stolen_fraction(step);
    let units = cost.c_particle * work.n_particles as f64 + cost.c_pair * work.n_pairs as f64;
    let t_md = noise * cost.unit_seconds * units / worker.speed;
    let t_emd = t_md / (1.0 - lambda);
    let bytes: usize = work.sent.iter().map(|&(_, b)| b).sum::<usize>() + work.bytes_received;
    let comm_cpu = cost.unit_seconds * cost.c_msg_cpu * bytes as f64 / worker.speed;
    let wire: f64 = work.sent.iter().map(|&(peer, b)| worker.link_to(peer).transfer_time(b)).sum();
    WorkerCost { t_md, t_emd, comm_cpu, comm_elapsed: comm_cpu / (1.0 - lambda) + wire }
}

/// Synchronized per-step timings of all workers.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTimings {
    pub samples: Vec<TimingSample>,
    pub waiting: Vec<f64>,
    pub comm_cpu: Vec<f64>,
    pub comm_elapsed: Vec<f64>,
}

impl StepTimings {
    pub fn elapsed(&self) -> f64 {
        self.samples.iter().map(|s| s.t_elapsed).fold(0.0, f64::max)
    }
}

/// Global barrier: every worker's step ends when the slowest one finishes;
/// the difference is waiting time.
pub fn barrier_elapsed(costs: &[WorkerCost]) -> StepTimings {
    let t_elapsed = costs.iter().map(|c| c.t_emd + c.comm_elapsed).fold(0.0, f64::max);
    let samples = costs
        .iter()
        .map(|c| TimingSample { t_md: c.t_md, t_emd: c.t_emd, t_work: c.t_md + c.comm_cpu, t_elapsed })
        .collect();
    StepTimings {
        samples,
        waiting: costs.iter().map(|c| (t_elapsed - c.t_emd - c.comm_elapsed).max(0.0)).collect(),
        comm_cpu: costs.iter().map(|c| c.comm_cpu).collect(),
        comm_elapsed: costs.iter().map(|c| c.comm_elapsed).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::normalized_md_time;

    fn work(n: usize, pairs: usize) -> StepWork {
        StepWork { n_particles: n, n_pairs: pairs, ..Default::default() }
    }

    #[test]
    fn external_load_stretches_md_time() {
        let mut w = WorkerProfile::dedicated(0, 1.0);
        let cost = CostModel::default();
        let c = simulate_step_cost(&w, &work(1000, 4000), 0, &cost, 1.0);
        assert_eq!(c.t_md, c.t_emd);
        let s = barrier_elapsed(&[c]).samples[0];
        assert_eq!(normalized_md_time(&s).unwrap(), 1.0);

        w.load_schedule.push(LoadWindow { start: 0, end: 10, fraction: 0.5 });
        let c = simulate_step_cost(&w, &work(1000, 4000), 3, &cost, 1.0);
        assert_eq!(c.t_emd, 2.0 * c.t_md);
        let s = barrier_elapsed(&[c]).samples[0];
        assert_eq!(normalized_md_time(&s).unwrap(), 0.5);
        // window is half-open
        let c = simulate_step_cost(&w, &work(1000, 4000), 10, &cost, 1.0);
        assert_eq!(c.t_md, c.t_emd);
    }

    #[test]
    fn md_time_is_linear_in_particles() {
        let w = WorkerProfile::dedicated(0, 2.0);
        let cost = CostModel::default();
        let one = simulate_step_cost(&w, &work(500, 0), 0, &cost, 1.0);
        let two = simulate_step_cost(&w, &work(1000, 0), 0, &cost, 1.0);
        assert!((two.t_md - 2.0 * one.t_md).abs() < 1e-18);
        assert!((one.t_md - 500.0 * 1e-6 / 2.0).abs() < 1e-18);
    }

    #[test]
    fn identical_workers_never_wait() {
        let w = WorkerProfile::dedicated(0, 1.0);
        let c = simulate_step_cost(&w, &work(100, 300), 0, &CostModel::default(), 1.0);
        let t = barrier_elapsed(&[c, c, c]);
        assert!(t.waiting.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn fast_workers_wait_for_the_slow_one() {
        let cost = CostModel::default();
        let fast = simulate_step_cost(&WorkerProfile::dedicated(0, 2.0), &work(100, 0), 0, &cost, 1.0);
        let slow = simulate_step_cost(&WorkerProfile::dedicated(1, 1.0), &work(100, 0), 0, &cost, 1.0);
        let t = barrier_elapsed(&[fast, slow]);
        assert_eq!(t.waiting[1], 0.0);
        // 100 units at speed 1 versus speed 2
        assert!((t.waiting[0] - (100e-6 - 50e-6)).abs() < 1e-18);
        for (s, wait) in t.samples.iter().zip(&t.waiting) {
            assert!(s.check(0.0).is_ok());
            assert!(*wait >= 0.0);
        }
    }

    #[test]
    fn wire_time_uses_the_peer_link() {
        let mut w = WorkerProfile::dedicated(0, 1.0);
        w.links.insert(1, Link { latency: 1e-4, bandwidth: 12.5e6 });
        let cost = CostModel::default();
        let mut sw = work(10, 0);
        sw.sent = vec![(1, 1250), (2, 1000)];
        let c = simulate_step_cost(&w, &sw, 0, &cost, 1.0);
        let expected_wire = (1e-4 + 1250.0 / 12.5e6) + (1e-6 + 1000.0 / 1e9);
        let expected_cpu = 1e-6 * 0.01 * 2250.0;
        assert!((c.comm_elapsed - expected_cpu - expected_wire).abs() < 1e-15);
        assert!((c.comm_cpu - expected_cpu).abs() < 1e-18);
    }

    #[test]
    fn profile_validation() {
        let mut w = WorkerProfile::dedicated(0, 1.0);
        assert!(w.validate().is_ok());
        w.load_schedule.push(LoadWindow { start: 0, end: 5, fraction: 1.0 });
        assert!(w.validate().is_err());
        assert!(WorkerProfile::dedicated(0, 0.0).validate().is_err());
    }
}
