use std::collections::BTreeMap;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Barrier};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::{ClusterError, NeighborMessage, Payload, StepTimings};
use crate::balance::TimingSample;
use crate::geometry::{MpId, Point2};
use crate::md::{compute_forces_on_subset, ForceField, ForceOutput, MdError, Particle};

/// CPU time consumed by the calling thread, in seconds.
fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid out-pointer and the clock id is a constant.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

struct StepOrder {
    step: u64,
    owned: Vec<Particle>,
    /// Ghost particles this worker sends, by receiving peer.
    send_ghosts: Vec<(usize, Vec<Particle>)>,
    /// Number of ghost messages this worker must receive.
    expect: usize,
    stolen_fraction: f64,
}

enum Order {
    Step(StepOrder),
    Stop,
}

struct StepReport {
    worker: usize,
    step: u64,
    ids: Vec<usize>,
    result: Result<ForceOutput, MdError>,
    t_md: f64,
    t_emd: f64,
    comm_cpu: f64,
    comm_elapsed: f64,
    t_elapsed: f64,
    bytes_sent: usize,
}

/// One measured step: forces for every particle (global index), the total
/// potential and the per-worker timings.
#[derive(Debug, Clone)]
pub struct MeasuredStep {
    pub forces: Vec<Point2>,
    pub potential: f64,
    pub timings: StepTimings,
    pub bytes_sent: Vec<usize>,
}

/// Real worker threads, one per MP. Workers exchange ghost particles with
/// each other over channels, compute forces on their own particles, and
/// meet at a barrier. External load is emulated by sleeping, which adds
/// elapsed time without CPU time.
pub struct MeasuredCluster {
    orders: Vec<Sender<Order>>,
    reports: Receiver<StepReport>,
    threads: Vec<JoinHandle<()>>,
}

impl MeasuredCluster {
    pub fn spawn(n_workers: usize, ff: ForceField) -> Self {
        let barrier = Arc::new(Barrier::new(n_workers));
        let (report_tx, reports) = channel();
        let (peer_txs, peer_rxs): (Vec<Sender<NeighborMessage>>, Vec<Receiver<NeighborMessage>>) =
            (0..n_workers).map(|_| channel()).unzip();
        let mut orders = Vec::with_capacity(n_workers);
        let mut threads = Vec::with_capacity(n_workers);
        for (id, inbox) in peer_rxs.into_iter().enumerate() {
            let (order_tx, order_rx) = channel();
            orders.push(order_tx);
            let peers = peer_txs.clone();
            let barrier = Arc::clone(&barrier);
            let report_tx = report_tx.clone();
            let handle = std::thread::Builder::new()
                .name(format!("mpd3-worker-{id}"))
                .spawn(move || worker_loop(id, ff, order_rx, inbox, peers, barrier, report_tx))
                .expect("spawn worker thread");
            threads.push(handle);
        }
        MeasuredCluster { orders, reports, threads }
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    /// Runs one force evaluation across the workers.
    ///
    /// `ghosts[i]` lists the foreign particle ids MP `i` needs; each is sent
    /// by its owner.
    pub fn step(
        &mut self,
        step: u64,
        particles: &[Particle],
        owner: &[MpId],
        ghosts: &[Vec<usize>],
        stolen: &[f64],
    ) -> Result<MeasuredStep, ClusterError> {
        let n = self.orders.len();
        let mut owned: Vec<Vec<Particle>> = vec![Vec::new(); n];
        for (k, p) in particles.iter().enumerate() {
            owned[owner[k]].push(p.clone());
        }
        let mut sends: Vec<BTreeMap<usize, Vec<Particle>>> = vec![BTreeMap::new(); n];
        let mut expect = vec![0usize; n];
        for (receiver, ids) in ghosts.iter().enumerate() {
            let mut senders = BTreeMap::<usize, Vec<Particle>>::new();
            for &g in ids {
                senders.entry(owner[g]).or_default().push(particles[g].clone());
            }
            expect[receiver] = senders.len();
            for (sender, ps) in senders {
                sends[sender].insert(receiver, ps);
            }
        }
        for (i, ((own, send), exp)) in owned.into_iter().zip(sends).zip(expect).enumerate() {
            let order = StepOrder {
                step,
                owned: own,
                send_ghosts: send.into_iter().collect(),
                expect: exp,
                stolen_fraction: stolen[i],
            };
            self.orders[i]
                .send(Order::Step(order))
                .map_err(|_| ClusterError::WorkerFailed { worker: i, reason: "worker exited".into() })?;
        }

        let mut reports: Vec<Option<StepReport>> = (0..n).map(|_| None).collect();
        for _ in 0..n {
            let r = self.reports.recv().map_err(|_| ClusterError::WorkerFailed {
                worker: usize::MAX,
                reason: "report channel closed".into(),
            })?;
            debug_assert_eq!(r.step, step);
            let w = r.worker;
            reports[w] = Some(r);
        }

        let mut forces = vec![Point2::ZERO; particles.len()];
        let mut potential = 0.0;
        let mut timings = StepTimings {
            samples: Vec::with_capacity(n),
            waiting: Vec::with_capacity(n),
            comm_cpu: Vec::with_capacity(n),
            comm_elapsed: Vec::with_capacity(n),
        };
        let mut bytes_sent = Vec::with_capacity(n);
        for r in reports.into_iter().map(|r| r.expect("one report per worker")) {
            let out = r.result.map_err(ClusterError::Md)?;
            for (&id, &f) in r.ids.iter().zip(&out.forces) {
                forces[id] = f;
            }
            potential += out.potential;
            timings.samples.push(TimingSample {
                t_md: r.t_md,
                t_emd: r.t_emd,
                t_work: r.t_md + r.comm_cpu,
                t_elapsed: r.t_elapsed,
            });
            timings.waiting.push((r.t_elapsed - r.t_emd - r.comm_elapsed).max(0.0));
            timings.comm_cpu.push(r.comm_cpu);
            timings.comm_elapsed.push(r.comm_elapsed);
            bytes_sent.push(r.bytes_sent);
        }
        Ok(MeasuredStep { forces, potential, timings, bytes_sent })
    }
}

impl Drop for MeasuredCluster {
    fn drop(&mut self) {
        for tx in &self.orders {
            let _ = tx.send(Order::Stop);
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

fn worker_loop(
    id: usize,
    ff: ForceField,
    orders: Receiver<Order>,
    inbox: Receiver<NeighborMessage>,
    peers: Vec<Sender<NeighborMessage>>,
    barrier: Arc<Barrier>,
    reports: Sender<StepReport>,
) {
    while let Ok(Order::Step(order)) = orders.recv() {
        let t0 = Instant::now();
        let c0 = thread_cpu_seconds();
        let mut bytes_sent = 0;
        for (peer, ps) in order.send_ghosts {
            let msg = NeighborMessage { sender: id, receiver: peer, payload: Payload::Ghosts(ps) };
            bytes_sent += msg.size_bytes();
            // a closed peer channel means shutdown; the barrier still runs
            let _ = peers[peer].send(msg);
        }
        let c1 = thread_cpu_seconds();
        let t1 = Instant::now();

        let mut ghosts = Vec::new();
        for _ in 0..order.expect {
            match inbox.recv() {
                Ok(NeighborMessage { payload: Payload::Ghosts(ps), .. }) => ghosts.extend(ps),
                Ok(_) => {}
                Err(_) => break,
            }
        }
        let c2 = thread_cpu_seconds();
        let t2 = Instant::now();

        let result = compute_forces_on_subset(&order.owned, &ghosts, &ff);
        let c3 = thread_cpu_seconds();
        let lambda = order.stolen_fraction;
        if lambda > 0.0 {
            let stolen = (c3 - c2).max(0.0) * lambda / (1.0 - lambda);
            std::thread::sleep(Duration::from_secs_f64(stolen));
        }
        let t3 = Instant::now();
        barrier.wait();
        let t4 = Instant::now();

        let t_emd = (t3 - t2).as_secs_f64();
        let send_wall = (t1 - t0).as_secs_f64();
        let recv_cpu = (c2 - c1).max(0.0).min((t2 - t1).as_secs_f64());
        let comm_cpu = ((c1 - c0).max(0.0)).min(send_wall) + recv_cpu;
        let report = StepReport {
            worker: id,
            step: order.step,
            ids: order.owned.iter().map(|p| p.id).collect(),
            result,
            t_md: (c3 - c2).max(0.0).min(t_emd),
            t_emd,
            comm_cpu,
            comm_elapsed: send_wall + recv_cpu,
            t_elapsed: (t4 - t0).as_secs_f64(),
            bytes_sent,
        };
        if reports.send(report).is_err() {
            return;
        }
    }
}
