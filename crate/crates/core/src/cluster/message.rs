use crate::geometry::{MpId, Point2};
use crate::md::Particle;

/// Wire sizes in bytes.
const HEADER: usize = 16;
const GHOST_RECORD: usize = 24; // id, x, y, species
const MIGRANT_RECORD: usize = 40; // id, x, y, vx, vy, species
const METRICS_RECORD: usize = 24; // P, W, smoothed W
const CENTER_RECORD: usize = 24; // x, y, linear size

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    GhostParticles,
    MigrateParticles,
    Metrics,
    CenterUpdate,
}

/// Load metrics one MP publishes to its neighbors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerReport {
    pub mp: MpId,
    pub p: f64,
    pub w: f64,
    /// Smoothed `W`, the value the displacement law uses.
    pub w_smoothed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Ghosts(Vec<Particle>),
    Migrants(Vec<Particle>),
    Metrics(WorkerReport),
    Center { center: Point2, linear_size: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborMessage {
    pub sender: usize,
    pub receiver: usize,
    pub payload: Payload,
}

impl NeighborMessage {
    pub fn kind(&self) -> MessageKind {
        match self.payload {
            Payload::Ghosts(_) => MessageKind::GhostParticles,
            Payload::Migrants(_) => MessageKind::MigrateParticles,
            Payload::Metrics(_) => MessageKind::Metrics,
            Payload::Center { .. } => MessageKind::CenterUpdate,
        }
    }

    pub fn size_bytes(&self) -> usize {
        HEADER
            + match &self.payload {
                Payload::Ghosts(p) => p.len() * GHOST_RECORD,
                Payload::Migrants(p) => p.len() * MIGRANT_RECORD,
                Payload::Metrics(_) => METRICS_RECORD,
                Payload::Center { .. } => CENTER_RECORD,
            }
    }
}
