//! Dynamic Voronoi domain decomposition for particle simulations on
//! heterogeneous, non-dedicated clusters.
//!
//! The domain is split into material particles (MPs), one per worker. Each
//! MP owns the particles nearest its center. Centers drift toward
//! overloaded neighbors so that every worker spends the same share of its
//! available CPU on the simulation.

// `!(x > 0.0)` style checks reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balance;
pub mod cluster;
pub mod geometry;
pub mod harness;
pub mod md;
pub mod oracle;

pub use balance::{BalanceConfig, LoadMetrics, MotionConstraint, TimingSample};
pub use geometry::{Decomposition, MaterialParticle, MpId, NeighborGraph, Point2, Rect};
pub use md::{ForceField, Particle};
