//! Minimal 2D short-range molecular dynamics in Lennard-Jones reduced units
//! (epsilon = sigma = m = 1).

mod cell;
mod forces;
mod integrate;
pub mod lattice;
mod renumber;

pub use cell::CellMesh;
pub use forces::{compute_forces, compute_forces_on_subset, lj_pair, ForceOutput};
pub use integrate::{kinetic_energy, total_momentum, verlet_step, Walls};
pub use renumber::{renumber_particles, Renumbering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;

#[derive(Debug, Error, PartialEq)]
pub enum MdError {
    #[error("particles {i} and {j} overlap (r = {r:e})")]
    SingularPair { i: usize, j: usize, r: f64 },
    #[error("invalid force field: {0}")]
    InvalidForceField(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    /// Global id; equals the particle's index in the global array.
    pub id: usize,
    pub pos: Point2,
    pub vel: Point2,
    pub species: u8,
}

impl Particle {
    pub fn at_rest(id: usize, pos: Point2) -> Self {
        Particle { id, pos, vel: Point2::ZERO, species: 0 }
    }
}

/// Truncated-and-shifted Lennard-Jones parameters plus the time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceField {
    pub epsilon: f64,
    pub sigma: f64,
    pub cutoff: f64,
    pub dt: f64,
}

impl Default for ForceField {
    fn default() -> Self {
        ForceField { epsilon: 1.0, sigma: 1.0, cutoff: 2.5, dt: 0.005 }
    }
}

impl ForceField {
    pub fn validate(&self) -> Result<(), MdError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(MdError::InvalidForceField("epsilon must be positive"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(MdError::InvalidForceField("sigma must be positive"));
        }
        if !(self.cutoff > self.sigma && self.cutoff.is_finite()) {
            return Err(MdError::InvalidForceField("cutoff must exceed sigma"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(MdError::InvalidForceField("dt must be positive"));
        }
        Ok(())
    }

    /// Pair separation at the potential minimum, 2^(1/6) sigma.
    pub fn equilibrium_distance(&self) -> f64 {
        2f64.powf(1.0 / 6.0) * self.sigma
    }

    /// Separation below which a pair is treated as overlapping.
    pub fn singular_distance(&self) -> f64 {
        1e-6 * self.sigma
    }
}
