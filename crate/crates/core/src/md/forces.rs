use super::{CellMesh, ForceField, MdError, Particle};
use crate::geometry::{Point2, Rect};

#[derive(Debug, Clone, PartialEq)]
pub struct ForceOutput {
    pub forces: Vec<Point2>,
    pub potential: f64,
}

/// Truncated-shifted LJ for a pair at squared distance `r2 < cutoff^2`.
/// Returns `(f / r, u)`: the force on `i` is `(f / r) * (r_i - r_j)`.
#[inline]
pub fn lj_pair(ff: &ForceField, r2: f64) -> (f64, f64) {
    let s2 = ff.sigma * ff.sigma;
    let sr6 = {
        let sr2 = s2 / r2;
        sr2 * sr2 * sr2
    };
    let sr12 = sr6 * sr6;
    let shift = {
        let sc2 = s2 / (ff.cutoff * ff.cutoff);
        let sc6 = sc2 * sc2 * sc2;
        4.0 * ff.epsilon * (sc6 * sc6 - sc6)
    };
    let u = 4.0 * ff.epsilon * (sr12 - sr6) - shift;
    let f_over_r = 24.0 * ff.epsilon * (2.0 * sr12 - sr6) / r2;
    (f_over_r, u)
}

/// Pair forces and total potential energy using a cell mesh built over the
/// same particle slice (mesh entry `i` is particle index `i`).
pub fn compute_forces(particles: &[Particle], ff: &ForceField, mesh: &CellMesh) -> Result<ForceOutput, MdError> {
    let positions: Vec<Point2> = particles.iter().map(|p| p.pos).collect();
    let mut forces = vec![Point2::ZERO; particles.len()];
    let mut potential = 0.0;
    let r_min2 = ff.singular_distance().powi(2);
    let mut singular = None;
    mesh.for_each_pair(&positions, ff.cutoff, |i, j, d, r2| {
        if r2 < r_min2 {
            singular.get_or_insert((i, j, r2.sqrt()));
            return;
        }
        let (f, u) = lj_pair(ff, r2);
        let fij = d * f;
        forces[i] += fij;
        forces[j] -= fij;
        potential += u;
    });
    if let Some((i, j, r)) = singular {
        return Err(MdError::SingularPair { i: particles[i].id, j: particles[j].id, r });
    }
    Ok(ForceOutput { forces, potential })
}

/// Forces on `owned` from `owned` plus read-only `ghosts`, as computed by a
/// worker that holds only its own subdomain and the halo it received.
///
/// The potential counts owned-owned pairs fully and owned-ghost pairs at
/// half weight, so summing over a partition gives the global potential.
pub fn compute_forces_on_subset(
    owned: &[Particle],
    ghosts: &[Particle],
    ff: &ForceField,
) -> Result<ForceOutput, MdError> {
    let n_own = owned.len();
    let positions: Vec<Point2> = owned.iter().chain(ghosts).map(|p| p.pos).collect();
    let Some(bounds) = Rect::bounding(positions.iter().copied()) else {
        return Ok(ForceOutput { forces: Vec::new(), potential: 0.0 });
    };
    let mesh = CellMesh::from_points(&positions, bounds, ff.cutoff);
    let mut forces = vec![Point2::ZERO; n_own];
    let mut potential = 0.0;
    let r_min2 = ff.singular_distance().powi(2);
    let mut singular = None;
    mesh.for_each_pair(&positions, ff.cutoff, |i, j, d, r2| {
        let (i_own, j_own) = (i < n_own, j < n_own);
        if !i_own && !j_own {
            return;
        }
        if r2 < r_min2 {
            singular.get_or_insert((i, j, r2.sqrt()));
            return;
        }
        let (f, u) = lj_pair(ff, r2);
        let fij = d * f;
        if i_own {
            forces[i] += fij;
        }
        if j_own {
            forces[j] -= fij;
        }
        potential += if i_own && j_own { u } else { 0.5 * u };
    });
    if let Some((i, j, r)) = singular {
        let id = |k: usize| if k < n_own { owned[k].id } else { ghosts[k - n_own].id };
        return Err(MdError::SingularPair { i: id(i), j: id(j), r });
    }
    Ok(ForceOutput { forces, potential })
}
