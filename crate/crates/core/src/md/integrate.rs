use super::{ForceField, ForceOutput, MdError, Particle};
use crate::geometry::{Point2, Rect};

/// Boundary treatment for the integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Walls {
    /// Specular reflection at the rectangle's edges.
    Reflective(Rect),
    /// Free space.
    Open,
}

/// One velocity-Verlet step (unit mass).
///
/// `forces` must hold the forces at the current positions; on return it
/// holds the forces at the new positions. `force_fn` evaluates forces for a
/// configuration. Returns the potential energy at the new positions.
pub fn verlet_step<F>(
    particles: &mut [Particle],
    forces: &mut Vec<Point2>,
    ff: &ForceField,
    walls: Walls,
    mut force_fn: F,
) -> Result<f64, MdError>
where
    F: FnMut(&[Particle]) -> Result<ForceOutput, MdError>,
{
    debug_assert_eq!(particles.len(), forces.len());
    let half = 0.5 * ff.dt;
    for (p, f) in particles.iter_mut().zip(forces.iter()) {
        p.vel += *f * half;
        p.pos += p.vel * ff.dt;
        if let Walls::Reflective(b) = walls {
            reflect(p, &b);
        }
    }
    let out = force_fn(particles)?;
    for (p, f) in particles.iter_mut().zip(&out.forces) {
        p.vel += *f * half;
    }
    *forces = out.forces;
    Ok(out.potential)
}

fn reflect(p: &mut Particle, b: &Rect) {
    if p.pos.x < b.min.x {
        p.pos.x = (2.0 * b.min.x - p.pos.x).min(b.max.x);
        p.vel.x = -p.vel.x;
    } else if p.pos.x > b.max.x {
        p.pos.x = (2.0 * b.max.x - p.pos.x).max(b.min.x);
        p.vel.x = -p.vel.x;
    }
    if p.pos.y < b.min.y {
        p.pos.y = (2.0 * b.min.y - p.pos.y).min(b.max.y);
        p.vel.y = -p.vel.y;
    } else if p.pos.y > b.max.y {
        p.pos.y = (2.0 * b.max.y - p.pos.y).max(b.min.y);
        p.vel.y = -p.vel.y;
    }
}

/// Sum of 1/2 |v|^2 (unit mass).
pub fn kinetic_energy(particles: &[Particle]) -> f64 {
    particles.iter().map(|p| 0.5 * p.vel.norm_sq()).sum()
}

pub fn total_momentum(particles: &[Particle]) -> Point2 {
    particles.iter().fold(Point2::ZERO, |acc, p| acc + p.vel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::md::{compute_forces, CellMesh};

    fn forces_open(ff: ForceField) -> impl FnMut(&[Particle]) -> Result<ForceOutput, MdError> {
        move |p: &[Particle]| {
            let pos: Vec<Point2> = p.iter().map(|q| q.pos).collect();
            let mut b = Rect::bounding(pos.iter().copied()).unwrap();
            b.max += Point2::new(1e-9, 1e-9);
            compute_forces(p, &ff, &CellMesh::from_points(&pos, b, ff.cutoff))
        }
    }

    #[test]
    fn at_rest_without_force_stays_put() {
        let ff = ForceField::default();
        let mut p = vec![Particle::at_rest(0, Point2::new(1.0, 2.0))];
        let mut f = vec![Point2::ZERO];
        verlet_step(&mut p, &mut f, &ff, Walls::Open, forces_open(ff)).unwrap();
        assert_eq!(p[0].pos, Point2::new(1.0, 2.0));
    }

    #[test]
    fn free_particle_moves_v_dt() {
        let ff = ForceField { dt: 0.01, ..ForceField::default() };
        let mut p = vec![Particle { vel: Point2::new(2.0, -1.0), ..Particle::at_rest(0, Point2::ZERO) }];
        let mut f = vec![Point2::ZERO];
        verlet_step(&mut p, &mut f, &ff, Walls::Open, forces_open(ff)).unwrap();
        assert!((p[0].pos - Point2::new(0.02, -0.01)).norm() < 1e-15);
    }

    #[test]
    fn wall_reflects_position_and_velocity() {
        let ff = ForceField { dt: 0.1, ..ForceField::default() };
        let b = Rect::new(Point2::ZERO, Point2::new(1.0, 1.0));
        let mut p = vec![Particle { vel: Point2::new(1.0, 0.0), ..Particle::at_rest(0, Point2::new(0.95, 0.5)) }];
        let mut f = vec![Point2::ZERO];
        verlet_step(&mut p, &mut f, &ff, Walls::Reflective(b), forces_open(ff)).unwrap();
        assert!((p[0].pos.x - 0.95).abs() < 1e-12);
        assert_eq!(p[0].vel.x, -1.0);
    }

    fn energy_drift(dt: f64) -> f64 {
        // bound pair, released from a slightly stretched separation
        let ff = ForceField { dt, ..ForceField::default() };
        let mut p = vec![Particle::at_rest(0, Point2::ZERO), Particle::at_rest(1, Point2::new(1.2, 0.0))];
        let mut eval = forces_open(ff);
        let first = eval(&p).unwrap();
        let mut f = first.forces;
        let e0 = kinetic_energy(&p) + first.potential;
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let u = verlet_step(&mut p, &mut f, &ff, Walls::Open, &mut eval).unwrap();
            let e = kinetic_energy(&p) + u;
            worst = worst.max(((e - e0) / e0).abs());
        }
        worst
    }

    #[test]
    fn bound_pair_conserves_energy() {
        let drift = energy_drift(0.001);
        assert!(drift < 1e-4, "drift {drift}");
        // second-order scheme: halving dt cuts the error roughly fourfold
        let finer = energy_drift(0.0005);
        assert!(finer < drift * 0.5, "dt/2 drift {finer} vs {drift}");
    }

    #[test]
    fn kinetic_energy_examples() {
        assert_eq!(kinetic_energy(&[Particle::at_rest(0, Point2::ZERO)]), 0.0);
        let p = Particle { vel: Point2::new(0.0, 2.0), ..Particle::at_rest(0, Point2::ZERO) };
        assert_eq!(kinetic_energy(&[p]), 2.0);
    }
}
