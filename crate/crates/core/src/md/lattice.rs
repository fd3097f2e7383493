//! Initial particle configurations on a triangular lattice.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Particle;
use crate::geometry::Point2;

/// Triangular-lattice bar of `cols` x `rows` sites with nearest-neighbor
/// spacing `a`, lower-left site at `origin`. Odd rows are shifted by a/2.
pub fn triangular_bar(cols: usize, rows: usize, a: f64, origin: Point2) -> Vec<Point2> {
    let dy = a * 3f64.sqrt() / 2.0;
    let mut out = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        let shift = if r % 2 == 1 { 0.5 * a } else { 0.0 };
        for c in 0..cols {
            out.push(Point2::new(origin.x + c as f64 * a + shift, origin.y + r as f64 * dy));
        }
    }
    out
}

/// Triangular-lattice sites inside a disk of `radius` around `center`.
pub fn triangular_disk(center: Point2, radius: f64, a: f64) -> Vec<Point2> {
    let dy = a * 3f64.sqrt() / 2.0;
    let n_rows = (radius / dy).floor() as i64;
    let n_cols = (radius / a).ceil() as i64 + 1;
    let mut out = Vec::new();
    for r in -n_rows..=n_rows {
        let shift = if r.rem_euclid(2) == 1 { 0.5 * a } else { 0.0 };
        for c in -n_cols..=n_cols {
            let p = Point2::new(c as f64 * a + shift, r as f64 * dy);
            if p.norm_sq() <= radius * radius {
                out.push(center + p);
            }
        }
    }
    out
}

/// Numbers positions into particles with ids `first_id..`, all moving with
/// `velocity` and tagged `species`.
pub fn particles_from(positions: &[Point2], first_id: usize, velocity: Point2, species: u8) -> Vec<Particle> {
    positions.iter().enumerate().map(|(k, &pos)| Particle { id: first_id + k, pos, vel: velocity, species }).collect()
}

/// Adds Maxwell-Boltzmann velocities at `temperature` (k_B = m = 1) with
/// the group's net momentum change removed.
pub fn thermalize<R: Rng>(particles: &mut [Particle], temperature: f64, rng: &mut R) {
    if temperature <= 0.0 || particles.is_empty() {
        return;
    }
    let normal = Normal::new(0.0, temperature.sqrt()).expect("finite temperature");
    let kicks: Vec<Point2> = particles.iter().map(|_| Point2::new(normal.sample(rng), normal.sample(rng))).collect();
    let mean = kicks.iter().fold(Point2::ZERO, |a, &k| a + k) / kicks.len() as f64;
    for (p, k) in particles.iter_mut().zip(kicks) {
        p.vel += k - mean;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bar_has_nearest_neighbors_at_spacing() {
        let a = 2f64.powf(1.0 / 6.0);
        let pts = triangular_bar(6, 4, a, Point2::ZERO);
        assert_eq!(pts.len(), 24);
        let d_min = (0..pts.len())
            .flat_map(|i| (i + 1..pts.len()).map(move |j| (i, j)))
            .map(|(i, j)| pts[i].dist_sq(pts[j]).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!((d_min - a).abs() < 1e-12);
    }

    #[test]
    fn disk_count_tracks_area() {
        let a = 1.0;
        let pts = triangular_disk(Point2::new(5.0, 5.0), 20.0, a);
        let expected = std::f64::consts::PI * 400.0 / (a * a * 3f64.sqrt() / 2.0);
        assert!((pts.len() as f64 / expected - 1.0).abs() < 0.03);
        assert!(pts.iter().all(|p| p.dist_sq(Point2::new(5.0, 5.0)) <= 400.0 + 1e-9));
    }

    #[test]
    fn thermalize_keeps_momentum() {
        let mut p = particles_from(&triangular_bar(10, 10, 1.0, Point2::ZERO), 0, Point2::new(0.5, 0.0), 0);
        thermalize(&mut p, 0.1, &mut ChaCha8Rng::seed_from_u64(3));
        let m = p.iter().fold(Point2::ZERO, |a, q| a + q.vel);
        assert!((m - Point2::new(50.0, 0.0)).norm() < 1e-10);
        assert!(p.iter().any(|q| q.vel != Point2::new(0.5, 0.0)));
    }
}
