use super::{CellMesh, Particle};
use crate::geometry::MaterialParticle;

/// Result of reordering one MP's particles along a rectangular mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Renumbering {
    /// Global ids in their new local order.
    pub order: Vec<usize>,
    /// `permutation[new_index] = old_index` within the MP's id list.
    pub permutation: Vec<usize>,
}

impl Renumbering {
    pub fn is_identity(&self) -> bool {
        self.permutation.iter().enumerate().all(|(k, &p)| k == p)
    }
}

/// Orders an MP's particles by (cell row, cell column, previous position).
///
/// `mesh` must have been built over the full particle array.
pub fn renumber_particles(mp: &MaterialParticle, particles: &[Particle], mesh: &CellMesh) -> Renumbering {
    debug_assert_eq!(mesh.len(), particles.len());
    let mut permutation: Vec<usize> = (0..mp.particle_ids.len()).collect();
    // stable sort keeps previous order within a cell
    permutation.sort_by_key(|&k| {
        let (cx, cy) = mesh.cell_of(mp.particle_ids[k]);
        (cy, cx)
    });
    let order = permutation.iter().map(|&k| mp.particle_ids[k]).collect();
    Renumbering { order, permutation }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point2, Rect};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mp_with(ids: Vec<usize>) -> MaterialParticle {
        MaterialParticle { id: 0, center: Point2::ZERO, particle_ids: ids, linear_size: 1.0, owner: 0 }
    }

    fn mesh_over(p: &[Particle], bounds: Rect, cell: f64) -> CellMesh {
        let pos: Vec<Point2> = p.iter().map(|q| q.pos).collect();
        CellMesh::from_points(&pos, bounds, cell)
    }

    #[test]
    fn row_major_input_is_left_alone() {
        let p: Vec<Particle> =
            (0..16).map(|k| Particle::at_rest(k, Point2::new((k % 4) as f64 + 0.5, (k / 4) as f64 + 0.5))).collect();
        let mesh = mesh_over(&p, Rect::new(Point2::ZERO, Point2::new(4.0, 4.0)), 1.0);
        let r = renumber_particles(&mp_with((0..16).collect()), &p, &mesh);
        assert!(r.is_identity());
    }

    #[test]
    fn reversed_column_is_reversed_back() {
        let p: Vec<Particle> = (0..6).map(|k| Particle::at_rest(k, Point2::new(0.5, k as f64 + 0.5))).collect();
        let mesh = mesh_over(&p, Rect::new(Point2::ZERO, Point2::new(1.0, 6.0)), 1.0);
        let r = renumber_particles(&mp_with((0..6).rev().collect()), &p, &mesh);
        assert_eq!(r.permutation, vec![5, 4, 3, 2, 1, 0]);
        assert_eq!(r.order, (0..6).collect::<Vec<_>>());
    }

    fn mean_pair_gap(order: &[usize], p: &[Particle], cutoff: f64) -> f64 {
        let mut index = vec![0usize; p.len()];
        for (k, &id) in order.iter().enumerate() {
            index[id] = k;
        }
        let (mut sum, mut n) = (0.0, 0usize);
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                if p[i].pos.dist_sq(p[j].pos) < cutoff * cutoff {
                    sum += (index[i] as f64 - index[j] as f64).abs();
                    n += 1;
                }
            }
        }
        sum / n as f64
    }

    #[test]
    fn renumbering_improves_locality_over_random_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p: Vec<Particle> = (0..500)
            .map(|k| Particle::at_rest(k, Point2::new(rng.random_range(0.0..30.0), rng.random_range(0.0..30.0))))
            .collect();
        let mut ids: Vec<usize> = (0..500).collect();
        ids.shuffle(&mut rng);
        let mesh = mesh_over(&p, Rect::new(Point2::ZERO, Point2::new(30.0, 30.0)), 2.5);
        let r = renumber_particles(&mp_with(ids.clone()), &p, &mesh);

        let mut sorted = r.permutation.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..500).collect::<Vec<_>>());

        let ours = mean_pair_gap(&r.order, &p, 2.5);
        for _ in 0..100 {
            ids.shuffle(&mut rng);
            assert!(ours < mean_pair_gap(&ids, &p, 2.5));
        }
    }
}
