//! Material-particle tessellation: subdomain centers, nearest-center
//! (pairwise midplane) ownership, the neighbor graph between subdomains,
//! and the steady-shape settling iteration used before a run starts.

mod contact;
mod point;
mod voronoi;

pub use contact::{rebuild_neighbor_graph, ContactRadii, Contacts};
pub use point::{Point2, Rect};
pub use voronoi::voronoi_adjacency;

use thiserror::Error;

use crate::md::Particle;

/// Index of a material particle (subdomain), in `0..N_p`.
pub type MpId = usize;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("subdomain has no particles; its center is undefined")]
    EmptySubdomain,
    #[error("material particles {a} and {b} share the same center")]
    CoincidentCenters { a: MpId, b: MpId },
    #[error("tessellation did not reach a steady shape within {iterations} iterations")]
    NoConvergence { iterations: usize, partial: Box<Decomposition> },
}

/// One movable Voronoi subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParticle {
    pub id: MpId,
    pub center: Point2,
    /// Global particle ids in local storage order.
    pub particle_ids: Vec<usize>,
    pub linear_size: f64,
    /// Worker that computes this subdomain.
    pub owner: usize,
}

impl MaterialParticle {
    pub fn len(&self) -> usize {
        self.particle_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particle_ids.is_empty()
    }
}

/// Symmetric, irreflexive adjacency between material particles.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NeighborGraph {
    adj: Vec<Vec<MpId>>,
}

impl NeighborGraph {
    pub fn empty(n: usize) -> Self {
        NeighborGraph { adj: vec![Vec::new(); n] }
    }

    /// Builds a graph from an edge list; duplicates and self-loops are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (MpId, MpId)>) -> Self {
        let mut adj = vec![Vec::new(); n];
        for (a, b) in edges {
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        NeighborGraph { adj }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, i: MpId) -> &[MpId] {
        &self.adj[i]
    }

    pub fn degree(&self, i: MpId) -> usize {
        self.adj[i].len()
    }

    pub fn contains(&self, i: MpId, j: MpId) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    pub fn is_symmetric(&self) -> bool {
        self.adj.iter().enumerate().all(|(i, list)| list.iter().all(|&j| j != i && self.contains(j, i)))
    }

    /// Edges of either graph. Both must have the same number of nodes.
    pub fn union(&self, other: &NeighborGraph) -> NeighborGraph {
        assert_eq!(self.len(), other.len(), "graphs over different node sets");
        let edges = (0..self.len())
            .flat_map(|i| self.adj[i].iter().chain(&other.adj[i]).map(move |&j| (i, j)))
            .filter(|&(i, j)| i < j);
        NeighborGraph::from_edges(self.len(), edges)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// The full set of material particles plus their adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub mps: Vec<MaterialParticle>,
    pub neighbors: NeighborGraph,
    /// Step counter `n` of the center update law.
    pub step: u64,
    pub bounds: Rect,
}

impl Decomposition {
    /// Creates a decomposition with the given centers and no particles.
    pub fn with_centers(centers: &[Point2], bounds: Rect) -> Self {
        let n = centers.len();
        let fallback = fallback_linear_size(bounds.area(), n);
        let mps = centers
            .iter()
            .enumerate()
            .map(|(id, &center)| MaterialParticle {
                id,
                center,
                particle_ids: Vec::new(),
                linear_size: fallback,
                owner: id,
            })
            .collect();
        Decomposition { mps, neighbors: NeighborGraph::empty(n), step: 0, bounds }
    }

    pub fn len(&self) -> usize {
        self.mps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mps.is_empty()
    }

    pub fn centers(&self) -> Vec<Point2> {
        self.mps.iter().map(|m| m.center).collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.mps.iter().map(MaterialParticle::len).collect()
    }

    /// Particle-indexed owner table derived from the MPs' id lists.
    pub fn ownership(&self, n_particles: usize) -> Vec<MpId> {
        let mut owner = vec![usize::MAX; n_particles];
        for mp in &self.mps {
            for &p in &mp.particle_ids {
                owner[p] = mp.id;
            }
        }
        owner
    }

    /// Replaces the id lists from an owner table. Particles that stay keep
    /// their relative order; arrivals are appended in id order.
    pub fn set_ownership(&mut self, owner: &[MpId]) {
        let mut arrivals: Vec<Vec<usize>> = vec![Vec::new(); self.mps.len()];
        let mut kept = vec![false; owner.len()];
        for mp in &mut self.mps {
            let id = mp.id;
            mp.particle_ids.retain(|&p| p < owner.len() && owner[p] == id);
            for &p in &mp.particle_ids {
                kept[p] = true;
            }
        }
        for (p, &o) in owner.iter().enumerate() {
            if !kept[p] {
                arrivals[o].push(p);
            }
        }
        for (mp, new) in self.mps.iter_mut().zip(arrivals) {
            mp.particle_ids.extend(new);
        }
    }

    /// Recomputes every MP's linear size from its particles.
    pub fn refresh_linear_sizes(&mut self, particles: &[Particle]) {
        let area = self.bounds.area();
        let n = self.mps.len();
        for mp in &mut self.mps {
            mp.linear_size = compute_linear_size(mp, particles, area, n);
        }
    }

    /// Fails with `CoincidentCenters` on the first pair of equal centers.
    pub fn check_distinct_centers(&self) -> Result<(), GeometryError> {
        for a in 0..self.mps.len() {
            for b in a + 1..self.mps.len() {
                if self.mps[a].center == self.mps[b].center {
                    return Err(GeometryError::CoincidentCenters { a, b });
                }
            }
        }
        Ok(())
    }
}

/// Mean position of a set of points (center of mass for equal masses).
pub fn compute_center(points: &[Point2]) -> Result<Point2, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptySubdomain);
    }
    let mut sx = 0.0;
    let mut sy = 0.0;
    for p in points {
        sx += p.x;
        sy += p.y;
    }
    let n = points.len() as f64;
    Ok(Point2::new(sx / n, sy / n))
}

fn center_of_ids(ids: &[usize], particles: &[Particle]) -> Option<Point2> {
    if ids.is_empty() {
        return None;
    }
    let mut sx = 0.0;
    let mut sy = 0.0;
    for &id in ids {
        sx += particles[id].pos.x;
        sy += particles[id].pos.y;
    }
    let n = ids.len() as f64;
    Some(Point2::new(sx / n, sy / n))
}

/// Index of the center nearest to `p`; ties go to the lowest index.
#[inline]
pub fn nearest_center(centers: &[Point2], p: Point2) -> MpId {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = c.dist_sq(p);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Assigns every particle to the MP on its side of all pairwise midplanes,
/// which is the MP with the nearest center (lowest id on ties).
pub fn assign_by_midplanes(decomp: &Decomposition, particles: &[Particle]) -> Result<Vec<MpId>, GeometryError> {
    decomp.check_distinct_centers()?;
    let centers = decomp.centers();
    Ok(particles.iter().map(|p| nearest_center(&centers, p.pos)).collect())
}

/// Fallback linear size `sqrt(area / n_mp)` for MPs too small to measure.
pub fn fallback_linear_size(domain_area: f64, n_mp: usize) -> f64 {
    (domain_area / n_mp.max(1) as f64).sqrt()
}

/// Largest bounding-box extent of the MP's particles, or the fallback for
/// fewer than two (or coincident) particles.
pub fn compute_linear_size(mp: &MaterialParticle, particles: &[Particle], domain_area: f64, n_mp: usize) -> f64 {
    let fallback = fallback_linear_size(domain_area, n_mp);
    if mp.particle_ids.len() < 2 {
        return fallback;
    }
    let bbox = Rect::bounding(mp.particle_ids.iter().map(|&id| particles[id].pos)).expect("non-empty");
    let extent = bbox.width().max(bbox.height());
    if extent > 0.0 && extent.is_finite() {
        extent
    } else {
        fallback
    }
}

/// Splits `bounds` into an `nx` by `ny` grid of rectangles. MP ids run
/// column-major: id = column * ny + row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectGrid {
    pub bounds: Rect,
    pub nx: usize,
    pub ny: usize,
}

impl RectGrid {
    pub fn new(bounds: Rect, nx: usize, ny: usize) -> Self {
        assert!(nx >= 1 && ny >= 1, "grid needs at least one cell");
        RectGrid { bounds, nx, ny }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_of(&self, p: Point2) -> MpId {
        let fx = (p.x - self.bounds.min.x) / self.bounds.width() * self.nx as f64;
        let fy = (p.y - self.bounds.min.y) / self.bounds.height() * self.ny as f64;
        let cx = (fx.max(0.0) as usize).min(self.nx - 1);
        let cy = (fy.max(0.0) as usize).min(self.ny - 1);
        cx * self.ny + cy
    }

    pub fn cell_rect(&self, id: MpId) -> Rect {
        let (cx, cy) = (id / self.ny, id % self.ny);
        let w = self.bounds.width() / self.nx as f64;
        let h = self.bounds.height() / self.ny as f64;
        let min = Point2::new(self.bounds.min.x + cx as f64 * w, self.bounds.min.y + cy as f64 * h);
        Rect::new(min, Point2::new(min.x + w, min.y + h))
    }
}

/// Initial rectangular decomposition: ownership by grid cell, centers at
/// the owned particles' mean (cell center when a cell is empty).
pub fn rectangular_split(grid: &RectGrid, particles: &[Particle]) -> Decomposition {
    let centers: Vec<Point2> = (0..grid.len()).map(|id| grid.cell_rect(id).center()).collect();
    let mut decomp = Decomposition::with_centers(&centers, grid.bounds);
    let owner: Vec<MpId> = particles.iter().map(|p| grid.cell_of(p.pos)).collect();
    decomp.set_ownership(&owner);
    for mp in &mut decomp.mps {
        if let Some(c) = center_of_ids(&mp.particle_ids, particles) {
            mp.center = c;
        }
    }
    decomp.refresh_linear_sizes(particles);
    decomp
}

/// Alternates center recomputation and midplane assignment until a full
/// sweep changes no owner. Returns the settled decomposition and the number
/// of sweeps used, counting the final unchanged sweep.
///
/// Empty MPs keep their previous center.
pub fn settle_initial_tessellation(
    mut decomp: Decomposition,
    particles: &[Particle],
    max_iters: usize,
) -> Result<(Decomposition, usize), GeometryError> {
    let mut owner = decomp.ownership(particles.len());
    for iter in 1..=max_iters {
        for mp in &mut decomp.mps {
            if let Some(c) = center_of_ids(&mp.particle_ids, particles) {
                mp.center = c;
            }
        }
        let next = assign_by_midplanes(&decomp, particles)?;
        let changes = owner.iter().zip(&next).filter(|(a, b)| a != b).count();
        if changes > 0 {
            decomp.set_ownership(&next);
            owner = next;
        }
        if changes == 0 {
            decomp.refresh_linear_sizes(particles);
            return Ok((decomp, iter));
        }
    }
    decomp.refresh_linear_sizes(particles);
    Err(GeometryError::NoConvergence { iterations: max_iters, partial: Box::new(decomp) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::md::Particle;
    use proptest::prelude::*;

    fn parts(points: &[(f64, f64)]) -> Vec<Particle> {
        points.iter().enumerate().map(|(i, &(x, y))| Particle::at_rest(i, Point2::new(x, y))).collect()
    }

    fn bounds() -> Rect {
        Rect::new(Point2::new(-100.0, -100.0), Point2::new(100.0, 100.0))
    }

    #[test]
    fn center_examples() {
        let c = compute_center(&[Point2::new(0.0, 0.0), Point2::new(2.0, 0.0)]).unwrap();
        assert_eq!(c, Point2::new(1.0, 0.0));
        let c = compute_center(&[Point2::new(3.0, 4.0)]).unwrap();
        assert_eq!(c, Point2::new(3.0, 4.0));
        // hand sum: x = (0+1+0)/3, y = (0+0+3)/3
        let c = compute_center(&[Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 3.0)]).unwrap();
        assert!((c.x - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.y - 1.0).abs() < 1e-15);
        assert!(matches!(compute_center(&[]), Err(GeometryError::EmptySubdomain)));
    }

    #[test]
    fn midplane_assignment_examples() {
        let d = Decomposition::with_centers(&[Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)], bounds());
        let p = parts(&[(2.0, 1.0), (5.0, 3.0), (7.0, -2.0)]);
        assert_eq!(assign_by_midplanes(&d, &p).unwrap(), vec![0, 0, 1]);
    }

    #[test]
    fn coincident_centers_are_rejected() {
        let d = Decomposition::with_centers(
            &[Point2::new(1.0, 1.0), Point2::new(3.0, 0.0), Point2::new(1.0, 1.0)],
            bounds(),
        );
        let err = assign_by_midplanes(&d, &parts(&[(0.0, 0.0)])).unwrap_err();
        assert!(matches!(err, GeometryError::CoincidentCenters { a: 0, b: 2 }));
    }

    #[test]
    fn linear_size_examples() {
        let p = parts(&[(0.0, 0.0), (4.0, 1.0), (2.0, 0.5)]);
        let mut d = Decomposition::with_centers(&[Point2::ZERO], bounds());
        d.mps[0].particle_ids = vec![0, 1, 2];
        assert_eq!(compute_linear_size(&d.mps[0], &p, 100.0 * 100.0, 4), 4.0);
        d.mps[0].particle_ids.clear();
        assert_eq!(compute_linear_size(&d.mps[0], &p, 100.0 * 100.0, 4), 50.0);
        d.mps[0].particle_ids = vec![1];
        assert_eq!(compute_linear_size(&d.mps[0], &p, 100.0 * 100.0, 4), 50.0);
    }

    #[test]
    fn set_ownership_keeps_order_of_staying_particles() {
        let mut d = Decomposition::with_centers(&[Point2::ZERO, Point2::new(1.0, 0.0)], bounds());
        d.mps[0].particle_ids = vec![3, 0, 2];
        d.mps[1].particle_ids = vec![1, 4];
        d.set_ownership(&[0, 0, 1, 0, 1]);
        assert_eq!(d.mps[0].particle_ids, vec![3, 0, 1]);
        assert_eq!(d.mps[1].particle_ids, vec![4, 2]);
    }

    #[test]
    fn settled_ownership_is_a_fixpoint() {
        // 1D bar of particles, four strips
        let pts: Vec<(f64, f64)> = (0..400).map(|k| ((k % 100) as f64, (k / 100) as f64)).collect();
        let p = parts(&pts);
        let grid = RectGrid::new(Rect::new(Point2::new(-0.5, -0.5), Point2::new(140.0, 3.5)), 4, 1);
        let d = rectangular_split(&grid, &p);
        let (settled, iters) = settle_initial_tessellation(d, &p, 200).unwrap();
        assert!(iters >= 2);
        let owner = settled.ownership(p.len());
        let centers = settled.centers();
        for (k, q) in p.iter().enumerate() {
            assert_eq!(owner[k], nearest_center(&centers, q.pos));
        }
        // a second settle changes nothing and stops after one sweep
        let (again, iters2) = settle_initial_tessellation(settled.clone(), &p, 200).unwrap();
        assert_eq!(iters2, 1);
        assert_eq!(again.ownership(p.len()), owner);
        // the last grid cell holds no particle and keeps its center
        assert_eq!(settled.counts()[3], 0);
        assert_eq!(settled.mps[3].center, grid.cell_rect(3).center());
    }

    #[test]
    fn settle_reports_no_convergence_with_partial_state() {
        let pts: Vec<(f64, f64)> = (0..400).map(|k| ((k % 100) as f64, (k / 100) as f64)).collect();
        let p = parts(&pts);
        let grid = RectGrid::new(Rect::new(Point2::new(-0.5, -0.5), Point2::new(140.0, 3.5)), 4, 1);
        match settle_initial_tessellation(rectangular_split(&grid, &p), &p, 1) {
            Err(GeometryError::NoConvergence { iterations, partial }) => {
                assert_eq!(iterations, 1);
                assert_eq!(partial.counts().iter().sum::<usize>(), 400);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn rect_grid_ids_are_column_major() {
        let g = RectGrid::new(Rect::new(Point2::ZERO, Point2::new(20.0, 70.0)), 2, 7);
        assert_eq!(g.cell_of(Point2::new(1.0, 1.0)), 0);
        assert_eq!(g.cell_of(Point2::new(1.0, 69.0)), 6);
        assert_eq!(g.cell_of(Point2::new(19.0, 1.0)), 7);
        assert_eq!(g.cell_of(Point2::new(25.0, 75.0)), 13);
        assert_eq!(g.cell_rect(8).center(), Point2::new(15.0, 15.0));
    }

    proptest! {
        #[test]
        fn translation_moves_centers_and_keeps_ownership(
            pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 10..200),
            shift in (-20.0f64..20.0, -20.0f64..20.0),
        ) {
            let p = parts(&pts);
            let b = Rect::new(Point2::new(-60.0, -60.0), Point2::new(60.0, 60.0));
            let d = rectangular_split(&RectGrid::new(b, 3, 2), &p);
            let Ok((s, _)) = settle_initial_tessellation(d, &p, 200) else { return Ok(()) };

            let t = Point2::new(shift.0, shift.1);
            let moved: Vec<Particle> = p.iter().map(|q| Particle { pos: q.pos + t, ..q.clone() }).collect();
            let mut ts = s.clone();
            for mp in &mut ts.mps { mp.center += t; }
            prop_assert_eq!(assign_by_midplanes(&ts, &moved).unwrap(), s.ownership(p.len()));
            for (a, b) in s.mps.iter().zip(&ts.mps) {
                if a.is_empty() { continue; }
                let ca = compute_center(&a.particle_ids.iter().map(|&i| p[i].pos).collect::<Vec<_>>()).unwrap();
                let cb = compute_center(&b.particle_ids.iter().map(|&i| moved[i].pos).collect::<Vec<_>>()).unwrap();
                prop_assert!(((cb - ca) - t).norm() < 1e-9);
            }
        }

        #[test]
        fn assignment_is_a_partition(
            pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..300),
            centers in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..12),
        ) {
            let p = parts(&pts);
            let c: Vec<Point2> = centers.iter().map(|&(x, y)| Point2::new(x, y)).collect();
            let mut d = Decomposition::with_centers(&c, bounds());
            let Ok(owner) = assign_by_midplanes(&d, &p) else { return Ok(()) };
            d.set_ownership(&owner);
            let mut seen = vec![0u8; p.len()];
            for mp in &d.mps { for &i in &mp.particle_ids { seen[i] += 1; } }
            prop_assert!(seen.iter().all(|&s| s == 1));
        }
    }
}
