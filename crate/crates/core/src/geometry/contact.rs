use super::{MpId, NeighborGraph, Point2, Rect};
use crate::md::{CellMesh, Particle};

/// Distances that define which particles interact and which are exchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactRadii {
    /// Force cutoff; pairs closer than this are counted as work.
    pub interaction: f64,
    /// Interaction cutoff plus skin; governs ghosts and MP adjacency.
    pub halo: f64,
}

impl ContactRadii {
    pub fn new(interaction: f64, skin: f64) -> Self {
        assert!(interaction > 0.0 && skin >= 0.0);
        ContactRadii { interaction, halo: interaction + skin }
    }
}

/// Cross-subdomain proximity derived from one sweep over particle pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Contacts {
    pub graph: NeighborGraph,
    /// For each MP, sorted ids of foreign particles within the halo radius
    /// of one of its own particles.
    pub ghosts: Vec<Vec<usize>>,
    /// For each MP, interacting pairs with at least one owned endpoint.
    /// Cross-boundary pairs count once on each side.
    pub pair_counts: Vec<usize>,
}

impl Contacts {
    pub fn scan(particles: &[Particle], owner: &[MpId], n_mp: usize, bounds: Rect, radii: ContactRadii) -> Contacts {
        debug_assert_eq!(particles.len(), owner.len());
        let positions: Vec<Point2> = particles.iter().map(|p| p.pos).collect();
        let mesh = CellMesh::from_points(&positions, bounds, radii.halo);
        let rc2 = radii.interaction * radii.interaction;

        let mut edges = Vec::new();
        let mut ghosts: Vec<Vec<usize>> = vec![Vec::new(); n_mp];
        let mut pair_counts = vec![0usize; n_mp];
        mesh.for_each_pair(&positions, radii.halo, |i, j, _, r2| {
            let (oi, oj) = (owner[i], owner[j]);
            if oi == oj {
                if r2 < rc2 {
                    pair_counts[oi] += 1;
                }
            } else {
                if r2 < rc2 {
                    pair_counts[oi] += 1;
                    pair_counts[oj] += 1;
                }
                edges.push((oi.min(oj), oi.max(oj)));
                ghosts[oi].push(j);
                ghosts[oj].push(i);
            }
        });
        edges.sort_unstable();
        edges.dedup();
        for g in &mut ghosts {
            g.sort_unstable();
            g.dedup();
        }
        Contacts { graph: NeighborGraph::from_edges(n_mp, edges), ghosts, pair_counts }
    }
}

/// MP adjacency: `i` and `j` are neighbors when some particle of `i` and
/// some particle of `j` lie within `cutoff` of each other.
pub fn rebuild_neighbor_graph(
    particles: &[Particle],
    owner: &[MpId],
    n_mp: usize,
    bounds: Rect,
    cutoff: f64,
) -> NeighborGraph {
    Contacts::scan(particles, owner, n_mp, bounds, ContactRadii::new(cutoff, 0.0)).graph
}
