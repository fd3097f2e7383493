use super::{MpId, NeighborGraph, Point2, Rect};

/// Pairs of centers whose Voronoi cells, clipped to `bounds`, share an edge
/// of positive length.
///
/// For each pair the shared bisector is parametrized as `m + t d` and every
/// other center, plus the four walls, cuts it down to an interval in `t`.
/// Cells meeting at a single point (co-circular centers) are not adjacent.
pub fn voronoi_adjacency(centers: &[Point2], bounds: Rect) -> NeighborGraph {
    let n = centers.len();
    let min_len = 1e-9 * (bounds.width() + bounds.height());
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (ci, cj) = (centers[i], centers[j]);
            let normal = cj - ci;
            if normal.norm_sq() == 0.0 {
                continue;
            }
            let m = (ci + cj) * 0.5;
            let d = Point2::new(-normal.y, normal.x);
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            // a t <= b
            let mut cut = |a: f64, b: f64| {
                if a > 0.0 {
                    hi = hi.min(b / a);
                } else if a < 0.0 {
                    lo = lo.max(b / a);
                } else if b < 0.0 {
                    hi = f64::NEG_INFINITY;
                }
            };
            for (k, &ck) in centers.iter().enumerate() {
                if k == i || k == j {
                    continue;
                }
                let e = ck - ci;
                cut(2.0 * d.dot(e), ck.norm_sq() - ci.norm_sq() - 2.0 * m.dot(e));
            }
            cut(-d.x, m.x - bounds.min.x);
            cut(d.x, bounds.max.x - m.x);
            cut(-d.y, m.y - bounds.min.y);
            cut(d.y, bounds.max.y - m.y);
            if (hi - lo) * d.norm() > min_len {
                edges.push((i as MpId, j as MpId));
            }
        }
    }
    NeighborGraph::from_edges(n, edges)
}
