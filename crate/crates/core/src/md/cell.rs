use crate::geometry::{Point2, Rect};

/// Uniform rectangular bucketing of particle indices.
///
/// Cells are at least `cell_size` wide in each direction, so every pair
/// closer than `cell_size` lies in the same or an adjacent cell. Points
/// outside `bounds` are folded into the nearest edge cell.
#[derive(Debug, Clone)]
pub struct CellMesh {
    origin: Point2,
    cell_w: f64,
    cell_h: f64,
    nx: usize,
    ny: usize,
    cell_start: Vec<usize>,
    entries: Vec<usize>,
    cell_of_entry: Vec<usize>,
}

// Forward half of the 8-cell stencil; together with the home cell it
// visits every unordered pair of neighbouring cells exactly once.
const HALF_STENCIL: [(isize, isize); 4] = [(1, 0), (-1, 1), (0, 1), (1, 1)];

impl CellMesh {
    pub fn from_points(points: &[Point2], bounds: Rect, cell_size: f64) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        let nx = ((bounds.width() / cell_size).floor() as usize).max(1);
        let ny = ((bounds.height() / cell_size).floor() as usize).max(1);
        let cell_w = if bounds.width() > 0.0 { bounds.width() / nx as f64 } else { cell_size };
        let cell_h = if bounds.height() > 0.0 { bounds.height() / ny as f64 } else { cell_size };
        let mut mesh = CellMesh {
            origin: bounds.min,
            cell_w: cell_w.max(cell_size),
            cell_h: cell_h.max(cell_size),
            nx,
            ny,
            cell_start: vec![0; nx * ny + 1],
            entries: vec![0; points.len()],
            cell_of_entry: vec![0; points.len()],
        };

        // counting sort by cell index
        let cells: Vec<usize> = points.iter().map(|&p| mesh.cell_index(p)).collect();
        for &c in &cells {
            mesh.cell_start[c + 1] += 1;
        }
        for c in 0..nx * ny {
            mesh.cell_start[c + 1] += mesh.cell_start[c];
        }
        let mut fill = mesh.cell_start.clone();
        for (i, &c) in cells.iter().enumerate() {
            mesh.entries[fill[c]] = i;
            fill[c] += 1;
        }
        mesh.cell_of_entry = cells;
        mesh
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_w.min(self.cell_h)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Column and row of the cell containing `p`.
    #[inline]
    pub fn cell_coords(&self, p: Point2) -> (usize, usize) {
        let cx = ((p.x - self.origin.x) / self.cell_w).floor();
        let cy = ((p.y - self.origin.y) / self.cell_h).floor();
        let cx = if cx.is_nan() || cx < 0.0 { 0 } else { (cx as usize).min(self.nx - 1) };
        let cy = if cy.is_nan() || cy < 0.0 { 0 } else { (cy as usize).min(self.ny - 1) };
        (cx, cy)
    }

    #[inline]
    fn cell_index(&self, p: Point2) -> usize {
        let (cx, cy) = self.cell_coords(p);
        cy * self.nx + cx
    }

    /// Cell (column, row) that point index `i` was bucketed into.
    pub fn cell_of(&self, i: usize) -> (usize, usize) {
        let c = self.cell_of_entry[i];
        (c % self.nx, c / self.nx)
    }

    pub fn bucket(&self, cx: usize, cy: usize) -> &[usize] {
        let c = cy * self.nx + cx;
        &self.entries[self.cell_start[c]..self.cell_start[c + 1]]
    }

    /// Calls `f(i, j, r_ij, r2)` once for every unordered pair with
    /// `|r_i - r_j|^2 < cutoff^2`, where `r_ij = r_i - r_j`.
    ///
    /// `cutoff` must not exceed the mesh cell size.
    pub fn for_each_pair<F>(&self, points: &[Point2], cutoff: f64, mut f: F)
    where
        F: FnMut(usize, usize, Point2, f64),
    {
        debug_assert!(cutoff <= self.cell_size() * (1.0 + 1e-12));
        debug_assert_eq!(points.len(), self.entries.len());
        let rc2 = cutoff * cutoff;
        for cy in 0..self.ny {
            for cx in 0..self.nx {
                let home = self.bucket(cx, cy);
                for (a, &i) in home.iter().enumerate() {
                    let pi = points[i];
                    for &j in &home[a + 1..] {
                        let d = pi - points[j];
                        let r2 = d.norm_sq();
                        if r2 < rc2 {
                            f(i, j, d, r2);
                        }
                    }
                }
                for (dx, dy) in HALF_STENCIL {
                    let ox = cx as isize + dx;
                    let oy = cy as isize + dy;
                    if ox < 0 || oy < 0 || ox >= self.nx as isize || oy >= self.ny as isize {
                        continue;
                    }
                    let other = self.bucket(ox as usize, oy as usize);
                    for &i in home {
                        let pi = points[i];
                        for &j in other {
                            let d = pi - points[j];
                            let r2 = d.norm_sq();
                            if r2 < rc2 {
                                f(i, j, d, r2);
                            }
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_point_lands_in_exactly_one_bucket() {
        let pts: Vec<Point2> =
            (0..50).map(|k| Point2::new((k * 7 % 13) as f64 * 0.9, (k * 3 % 11) as f64 * 0.8)).collect();
        let bounds = Rect::new(Point2::ZERO, Point2::new(12.0, 9.0));
        let mesh = CellMesh::from_points(&pts, bounds, 2.5);
        let (nx, ny) = mesh.dims();
        let mut seen = vec![0; pts.len()];
        for cy in 0..ny {
            for cx in 0..nx {
                for &i in mesh.bucket(cx, cy) {
                    seen[i] += 1;
                    assert_eq!(mesh.cell_of(i), (cx, cy));
                }
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn pair_enumeration_matches_brute_force() {
        let pts: Vec<Point2> = (0..120)
            .map(|k| {
                let t = k as f64;
                Point2::new((t * 1.618).fract() * 20.0, (t * 2.713).fract() * 10.0)
            })
            .collect();
        let bounds = Rect::new(Point2::ZERO, Point2::new(20.0, 10.0));
        let mesh = CellMesh::from_points(&pts, bounds, 2.0);
        let mut got = Vec::new();
        mesh.for_each_pair(&pts, 2.0, |i, j, _, _| got.push((i.min(j), i.max(j))));
        got.sort_unstable();
        let mut want = Vec::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if pts[i].dist_sq(pts[j]) < 4.0 {
                    want.push((i, j));
                }
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn points_outside_bounds_fold_into_edge_cells() {
        let bounds = Rect::new(Point2::ZERO, Point2::new(10.0, 10.0));
        let pts = [Point2::new(-3.0, 15.0), Point2::new(f64::NAN, 1.0)];
        let mesh = CellMesh::from_points(&pts, bounds, 2.5);
        assert_eq!(mesh.cell_of(0), (0, 3));
        assert_eq!(mesh.cell_of(1), (0, 0));
    }
}
