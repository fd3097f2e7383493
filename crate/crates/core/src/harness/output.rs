use std::io::{BufWriter, Write};
use std::path::Path;

use super::HarnessError;
use crate::geometry::{MpId, Rect};
use crate::md::Particle;

/// Particle state at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub particles: Vec<Particle>,
    pub owner: Vec<MpId>,
}

pub fn write_snapshot_to<W: Write>(snap: &Snapshot, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "id,x,y,vx,vy,owner")?;
    for (p, o) in snap.particles.iter().zip(&snap.owner) {
        writeln!(out, "{},{},{},{},{},{}", p.id, p.pos.x, p.pos.y, p.vel.x, p.vel.y, o)?;
    }
    out.flush()
}

pub fn write_snapshot(snap: &Snapshot, path: &Path) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io { path: path.to_path_buf(), source };
    write_snapshot_to(snap, std::fs::File::create(path).map_err(io)?).map_err(io)
}

/// Fixed-bin 2D histogram of particle positions, row 0 at the top
/// (largest y). Particles outside `bounds` fall into the edge bins.
pub fn density_histogram(particles: &[Particle], bounds: Rect, bins: [usize; 2]) -> Vec<Vec<u32>> {
    let [nx, ny] = bins;
    let mut h = vec![vec![0u32; nx]; ny];
    for p in particles {
        let fx = (p.pos.x - bounds.min.x) / bounds.width();
        let fy = (p.pos.y - bounds.min.y) / bounds.height();
        if !(fx.is_finite() && fy.is_finite()) {
            continue;
        }
        let cx = ((fx * nx as f64).floor().max(0.0) as usize).min(nx - 1);
        let cy = ((fy * ny as f64).floor().max(0.0) as usize).min(ny - 1);
        h[ny - 1 - cy][cx] += 1;
    }
    h
}

/// Binary PPM (P6). Gray level is `255 * count / max_count`, so denser
/// bins are lighter and empty bins are black.
pub fn render_density_to<W: Write>(
    particles: &[Particle],
    bounds: Rect,
    bins: [usize; 2],
    out: W,
) -> std::io::Result<()> {
    let h = density_histogram(particles, bounds, bins);
    let max = h.iter().flatten().copied().max().unwrap_or(0).max(1);
    let mut out = BufWriter::new(out);
    write!(out, "P6\n{} {}\n255\n", bins[0], bins[1])?;
    for row in &h {
        for &c in row {
            let g = ((255 * c as u64 + max as u64 / 2) / max as u64) as u8;
            out.write_all(&[g, g, g])?;
        }
    }
    out.flush()
}

pub fn render_density(particles: &[Particle], bounds: Rect, bins: [usize; 2], path: &Path) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io { path: path.to_path_buf(), source };
    render_density_to(particles, bounds, bins, std::fs::File::create(path).map_err(io)?).map_err(io)
}
