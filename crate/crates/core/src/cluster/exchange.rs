use std::collections::BTreeMap;

use super::{ClusterError, NeighborMessage, Payload, WorkerReport};
use crate::geometry::{nearest_center, ContactRadii, Contacts, Decomposition, MpId, Point2, RectGrid};
use crate::md::Particle;

/// Rule that decides which MP a particle belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Partition {
    /// Nearest MP center (pairwise midplanes).
    Voronoi,
    /// Fixed rectangular cells.
    Grid(RectGrid),
}

impl Partition {
    fn target(&self, centers: &[Point2], p: Point2) -> MpId {
        match self {
            Partition::Voronoi => nearest_center(centers, p),
            Partition::Grid(g) => g.cell_of(p),
        }
    }

    /// Representative point of an MP's region, used to route multi-hop moves.
    fn anchor(&self, centers: &[Point2], mp: MpId) -> Point2 {
        match self {
            Partition::Voronoi => centers[mp],
            Partition::Grid(g) => g.cell_rect(mp).center(),
        }
    }
}

/// What one MP received from its neighbors during the metric exchange.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Inbox {
    pub metrics: Vec<WorkerReport>,
    /// `(sender, center, linear size)`.
    pub centers: Vec<(MpId, Point2, f64)>,
}

/// Sends every MP's report and center to its graph neighbors, and only to
/// them. Returns the per-MP inboxes and the messages for cost accounting.
pub fn deliver_metrics(decomp: &Decomposition, reports: &[WorkerReport]) -> (Vec<Inbox>, Vec<NeighborMessage>) {
    let n = decomp.len();
    let mut inboxes = vec![Inbox::default(); n];
    let mut messages = Vec::new();
    for (i, mp) in decomp.mps.iter().enumerate() {
        for &j in decomp.neighbors.neighbors(i) {
            inboxes[j].metrics.push(reports[i]);
            inboxes[j].centers.push((i, mp.center, mp.linear_size));
            messages.push(NeighborMessage { sender: i, receiver: j, payload: Payload::Metrics(reports[i]) });
            messages.push(NeighborMessage {
                sender: i,
                receiver: j,
                payload: Payload::Center { center: mp.center, linear_size: mp.linear_size },
            });
        }
    }
    (inboxes, messages)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeOutcome {
    pub owner: Vec<MpId>,
    pub migrations: usize,
    /// Adjacency, ghost sets and pair counts for the new ownership.
    pub contacts: Contacts,
    pub messages: Vec<NeighborMessage>,
}

/// Moves particles to the MP the partition assigns them, then rebuilds the
/// halo for the new ownership.
///
/// A particle crosses at most one MP boundary per call, and only along an
/// edge of the current neighbor graph (an MP holding no particles accepts
/// arrivals directly). A particle whose target is not adjacent hops to the
/// neighbor whose anchor is nearest to it; `pending_age` counts the steps it
/// has spent unresolved and the call fails once that exceeds `N_p`.
pub fn exchange(
    decomp: &Decomposition,
    particles: &[Particle],
    owner: &[MpId],
    pending_age: &mut [u32],
    partition: &Partition,
    radii: ContactRadii,
) -> Result<ExchangeOutcome, ClusterError> {
    let n_mp = decomp.len();
    let centers = decomp.centers();
    let graph = &decomp.neighbors;
    let counts = decomp.counts();
    let mut new_owner = owner.to_vec();
    let mut moved: BTreeMap<(MpId, MpId), Vec<Particle>> = BTreeMap::new();

    for (k, p) in particles.iter().enumerate() {
        let cur = owner[k];
        let tgt = partition.target(&centers, p.pos);
        if tgt == cur {
            pending_age[k] = 0;
            continue;
        }
        let dest = if graph.contains(cur, tgt) || counts[tgt] == 0 {
            pending_age[k] = 0;
            Some(tgt)
        } else {
            pending_age[k] += 1;
            if pending_age[k] > n_mp as u32 {
                return Err(ClusterError::MigrationAcrossNonNeighbors {
                    particle: p.id,
                    from: cur,
                    to: tgt,
                    steps: pending_age[k] - 1,
                });
            }
            let here = p.pos.dist_sq(partition.anchor(&centers, cur));
            graph
                .neighbors(cur)
                .iter()
                .map(|&j| (p.pos.dist_sq(partition.anchor(&centers, j)), j))
                .filter(|&(d, _)| d < here)
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, j)| j)
        };
        if let Some(d) = dest {
            new_owner[k] = d;
            moved.entry((cur, d)).or_default().push(p.clone());
        }
    }

    let migrations = moved.values().map(Vec::len).sum();
    let mut contacts = Contacts::scan(particles, &new_owner, n_mp, decomp.bounds, radii);
    tether_empty_mps(&mut contacts, &centers, particles, &new_owner, radii.halo);

    let mut messages: Vec<NeighborMessage> = moved
        .into_iter()
        .map(|((from, to), ps)| NeighborMessage { sender: from, receiver: to, payload: Payload::Migrants(ps) })
        .collect();
    for (receiver, ghost_ids) in contacts.ghosts.iter().enumerate() {
        let mut by_sender: BTreeMap<MpId, Vec<Particle>> = BTreeMap::new();
        for &g in ghost_ids {
            by_sender.entry(new_owner[g]).or_default().push(particles[g].clone());
        }
        messages.extend(by_sender.into_iter().map(|(sender, ps)| NeighborMessage {
            sender,
            receiver,
            payload: Payload::Ghosts(ps),
        }));
    }

    Ok(ExchangeOutcome { owner: new_owner, migrations, contacts, messages })
}

/// An MP without particles has no proximity edges. Link it to the owners of
/// particles within `halo` of its center, or else to the owner of the
/// nearest particle, so it keeps exchanging metrics and can move back.
fn tether_empty_mps(contacts: &mut Contacts, centers: &[Point2], particles: &[Particle], owner: &[MpId], halo: f64) {
    let n = centers.len();
    let mut occupied = vec![false; n];
    for &o in owner {
        occupied[o] = true;
    }
    if occupied.iter().all(|&o| o) || particles.is_empty() {
        return;
    }
    let mut extra = Vec::new();
    for e in (0..n).filter(|&e| !occupied[e]) {
        let c = centers[e];
        let mut linked = false;
        let mut nearest = (f64::INFINITY, 0);
        for (k, p) in particles.iter().enumerate() {
            let d = p.pos.dist_sq(c);
            if d < halo * halo {
                extra.push((e, owner[k]));
                linked = true;
            }
            if d < nearest.0 {
                nearest = (d, k);
            }
        }
        if !linked {
            extra.push((e, owner[nearest.1]));
        }
    }
    let existing = (0..n).flat_map(|i| contacts.graph.neighbors(i).iter().map(move |&j| (i, j)));
    let edges: Vec<(MpId, MpId)> = existing.chain(extra).collect();
    contacts.graph = crate::geometry::NeighborGraph::from_edges(n, edges);
}
