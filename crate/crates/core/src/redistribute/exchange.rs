use super::{decode_frames, encode_with_spill, CommMode, CommVariant};
use crate::domain::{Decomposition, ParticleRecord, DIRECTIONS, RECORD_BYTES};
use crate::error::{Error, Result};
use crate::fabric::{Namespace, RankFabric, VirtualClock, HEADER_BYTES};
use crate::layout::{MoveClass, ParticleTile, TileFrame};

/// Particles leaving one tile during Phase 1, kept per worker and
/// concatenated in tile order at emit.
#[derive(Debug, Clone, Default)]
pub struct TileOutbox {
    pub local: Vec<(usize, ParticleRecord)>,
    pub remote: Vec<(usize, ParticleRecord)>,
}

impl TileOutbox {
    pub fn clear(&mut self) {
        self.local.clear();
        self.remote.clear();
    }

    pub fn len(&self) -> usize {
        self.local.len() + self.remote.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Copies a leaving particle to its destination: a same-rank tile's inbox
/// list or the send list of a neighbor direction.
#[inline]
pub fn route_migrant(rec: &ParticleRecord, class: MoveClass, out: &mut TileOutbox) -> Result<()> {
    match class {
        MoveClass::OtherTile(t) => out.local.push((t, *rec)),
        MoveClass::Remote(d) if d < DIRECTIONS.len() => out.remote.push((d, *rec)),
        _ => return Err(Error::MigrationEnvelope { id: rec.id }),
    }
    Ok(())
}

/// One rank's per-direction send lists.
#[derive(Debug, Clone)]
pub struct SendLists {
    pub lists: Vec<Vec<ParticleRecord>>,
}

impl Default for SendLists {
    fn default() -> Self {
        Self {
            lists: vec![Vec::new(); DIRECTIONS.len()],
        }
    }
}

impl SendLists {
    pub fn clear(&mut self) {
        self.lists.iter_mut().for_each(Vec::clear);
    }

    pub fn total(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    pub fn absorb(&mut self, outbox: &TileOutbox) {
        for (d, r) in &outbox.remote {
            self.lists[*d].push(*r);
        }
    }
}

/// Particle regions: one per receiver and travel direction, sized from the
/// expected boundary traffic.
#[derive(Debug, Clone)]
pub struct ParticlePlan {
    pub decomp: Decomposition,
    /// Records per frame for each direction.
    pub caps: [usize; 26],
}

impl ParticlePlan {
    /// Frame capacity per direction: particles in the boundary cells the
    /// direction crosses (at least one tile face), with slack `f`.
    pub fn new(decomp: &Decomposition, ppc: usize, f: f64) -> Self {
        let b = decomp.box_cells;
        let ts = decomp.tile_shape;
        let floor = ts[0] * ts[1];
        let mut caps = [0; 26];
        for (i, d) in DIRECTIONS.iter().enumerate() {
            let cells: usize = (0..3).map(|a| if d[a] == 0 { b[a] } else { 1 }).product();
            caps[i] = ((ppc.max(1) * cells.max(floor)) as f64 * (1.0 + f)).ceil() as usize;
        }
        Self {
            decomp: decomp.clone(),
            caps,
        }
    }

    pub fn region_bytes(&self, dir: usize) -> usize {
        2 * (HEADER_BYTES + self.caps[dir] * RECORD_BYTES)
    }

    pub fn register(&self, fabric: &mut RankFabric) -> Result<()> {
        for r in 0..self.decomp.n_ranks() {
            for (slot, d) in DIRECTIONS.iter().enumerate() {
                let sender = self.decomp.neighbor(r, d.map(|v| -v));
                fabric.register_region(
                    Namespace::Particles,
                    r,
                    sender,
                    slot,
                    self.region_bytes(slot),
                )?;
            }
        }
        Ok(())
    }
}

/// Sends one frame (possibly header-only) to every neighbor. Returns the
/// issue time.
pub fn emit_frames(
    plan: &ParticlePlan,
    fabric: &RankFabric,
    rank: usize,
    variant: CommVariant,
    lists: &SendLists,
    epoch: u64,
    send_time: f64,
) -> Result<f64> {
    let mut payloads = Vec::with_capacity(26);
    for (dir, list) in lists.lists.iter().enumerate() {
        payloads.push(encode_with_spill(rank, epoch, list, plan.caps[dir])?);
    }
    match variant.mode {
        CommMode::OneSided => {
            let mut entries = Vec::with_capacity(26);
            for (dir, p) in payloads.into_iter().enumerate() {
                let to = plan.decomp.neighbor(rank, DIRECTIONS[dir]);
                let h = fabric
                    .handle(Namespace::Particles, to, dir)
                    .ok_or_else(|| {
                        Error::Protocol(format!("no particle region for rank {to} slot {dir}"))
                    })?;
                entries.push((h, p));
            }
            fabric.batch_put(rank, Namespace::Particles, epoch, &entries, send_time)
        }
        CommMode::TwoSided | CommMode::Bsp => {
            let mut issue = 0.0;
            for (dir, p) in payloads.into_iter().enumerate() {
                let to = plan.decomp.neighbor(rank, DIRECTIONS[dir]);
                issue += fabric.channel_send(rank, to, dir, p, send_time + issue);
            }
            Ok(issue)
        }
    }
}

/// Waits for the 26 inbound frames of this epoch and decodes them in
/// direction order. Returns the wait time and the received particles.
pub fn converge(
    fabric: &RankFabric,
    rank: usize,
    variant: CommVariant,
    epoch: u64,
    mut clock: Option<&mut VirtualClock>,
) -> Result<(f64, Vec<ParticleRecord>)> {
    let mut out = Vec::new();
    match variant.mode {
        CommMode::OneSided => {
            let (waited, mut handles) =
                fabric.wait_counter(rank, Namespace::Particles, 26, clock)?;
            handles.sort_by_key(|h| h.slot);
            for h in handles {
                fabric.with_region(h, |b| decode_frames(b, epoch, &mut out))?;
            }
            Ok((waited, out))
        }
        CommMode::TwoSided | CommMode::Bsp => {
            let mut waited = 0.0;
            for dir in 0..DIRECTIONS.len() {
                let (_, payload, w) = fabric.channel_recv(rank, dir, clock.as_deref_mut())?;
                waited += w;
                decode_frames(&payload, epoch, &mut out)?;
            }
            Ok((waited, out))
        }
    }
}

/// Hands received particles to the tiles that own their cells, then moves
/// every tile's spilled and arrived particles into its output buffer.
/// Returns the number of particles merged.
pub fn unpack_merge(
    tiles: &mut [ParticleTile],
    frames: &[TileFrame],
    received: Vec<ParticleRecord>,
    deterministic: bool,
) -> Result<usize> {
    let rank_frame = frames.first().map(|f| f.rank_frame);
    for r in received {
        let Some(rf) = rank_frame else {
            return Err(Error::Ownership {
                id: r.id,
                detail: "rank owns no tiles".into(),
            });
        };
        let f = &frames[0];
        let (g, _) = f.geom.locate(r.pos, r.id)?;
        let rl = rf.local(g);
        if !rf.contains_local(rl) {
            return Err(Error::Ownership {
                id: r.id,
                detail: format!("received by a rank that does not own cell {g:?}"),
            });
        }
        let ts = f.tile_frame.size;
        let tp = f.tiles_per_rank;
        let tc = [0, 1, 2].map(|a| rl[a] as usize / ts[a]);
        tiles[(tc[2] * tp[1] + tc[1]) * tp[0] + tc[0]].inbox.push(r);
    }
    let mut merged = 0;
    for t in tiles.iter_mut() {
        merged += t.merge_incoming(deterministic)?;
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::GridGeometry;
    use crate::fabric::CostModel;

    fn rec(id: u64) -> ParticleRecord {
        ParticleRecord {
            id,
            pos: [0.0; 3],
            u: [0.0; 3],
            w: 1.0,
        }
    }

    fn setup(n_ranks: [usize; 3], cost: CostModel) -> (ParticlePlan, RankFabric) {
        let geom = GridGeometry::cube(16, 0.0, 1.0, 3).unwrap();
        let decomp = Decomposition::new(&geom, n_ranks).unwrap();
        let plan = ParticlePlan::new(&decomp, 2, 0.25);
        let mut fabric = RankFabric::new(decomp.n_ranks(), true, cost);
        plan.register(&mut fabric).unwrap();
        fabric.seal();
        (plan, fabric)
    }

    #[test]
    fn routing_targets() {
        let mut o = TileOutbox::default();
        route_migrant(&rec(1), MoveClass::OtherTile(3), &mut o).unwrap();
        route_migrant(&rec(2), MoveClass::Remote(5), &mut o).unwrap();
        assert!(route_migrant(&rec(3), MoveClass::Stay, &mut o).is_err());
        let mut s = SendLists::default();
        s.absorb(&o);
        assert_eq!((o.local.len(), s.lists[5].len(), s.total()), (1, 1, 1));
    }

    #[test]
    fn one_sided_always_sends_every_neighbor() {
        let (plan, fabric) = setup([2, 1, 1], CostModel::zero());
        for r in 0..2 {
            let mut lists = SendLists::default();
            if r == 0 {
                lists.lists[12].push(rec(7));
            }
            emit_frames(&plan, &fabric, r, CommVariant::C2, &lists, 4, 0.0).unwrap();
        }
        let (_, got1) = converge(&fabric, 1, CommVariant::C2, 4, None).unwrap();
        let (_, got0) = converge(&fabric, 0, CommVariant::C2, 4, None).unwrap();
        assert_eq!(got1, vec![rec(7)]);
        assert!(got0.is_empty());
        assert_eq!(fabric.counter(0, Namespace::Particles), 26);
    }

    #[test]
    fn second_batch_in_epoch_rejected() {
        let (plan, fabric) = setup([1, 1, 1], CostModel::zero());
        let lists = SendLists::default();
        emit_frames(&plan, &fabric, 0, CommVariant::C4, &lists, 1, 0.0).unwrap();
        assert!(matches!(
            emit_frames(&plan, &fabric, 0, CommVariant::C4, &lists, 1, 0.0),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn two_sided_fifo_and_wait() {
        let cost = CostModel {
            latency_base: 3.0,
            ..CostModel::zero()
        };
        let (plan, fabric) = setup([1, 1, 1], cost);
        let mut lists = SendLists::default();
        lists.lists[0].push(rec(1));
        emit_frames(&plan, &fabric, 0, CommVariant::C0, &lists, 0, 1.0).unwrap();
        let mut clock = VirtualClock::at(1.0);
        let (w, got) = converge(&fabric, 0, CommVariant::C0, 0, Some(&mut clock)).unwrap();
        assert_eq!(got, vec![rec(1)]);
        assert_eq!(w, 3.0);
        assert_eq!(clock.now, 4.0);
    }

    #[test]
    fn too_many_migrants_is_protocol_error() {
        let (plan, fabric) = setup([1, 1, 1], CostModel::zero());
        let mut lists = SendLists::default();
        lists.lists[0] = (0..(2 * plan.caps[0] + 1) as u64).map(rec).collect();
        assert!(matches!(
            emit_frames(&plan, &fabric, 0, CommVariant::C2, &lists, 0, 0.0),
            Err(Error::Protocol(_))
        ));
    }
}
