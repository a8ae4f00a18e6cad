use std::time::Instant;

use super::{DepositMode, InterpSupply};
use crate::domain::{FieldSet, GridGeometry, PackedEB, ParticleRecord, VectorField};
use crate::error::{Error, Result};
use crate::kernels::{
    boris_step, build_grid_field_matrix, build_weight_matrix, current_vector, deposit_scalar_at,
    gather_scalar_at, interpolate_batch, DepositBatch, InterpBatch, PushCoefficients, TILE,
};
use crate::layout::{Buffer, MoveClass, ParticleSoa, ParticleTile, TileFrame};
use crate::redistribute::{route_migrant, TileOutbox};
use crate::shape::ShapeOrder;

/// Read-only inputs shared by every tile of a rank during one step.
pub(crate) struct StepCtx<'a> {
    pub geom: &'a GridGeometry,
    pub fields: &'a FieldSet,
    pub packed: &'a PackedEB,
    pub order: ShapeOrder,
    pub push: PushCoefficients,
    pub q: f64,
    pub inv_vol: f64,
    pub interp: InterpSupply,
    pub deposit: DepositMode,
    /// Copy leaving particles to their destination during the write-back.
    pub fused: bool,
    /// Hold positions and momenta fixed.
    pub frozen: bool,
}

/// Work done by one tile in one step, used for cost accounting.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct TileCounts {
    pub pushed: u64,
    pub sorted: u64,
    pub gathered_batched: u64,
    pub gathered_scalar: u64,
    pub routed: u64,
    pub local_movers: u64,
    pub remote_movers: u64,
    pub deposited_batched: u64,
    pub deposited_scalar: u64,
    pub deposit_binned: u64,
    pub sort_wall: f64,
}

impl TileCounts {
    pub fn add(&mut self, o: &TileCounts) {
        self.pushed += o.pushed;
        self.sorted += o.sorted;
        self.gathered_batched += o.gathered_batched;
        self.gathered_scalar += o.gathered_scalar;
        self.routed += o.routed;
        self.local_movers += o.local_movers;
        self.remote_movers += o.remote_movers;
        self.deposited_batched += o.deposited_batched;
        self.deposited_scalar += o.deposited_scalar;
        self.deposit_binned += o.deposit_binned;
        self.sort_wall += o.sort_wall;
    }
}

/// Per-tile scratch reused across steps.
#[derive(Debug, Clone)]
pub(crate) struct TileScratch {
    interp: InterpBatch,
    deposit: DepositBatch,
    slots: Vec<u32>,
    bins: Vec<u32>,
    index: crate::layout::BinIndex,
    pub j: VectorField,
}

impl TileScratch {
    pub fn new(order: ShapeOrder, tile_shape: [usize; 3], guard: usize) -> Self {
        Self {
            interp: InterpBatch::new(order),
            deposit: DepositBatch::new(order),
            slots: Vec::new(),
            bins: Vec::new(),
            index: Default::default(),
            j: VectorField::new(tile_shape, guard),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pushed {
    rec: ParticleRecord,
    class: MoveClass,
}

/// Builds `tile.bin_to_ip` over the ordered region of the current buffer
/// by cell, without moving any record (stable: slot order within a cell).
pub fn index_sort_supply(tile: &mut ParticleTile, tf: &TileFrame) -> Result<()> {
    let b = &tile.bufs[tile.cur];
    let mut bins = Vec::with_capacity(b.ptr_ord);
    let mut slots = Vec::with_capacity(b.ptr_ord);
    for s in 0..b.ptr_ord {
        let id = b.soa.id[s];
        let (_, tl, _) = tf.locate(b.soa.pos(s), id)?;
        if !tf.contains(tl) {
            return Err(Error::Ownership {
                id,
                detail: format!("indexed particle outside tile {}", tf.tile_index),
            });
        }
        bins.push(tf.flat(tl) as u32);
        slots.push(s as u32);
    }
    tile.bin_to_ip.build(tf.n_cells(), &bins, &slots);
    Ok(())
}

/// Applies the cell index as a physical copy into the other buffer, which
/// becomes current with valid segments.
pub fn explicit_reorder(tile: &mut ParticleTile, tf: &TileFrame) -> Result<()> {
    index_sort_supply(tile, tf)?;
    let other = 1 - tile.cur;
    let cap = tile.bufs[tile.cur].capacity();
    tile.bufs[other].grow(cap);
    let [a, b] = &mut tile.bufs;
    let (src, dst) = if tile.cur == 0 { (&*a, b) } else { (&*b, a) };
    dst.reset();
    for c in 0..tf.n_cells() {
        for &s in tile.bin_to_ip.bin(c) {
            dst.push_ordered(c, &src.soa.get(s as usize))?;
        }
    }
    dst.finalize_meta();
    tile.cur = other;
    tile.out = other;
    Ok(())
}

/// Gathers, pushes and classifies up to eight particles. With `cell`, every
/// slot must lie in that in-tile cell; otherwise each particle is located
/// on its own (unsorted supply).
#[allow(clippy::too_many_arguments)]
#[inline]
fn advance_chunk(
    ctx: &StepCtx,
    tf: &TileFrame,
    soa: &ParticleSoa,
    slots: &[u32],
    cell: Option<usize>,
    batched: bool,
    interp: &mut InterpBatch,
    grid_cell: &mut Option<usize>,
    out: &mut [Pushed; TILE],
) -> Result<()> {
    let n = slots.len();
    let mut recs = [ParticleRecord::default(); TILE];
    let mut g_old = [[0usize; 3]; TILE];
    let mut rl = [[0i64; 3]; TILE];
    let mut frac = [[0.0; 3]; TILE];
    let expect = cell.map(|c| tf.unflat(c));
    for l in 0..n {
        let s = slots[l] as usize;
        recs[l] = soa.get(s);
        let (g, tl, f) = tf.locate(recs[l].pos, recs[l].id)?;
        match expect {
            Some(e) if e != tl => {
                return Err(Error::Layout(format!(
                    "particle {} in the stream of cell {e:?} lies in {tl:?}",
                    recs[l].id
                )))
            }
            None if !tf.contains(tl) => {
                return Err(Error::Ownership {
                    id: recs[l].id,
                    detail: format!("resident of tile {} lies in {tl:?}", tf.tile_index),
                })
            }
            _ => {}
        }
        g_old[l] = g;
        rl[l] = tf.to_rank(tl);
        frac[l] = f;
    }
    let mut eb = [([0.0; 3], [0.0; 3]); TILE];
    if batched {
        let c = cell.expect("batched gather needs a cell stream");
        if *grid_cell != Some(c) {
            build_grid_field_matrix(rl[0], ctx.packed, interp, recs[0].id)?;
            *grid_cell = Some(c);
        }
        build_weight_matrix(&rl[..n], &frac[..n], interp)?;
        interpolate_batch(interp);
        for (l, v) in eb.iter_mut().enumerate().take(n) {
            *v = interp.result(l);
        }
    } else {
        for l in 0..n {
            eb[l] = gather_scalar_at(rl[l], frac[l], ctx.fields, ctx.order, recs[l].id)?;
        }
    }
    for l in 0..n {
        let r = &mut recs[l];
        if !ctx.frozen {
            let (x, u) = boris_step(r.pos, r.u, eb[l].0, eb[l].1, &ctx.push);
            if !x.iter().chain(u.iter()).all(|v| v.is_finite()) {
                return Err(Error::Numeric {
                    id: r.id,
                    what: format!("push produced x = {x:?}, u = {u:?}"),
                });
            }
            r.pos = ctx.geom.wrap_position(x);
            r.u = u;
        }
        let (g_new, tl_new, _) = tf.locate(r.pos, r.id)?;
        out[l] = Pushed {
            rec: *r,
            class: tf.classify_cell(g_old[l], g_new, tl_new, r.id)?,
        };
    }
    Ok(())
}

fn count_move(c: &mut TileCounts, class: MoveClass) {
    match class {
        MoveClass::OtherTile(_) => c.local_movers += 1,
        MoveClass::Remote(_) => c.remote_movers += 1,
        _ => {}
    }
}

/// Phase 1 for one tile: supply, gather, push, classify and write back.
pub(crate) fn phase1(
    tile: &mut ParticleTile,
    tf: &TileFrame,
    ctx: &StepCtx,
    outbox: &mut TileOutbox,
    scratch: &mut TileScratch,
) -> Result<TileCounts> {
    outbox.clear();
    let mut counts = TileCounts::default();
    let batched = ctx.interp.is_batched();
    let mut pushed = [Pushed {
        rec: ParticleRecord::default(),
        class: MoveClass::Stay,
    }; TILE];
    let mut grid_cell = None;
    let t0 = Instant::now();

    if ctx.interp.is_sow() {
        counts.sorted = tile.current().tail_len() as u64;
        tile.tail_bin(tf)?;
        counts.sort_wall = t0.elapsed().as_secs_f64();
        tile.begin_write();
        let ParticleTile {
            bufs,
            cur,
            bin_to_ip,
            overflow,
            ..
        } = tile;
        let [a, b] = bufs;
        let (src, dst): (&Buffer, &mut Buffer) = if *cur == 0 { (a, b) } else { (b, a) };
        if !src.meta_valid {
            return Err(Error::Layout(
                "sort-on-write pass over stale segments".into(),
            ));
        }
        let stream = &mut scratch.slots;
        for c in 0..tf.n_cells() {
            let seg = src.meta[c];
            stream.clear();
            stream.extend(seg.start..seg.start + seg.len);
            stream.extend_from_slice(bin_to_ip.bin(c));
            for chunk in stream.chunks(TILE) {
                advance_chunk(
                    ctx,
                    tf,
                    &src.soa,
                    chunk,
                    Some(c),
                    batched,
                    &mut scratch.interp,
                    &mut grid_cell,
                    &mut pushed,
                )?;
                for p in &pushed[..chunk.len()] {
                    let leaving = p.class.leaving();
                    let res = match p.class {
                        MoveClass::Stay => dst.push_ordered(c, &p.rec),
                        _ => dst.push_tail(&p.rec, leaving).map(|_| ()),
                    };
                    match res {
                        Ok(()) => {}
                        Err(Error::Overflow { .. }) => overflow.push((p.rec, leaving)),
                        Err(e) => return Err(e),
                    }
                    if leaving && ctx.fused {
                        route_migrant(&p.rec, p.class, outbox)?;
                        counts.routed += 1;
                    }
                    count_move(&mut counts, p.class);
                }
            }
            counts.pushed += stream.len() as u64;
        }
        dst.finalize_meta();
    } else {
        let sorted_stream = ctx.interp != InterpSupply::UnsortedScalar;
        if ctx.interp.is_reorder() {
            explicit_reorder(tile, tf)?;
            counts.sorted = tile.len() as u64;
        } else if ctx.interp.is_index_sorted() {
            index_sort_supply(tile, tf)?;
            counts.sorted = tile.len() as u64;
        }
        counts.sort_wall = t0.elapsed().as_secs_f64();
        tile.begin_in_place();
        let ParticleTile {
            bufs,
            cur,
            bin_to_ip,
            ..
        } = tile;
        let buf = &mut bufs[*cur];
        let stream = &mut scratch.slots;
        let n_streams = if sorted_stream { tf.n_cells() } else { 1 };
        for c in 0..n_streams {
            stream.clear();
            if !sorted_stream {
                stream.extend(0..buf.ptr_ord as u32);
            } else if ctx.interp.is_reorder() {
                let seg = buf.meta[c];
                stream.extend(seg.start..seg.start + seg.len);
            } else {
                stream.extend_from_slice(bin_to_ip.bin(c));
            }
            let cell = sorted_stream.then_some(c);
            for chunk in stream.chunks(TILE) {
                advance_chunk(
                    ctx,
                    tf,
                    &buf.soa,
                    chunk,
                    cell,
                    batched,
                    &mut scratch.interp,
                    &mut grid_cell,
                    &mut pushed,
                )?;
                for (p, &s) in pushed.iter().zip(chunk) {
                    let s = s as usize;
                    let leaving = p.class.leaving();
                    buf.soa.set(s, &p.rec);
                    buf.leaving[s] = leaving;
                    if leaving && ctx.fused {
                        route_migrant(&p.rec, p.class, outbox)?;
                        counts.routed += 1;
                    }
                    count_move(&mut counts, p.class);
                }
            }
            counts.pushed += stream.len() as u64;
        }
        if counts.local_movers + counts.remote_movers > 0 || !sorted_stream {
            buf.meta_valid = false;
        }
        if counts.pushed as usize != buf.ptr_ord {
            return Err(Error::Layout(format!(
                "supply visited {} of {} particles",
                counts.pushed, buf.ptr_ord
            )));
        }
    }
    if batched {
        counts.gathered_batched = counts.pushed;
    } else {
        counts.gathered_scalar = counts.pushed;
    }
    Ok(counts)
}

#[inline]
fn deposit_one_scalar(
    ctx: &StepCtx,
    tf: &TileFrame,
    r: &ParticleRecord,
    j: &mut VectorField,
) -> Result<()> {
    let (_, tl, frac) = tf.locate(r.pos, r.id)?;
    let jv = current_vector(ctx.q, r.w, r.u, ctx.inv_vol);
    deposit_scalar_at(tl, frac, jv, j, ctx.order, r.id)
}

/// Deposits slots grouped by their cell in the tile widened by one cell.
fn deposit_ext_binned(
    ctx: &StepCtx,
    tf: &TileFrame,
    soa: &ParticleSoa,
    slots: impl Iterator<Item = usize>,
    scratch: &mut TileScratch,
) -> Result<u64> {
    scratch.bins.clear();
    scratch.slots.clear();
    for s in slots {
        let id = soa.id[s];
        let (_, tl, _) = tf.locate(soa.pos(s), id)?;
        if tl
            .iter()
            .zip(tf.shape())
            .any(|(&v, n)| v < -1 || v > n as i64)
        {
            return Err(Error::Ownership {
                id,
                detail: format!("deposit from {tl:?} beyond the tile's one-cell margin"),
            });
        }
        scratch.bins.push(tf.ext_flat(tl) as u32);
        scratch.slots.push(s as u32);
    }
    let n = scratch.slots.len() as u64;
    scratch
        .index
        .build(tf.n_ext_bins(), &scratch.bins, &scratch.slots);
    for b in 0..tf.n_ext_bins() {
        let members = scratch.index.bin(b);
        if members.is_empty() {
            continue;
        }
        scratch
            .deposit
            .begin(tf.ext_unflat(b), soa.id[members[0] as usize]);
        for &s in members {
            let s = s as usize;
            let (_, _, frac) = tf.locate(soa.pos(s), soa.id[s])?;
            let jv = current_vector(ctx.q, soa.w[s], soa.mom(s), ctx.inv_vol);
            scratch.deposit.push(frac, jv);
        }
        scratch.deposit.finish(&mut scratch.j)?;
    }
    Ok(n)
}

/// Phase 2 for one tile: current deposition of every particle pushed this
/// step (including those about to leave) into the tile's J buffer.
pub(crate) fn phase2(
    tile: &ParticleTile,
    tf: &TileFrame,
    ctx: &StepCtx,
    scratch: &mut TileScratch,
) -> Result<TileCounts> {
    let mut counts = TileCounts::default();
    scratch.j.zero();
    let buf = tile.output();
    let sow = ctx.interp.is_sow() && tile.writes_other();
    let t0 = Instant::now();
    match (sow, ctx.deposit) {
        (_, DepositMode::ScalarAtomic) | (false, DepositMode::BatchedSowTailScalar) => {
            for s in buf.occupied() {
                deposit_one_scalar(ctx, tf, &buf.soa.get(s), &mut scratch.j)?;
            }
            counts.deposited_scalar += buf.len() as u64;
        }
        (_, DepositMode::BatchedIndex) | (false, DepositMode::BatchedSowTailBin) => {
            let n = deposit_ext_binned(ctx, tf, &buf.soa, buf.occupied(), scratch)?;
            counts.deposit_binned += n;
            counts.deposited_batched += n;
        }
        (true, DepositMode::BatchedSowTailBin) | (true, DepositMode::BatchedSowTailScalar) => {
            if !buf.meta_valid {
                return Err(Error::Layout("segment deposit over stale segments".into()));
            }
            for c in 0..tf.n_cells() {
                let seg = buf.meta[c];
                if seg.len == 0 {
                    continue;
                }
                let cell = tf.unflat(c);
                scratch.deposit.begin(cell, buf.soa.id[seg.start as usize]);
                for s in seg.start as usize..(seg.start + seg.len) as usize {
                    let (_, tl, frac) = tf.locate(buf.soa.pos(s), buf.soa.id[s])?;
                    if tl != cell {
                        return Err(Error::Layout(format!(
                            "ordered particle {} of cell {cell:?} lies in {tl:?}",
                            buf.soa.id[s]
                        )));
                    }
                    let jv = current_vector(ctx.q, buf.soa.w[s], buf.soa.mom(s), ctx.inv_vol);
                    scratch.deposit.push(frac, jv);
                }
                scratch.deposit.finish(&mut scratch.j)?;
            }
            counts.deposited_batched += buf.ptr_ord as u64;
            let tail = buf.ptr_dis..buf.capacity();
            if ctx.deposit == DepositMode::BatchedSowTailBin {
                let n = deposit_ext_binned(ctx, tf, &buf.soa, tail, scratch)?;
                counts.deposit_binned += n;
                counts.deposited_batched += n;
            } else {
                for s in tail {
                    deposit_one_scalar(ctx, tf, &buf.soa.get(s), &mut scratch.j)?;
                }
                counts.deposited_scalar += buf.tail_len() as u64;
            }
        }
    }
    for (r, _) in &tile.overflow {
        deposit_one_scalar(ctx, tf, r, &mut scratch.j)?;
    }
    counts.deposited_scalar += tile.overflow.len() as u64;
    if counts.deposit_binned > 0 {
        counts.sort_wall = t0.elapsed().as_secs_f64();
    }
    Ok(counts)
}

/// Adds a tile's J buffer (interior and guards) into the rank's J at the
/// tile offset. Returns the number of nodes touched.
pub(crate) fn reduce_tile_j(
    tile_j: &VectorField,
    tf: &TileFrame,
    rank_j: &mut VectorField,
) -> usize {
    let g = tile_j.guard as i64;
    let n = tile_j.n.map(|v| v as i64);
    let off = tf.tile_off;
    let w = (n[0] + 2 * g) as usize;
    for c in 0..3 {
        for k in -g..n[2] + g {
            for j in -g..n[1] + g {
                let src = tile_j.idx(-g, j, k);
                let dst = rank_j.idx(off[0] - g, off[1] + j, off[2] + k);
                let (s, d) = (
                    &tile_j.comp[c][src..src + w],
                    &mut rank_j.comp[c][dst..dst + w],
                );
                for (d, s) in d.iter_mut().zip(s) {
                    *d += s;
                }
            }
        }
    }
    tile_j.len()
}

/// The standalone end-of-step scan used by bulk-synchronous exchange:
/// recomputes every particle's cell and copies leavers to their
/// destinations. The result must agree with the write-back's leaving flags.
pub(crate) fn scan_and_pack(
    tile: &ParticleTile,
    tf: &TileFrame,
    outbox: &mut TileOutbox,
) -> Result<u64> {
    outbox.clear();
    let buf = tile.output();
    let mut scanned = 0;
    let entries = buf
        .occupied()
        .map(|s| (buf.soa.get(s), buf.leaving[s]))
        .chain(tile.overflow.iter().copied());
    for (r, flagged) in entries {
        scanned += 1;
        let (g, tl, _) = tf.locate(r.pos, r.id)?;
        let class = tf
            .destination(g, tl)
            .ok_or(Error::MigrationEnvelope { id: r.id })?;
        if class.leaving() != flagged {
            return Err(Error::Layout(format!(
                "particle {} leaving flag {flagged} disagrees with its cell {tl:?}",
                r.id
            )));
        }
        if class.leaving() {
            route_migrant(&r, class, outbox)?;
        }
    }
    Ok(scanned)
}
