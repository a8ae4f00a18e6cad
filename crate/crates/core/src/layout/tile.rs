use super::{BinIndex, ParticleSoa, TileFrame};
use crate::domain::ParticleRecord;
use crate::error::{Error, Result};

/// Slots `[start, start + len)` of the ordered region holding one cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Segment {
    pub start: u32,
    pub len: u32,
}

/// One of the two particle buffers of a tile.
///
/// The ordered region `[0, ptr_ord)` grows upward in cell order, described
/// by `meta`; the disordered tail `[ptr_dis, capacity)` grows downward.
#[derive(Debug, Clone)]
pub struct Buffer {
    pub soa: ParticleSoa,
    pub meta: Vec<Segment>,
    pub ptr_ord: usize,
    pub ptr_dis: usize,
    pub leaving: Vec<bool>,
    pub meta_valid: bool,
}

impl Buffer {
    pub fn new(n_cells: usize, capacity: usize) -> Self {
        Self {
            soa: ParticleSoa::with_slots(capacity),
            meta: vec![Segment::default(); n_cells],
            ptr_ord: 0,
            ptr_dis: capacity,
            leaving: vec![false; capacity],
            meta_valid: true,
        }
    }

    pub fn capacity(&self) -> usize {
        self.soa.slots()
    }

    pub fn tail_len(&self) -> usize {
        self.capacity() - self.ptr_dis
    }

    pub fn len(&self) -> usize {
        self.ptr_ord + self.tail_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Occupied slots: the ordered region, then the tail.
    pub fn occupied(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.ptr_ord).chain(self.ptr_dis..self.capacity())
    }

    /// Empties the buffer for a new write pass.
    pub fn reset(&mut self) {
        self.ptr_ord = 0;
        self.ptr_dis = self.capacity();
        self.meta.fill(Segment::default());
        self.meta_valid = false;
    }

    /// Appends a particle of in-tile cell `cell` to the ordered region.
    /// Cells must arrive in non-decreasing order.
    #[inline]
    pub fn push_ordered(&mut self, cell: usize, r: &ParticleRecord) -> Result<()> {
        if self.ptr_ord >= self.ptr_dis {
            return Err(Error::Overflow {
                ptr_ord: self.ptr_ord + 1,
                ptr_dis: self.ptr_dis,
            });
        }
        let seg = &mut self.meta[cell];
        if seg.len == 0 {
            seg.start = self.ptr_ord as u32;
        } else if (seg.start + seg.len) as usize != self.ptr_ord {
            return Err(Error::Layout(format!(
                "cell {cell} segment is not contiguous at slot {}",
                self.ptr_ord
            )));
        }
        seg.len += 1;
        self.soa.set(self.ptr_ord, r);
        self.leaving[self.ptr_ord] = false;
        self.ptr_ord += 1;
        Ok(())
    }

    /// Writes a particle at the next tail slot and returns that slot.
    #[inline]
    pub fn push_tail(&mut self, r: &ParticleRecord, leaving: bool) -> Result<usize> {
        if self.ptr_dis <= self.ptr_ord {
            return Err(Error::Overflow {
                ptr_ord: self.ptr_ord,
                ptr_dis: self.ptr_dis.wrapping_sub(1),
            });
        }
        self.ptr_dis -= 1;
        self.soa.set(self.ptr_dis, r);
        self.leaving[self.ptr_dis] = leaving;
        Ok(self.ptr_dis)
    }

    /// Gives empty cells a zero-length segment at the running offset so
    /// the segments tile `[0, ptr_ord)` without gaps, and marks `meta` valid.
    pub fn finalize_meta(&mut self) {
        let mut at = 0u32;
        for seg in &mut self.meta {
            if seg.len == 0 {
                seg.start = at;
            }
            at = seg.start + seg.len;
        }
        self.meta_valid = true;
    }

    /// Drops leaving particles from the tail and packs the retained ones
    /// against the top of the buffer, keeping their relative order.
    pub fn truncate_and_compact_tail(&mut self) -> usize {
        let cap = self.capacity();
        let mut dst = cap;
        for s in (self.ptr_dis..cap).rev() {
            if self.leaving[s] {
                self.leaving[s] = false;
                continue;
            }
            dst -= 1;
            if dst != s {
                self.soa.move_slot(s, dst);
            }
        }
        let removed = dst - self.ptr_dis;
        self.ptr_dis = dst;
        removed
    }

    /// Drops leaving particles from the ordered region (in-place layouts),
    /// keeping relative order.
    pub fn compact_front(&mut self) -> usize {
        let mut dst = 0;
        for s in 0..self.ptr_ord {
            if self.leaving[s] {
                self.leaving[s] = false;
                continue;
            }
            if dst != s {
                self.soa.move_slot(s, dst);
            }
            dst += 1;
        }
        let removed = self.ptr_ord - dst;
        self.ptr_ord = dst;
        if removed > 0 {
            self.meta_valid = false;
        }
        removed
    }

    /// Enlarges the buffer, moving the tail to the new top.
    pub fn grow(&mut self, new_capacity: usize) {
        let cap = self.capacity();
        if new_capacity <= cap {
            return;
        }
        let tail = self.tail_len();
        self.soa.resize(new_capacity);
        self.leaving.resize(new_capacity, false);
        let shift = new_capacity - cap;
        for s in (self.ptr_dis..cap).rev() {
            self.soa.move_slot(s, s + shift);
            self.leaving[s + shift] = self.leaving[s];
            self.leaving[s] = false;
        }
        self.ptr_dis = new_capacity - tail;
    }
}

/// A tile's particles: two buffers swapped every step, the tail binning,
/// and staging for particles that arrive or spill during the step.
#[derive(Debug, Clone)]
pub struct ParticleTile {
    pub bufs: [Buffer; 2],
    /// Buffer read at the start of the step.
    pub cur: usize,
    /// Buffer holding this step's result.
    pub out: usize,
    pub bin_to_ip: BinIndex,
    /// Particles that hit a cursor collision, with their leaving flag.
    pub overflow: Vec<(ParticleRecord, bool)>,
    pub inbox: Vec<ParticleRecord>,
    pub disorder_fraction: f64,
}

/// Allocates a tile of `n_cells` cells sized for `ppc` particles per cell
/// plus a fraction `f` of slack.
pub fn init_tile(n_cells: usize, ppc: usize, f: f64) -> ParticleTile {
    let cap = ((n_cells * ppc) as f64 * (1.0 + f)).ceil() as usize;
    ParticleTile {
        bufs: [Buffer::new(n_cells, cap), Buffer::new(n_cells, cap)],
        cur: 0,
        out: 0,
        bin_to_ip: BinIndex::default(),
        overflow: Vec::new(),
        inbox: Vec::new(),
        disorder_fraction: f,
    }
}

impl ParticleTile {
    pub fn n_cells(&self) -> usize {
        self.bufs[0].meta.len()
    }

    pub fn capacity(&self) -> usize {
        self.bufs[self.cur].capacity()
    }

    pub fn current(&self) -> &Buffer {
        &self.bufs[self.cur]
    }

    pub fn output(&self) -> &Buffer {
        &self.bufs[self.out]
    }

    pub fn len(&self) -> usize {
        self.bufs[self.cur].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Source buffer (read) and destination buffer (write) for a
    /// sort-on-write pass.
    pub fn split_mut(&mut self) -> (&Buffer, &mut Buffer) {
        let [a, b] = &mut self.bufs;
        if self.cur == 0 {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Capacity for `need` particles with the configured slack.
    pub fn sized_for(&self, need: usize) -> usize {
        ((need as f64) * (1.0 + self.disorder_fraction)).ceil() as usize
    }

    /// Replaces the contents with `records`, sorted by cell into the
    /// ordered region of the current buffer.
    pub fn load(&mut self, frame: &TileFrame, mut records: Vec<ParticleRecord>) -> Result<()> {
        let mut keyed = Vec::with_capacity(records.len());
        for r in records.drain(..) {
            let (_, tl, _) = frame.locate(r.pos, r.id)?;
            if !frame.contains(tl) {
                return Err(Error::Ownership {
                    id: r.id,
                    detail: format!("loaded into tile {} outside its cells", frame.tile_index),
                });
            }
            keyed.push((frame.flat(tl), r));
        }
        keyed.sort_by_key(|(c, r)| (*c, r.id));
        let need = keyed.len();
        if need > self.capacity() {
            let cap = self.sized_for(need);
            self.bufs[0].grow(cap);
            self.bufs[1].grow(cap);
        }
        self.inbox.clear();
        self.overflow.clear();
        let buf = &mut self.bufs[self.cur];
        buf.reset();
        for (c, r) in &keyed {
            buf.push_ordered(*c, r)?;
        }
        buf.finalize_meta();
        self.out = self.cur;
        Ok(())
    }

    /// All particles of the current buffer, ordered region first.
    pub fn records(&self) -> Vec<ParticleRecord> {
        let b = self.current();
        b.occupied().map(|s| b.soa.get(s)).collect()
    }

    /// Bins the current buffer's tail slots by in-tile cell.
    pub fn tail_bin(&mut self, frame: &TileFrame) -> Result<()> {
        let b = &self.bufs[self.cur];
        let n = b.tail_len();
        let mut bins = Vec::with_capacity(n);
        let mut slots = Vec::with_capacity(n);
        for s in b.ptr_dis..b.capacity() {
            let id = b.soa.id[s];
            let (_, tl, _) = frame.locate(b.soa.pos(s), id)?;
            if !frame.contains(tl) {
                return Err(Error::Ownership {
                    id,
                    detail: format!("tail particle outside tile {}", frame.tile_index),
                });
            }
            bins.push(frame.flat(tl) as u32);
            slots.push(s as u32);
        }
        self.bin_to_ip.build(frame.n_cells(), &bins, &slots);
        Ok(())
    }

    /// Starts a sort-on-write pass into the other buffer.
    pub fn begin_write(&mut self) {
        self.out = 1 - self.cur;
        let cap = self.bufs[self.cur].capacity();
        self.bufs[self.out].grow(cap);
        self.bufs[self.out].reset();
        self.overflow.clear();
    }

    /// Starts an in-place pass over the current buffer.
    pub fn begin_in_place(&mut self) {
        self.out = self.cur;
        self.overflow.clear();
    }

    /// Whether the current pass writes into the other buffer.
    pub fn writes_other(&self) -> bool {
        self.out != self.cur
    }

    /// Moves spilled and arrived particles into the output buffer, growing
    /// both buffers if they do not fit. With `deterministic`, arrivals are
    /// appended in id order.
    pub fn merge_incoming(&mut self, deterministic: bool) -> Result<usize> {
        if deterministic {
            self.inbox.sort_unstable_by_key(|r| r.id);
        }
        let incoming = self.overflow.len() + self.inbox.len();
        let out = &self.bufs[self.out];
        let free = out.ptr_dis - out.ptr_ord;
        if incoming > free {
            let cap = self.sized_for(out.len() + incoming);
            self.bufs[0].grow(cap);
            self.bufs[1].grow(cap);
        }
        let in_place = !self.writes_other();
        let out = &mut self.bufs[self.out];
        for (r, leaving) in self
            .overflow
            .drain(..)
            .chain(self.inbox.drain(..).map(|r| (r, false)))
        {
            if in_place {
                let s = out.ptr_ord;
                out.soa.set(s, &r);
                out.leaving[s] = leaving;
                out.ptr_ord += 1;
                out.ptr_dis = out.capacity();
                out.meta_valid = false;
            } else {
                out.push_tail(&r, leaving)?;
            }
        }
        Ok(incoming)
    }

    /// Removes particles that left the tile from the output buffer.
    pub fn truncate(&mut self) -> usize {
        let out = &mut self.bufs[self.out];
        if self.out == self.cur {
            out.compact_front()
        } else {
            out.truncate_and_compact_tail()
        }
    }

    /// Makes the output buffer current. Fails if arrivals are still pending.
    pub fn swap_buffers(&mut self) -> Result<()> {
        if !self.inbox.is_empty() || !self.overflow.is_empty() {
            return Err(Error::Layout(format!(
                "buffer swap with {} unmerged particles",
                self.inbox.len() + self.overflow.len()
            )));
        }
        self.cur = self.out;
        Ok(())
    }

    /// Checks the layout contract of the current buffer: cursors in bounds,
    /// segments gap-free with every ordered particle in its cell, no stale
    /// leaving flags, and every particle inside the tile.
    pub fn check_invariants(&self, frame: &TileFrame) -> Result<()> {
        let b = self.current();
        if b.ptr_ord > b.ptr_dis || b.ptr_dis > b.capacity() {
            return Err(Error::Layout(format!(
                "cursors ord {} dis {} capacity {}",
                b.ptr_ord,
                b.ptr_dis,
                b.capacity()
            )));
        }
        if b.meta_valid {
            let mut at = 0u32;
            for (c, seg) in b.meta.iter().enumerate() {
                if seg.start != at {
                    return Err(Error::Layout(format!(
                        "segment of cell {c} starts at {} after {at}",
                        seg.start
                    )));
                }
                at += seg.len;
                for s in seg.start..seg.start + seg.len {
                    let s = s as usize;
                    let (_, tl, _) = frame.locate(b.soa.pos(s), b.soa.id[s])?;
                    if !frame.contains(tl) || frame.flat(tl) != c {
                        return Err(Error::Layout(format!(
                            "particle {} in segment of cell {c} lies in {tl:?}",
                            b.soa.id[s]
                        )));
                    }
                }
            }
            if at as usize != b.ptr_ord {
                return Err(Error::Layout(format!(
                    "segments cover {at} slots, ordered region has {}",
                    b.ptr_ord
                )));
            }
        }
        for s in b.occupied() {
            if b.leaving[s] {
                return Err(Error::Layout(format!(
                    "particle {} still flagged leaving",
                    b.soa.id[s]
                )));
            }
            let (_, tl, _) = frame.locate(b.soa.pos(s), b.soa.id[s])?;
            if !frame.contains(tl) {
                return Err(Error::Ownership {
                    id: b.soa.id[s],
                    detail: format!("resident of tile {} lies in {tl:?}", frame.tile_index),
                });
            }
        }
        if !self.inbox.is_empty() || !self.overflow.is_empty() {
            return Err(Error::Layout("unmerged particles at step end".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: u64) -> ParticleRecord {
        ParticleRecord {
            id,
            pos: [id as f64, 0.0, 0.0],
            u: [0.0; 3],
            w: 1.0,
        }
    }

    #[test]
    fn capacity_includes_slack() {
        let t = init_tile(512, 8, 0.25);
        assert_eq!(t.capacity(), 5120);
        assert_eq!(t.bufs[1].capacity(), 5120);
    }

    #[test]
    fn cursors_collide_into_overflow_error() {
        let mut b = Buffer::new(2, 3);
        b.push_ordered(0, &rec(0)).unwrap();
        b.push_tail(&rec(1), false).unwrap();
        b.push_ordered(1, &rec(2)).unwrap();
        assert!(matches!(
            b.push_tail(&rec(3), false),
            Err(Error::Overflow { .. })
        ));
        assert!(matches!(
            b.push_ordered(1, &rec(3)),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn ordered_segments_must_be_contiguous() {
        let mut b = Buffer::new(3, 8);
        b.push_ordered(0, &rec(0)).unwrap();
        b.push_ordered(2, &rec(1)).unwrap();
        assert!(matches!(b.push_ordered(0, &rec(2)), Err(Error::Layout(_))));
        b.finalize_meta();
        assert_eq!(b.meta[1], Segment { start: 1, len: 0 });
    }

    #[test]
    fn tail_truncation_keeps_order() {
        let mut b = Buffer::new(1, 8);
        for i in 0..5 {
            b.push_tail(&rec(i), i % 2 == 1).unwrap();
        }
        assert_eq!(b.truncate_and_compact_tail(), 2);
        let ids: Vec<u64> = b.occupied().map(|s| b.soa.id[s]).collect();
        assert_eq!(ids, vec![4, 2, 0]);
        assert!(b.leaving.iter().all(|l| !l));
    }

    #[test]
    fn grow_moves_tail_to_top() {
        let mut b = Buffer::new(1, 4);
        b.push_ordered(0, &rec(7)).unwrap();
        b.push_tail(&rec(1), false).unwrap();
        b.push_tail(&rec(2), true).unwrap();
        b.grow(10);
        assert_eq!(b.ptr_dis, 8);
        assert_eq!(b.soa.id[9], 1);
        assert_eq!(b.soa.id[8], 2);
        assert!(b.leaving[8] && !b.leaving[2]);
        assert_eq!(b.soa.id[0], 7);
    }

    #[test]
    fn swap_refuses_pending_arrivals() {
        let mut t = init_tile(8, 1, 0.0);
        t.begin_write();
        t.inbox.push(rec(1));
        assert!(matches!(t.swap_buffers(), Err(Error::Layout(_))));
        t.merge_incoming(true).unwrap();
        t.swap_buffers().unwrap();
        assert_eq!(t.cur, 1);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn merge_grows_when_full() {
        let mut t = init_tile(1, 2, 0.0);
        t.begin_write();
        for i in 0..5 {
            t.inbox.push(rec(10 - i));
        }
        t.merge_incoming(true).unwrap();
        assert!(t.capacity() >= 5);
        t.swap_buffers().unwrap();
        let ids: Vec<u64> = t.records().iter().map(|r| r.id).collect();
        assert_eq!(ids, vec![10, 9, 8, 7, 6]);
    }
}
