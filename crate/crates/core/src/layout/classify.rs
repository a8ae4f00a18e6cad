use crate::domain::{direction_index, BoxFrame, Decomposition, GridGeometry};
use crate::error::{Error, Result};
use crate::kernels::TILE;

/// Where a tile's cells sit inside its rank and the global grid.
#[derive(Debug, Clone, Copy)]
pub struct TileFrame<'a> {
    pub geom: &'a GridGeometry,
    pub rank_frame: BoxFrame,
    pub tile_frame: BoxFrame,
    /// Tile origin relative to the rank origin, in cells.
    pub tile_off: [i64; 3],
    pub tiles_per_rank: [usize; 3],
    pub tile_index: usize,
}

impl<'a> TileFrame<'a> {
    /// Frame of rank-local tile `tile` on rank `rank`.
    pub fn new(geom: &'a GridGeometry, decomp: &Decomposition, rank: usize, tile: usize) -> Self {
        let rf = decomp.frame(rank);
        let tc = decomp.tile_coords(tile);
        let ts = geom.tile_shape;
        let off = [0, 1, 2].map(|a| (tc[a] * ts[a]) as i64);
        Self {
            geom,
            rank_frame: rf,
            tile_frame: BoxFrame {
                origin: [0, 1, 2].map(|a| rf.origin[a] + off[a] as usize),
                size: ts,
                n_global: geom.n_cell,
            },
            tile_off: off,
            tiles_per_rank: decomp.tiles_per_rank(),
            tile_index: tile,
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.tile_frame.size
    }

    pub fn n_cells(&self) -> usize {
        self.tile_frame.size.iter().product()
    }

    /// Global cell, tile-local cell and in-cell fraction of `pos`.
    #[inline]
    pub fn locate(&self, pos: [f64; 3], id: u64) -> Result<([usize; 3], [i64; 3], [f64; 3])> {
        let (g, frac) = self.geom.locate(pos, id)?;
        Ok((g, self.tile_frame.local(g), frac))
    }

    /// Row-major index of an in-tile cell.
    #[inline]
    pub fn flat(&self, tl: [i64; 3]) -> usize {
        let s = self.tile_frame.size;
        ((tl[2] as usize * s[1]) + tl[1] as usize) * s[0] + tl[0] as usize
    }

    pub fn unflat(&self, c: usize) -> [i64; 3] {
        let s = self.tile_frame.size;
        [
            (c % s[0]) as i64,
            ((c / s[0]) % s[1]) as i64,
            (c / (s[0] * s[1])) as i64,
        ]
    }

    pub fn contains(&self, tl: [i64; 3]) -> bool {
        self.tile_frame.contains_local(tl)
    }

    /// Bins of the tile widened by one cell on every side, for particles
    /// that left the tile this step.
    pub fn n_ext_bins(&self) -> usize {
        self.tile_frame.size.iter().map(|s| s + 2).product()
    }

    #[inline]
    pub fn ext_flat(&self, tl: [i64; 3]) -> usize {
        let s = self.tile_frame.size.map(|v| v as i64 + 2);
        (((tl[2] + 1) * s[1] + (tl[1] + 1)) * s[0] + (tl[0] + 1)) as usize
    }

    pub fn ext_unflat(&self, b: usize) -> [i64; 3] {
        let s = self.tile_frame.size.map(|v| v + 2);
        [
            (b % s[0]) as i64 - 1,
            ((b / s[0]) % s[1]) as i64 - 1,
            (b / (s[0] * s[1])) as i64 - 1,
        ]
    }

    /// Rank-local cell of a tile-local cell.
    #[inline]
    pub fn to_rank(&self, tl: [i64; 3]) -> [i64; 3] {
        [
            tl[0] + self.tile_off[0],
            tl[1] + self.tile_off[1],
            tl[2] + self.tile_off[2],
        ]
    }

    /// Classifies a particle that moved from global cell `old` to `new`.
    #[inline]
    pub fn classify_cell(
        &self,
        old: [usize; 3],
        new: [usize; 3],
        new_tl: [i64; 3],
        id: u64,
    ) -> Result<MoveClass> {
        if old == new {
            return Ok(MoveClass::Stay);
        }
        for a in 0..3 {
            let n = self.geom.n_cell[a] as i64;
            let d = (new[a] as i64 - old[a] as i64).rem_euclid(n);
            if d > 1 && d < n - 1 {
                return Err(Error::MigrationEnvelope { id });
            }
        }
        self.destination(new, new_tl)
            .ok_or(Error::MigrationEnvelope { id })
    }

    /// Where a particle in global cell `g` (tile-local `tl`) belongs, without
    /// the one-cell envelope check. `None` if it is beyond the neighbor ranks.
    #[inline]
    pub fn destination(&self, g: [usize; 3], tl: [i64; 3]) -> Option<MoveClass> {
        if self.contains(tl) {
            return Some(MoveClass::SameTile);
        }
        let rl = self.rank_frame.local(g);
        if self.rank_frame.contains_local(rl) {
            let ts = self.tile_frame.size;
            let tc = [0, 1, 2].map(|a| rl[a] as usize / ts[a]);
            let tp = self.tiles_per_rank;
            return Some(MoveClass::OtherTile(
                (tc[2] * tp[1] + tc[1]) * tp[0] + tc[0],
            ));
        }
        let size = self.rank_frame.size;
        let d = [0, 1, 2].map(|a| {
            if rl[a] < 0 {
                -1
            } else if rl[a] >= size[a] as i64 {
                1
            } else {
                0
            }
        });
        direction_index(d).map(MoveClass::Remote)
    }
}

/// Destination class of one pushed particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveClass {
    Stay,
    /// Changed cell within the tile: retained in the disordered tail.
    SameTile,
    /// Another tile of the same rank (rank-local tile index).
    OtherTile(usize),
    /// Another rank, by neighbor direction index.
    Remote(usize),
}

impl MoveClass {
    pub fn leaving(self) -> bool {
        matches!(self, Self::OtherTile(_) | Self::Remote(_))
    }
}

/// Per-lane classification of one batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassMasks {
    pub stay: [bool; TILE],
    pub mv: [bool; TILE],
    pub remote: [bool; TILE],
    pub class: [MoveClass; TILE],
    pub n_stay: usize,
    pub n_move: usize,
    pub n_remote: usize,
}

/// Classifies up to eight particles leaving `home` for `new_cells`.
pub fn classify(
    frame: &TileFrame,
    home: [usize; 3],
    new_cells: &[[usize; 3]],
    ids: &[u64],
) -> Result<ClassMasks> {
    let mut m = ClassMasks {
        stay: [false; TILE],
        mv: [false; TILE],
        remote: [false; TILE],
        class: [MoveClass::Stay; TILE],
        n_stay: 0,
        n_move: 0,
        n_remote: 0,
    };
    for (l, (&new, &id)) in new_cells.iter().zip(ids).enumerate() {
        let tl = frame.tile_frame.local(new);
        let c = frame.classify_cell(home, new, tl, id)?;
        m.class[l] = c;
        match c {
            MoveClass::Stay => {
                m.stay[l] = true;
                m.n_stay += 1;
            }
            MoveClass::Remote(_) => {
                m.mv[l] = true;
                m.remote[l] = true;
                m.n_move += 1;
                m.n_remote += 1;
            }
            _ => {
                m.mv[l] = true;
                m.n_move += 1;
            }
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_for(
        geom: &GridGeometry,
        decomp: &Decomposition,
        rank: usize,
        tile: usize,
    ) -> TileFrame<'static> {
        let geom: &'static GridGeometry = Box::leak(Box::new(geom.clone()));
        TileFrame::new(geom, decomp, rank, tile)
    }

    #[test]
    fn three_way_classes() {
        let geom = GridGeometry::cube(32, 0.0, 1.0, 3).unwrap();
        let decomp = Decomposition::new(&geom, [2, 1, 1]).unwrap();
        let f = frame_for(&geom, &decomp, 0, 0);
        let home = [7, 3, 3];
        let m = classify(
            &f,
            home,
            &[[7, 3, 3], [6, 3, 3], [8, 3, 3], [7, 2, 3]],
            &[0, 1, 2, 3],
        )
        .unwrap();
        assert_eq!(m.class[0], MoveClass::Stay);
        assert_eq!(m.class[1], MoveClass::SameTile);
        assert_eq!(m.class[2], MoveClass::OtherTile(1));
        assert_eq!(m.class[3], MoveClass::SameTile);
        let r = classify(&f, [0, 3, 3], &[[31, 3, 3]], &[4]).unwrap();
        assert!(matches!(r.class[0], MoveClass::Remote(_)));
        assert_eq!((r.n_move, r.n_remote), (1, 1));
        assert_eq!((m.n_stay, m.n_move, m.n_remote), (1, 3, 0));
        for l in 0..4 {
            assert!(!(m.stay[l] && m.mv[l]));
            assert!(!m.remote[l] || m.mv[l]);
        }
    }

    #[test]
    fn periodic_neighbor_is_remote_direction() {
        let geom = GridGeometry::cube(32, 0.0, 1.0, 3).unwrap();
        let decomp = Decomposition::new(&geom, [2, 1, 1]).unwrap();
        let f = frame_for(&geom, &decomp, 0, 0);
        let c = f
            .classify_cell([0, 0, 0], [31, 0, 0], f.tile_frame.local([31, 0, 0]), 0)
            .unwrap();
        assert_eq!(c, MoveClass::Remote(direction_index([-1, 0, 0]).unwrap()));
    }

    #[test]
    fn two_cell_jump_violates_envelope() {
        let geom = GridGeometry::cube(32, 0.0, 1.0, 3).unwrap();
        let decomp = Decomposition::new(&geom, [1, 1, 1]).unwrap();
        let f = frame_for(&geom, &decomp, 0, 0);
        let r = f.classify_cell([3, 3, 3], [5, 3, 3], f.tile_frame.local([5, 3, 3]), 4);
        assert!(matches!(r, Err(Error::MigrationEnvelope { id: 4 })));
    }

    #[test]
    fn extended_bins_round_trip() {
        let geom = GridGeometry::cube(16, 0.0, 1.0, 3).unwrap();
        let decomp = Decomposition::new(&geom, [1, 1, 1]).unwrap();
        let f = frame_for(&geom, &decomp, 0, 0);
        assert_eq!(f.n_ext_bins(), 1000);
        for b in 0..1000 {
            assert_eq!(f.ext_flat(f.ext_unflat(b)), b);
        }
        for c in 0..512 {
            assert_eq!(f.flat(f.unflat(c)), c);
        }
    }
}
