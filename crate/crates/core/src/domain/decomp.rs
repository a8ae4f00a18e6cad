use super::GridGeometry;
use crate::error::{Error, Result};

/// The 26 neighbor offsets in fixed order (z outermost, x innermost).
pub const DIRECTIONS: [[i32; 3]; 26] = build_directions();

const fn build_directions() -> [[i32; 3]; 26] {
    let mut out = [[0; 3]; 26];
    let mut n = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[n] = [dx, dy, dz];
                    n += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
}

pub fn direction_index(d: [i32; 3]) -> Option<usize> {
    DIRECTIONS.iter().position(|&x| x == d)
}

pub fn opposite(dir: usize) -> usize {
    // the table is symmetric under reversal
    25 - dir
}

/// A box of global cells owned by one rank, with periodic unwrapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxFrame {
    pub origin: [usize; 3],
    pub size: [usize; 3],
    pub n_global: [usize; 3],
}

impl BoxFrame {
    /// Box-local coordinate of a global cell, choosing the periodic image
    /// nearest to the box.
    #[inline]
    pub fn local(&self, global: [usize; 3]) -> [i64; 3] {
        let mut out = [0i64; 3];
        for a in 0..3 {
            let n = self.n_global[a] as i64;
            let size = self.size[a] as i64;
            // both operands lie in [0, n)
            let d = global[a] as i64 - self.origin[a] as i64;
            let m = if d < 0 { d + n } else { d };
            out[a] = if m < size || n == size {
                m
            } else if n - m <= m - size + 1 {
                m - n
            } else {
                m
            };
        }
        out
    }

    pub fn contains_local(&self, l: [i64; 3]) -> bool {
        (0..3).all(|a| l[a] >= 0 && l[a] < self.size[a] as i64)
    }
}

/// Block decomposition of the global grid over a rank grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub ranks: [usize; 3],
    pub box_cells: [usize; 3],
    pub n_cell: [usize; 3],
    pub tile_shape: [usize; 3],
}

impl Decomposition {
    pub fn new(geom: &GridGeometry, ranks: [usize; 3]) -> Result<Self> {
        let tiles = geom.tiles();
        for a in 0..3 {
            if ranks[a] == 0 || !tiles[a].is_multiple_of(ranks[a]) {
                return Err(Error::config(
                    Some(a),
                    format!("{} ranks do not divide {} tiles", ranks[a], tiles[a]),
                ));
            }
        }
        Ok(Self {
            ranks,
            box_cells: [0, 1, 2].map(|a| geom.n_cell[a] / ranks[a]),
            n_cell: geom.n_cell,
            tile_shape: geom.tile_shape,
        })
    }

    pub fn n_ranks(&self) -> usize {
        self.ranks.iter().product()
    }

    pub fn rank_coords(&self, r: usize) -> [usize; 3] {
        [
            r % self.ranks[0],
            (r / self.ranks[0]) % self.ranks[1],
            r / (self.ranks[0] * self.ranks[1]),
        ]
    }

    pub fn rank_index(&self, c: [usize; 3]) -> usize {
        (c[2] * self.ranks[1] + c[1]) * self.ranks[0] + c[0]
    }

    pub fn rank_of_cell(&self, ijk: [usize; 3]) -> usize {
        self.rank_index([0, 1, 2].map(|a| ijk[a] / self.box_cells[a]))
    }

    pub fn frame(&self, r: usize) -> BoxFrame {
        let c = self.rank_coords(r);
        BoxFrame {
            origin: [0, 1, 2].map(|a| c[a] * self.box_cells[a]),
            size: self.box_cells,
            n_global: self.n_cell,
        }
    }

    /// Rank at offset `d` from `r`, wrapping periodically.
    pub fn neighbor(&self, r: usize, d: [i32; 3]) -> usize {
        let c = self.rank_coords(r);
        let w = [0, 1, 2]
            .map(|a| (c[a] as i64 + d[a] as i64).rem_euclid(self.ranks[a] as i64) as usize);
        self.rank_index(w)
    }

    /// Tiles per rank along each axis.
    pub fn tiles_per_rank(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.box_cells[a] / self.tile_shape[a])
    }

    pub fn n_tiles_per_rank(&self) -> usize {
        self.tiles_per_rank().iter().product()
    }

    /// Rank-local tile coordinates of local tile index `t` (x fastest).
    pub fn tile_coords(&self, t: usize) -> [usize; 3] {
        let tp = self.tiles_per_rank();
        [t % tp[0], (t / tp[0]) % tp[1], t / (tp[0] * tp[1])]
    }

    pub fn tile_index(&self, c: [usize; 3]) -> usize {
        let tp = self.tiles_per_rank();
        (c[2] * tp[1] + c[1]) * tp[0] + c[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_are_distinct_and_symmetric() {
        for (i, d) in DIRECTIONS.iter().enumerate() {
            assert_ne!(*d, [0, 0, 0]);
            assert_eq!(DIRECTIONS[opposite(i)], [-d[0], -d[1], -d[2]]);
            assert_eq!(direction_index(*d), Some(i));
        }
    }

    #[test]
    fn unwrap_picks_nearest_image() {
        let f = BoxFrame {
            origin: [0, 8, 24],
            size: [8, 8, 8],
            n_global: [32, 32, 32],
        };
        assert_eq!(f.local([31, 16, 0]), [-1, 8, 8]);
        assert_eq!(f.local([3, 7, 23]), [3, -1, -1]);
        let whole = BoxFrame {
            origin: [0; 3],
            size: [8; 3],
            n_global: [8; 3],
        };
        assert_eq!(whole.local([7, 0, 3]), [7, 0, 3]);
    }

    #[test]
    fn ownership_and_neighbors() {
        let g = GridGeometry::cube(32, 0.0, 1.0, 3).unwrap();
        let d = Decomposition::new(&g, [2, 2, 2]).unwrap();
        assert_eq!(d.rank_of_cell([17, 3, 30]), d.rank_index([1, 0, 1]));
        assert_eq!(d.neighbor(0, [-1, 0, 0]), 1);
        assert_eq!(d.neighbor(0, [1, 1, 1]), 7);
        assert_eq!(d.n_tiles_per_rank(), 8);
        assert!(matches!(
            Decomposition::new(&g, [3, 1, 1]),
            Err(Error::Config { axis: Some(0), .. })
        ));
    }
}
