use crate::error::{Error, Result};

/// Global Cartesian grid: cell counts, bounds, spacing, guard depth and tiling.
///
/// Cells and nodes are flattened row-major with x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    pub n_cell: [usize; 3],
    pub prob_lo: [f64; 3],
    pub prob_hi: [f64; 3],
    pub dx: [f64; 3],
    pub periodic: [bool; 3],
    pub guard: usize,
    pub tile_shape: [usize; 3],
}

/// A cell located in the global grid together with its owning tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellId {
    pub ijk: [usize; 3],
    pub tile: [usize; 3],
    /// Row-major (x fastest) index of the cell inside its tile.
    pub local: usize,
}

pub const DEFAULT_TILE: [usize; 3] = [8, 8, 8];

impl GridGeometry {
    pub fn new(
        n_cell: [usize; 3],
        prob_lo: [f64; 3],
        prob_hi: [f64; 3],
        periodic: [bool; 3],
        guard: usize,
        tile_shape: [usize; 3],
    ) -> Result<Self> {
        let mut dx = [0.0; 3];
        for a in 0..3 {
            if n_cell[a] == 0 {
                return Err(Error::config(Some(a), "cell count must be positive"));
            }
            if !(prob_lo[a].is_finite() && prob_hi[a].is_finite()) || prob_hi[a] <= prob_lo[a] {
                return Err(Error::config(Some(a), "bounds must be finite with lo < hi"));
            }
            if tile_shape[a] == 0 || !n_cell[a].is_multiple_of(tile_shape[a]) {
                return Err(Error::config(
                    Some(a),
                    format!(
                        "{} cells not divisible by tile size {}",
                        n_cell[a], tile_shape[a]
                    ),
                ));
            }
            dx[a] = (prob_hi[a] - prob_lo[a]) / n_cell[a] as f64;
        }
        Ok(Self {
            n_cell,
            prob_lo,
            prob_hi,
            dx,
            periodic,
            guard,
            tile_shape,
        })
    }

    /// Periodic cube with the default 8x8x8 tiling.
    pub fn cube(n: usize, lo: f64, hi: f64, guard: usize) -> Result<Self> {
        Self::new([n; 3], [lo; 3], [hi; 3], [true; 3], guard, DEFAULT_TILE)
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.prob_hi[axis] - self.prob_lo[axis]
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx[0] * self.dx[1] * self.dx[2]
    }

    pub fn total_cells(&self) -> usize {
        self.n_cell.iter().product()
    }

    pub fn tiles(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.n_cell[a] / self.tile_shape[a])
    }

    pub fn cells_per_tile(&self) -> usize {
        self.tile_shape.iter().product()
    }

    /// Global cell index and in-cell fraction along every axis.
    ///
    /// The fraction is taken before periodic wrapping of the index, so a
    /// coordinate that rounds onto `prob_hi` lands in cell 0 with fraction 0.
    #[inline]
    pub fn locate(&self, pos: [f64; 3], id: u64) -> Result<([usize; 3], [f64; 3])> {
        let mut cell = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let x = pos[a];
            if !x.is_finite() {
                return Err(Error::Numeric {
                    id,
                    what: format!("position[{a}] = {x}"),
                });
            }
            let s = (x - self.prob_lo[a]) / self.dx[a];
            let f = s.floor();
            frac[a] = s - f;
            let n = self.n_cell[a] as i64;
            let c = f as i64;
            cell[a] = if (0..n).contains(&c) {
                c as usize
            } else if self.periodic[a] {
                c.rem_euclid(n) as usize
            } else {
                return Err(Error::Ownership {
                    id,
                    detail: format!("axis {a} coordinate {x} outside non-periodic domain"),
                });
            };
        }
        Ok((cell, frac))
    }

    pub fn cell_id(&self, ijk: [usize; 3]) -> CellId {
        let tile = [0, 1, 2].map(|a| ijk[a] / self.tile_shape[a]);
        let l = [0, 1, 2].map(|a| ijk[a] % self.tile_shape[a]);
        let ts = self.tile_shape;
        CellId {
            ijk,
            tile,
            local: (l[2] * ts[1] + l[1]) * ts[0] + l[0],
        }
    }

    /// `floor((pos - prob_lo) / dx)` per axis, wrapped on periodic axes.
    pub fn cell_of(&self, pos: [f64; 3], id: u64) -> Result<CellId> {
        let (ijk, _) = self.locate(pos, id)?;
        Ok(self.cell_id(ijk))
    }

    /// Brings a position back into `[prob_lo, prob_hi)` on periodic axes.
    ///
    /// Movement per step is bounded by the migration envelope, so a single
    /// shift by the domain length suffices.
    #[inline]
    pub fn wrap_position(&self, mut pos: [f64; 3]) -> [f64; 3] {
        for (a, x) in pos.iter_mut().enumerate() {
            if !self.periodic[a] {
                continue;
            }
            let l = self.length(a);
            if *x < self.prob_lo[a] {
                *x += l;
            } else if *x >= self.prob_hi[a] {
                *x -= l;
            }
        }
        pos
    }

    /// Smallest guard depth that keeps every stencil node addressable for a
    /// particle at most one cell outside its owning box.
    pub fn required_guard(order: crate::shape::ShapeOrder) -> usize {
        let (lo, hi) = order.node_reach();
        // envelope: cell -1 .. cell n (one past the box)
        (1 + lo).max(1 + hi) as usize
    }

    pub fn flat_cell(&self, ijk: [usize; 3]) -> usize {
        (ijk[2] * self.n_cell[1] + ijk[1]) * self.n_cell[0] + ijk[0]
    }
}
