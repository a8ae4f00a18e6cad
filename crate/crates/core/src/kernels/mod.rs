//! Compute kernels: the emulated outer-product tile, field gather (scalar and
//! batched), the Boris push and current deposition (scalar and batched).

mod deposit;
mod gather;
mod mopa;
mod push;

pub use deposit::{current_vector, deposit_batch, deposit_scalar, deposit_scalar_at, DepositBatch};
pub use gather::{
    build_grid_field_matrix, build_weight_matrix, gather_scalar, gather_scalar_at,
    interpolate_batch, InterpBatch,
};
pub use mopa::{mopa_accumulate, MopaTile, TILE};
pub use push::{boris_push, boris_step, PushCoefficients, PushResult};

use crate::domain::{BoxFrame, GridGeometry};
use crate::error::{Error, Result};

/// Maps global positions to cells of a local box (rank, tile or whole grid).
#[derive(Debug, Clone, Copy)]
pub struct LocalGrid<'a> {
    pub geom: &'a GridGeometry,
    pub frame: BoxFrame,
}

impl<'a> LocalGrid<'a> {
    pub fn new(geom: &'a GridGeometry, frame: BoxFrame) -> Self {
        Self { geom, frame }
    }

    /// The whole periodic domain as one box.
    pub fn global(geom: &'a GridGeometry) -> Self {
        Self {
            geom,
            frame: BoxFrame {
                origin: [0; 3],
                size: geom.n_cell,
                n_global: geom.n_cell,
            },
        }
    }

    /// Box-local cell and in-cell fraction of `pos`.
    #[inline]
    pub fn locate(&self, pos: [f64; 3], id: u64) -> Result<([i64; 3], [f64; 3])> {
        let (cell, frac) = self.geom.locate(pos, id)?;
        Ok((self.frame.local(cell), frac))
    }
}

/// Checks that a cell-anchored stencil of `width` nodes starting at
/// `cell + offset` lies inside a guard box of interior size `n` and depth `g`.
#[inline]
pub(crate) fn check_reach(
    cell: [i64; 3],
    offset: i64,
    width: usize,
    n: [usize; 3],
    g: usize,
    id: u64,
) -> Result<()> {
    for a in 0..3 {
        let lo = cell[a] + offset;
        let hi = lo + width as i64 - 1;
        if lo < -(g as i64) || hi >= (n[a] + g) as i64 {
            return Err(Error::Ownership {
                id,
                detail: format!(
                    "axis {a}: stencil nodes {lo}..={hi} outside guard box [-{g}, {})",
                    n[a] + g
                ),
            });
        }
    }
    Ok(())
}
