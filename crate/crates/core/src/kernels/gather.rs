use super::{check_reach, LocalGrid, MopaTile, TILE};
use crate::domain::{FieldSet, PackedEB};
use crate::error::{Error, Result};
use crate::shape::{axis_weights_from_cell, cell_anchored_lanes, ShapeOrder, MAX_K, MAX_WIDTH};

/// Direct per-particle gather: the triple sum over the natural stencil,
/// `k` outermost and `i` innermost, read from the component arrays.
pub fn gather_scalar_at(
    cell: [i64; 3],
    frac: [f64; 3],
    fields: &FieldSet,
    order: ShapeOrder,
    id: u64,
) -> Result<([f64; 3], [f64; 3])> {
    let ax = axis_weights_from_cell(cell[0], frac[0], order);
    let ay = axis_weights_from_cell(cell[1], frac[1], order);
    let az = axis_weights_from_cell(cell[2], frac[2], order);
    let width = order.width();
    let anchor = [ax.i0, ay.i0, az.i0];
    check_reach(anchor, 0, width, fields.n(), fields.guard(), id)?;
    let out = match width {
        2 => gather_rows::<2>(anchor, &ax.w, &ay.w, &az.w, fields),
        3 => gather_rows::<3>(anchor, &ax.w, &ay.w, &az.w, fields),
        _ => gather_rows::<4>(anchor, &ax.w, &ay.w, &az.w, fields),
    };
    Ok(([out[0], out[1], out[2]], [out[3], out[4], out[5]]))
}

#[inline(always)]
fn gather_rows<const W: usize>(
    anchor: [i64; 3],
    wx: &[f64; MAX_WIDTH],
    wy: &[f64; MAX_WIDTH],
    wz: &[f64; MAX_WIDTH],
    fields: &FieldSet,
) -> [f64; 6] {
    let e = &fields.e;
    let b = &fields.b;
    let mut out = [0.0f64; 6];
    for k in 0..W {
        for j in 0..W {
            let yz = wy[j] * wz[k];
            let row = e.idx(anchor[0], anchor[1] + j as i64, anchor[2] + k as i64);
            let comps = [
                &e.comp[0][row..row + W],
                &e.comp[1][row..row + W],
                &e.comp[2][row..row + W],
                &b.comp[0][row..row + W],
                &b.comp[1][row..row + W],
                &b.comp[2][row..row + W],
            ];
            for i in 0..W {
                let s = wx[i] * yz;
                for c in 0..6 {
                    out[c] += s * comps[c][i];
                }
            }
        }
    }
    out
}

/// Scalar gather at a global position.
pub fn gather_scalar(
    pos: [f64; 3],
    id: u64,
    fields: &FieldSet,
    grid: &LocalGrid,
    order: ShapeOrder,
) -> Result<([f64; 3], [f64; 3])> {
    let (cell, frac) = grid.locate(pos, id)?;
    gather_scalar_at(cell, frac, fields, order, id)
}

/// Matrices of one outer-product gather: weights `W` (stored by stencil
/// column, `wt[q][p] = W[p][q]`), grid fields `G` and the result tile `F`.
#[derive(Debug, Clone)]
pub struct InterpBatch {
    pub n_valid: usize,
    pub cell: [i64; 3],
    pub order: ShapeOrder,
    pub wt: [[f64; TILE]; MAX_K],
    pub g: [[f64; TILE]; MAX_K],
    pub f: MopaTile,
}

impl InterpBatch {
    pub fn new(order: ShapeOrder) -> Self {
        Self {
            n_valid: 0,
            cell: [0; 3],
            order,
            wt: [[0.0; TILE]; MAX_K],
            g: [[0.0; TILE]; MAX_K],
            f: MopaTile::default(),
        }
    }

    pub fn k(&self) -> usize {
        self.order.cell_k()
    }

    /// Row `p` of `W`.
    pub fn weight_row(&self, p: usize) -> Vec<f64> {
        (0..self.k()).map(|q| self.wt[q][p]).collect()
    }

    /// `(E, B)` of valid row `p`.
    pub fn result(&self, p: usize) -> ([f64; 3], [f64; 3]) {
        let r = &self.f.c[p];
        ([r[0], r[1], r[2]], [r[3], r[4], r[5]])
    }
}

/// Fills `W` for up to eight particles of one cell. Rows past `fracs.len()`
/// are zero. Particles from different cells violate the layout contract.
pub fn build_weight_matrix(
    cells: &[[i64; 3]],
    fracs: &[[f64; 3]],
    batch: &mut InterpBatch,
) -> Result<()> {
    let n = fracs.len();
    if n > TILE || cells.len() != n {
        return Err(Error::Layout(format!("batch of {n} particles")));
    }
    if let Some(c) = cells.iter().find(|c| **c != cells[0]) {
        return Err(Error::Layout(format!(
            "mixed-cell batch: {:?} and {c:?}",
            cells[0]
        )));
    }
    match batch.order.cell_width() {
        2 => fill_weights::<2>(fracs, batch),
        _ => fill_weights::<4>(fracs, batch),
    }
    batch.n_valid = n;
    if n > 0 {
        batch.cell = cells[0];
    }
    Ok(())
}

#[inline(always)]
fn fill_weights<const W: usize>(fracs: &[[f64; 3]], batch: &mut InterpBatch) {
    let order = batch.order;
    let mut lanes = [[0.0; TILE]; 3];
    for (p, f) in fracs.iter().enumerate() {
        for a in 0..3 {
            lanes[a][p] = f[a];
        }
    }
    let ax: [[f64; TILE]; W] = cell_anchored_lanes(&lanes[0], order)[..W]
        .try_into()
        .unwrap();
    let ay: [[f64; TILE]; W] = cell_anchored_lanes(&lanes[1], order)[..W]
        .try_into()
        .unwrap();
    let mut az: [[f64; TILE]; W] = cell_anchored_lanes(&lanes[2], order)[..W]
        .try_into()
        .unwrap();
    // unused lanes contribute zero rows
    for w in az.iter_mut() {
        w[fracs.len()..].fill(0.0);
    }
    let mut cols = batch.wt[..W * W * W].iter_mut();
    for wz in &az {
        for wy in &ay {
            let mut yz = [0.0; TILE];
            for p in 0..TILE {
                yz[p] = wy[p] * wz[p];
            }
            for wx in &ax {
                let col = cols.next().unwrap();
                for p in 0..TILE {
                    col[p] = wx[p] * yz[p];
                }
            }
        }
    }
}

/// Fills `G` with `(Ex, Ey, Ez, Bx, By, Bz, 0, 0)` at every node of the
/// cell-anchored stencil, in the same flattening as `W`.
pub fn build_grid_field_matrix(
    cell: [i64; 3],
    packed: &PackedEB,
    batch: &mut InterpBatch,
    id: u64,
) -> Result<()> {
    let order = batch.order;
    let width = order.cell_width();
    let off = order.cell_anchor_offset();
    check_reach(cell, off, width, packed.n, packed.guard, id)?;
    let mut q = 0;
    for k in 0..width as i64 {
        for j in 0..width as i64 {
            let row = packed.idx(cell[0] + off, cell[1] + off + j, cell[2] + off + k);
            batch.g[q..q + width].copy_from_slice(&packed.data[row..row + width]);
            q += width;
        }
    }
    batch.cell = cell;
    Ok(())
}

/// `F = sum_q W[:, q] (x) G[q, :]`, one tile update per stencil node.
#[inline]
pub fn interpolate_batch(batch: &mut InterpBatch) {
    let k = batch.k();
    // a local accumulator stays in registers across the updates
    let mut f = MopaTile::default();
    for q in 0..k {
        f.accumulate(&batch.wt[q], &batch.g[q]);
    }
    batch.f = f;
}
