use super::{check_reach, LocalGrid, MopaTile, TILE};
use crate::domain::{consts::C, gamma, VectorField};
use crate::error::Result;
use crate::shape::{axis_weights_from_cell, cell_stencil, ShapeOrder, MAX_K, MAX_WIDTH};

/// Current density carried by one particle: `(q w / V) * u c / gamma`.
#[inline(always)]
pub fn current_vector(q: f64, w: f64, u: [f64; 3], inv_vol: f64) -> [f64; 3] {
    let s = q * w * inv_vol * (C / gamma(u));
    [s * u[0], s * u[1], s * u[2]]
}

/// Adds `S(node) * jv` into `j` over the natural stencil of a particle.
pub fn deposit_scalar_at(
    cell: [i64; 3],
    frac: [f64; 3],
    jv: [f64; 3],
    j: &mut VectorField,
    order: ShapeOrder,
    id: u64,
) -> Result<()> {
    let ax = axis_weights_from_cell(cell[0], frac[0], order);
    let ay = axis_weights_from_cell(cell[1], frac[1], order);
    let az = axis_weights_from_cell(cell[2], frac[2], order);
    let width = order.width();
    check_reach([ax.i0, ay.i0, az.i0], 0, width, j.n, j.guard, id)?;
    let anchor = [ax.i0, ay.i0, az.i0];
    match width {
        2 => deposit_rows::<2>(anchor, &ax.w, &ay.w, &az.w, jv, j),
        3 => deposit_rows::<3>(anchor, &ax.w, &ay.w, &az.w, jv, j),
        _ => deposit_rows::<4>(anchor, &ax.w, &ay.w, &az.w, jv, j),
    }
    Ok(())
}

#[inline(always)]
fn deposit_rows<const W: usize>(
    anchor: [i64; 3],
    wx: &[f64; MAX_WIDTH],
    wy: &[f64; MAX_WIDTH],
    wz: &[f64; MAX_WIDTH],
    jv: [f64; 3],
    j: &mut VectorField,
) {
    let ext = j.ext;
    let g = j.guard as i64;
    let [jx, jy, jz] = &mut j.comp;
    for kk in 0..W {
        for jj in 0..W {
            let yz = wy[jj] * wz[kk];
            let row = (((anchor[2] + kk as i64 + g) as usize * ext[1])
                + (anchor[1] + jj as i64 + g) as usize)
                * ext[0]
                + (anchor[0] + g) as usize;
            let (rx, ry, rz) = (
                &mut jx[row..row + W],
                &mut jy[row..row + W],
                &mut jz[row..row + W],
            );
            for ii in 0..W {
                let s = wx[ii] * yz;
                rx[ii] += s * jv[0];
                ry[ii] += s * jv[1];
                rz[ii] += s * jv[2];
            }
        }
    }
}

/// Scalar direct deposition of one particle at its new position.
#[allow(clippy::too_many_arguments)]
pub fn deposit_scalar(
    id: u64,
    x_new: [f64; 3],
    u_new: [f64; 3],
    q: f64,
    w: f64,
    j: &mut VectorField,
    grid: &LocalGrid,
    order: ShapeOrder,
) -> Result<()> {
    let (cell, frac) = grid.locate(x_new, id)?;
    let jv = current_vector(q, w, u_new, 1.0 / grid.geom.cell_volume());
    deposit_scalar_at(cell, frac, jv, j, order, id)
}

/// Per-cell outer-product deposit: `M = sum_p w_stencil(p) (x) j_p` held in
/// `K / 8` tiles, scattered into J once per cell.
#[derive(Debug, Clone)]
pub struct DepositBatch {
    order: ShapeOrder,
    cell: [i64; 3],
    first_id: u64,
    rows: [[f64; MAX_K]; TILE],
    cur: [[f64; TILE]; TILE],
    n: usize,
    m: [MopaTile; MAX_K / TILE],
    pending: bool,
}

impl DepositBatch {
    pub fn new(order: ShapeOrder) -> Self {
        Self {
            order,
            cell: [0; 3],
            first_id: 0,
            rows: [[0.0; MAX_K]; TILE],
            cur: [[0.0; TILE]; TILE],
            n: 0,
            m: [MopaTile::default(); MAX_K / TILE],
            pending: false,
        }
    }

    /// Starts accumulation for a new cell.
    pub fn begin(&mut self, cell: [i64; 3], first_id: u64) {
        debug_assert!(!self.pending && self.n == 0);
        self.cell = cell;
        self.first_id = first_id;
    }

    #[inline]
    pub fn push(&mut self, frac: [f64; 3], jv: [f64; 3]) {
        cell_stencil(frac, self.order, &mut self.rows[self.n]);
        self.cur[self.n] = [jv[0], jv[1], jv[2], 0.0, 0.0, 0.0, 0.0, 0.0];
        self.n += 1;
        if self.n == TILE {
            self.flush();
        }
    }

    #[inline]
    fn flush(&mut self) {
        let tiles = self.order.cell_k() / TILE;
        // per entry the updates still arrive in particle order
        for (t, tile) in self.m.iter_mut().take(tiles).enumerate() {
            let mut acc = *tile;
            for p in 0..self.n {
                let a: &[f64; TILE] = self.rows[p][t * TILE..(t + 1) * TILE].try_into().unwrap();
                acc.accumulate(a, &self.cur[p]);
            }
            *tile = acc;
        }
        if self.n > 0 {
            self.pending = true;
        }
        self.n = 0;
    }

    /// Flushes the partial chunk and scatters `M` into `j`.
    pub fn finish(&mut self, j: &mut VectorField) -> Result<()> {
        self.flush();
        if !self.pending {
            return Ok(());
        }
        let order = self.order;
        let width = order.cell_width();
        let off = order.cell_anchor_offset();
        let tiles = order.cell_k() / TILE;
        let res = check_reach(self.cell, off, width, j.n, j.guard, self.first_id);
        if res.is_ok() {
            let [jx, jy, jz] = &mut j.comp;
            let ext = j.ext;
            let g = j.guard as i64;
            let a = self.cell.map(|c| c + off + g);
            let mut q = 0;
            for kk in 0..width as i64 {
                for jj in 0..width as i64 {
                    let row = ((a[2] + kk) as usize * ext[1] + (a[1] + jj) as usize) * ext[0]
                        + a[0] as usize;
                    for ii in 0..width {
                        let r = &self.m[q / TILE].c[q % TILE];
                        jx[row + ii] += r[0];
                        jy[row + ii] += r[1];
                        jz[row + ii] += r[2];
                        q += 1;
                    }
                }
            }
        }
        for t in self.m.iter_mut().take(tiles) {
            t.zero();
        }
        self.pending = false;
        res
    }
}

/// Deposits one cell's particles (`fracs`, currents `jvs`) as a batch.
pub fn deposit_batch(
    cell: [i64; 3],
    fracs: &[[f64; 3]],
    jvs: &[[f64; 3]],
    j: &mut VectorField,
    order: ShapeOrder,
    first_id: u64,
) -> Result<()> {
    let mut b = DepositBatch::new(order);
    b.begin(cell, first_id);
    for (f, v) in fracs.iter().zip(jvs) {
        b.push(*f, *v);
    }
    b.finish(j)
}
