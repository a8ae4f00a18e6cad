//! B-spline shape factors and stencil anchoring shared by gather and deposit.
//!
//! Odd orders anchor on the containing cell (`i0 = cell - (order-1)/2`),
//! order 2 anchors on the nearest node. Tensor-product stencils flatten with
//! x fastest: `q = (k * w + j) * w + i` for stencil width `w`.

use crate::domain::GridGeometry;
use crate::error::{Error, Result};

/// Maximum per-axis stencil width (cubic).
pub const MAX_WIDTH: usize = 4;
/// Maximum flattened stencil size.
pub const MAX_K: usize = MAX_WIDTH * MAX_WIDTH * MAX_WIDTH;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeOrder {
    Linear = 1,
    Quadratic = 2,
    Cubic = 3,
}

impl ShapeOrder {
    pub fn from_u8(order: u8) -> Result<Self> {
        match order {
            1 => Ok(Self::Linear),
            2 => Ok(Self::Quadratic),
            3 => Ok(Self::Cubic),
            o => Err(Error::config(None, format!("unsupported shape order {o}"))),
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    /// Natural per-axis stencil width (order + 1).
    pub fn width(self) -> usize {
        self as usize + 1
    }

    /// Per-axis width of the cell-anchored stencil used by batched kernels.
    ///
    /// Every particle of a cell must share one anchor; for the even order
    /// that requires one extra padded node.
    pub fn cell_width(self) -> usize {
        match self {
            Self::Linear => 2,
            Self::Quadratic | Self::Cubic => 4,
        }
    }

    /// Flattened size of the cell-anchored stencil.
    pub fn cell_k(self) -> usize {
        self.cell_width().pow(3)
    }

    /// Nodes reached below and above the containing cell index.
    pub fn node_reach(self) -> (i64, i64) {
        match self {
            Self::Linear => (0, 1),
            Self::Quadratic => (1, 2),
            Self::Cubic => (1, 2),
        }
    }

    /// Offset from cell index to the cell-anchored stencil origin.
    pub fn cell_anchor_offset(self) -> i64 {
        match self {
            Self::Linear => 0,
            Self::Quadratic | Self::Cubic => -1,
        }
    }
}

/// Shape weights of one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisWeights {
    pub i0: i64,
    pub xi: f64,
    pub w: [f64; MAX_WIDTH],
    pub order: ShapeOrder,
}

impl AxisWeights {
    pub fn weights(&self) -> &[f64] {
        &self.w[..self.order.width()]
    }
}

/// Flattened tensor-product stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilWeights {
    pub anchor: [i64; 3],
    pub width: usize,
    pub w: [f64; MAX_K],
}

impl StencilWeights {
    pub fn k(&self) -> usize {
        self.width * self.width * self.width
    }

    pub fn weights(&self) -> &[f64] {
        &self.w[..self.k()]
    }
}

/// B-spline basis values at fractional offset `xi` in `[0, 1)`.
#[inline]
pub fn shape_weights(xi: f64, order: ShapeOrder) -> [f64; MAX_WIDTH] {
    match order {
        ShapeOrder::Linear => [1.0 - xi, xi, 0.0, 0.0],
        ShapeOrder::Quadratic => {
            let d = xi - 0.5;
            let a = 1.0 - xi;
            [0.5 * a * a, 0.75 - d * d, 0.5 * xi * xi, 0.0]
        }
        ShapeOrder::Cubic => {
            let x2 = xi * xi;
            let x3 = x2 * xi;
            let a = 1.0 - xi;
            const SIXTH: f64 = 1.0 / 6.0;
            [
                SIXTH * a * a * a,
                SIXTH * (3.0 * x3 - 6.0 * x2 + 4.0),
                SIXTH * (-3.0 * x3 + 3.0 * x2 + 3.0 * xi + 1.0),
                SIXTH * x3,
            ]
        }
    }
}

/// Checked variant taking the raw order.
pub fn shape_weights_checked(xi: f64, order: u8) -> Result<Vec<f64>> {
    let o = ShapeOrder::from_u8(order)?;
    Ok(shape_weights(xi, o)[..o.width()].to_vec())
}

/// Anchor index and fraction along one axis from the containing cell and
/// the in-cell fraction.
#[inline]
pub fn axis_weights_from_cell(cell: i64, frac: f64, order: ShapeOrder) -> AxisWeights {
    let (i0, xi) = match order {
        ShapeOrder::Linear => (cell, frac),
        ShapeOrder::Cubic => (cell - 1, frac),
        ShapeOrder::Quadratic => {
            if frac < 0.5 {
                (cell - 1, frac + 0.5)
            } else {
                (cell, frac - 0.5)
            }
        }
    };
    AxisWeights {
        i0,
        xi,
        w: shape_weights(xi, order),
        order,
    }
}

/// Global anchor and fraction for a coordinate along `axis`.
pub fn anchor_and_fraction(
    coord: f64,
    axis: usize,
    geom: &GridGeometry,
    order: ShapeOrder,
) -> Result<(i64, f64)> {
    if !coord.is_finite() {
        return Err(Error::Numeric {
            id: u64::MAX,
            what: format!("coordinate {coord} on axis {axis}"),
        });
    }
    let s = (coord - geom.prob_lo[axis]) / geom.dx[axis];
    let f = s.floor();
    let aw = axis_weights_from_cell(f as i64, s - f, order);
    Ok((aw.i0, aw.xi))
}

/// Separable product `w[flatten(i,j,k)] = wx[i] * wy[j] * wz[k]`.
#[inline]
pub fn stencil_weights_3d(wx: &AxisWeights, wy: &AxisWeights, wz: &AxisWeights) -> StencilWeights {
    debug_assert!(wx.order == wy.order && wy.order == wz.order);
    let width = wx.order.width();
    let mut w = [0.0; MAX_K];
    let mut q = 0;
    for k in 0..width {
        for j in 0..width {
            let yz = wy.w[j] * wz.w[k];
            for i in 0..width {
                w[q] = wx.w[i] * yz;
                q += 1;
            }
        }
    }
    StencilWeights {
        anchor: [wx.i0, wy.i0, wz.i0],
        width,
        w,
    }
}

/// Axis weights re-expressed on the cell-anchored stencil of width
/// [`ShapeOrder::cell_width`], zero-padded where the natural stencil does
/// not reach.
#[inline]
pub fn cell_anchored_axis(frac: f64, order: ShapeOrder) -> [f64; MAX_WIDTH] {
    let aw = axis_weights_from_cell(0, frac, order);
    let shift = (aw.i0 - order.cell_anchor_offset()) as usize;
    let mut out = [0.0; MAX_WIDTH];
    for (i, w) in aw.weights().iter().enumerate() {
        out[i + shift] = *w;
    }
    out
}

/// [`cell_anchored_axis`] for eight fractions at once, transposed:
/// `out[i][p]` is weight `i` of lane `p`.
#[inline]
pub fn cell_anchored_lanes(frac: &[f64; 8], order: ShapeOrder) -> [[f64; 8]; MAX_WIDTH] {
    let mut out = [[0.0; 8]; MAX_WIDTH];
    match order {
        ShapeOrder::Linear => {
            for p in 0..8 {
                out[0][p] = 1.0 - frac[p];
                out[1][p] = frac[p];
            }
        }
        ShapeOrder::Quadratic => {
            for p in 0..8 {
                let low = frac[p] < 0.5;
                let xi = if low { frac[p] + 0.5 } else { frac[p] - 0.5 };
                let w = shape_weights(xi, order);
                out[0][p] = if low { w[0] } else { 0.0 };
                out[1][p] = if low { w[1] } else { w[0] };
                out[2][p] = if low { w[2] } else { w[1] };
                out[3][p] = if low { 0.0 } else { w[2] };
            }
        }
        ShapeOrder::Cubic => {
            for p in 0..8 {
                let w = shape_weights(frac[p], order);
                for i in 0..4 {
                    out[i][p] = w[i];
                }
            }
        }
    }
    out
}

/// Flattened cell-anchored stencil weights for a particle at in-cell
/// fraction `frac`. Only the first `order.cell_k()` entries are meaningful.
#[inline]
pub fn cell_stencil(frac: [f64; 3], order: ShapeOrder, out: &mut [f64; MAX_K]) {
    let wx = cell_anchored_axis(frac[0], order);
    let wy = cell_anchored_axis(frac[1], order);
    let wz = cell_anchored_axis(frac[2], order);
    let width = order.cell_width();
    let mut q = 0;
    for k in 0..width {
        for j in 0..width {
            let yz = wy[j] * wz[k];
            for i in 0..width {
                out[q] = wx[i] * yz;
                q += 1;
            }
        }
    }
}
