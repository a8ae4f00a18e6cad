use crate::domain::{consts::C, GridGeometry};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushResult {
    pub x_new: [f64; 3],
    pub u_new: [f64; 3],
}

/// Step constants shared by every particle of a species.
#[derive(Debug, Clone, Copy)]
pub struct PushCoefficients {
    /// `q dt / (2 m c)`: half electric kick on normalized momentum.
    pub e_kick: f64,
    /// `q dt / (2 m)`: rotation parameter before division by gamma.
    pub b_rot: f64,
    /// `c dt`.
    pub c_dt: f64,
}

impl PushCoefficients {
    pub fn new(q: f64, m: f64, dt: f64) -> Self {
        Self {
            e_kick: q * dt / (2.0 * m * C),
            b_rot: q * dt / (2.0 * m),
            c_dt: C * dt,
        }
    }
}

/// Boris momentum update followed by the position drift, unwrapped.
#[inline(always)]
pub fn boris_step(
    x: [f64; 3],
    u: [f64; 3],
    e: [f64; 3],
    b: [f64; 3],
    k: &PushCoefficients,
) -> ([f64; 3], [f64; 3]) {
    let um = [
        u[0] + k.e_kick * e[0],
        u[1] + k.e_kick * e[1],
        u[2] + k.e_kick * e[2],
    ];
    let gm = (1.0 + um[0] * um[0] + um[1] * um[1] + um[2] * um[2]).sqrt();
    let f = k.b_rot / gm;
    let t = [f * b[0], f * b[1], f * b[2]];
    let s_f = 2.0 / (1.0 + t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
    let s = [s_f * t[0], s_f * t[1], s_f * t[2]];
    let up = [
        um[0] + (um[1] * t[2] - um[2] * t[1]),
        um[1] + (um[2] * t[0] - um[0] * t[2]),
        um[2] + (um[0] * t[1] - um[1] * t[0]),
    ];
    let upl = [
        um[0] + (up[1] * s[2] - up[2] * s[1]),
        um[1] + (up[2] * s[0] - up[0] * s[2]),
        um[2] + (up[0] * s[1] - up[1] * s[0]),
    ];
    let un = [
        upl[0] + k.e_kick * e[0],
        upl[1] + k.e_kick * e[1],
        upl[2] + k.e_kick * e[2],
    ];
    let gn = (1.0 + un[0] * un[0] + un[1] * un[1] + un[2] * un[2]).sqrt();
    let d = k.c_dt / gn;
    ([x[0] + un[0] * d, x[1] + un[1] * d, x[2] + un[2] * d], un)
}

/// Relativistic Boris push with periodic wrapping of the new position.
#[allow(clippy::too_many_arguments)]
pub fn boris_push(
    id: u64,
    x: [f64; 3],
    u: [f64; 3],
    e: [f64; 3],
    b: [f64; 3],
    q: f64,
    m: f64,
    dt: f64,
    geom: &GridGeometry,
) -> Result<PushResult> {
    let (xn, un) = boris_step(x, u, e, b, &PushCoefficients::new(q, m, dt));
    if !(xn.iter().chain(un.iter()).all(|v| v.is_finite())) {
        return Err(Error::Numeric {
            id,
            what: format!("push produced x={xn:?} u={un:?}"),
        });
    }
    Ok(PushResult {
        x_new: geom.wrap_position(xn),
        u_new: un,
    })
}
