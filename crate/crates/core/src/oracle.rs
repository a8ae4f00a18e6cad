//! Brute-force single-domain reference step. Gather and deposit loop over
//! particles in id order and evaluate the B-spline of every node distance
//! directly, with periodic wrapping by index arithmetic instead of guards.

use crate::domain::{
    consts::C, FieldSet, GridGeometry, ParticleRecord, SimulationConfig, Species, VectorField,
};
use crate::error::{Error, Result};
use crate::shape::ShapeOrder;
use crate::solver::{advance_b_half, advance_e_full, local_halo, HaloKind, SolverState};

/// Centered B-spline of the given order at distance `d` (in cells).
pub fn bspline(d: f64, order: ShapeOrder) -> f64 {
    let a = d.abs();
    match order {
        ShapeOrder::Linear => (1.0 - a).max(0.0),
        ShapeOrder::Quadratic => {
            if a < 0.5 {
                0.75 - a * a
            } else if a < 1.5 {
                0.5 * (1.5 - a) * (1.5 - a)
            } else {
                0.0
            }
        }
        ShapeOrder::Cubic => {
            if a < 1.0 {
                2.0 / 3.0 - a * a + 0.5 * a * a * a
            } else if a < 2.0 {
                (2.0 - a).powi(3) / 6.0
            } else {
                0.0
            }
        }
    }
}

/// Nodes with non-zero weight along one axis and their weights.
fn axis_nodes(s: f64, order: ShapeOrder) -> Vec<(i64, f64)> {
    let half = (order.as_u8() as f64 + 1.0) / 2.0;
    let lo = (s - half).floor() as i64;
    let hi = (s + half).ceil() as i64;
    (lo..=hi)
        .map(|i| (i, bspline(s - i as f64, order)))
        .filter(|(_, w)| *w != 0.0)
        .collect()
}

#[derive(Debug, Clone)]
pub struct OracleState {
    pub geom: GridGeometry,
    pub order: ShapeOrder,
    pub species: Species,
    pub solver: SolverState,
    /// Sorted by id.
    pub particles: Vec<ParticleRecord>,
    /// Global fields; E and B guards hold periodic images.
    pub fields: FieldSet,
    pub steps_done: u64,
}

impl OracleState {
    pub fn new(
        config: &SimulationConfig,
        mut particles: Vec<ParticleRecord>,
        fields: Option<FieldSet>,
    ) -> Result<Self> {
        let geom = config.build_geometry()?;
        particles.sort_by_key(|p| p.id);
        let mut fields = fields.unwrap_or_else(|| FieldSet::new(geom.n_cell, geom.guard));
        local_halo(&mut fields.e, HaloKind::Fill);
        local_halo(&mut fields.b, HaloKind::Fill);
        Ok(Self {
            order: config.order()?,
            species: config.species(),
            solver: SolverState::new(&geom, config.dt(&geom)),
            geom,
            particles,
            fields,
            steps_done: 0,
        })
    }

    fn stencil(&self, pos: [f64; 3], id: u64) -> Result<[Vec<(usize, f64)>; 3]> {
        let mut out: [Vec<(usize, f64)>; 3] = Default::default();
        for a in 0..3 {
            if !pos[a].is_finite() {
                return Err(Error::Numeric {
                    id,
                    what: format!("position[{a}] = {}", pos[a]),
                });
            }
            let s = (pos[a] - self.geom.prob_lo[a]) / self.geom.dx[a];
            let n = self.geom.n_cell[a] as i64;
            out[a] = axis_nodes(s, self.order)
                .into_iter()
                .map(|(i, w)| (i.rem_euclid(n) as usize, w))
                .collect();
        }
        Ok(out)
    }

    /// `sum_nodes S(x - x_node) F(node)` for E and B.
    pub fn gather(&self, pos: [f64; 3], id: u64) -> Result<([f64; 3], [f64; 3])> {
        let [sx, sy, sz] = self.stencil(pos, id)?;
        let (mut e, mut b) = ([0.0; 3], [0.0; 3]);
        for &(k, wz) in &sz {
            for &(j, wy) in &sy {
                for &(i, wx) in &sx {
                    let w = wx * wy * wz;
                    let q = self.fields.e.idx(i as i64, j as i64, k as i64);
                    for c in 0..3 {
                        e[c] += w * self.fields.e.comp[c][q];
                        b[c] += w * self.fields.b.comp[c][q];
                    }
                }
            }
        }
        Ok((e, b))
    }

    fn deposit(&mut self, p: &ParticleRecord) -> Result<()> {
        let g = (1.0 + p.u[0] * p.u[0] + p.u[1] * p.u[1] + p.u[2] * p.u[2]).sqrt();
        let s = self.species.q * p.w / self.geom.cell_volume() * C / g;
        let jv = [s * p.u[0], s * p.u[1], s * p.u[2]];
        let [sx, sy, sz] = self.stencil(p.pos, p.id)?;
        let j = &mut self.fields.j;
        for &(k, wz) in &sz {
            for &(jj, wy) in &sy {
                for &(i, wx) in &sx {
                    let w = wx * wy * wz;
                    let q = j.idx(i as i64, jj as i64, k as i64);
                    for c in 0..3 {
                        j.comp[c][q] += w * jv[c];
                    }
                }
            }
        }
        Ok(())
    }

    fn push(&self, p: &mut ParticleRecord, e: [f64; 3], b: [f64; 3]) -> Result<()> {
        let dt = self.solver.dt;
        let (q, m) = (self.species.q, self.species.m);
        let h = q * dt / (2.0 * m * C);
        let um: Vec<f64> = (0..3).map(|a| p.u[a] + h * e[a]).collect();
        let gm = (1.0 + um.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let t: Vec<f64> = (0..3).map(|a| q * dt / (2.0 * m) / gm * b[a]).collect();
        let t2: f64 = t.iter().map(|v| v * v).sum();
        let s: Vec<f64> = t.iter().map(|v| 2.0 * v / (1.0 + t2)).collect();
        let cross = |a: &[f64], b: &[f64]| {
            [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ]
        };
        let c1 = cross(&um, &t);
        let up: Vec<f64> = (0..3).map(|a| um[a] + c1[a]).collect();
        let c2 = cross(&up, &s);
        let un: [f64; 3] = std::array::from_fn(|a| um[a] + c2[a] + h * e[a]);
        let gn = (1.0 + un.iter().map(|v| v * v).sum::<f64>()).sqrt();
        for a in 0..3 {
            p.pos[a] += un[a] * C * dt / gn;
        }
        if !p.pos.iter().chain(un.iter()).all(|v| v.is_finite()) {
            return Err(Error::Numeric {
                id: p.id,
                what: format!("push produced x={:?} u={un:?}", p.pos),
            });
        }
        p.u = un;
        p.pos = self.geom.wrap_position(p.pos);
        Ok(())
    }

    /// Gather, push and deposit every particle, then the field update.
    pub fn step(&mut self) -> Result<()> {
        let mut ps = std::mem::take(&mut self.particles);
        for p in &mut ps {
            let (e, b) = self.gather(p.pos, p.id)?;
            self.push(p, e, b)?;
        }
        self.fields.j.zero();
        for p in &ps {
            self.deposit(p)?;
        }
        self.particles = ps;
        let s = self.solver;
        advance_b_half(&mut self.fields, &s);
        local_halo(&mut self.fields.b, HaloKind::Fill);
        advance_e_full(&mut self.fields, &s);
        local_halo(&mut self.fields.e, HaloKind::Fill);
        advance_b_half(&mut self.fields, &s);
        local_halo(&mut self.fields.b, HaloKind::Fill);
        self.steps_done += 1;
        Ok(())
    }
}

/// Free function form of [`OracleState::step`].
pub fn reference_step(mut state: OracleState) -> Result<OracleState> {
    state.step()?;
    Ok(state)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Max relative error of E, B, J interiors, normalized by each field's max magnitude.
    pub field_error: [f64; 3],
    /// Max relative error over particle positions and momenta.
    pub particle_error: f64,
    /// Id of the particle carrying `particle_error`.
    pub worst_id: Option<u64>,
    pub tolerance: f64,
}

impl ComparisonReport {
    pub fn max_error(&self) -> f64 {
        self.field_error
            .iter()
            .copied()
            .fold(self.particle_error, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_error() <= self.tolerance
    }
}

impl std::fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "E {:.3e}  B {:.3e}  J {:.3e}  particles {:.3e} (worst id {:?})  tol {:.1e}  {}",
            self.field_error[0],
            self.field_error[1],
            self.field_error[2],
            self.particle_error,
            self.worst_id,
            self.tolerance,
            if self.passed() { "pass" } else { "FAIL" }
        )
    }
}

fn field_error(a: &VectorField, b: &VectorField) -> f64 {
    let n = a.n.map(|v| v as i64);
    let mut scale: f64 = 0.0;
    let mut diff: f64 = 0.0;
    for c in 0..3 {
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    let (x, y) = (a.comp[c][a.idx(i, j, k)], b.comp[c][b.idx(i, j, k)]);
                    scale = scale.max(x.abs()).max(y.abs());
                    diff = diff.max((x - y).abs());
                }
            }
        }
    }
    if diff == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Positions are compared as periodic displacements relative to the cell
/// size; momenta relative to the largest momentum magnitude present.
pub fn compare_states(
    geom: &GridGeometry,
    particles: &[ParticleRecord],
    fields: &FieldSet,
    oracle: &OracleState,
    tolerance: f64,
) -> Result<ComparisonReport> {
    if particles.len() != oracle.particles.len() {
        return Err(Error::Comparison(format!(
            "{} particles vs {} in the reference",
            particles.len(),
            oracle.particles.len()
        )));
    }
    let u_scale = oracle
        .particles
        .iter()
        .flat_map(|p| p.u)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0;
    let mut worst_id = None;
    for (p, r) in particles.iter().zip(&oracle.particles) {
        if p.id != r.id {
            return Err(Error::Comparison(format!(
                "id {} vs reference id {}",
                p.id, r.id
            )));
        }
        let mut e: f64 = 0.0;
        for a in 0..3 {
            let l = geom.length(a);
            let mut d = (p.pos[a] - r.pos[a]).abs();
            if d > 0.5 * l {
                d = l - d;
            }
            e = e.max(d / geom.dx[a]);
            if u_scale > 0.0 {
                e = e.max((p.u[a] - r.u[a]).abs() / u_scale);
            }
        }
        if e > worst {
            worst = e;
            worst_id = Some(p.id);
        }
    }
    Ok(ComparisonReport {
        field_error: [
            field_error(&fields.e, &oracle.fields.e),
            field_error(&fields.b, &oracle.fields.b),
            field_error(&fields.j, &oracle.fields.j),
        ],
        particle_error: worst,
        worst_id,
        tolerance,
    })
}
