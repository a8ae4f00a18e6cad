//! Collocated-grid Maxwell update (B half-steps around a full E step),
//! guard filling for E/B and guard folding for J, locally or over the fabric.

use std::ops::Range;

use crate::domain::consts::{C, EPS0, MU0};
use crate::domain::{Decomposition, FieldSet, GridGeometry, VectorField, DIRECTIONS};
use crate::error::{Error, Result};
use crate::fabric::{
    decode_f64_payload, encode_f64_frame, FrameHeader, Namespace, RankFabric, VirtualClock,
    HEADER_BYTES,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverState {
    pub dt: f64,
    pub c: f64,
    pub eps0: f64,
    pub mu0: f64,
    pub dx: [f64; 3],
}

impl SolverState {
    pub fn new(geom: &GridGeometry, dt: f64) -> Self {
        Self {
            dt,
            c: C,
            eps0: EPS0,
            mu0: MU0,
            dx: geom.dx,
        }
    }

    /// Largest stable step for the given spacing: `1 / (c sqrt(sum 1/dx^2))`.
    pub fn cfl_limit(dx: [f64; 3]) -> f64 {
        1.0 / (C * dx.iter().map(|d| 1.0 / (d * d)).sum::<f64>().sqrt())
    }
}

/// `out += s * curl(f)` on interior nodes using centered differences.
/// Needs one valid guard layer in `f`.
fn add_curl(f: &VectorField, out: &mut VectorField, s: f64, dx: [f64; 3]) {
    let st = f.stride();
    let n = f.n.map(|v| v as i64);
    let h = [0.5 / dx[0], 0.5 / dx[1], 0.5 / dx[2]];
    let [fx, fy, fz] = &f.comp;
    let [ox, oy, oz] = &mut out.comp;
    for k in 0..n[2] {
        for j in 0..n[1] {
            let row = f.idx(0, j, k);
            for q in row..row + n[0] as usize {
                let d = |c: &Vec<f64>, a: usize| (c[q + st[a]] - c[q - st[a]]) * h[a];
                let cx = d(fz, 1) - d(fy, 2);
                let cy = d(fx, 2) - d(fz, 0);
                let cz = d(fy, 0) - d(fx, 1);
                ox[q] += s * cx;
                oy[q] += s * cy;
                oz[q] += s * cz;
            }
        }
    }
}

/// `B -= (dt/2) curl E` on interior nodes.
pub fn advance_b_half(fields: &mut FieldSet, s: &SolverState) {
    add_curl(&fields.e, &mut fields.b, -0.5 * s.dt, s.dx);
}

/// `E += dt (c^2 curl B - J / eps0)` on interior nodes.
pub fn advance_e_full(fields: &mut FieldSet, s: &SolverState) {
    add_curl(&fields.b, &mut fields.e, s.dt * s.c * s.c, s.dx);
    let n = fields.n().map(|v| v as i64);
    let f = s.dt / s.eps0;
    for c in 0..3 {
        for k in 0..n[2] {
            for j in 0..n[1] {
                let row = fields.e.idx(0, j, k);
                let e = &mut fields.e.comp[c][row..row + n[0] as usize];
                let jv = &fields.j.comp[c][row..row + n[0] as usize];
                for (e, jv) in e.iter_mut().zip(jv) {
                    *e -= f * jv;
                }
            }
        }
    }
}

/// Electromagnetic energy `sum (eps0 E^2 + B^2 / mu0) / 2 * V` over interior nodes.
pub fn field_energy(fields: &FieldSet, cell_volume: f64) -> f64 {
    0.5 * cell_volume * (EPS0 * fields.e.interior_norm2() + fields.b.interior_norm2() / MU0)
}

/// What a halo operation moves between neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaloKind {
    /// Interior slab copied into the neighbor's guard layer.
    Fill,
    /// Guard contributions added into the neighbor's interior.
    Fold,
}

fn axis_range(n: i64, g: i64, d: i32, pick_guard: bool) -> Range<i64> {
    match (d, pick_guard) {
        (0, _) => 0..n,
        (1, false) => n - g..n,
        (-1, false) => 0..g,
        (1, true) => n..n + g,
        (-1, true) => -g..0,
        _ => unreachable!(),
    }
}

/// Nodes a sender packs for travel direction `d`.
pub fn send_region(kind: HaloKind, n: [usize; 3], g: usize, d: [i32; 3]) -> [Range<i64>; 3] {
    let guard = kind == HaloKind::Fold;
    [0, 1, 2].map(|a| axis_range(n[a] as i64, g as i64, d[a], guard))
}

/// Nodes a receiver writes for data that travelled in direction `d`.
pub fn recv_region(kind: HaloKind, n: [usize; 3], g: usize, d: [i32; 3]) -> [Range<i64>; 3] {
    let back = d.map(|v| -v);
    let guard = kind == HaloKind::Fill;
    [0, 1, 2].map(|a| axis_range(n[a] as i64, g as i64, back[a], guard))
}

fn region_len(r: &[Range<i64>; 3]) -> usize {
    r.iter().map(|x| (x.end - x.start) as usize).product()
}

fn pack(f: &VectorField, r: &[Range<i64>; 3], out: &mut Vec<f64>) {
    out.clear();
    for c in 0..3 {
        for k in r[2].clone() {
            for j in r[1].clone() {
                let row = f.idx(r[0].start, j, k);
                out.extend_from_slice(&f.comp[c][row..row + (r[0].end - r[0].start) as usize]);
            }
        }
    }
}

fn unpack(
    f: &mut VectorField,
    r: &[Range<i64>; 3],
    kind: HaloKind,
    vals: impl Iterator<Item = f64>,
) {
    let w = (r[0].end - r[0].start) as usize;
    let mut vals = vals;
    for c in 0..3 {
        for k in r[2].clone() {
            for j in r[1].clone() {
                let row = f.idx(r[0].start, j, k);
                for q in row..row + w {
                    let v = vals.next().unwrap_or(0.0);
                    match kind {
                        HaloKind::Fill => f.comp[c][q] = v,
                        HaloKind::Fold => f.comp[c][q] += v,
                    }
                }
            }
        }
    }
}

/// Periodic single-box halo: every direction's neighbor is the box itself.
pub fn local_halo(f: &mut VectorField, kind: HaloKind) {
    let (n, g) = (f.n, f.guard);
    let mut staged: Vec<Vec<f64>> = Vec::with_capacity(26);
    for d in DIRECTIONS {
        let mut buf = Vec::new();
        pack(f, &send_region(kind, n, g, d), &mut buf);
        staged.push(buf);
    }
    if kind == HaloKind::Fold {
        f.zero_guards();
    }
    for (d, buf) in DIRECTIONS.iter().zip(staged) {
        unpack(f, &recv_region(kind, n, g, *d), kind, buf.into_iter());
    }
}

/// Halo exchange over the fabric for every rank of a decomposition. Region
/// slot `d` of a receiver carries data that travelled in direction `d`.
#[derive(Debug, Clone)]
pub struct HaloPlan {
    pub decomp: Decomposition,
    pub n: [usize; 3],
    pub guard: usize,
}

impl HaloPlan {
    pub fn new(decomp: &Decomposition, guard: usize) -> Self {
        Self {
            decomp: decomp.clone(),
            n: decomp.box_cells,
            guard,
        }
    }

    fn payload_bytes(&self, d: [i32; 3]) -> usize {
        let fill = region_len(&send_region(HaloKind::Fill, self.n, self.guard, d));
        let fold = region_len(&send_region(HaloKind::Fold, self.n, self.guard, d));
        HEADER_BYTES + 3 * 8 * fill.max(fold)
    }

    pub fn register(&self, fabric: &mut RankFabric) -> Result<()> {
        for r in 0..self.decomp.n_ranks() {
            for (slot, d) in DIRECTIONS.iter().enumerate() {
                let sender = self.decomp.neighbor(r, d.map(|v| -v));
                fabric.register_region(Namespace::Halo, r, sender, slot, self.payload_bytes(*d))?;
            }
        }
        Ok(())
    }

    /// Runs one fill or fold over all ranks. `fields[r]` is rank `r`'s array.
    /// Returns the time each rank spent waiting for its frames.
    pub fn exchange(
        &self,
        fabric: &RankFabric,
        fields: &mut [&mut VectorField],
        kind: HaloKind,
        epoch: u64,
        mut clocks: Option<&mut [VirtualClock]>,
    ) -> Result<Vec<f64>> {
        let nr = self.decomp.n_ranks();
        let mut buf = Vec::new();
        for r in 0..nr {
            let mut entries = Vec::with_capacity(26);
            for (slot, d) in DIRECTIONS.iter().enumerate() {
                pack(
                    fields[r],
                    &send_region(kind, self.n, self.guard, *d),
                    &mut buf,
                );
                let to = self.decomp.neighbor(r, *d);
                let h = fabric.handle(Namespace::Halo, to, slot).ok_or_else(|| {
                    Error::Protocol(format!("no halo region for rank {to} slot {slot}"))
                })?;
                entries.push((h, encode_f64_frame(r, epoch, &buf)));
            }
            let t = clocks.as_ref().map_or(0.0, |c| c[r].now);
            let issue = fabric.batch_put(r, Namespace::Halo, epoch, &entries, t)?;
            if let Some(c) = clocks.as_deref_mut() {
                c[r].advance(issue);
            }
            if kind == HaloKind::Fold {
                fields[r].zero_guards();
            }
        }
        let mut waits = vec![0.0; nr];
        for r in 0..nr {
            let clock = clocks.as_deref_mut().map(|c| &mut c[r]);
            if let Some(c) = &clock {
                if fabric.particles_in_flight(r, c.now) {
                    fabric.apply_contention(r);
                }
            }
            let (waited, mut handles) = fabric.wait_counter(r, Namespace::Halo, 26, clock)?;
            waits[r] = waited;
            handles.sort_by_key(|h| h.slot);
            for h in handles {
                let d = DIRECTIONS[h.slot];
                let region = recv_region(kind, self.n, self.guard, d);
                fabric.with_region(h, |bytes| -> Result<()> {
                    let (hdr, payload) = FrameHeader::decode(bytes)?;
                    if hdr.epoch != epoch as u32 {
                        return Err(Error::Protocol(format!(
                            "halo frame epoch {} in epoch {epoch}",
                            hdr.epoch
                        )));
                    }
                    unpack(fields[r], &region, kind, decode_f64_payload(payload));
                    Ok(())
                })?;
            }
        }
        Ok(waits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::CostModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: [usize; 3], g: usize, seed: u64) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = VectorField::new(n, g);
        for c in &mut f.comp {
            c.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        }
        f
    }

    #[test]
    fn uniform_e_leaves_b_unchanged() {
        let geom = GridGeometry::cube(8, 0.0, 1.0, 2).unwrap();
        let mut f = FieldSet::new([8; 3], 2);
        f.e.fill(3.0);
        let s = SolverState::new(&geom, 1e-10);
        advance_b_half(&mut f, &s);
        assert_eq!(f.b.interior_norm2(), 0.0);
    }

    #[test]
    fn sine_curl_second_order() {
        let n = 32;
        let geom = GridGeometry::cube(n, 0.0, 1.0, 2).unwrap();
        let k = 2.0 * std::f64::consts::PI;
        let mut f = FieldSet::new([n; 3], 2);
        for kk in -2..n as i64 + 2 {
            for j in -2..n as i64 + 2 {
                for i in -2..n as i64 + 2 {
                    let q = f.e.idx(i, j, kk);
                    f.e.comp[1][q] = (k * i as f64 * geom.dx[0]).sin();
                }
            }
        }
        let dt = 1e-3;
        let s = SolverState {
            dt,
            ..SolverState::new(&geom, dt)
        };
        advance_b_half(&mut f, &s);
        let mut err: f64 = 0.0;
        for i in 0..n as i64 {
            let q = f.b.idx(i, 3, 5);
            let exact = -0.5 * dt * k * (k * i as f64 * geom.dx[0]).cos();
            err = err.max((f.b.comp[2][q] - exact).abs());
        }
        let h = geom.dx[0];
        assert!(
            err <= 0.5 * dt * k * (k * h).powi(2) / 6.0 * 1.01,
            "err {err}"
        );
    }

    #[test]
    fn e_update_subtracts_current() {
        let geom = GridGeometry::cube(8, 0.0, 1.0, 2).unwrap();
        let mut f = FieldSet::new([8; 3], 2);
        f.j.fill(2.0);
        let s = SolverState::new(&geom, 1e-12);
        advance_e_full(&mut f, &s);
        let q = f.e.idx(3, 3, 3);
        assert_eq!(f.e.comp[0][q], -(s.dt / EPS0) * 2.0);
    }

    #[test]
    fn periodic_fill_copies_wrapped_interior() {
        let mut f = random_field([8; 3], 2, 1);
        local_halo(&mut f, HaloKind::Fill);
        for (i, j, k) in [(-1, 0, 0), (8, 9, -2), (-2, -2, -2), (3, 8, 4)] {
            let w = |v: i64| v.rem_euclid(8);
            assert_eq!(
                f.comp[1][f.idx(i, j, k)],
                f.comp[1][f.idx(w(i), w(j), w(k))]
            );
        }
    }

    #[test]
    fn periodic_fold_conserves_total() {
        let mut f = random_field([8; 3], 3, 2);
        let total: f64 = f.comp[0].iter().sum();
        local_halo(&mut f, HaloKind::Fold);
        let after: f64 = f.comp[0].iter().sum();
        assert!((total - after).abs() < 1e-12);
        assert_eq!(f.comp[0][f.idx(-1, 2, 2)], 0.0);
    }

    fn two_rank_setup() -> (HaloPlan, RankFabric) {
        let geom = GridGeometry::new([16, 8, 8], [0.0; 3], [1.0; 3], [true; 3], 2, [8; 3]).unwrap();
        let decomp = Decomposition::new(&geom, [2, 1, 1]).unwrap();
        let plan = HaloPlan::new(&decomp, 2);
        let mut fabric = RankFabric::new(2, true, CostModel::zero());
        plan.register(&mut fabric).unwrap();
        fabric.seal();
        (plan, fabric)
    }

    #[test]
    fn fabric_fill_matches_neighbor_interior() {
        let (plan, fabric) = two_rank_setup();
        let mut a = random_field([8; 3], 2, 3);
        let mut b = random_field([8; 3], 2, 4);
        let (a0, b0) = (a.clone(), b.clone());
        let mut clocks = vec![VirtualClock::default(); 2];
        plan.exchange(
            &fabric,
            &mut [&mut a, &mut b],
            HaloKind::Fill,
            1,
            Some(&mut clocks),
        )
        .unwrap();
        assert_eq!(a.comp[2][a.idx(8, 1, 1)], b0.comp[2][b0.idx(0, 1, 1)]);
        assert_eq!(a.comp[2][a.idx(-1, 1, 1)], b0.comp[2][b0.idx(7, 1, 1)]);
        assert_eq!(b.comp[0][b.idx(-2, 9, 3)], a0.comp[0][a0.idx(6, 1, 3)]);
        assert_eq!(a.comp[0][a.idx(3, 3, 3)], a0.comp[0][a0.idx(3, 3, 3)]);
    }

    #[test]
    fn fabric_fold_matches_single_box() {
        let (plan, fabric) = two_rank_setup();
        let mut whole = VectorField::new([16, 8, 8], 2);
        let mut a = VectorField::new([8; 3], 2);
        let mut b = VectorField::new([8; 3], 2);
        // one unit deposit straddling the rank boundary at x = 8
        let q = a.idx(8, 0, 0);
        a.comp[0][q] = 1.0;
        let q = whole.idx(8, 0, 0);
        whole.comp[0][q] = 1.0;
        let q = b.idx(-1, 7, 7);
        b.comp[0][q] = 2.0;
        let q = whole.idx(7, 7, 7);
        whole.comp[0][q] += 2.0;
        plan.exchange(&fabric, &mut [&mut a, &mut b], HaloKind::Fold, 2, None)
            .unwrap();
        local_halo(&mut whole, HaloKind::Fold);
        assert_eq!(b.comp[0][b.idx(0, 0, 0)], whole.comp[0][whole.idx(8, 0, 0)]);
        assert_eq!(a.comp[0][a.idx(7, 7, 7)], 2.0);
        assert_eq!(a.comp[0][a.idx(8, 0, 0)], 0.0);
    }

    #[test]
    fn vacuum_plane_wave_energy_bounded() {
        let n = 32;
        let geom = GridGeometry::new([n, 8, 8], [0.0; 3], [1.0, 0.25, 0.25], [true; 3], 1, [8; 3])
            .unwrap();
        let k = 2.0 * std::f64::consts::PI;
        let mut f = FieldSet::new(geom.n_cell, 1);
        let dt = 0.7 * SolverState::cfl_limit(geom.dx);
        for kk in 0..8 {
            for j in 0..8 {
                for i in 0..n as i64 {
                    let x = i as f64 * geom.dx[0];
                    let q = f.e.idx(i, j, kk);
                    f.e.comp[1][q] = (k * x).sin();
                    f.b.comp[2][q] = (k * x).sin() / C;
                }
            }
        }
        let s = SolverState::new(&geom, dt);
        local_halo(&mut f.e, HaloKind::Fill);
        local_halo(&mut f.b, HaloKind::Fill);
        let e0 = field_energy(&f, geom.cell_volume());
        for _ in 0..1000 {
            advance_b_half(&mut f, &s);
            local_halo(&mut f.b, HaloKind::Fill);
            advance_e_full(&mut f, &s);
            local_halo(&mut f.e, HaloKind::Fill);
            advance_b_half(&mut f, &s);
            local_halo(&mut f.b, HaloKind::Fill);
        }
        let e1 = field_energy(&f, geom.cell_volume());
        assert!(((e1 - e0) / e0).abs() <= 1e-3, "drift {}", (e1 - e0) / e0);
    }
}
