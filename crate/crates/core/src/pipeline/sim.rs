use std::hash::{Hash, Hasher};
use std::time::Instant;

use rayon::prelude::*;

use super::phases::{
    phase1, phase2, reduce_tile_j, scan_and_pack, StepCtx, TileCounts, TileScratch,
};
use super::InterpSupply;
use crate::domain::{
    Decomposition, FieldSet, GridGeometry, PackedEB, ParticleRecord, SimulationConfig, Species,
    VectorField,
};
use crate::error::{Error, Result};
use crate::fabric::{CostModel, RankFabric, VirtualClock};
use crate::kernels::PushCoefficients;
use crate::layout::{init_tile, ParticleTile, TileFrame};
use crate::metrics::{
    conservation_report, init_workload, ConservationReport, ConservedQuantities, StepMetrics,
    FLOPS_DEPOSIT, FLOPS_INTERP,
};
use crate::redistribute::{
    converge, emit_frames, unpack_merge, ParticlePlan, SendLists, SyncPoint, TileOutbox,
};
use crate::shape::ShapeOrder;
use crate::solver::{advance_b_half, advance_e_full, local_halo, HaloKind, HaloPlan, SolverState};

/// Everything one rank owns: its tiles, fields and exchange staging.
#[derive(Debug)]
pub struct RankState {
    pub rank: usize,
    pub tiles: Vec<ParticleTile>,
    pub fields: FieldSet,
    packed: PackedEB,
    scratch: Vec<TileScratch>,
    outboxes: Vec<TileOutbox>,
    send: SendLists,
    received: Vec<ParticleRecord>,
}

/// Results of [`Simulation::run`].
#[derive(Debug, Clone)]
pub struct RunReport {
    /// One entry per measured step.
    pub metrics: Vec<StepMetrics>,
    pub conservation: ConservationReport,
    pub checksum: u64,
}

/// A multi-rank simulation driven in lock step by one coordinator: every
/// phase runs for all ranks before the next phase starts, so exchanges
/// always find their partners' frames posted.
#[derive(Debug)]
pub struct Simulation {
    pub config: SimulationConfig,
    pub geom: GridGeometry,
    pub decomp: Decomposition,
    pub species: Species,
    pub order: ShapeOrder,
    pub solver: SolverState,
    pub ranks: Vec<RankState>,
    pub clocks: Vec<VirtualClock>,
    fabric: RankFabric,
    halo: HaloPlan,
    plan: ParticlePlan,
    steps_done: u64,
}

fn with_context<T>(
    r: Result<T>,
    step: u64,
    rank: usize,
    tile: Option<usize>,
    phase: &'static str,
) -> Result<T> {
    r.map_err(|e| e.at(step, rank, tile, phase))
}

fn first_error(
    results: Vec<Result<TileCounts>>,
    step: u64,
    rank: usize,
    phase: &'static str,
) -> Result<TileCounts> {
    let mut total = TileCounts::default();
    for (t, r) in results.into_iter().enumerate() {
        total.add(&with_context(r, step, rank, Some(t), phase)?);
    }
    Ok(total)
}

type FieldUpdate = fn(&mut FieldSet, &SolverState);

impl Simulation {
    /// Validates `config` and builds the configured workload.
    pub fn new(config: SimulationConfig) -> Result<Self> {
        let (geom, _) = config.validate()?;
        let particles = init_workload(&config, &geom);
        Self::from_state(config, particles, None)
    }

    /// Builds a simulation from explicit particles and, optionally, global
    /// interior fields (guards are refilled).
    pub fn from_state(
        config: SimulationConfig,
        particles: Vec<ParticleRecord>,
        fields: Option<&FieldSet>,
    ) -> Result<Self> {
        let (geom, decomp) = config.validate()?;
        let order = config.order()?;
        let nr = decomp.n_ranks();
        let nt = decomp.n_tiles_per_rank();
        let mut fabric = RankFabric::new(nr, config.virtual_time, config.cost.clone());
        let halo = HaloPlan::new(&decomp, geom.guard);
        let plan = ParticlePlan::new(&decomp, config.ppc, config.disorder_fraction);
        halo.register(&mut fabric)?;
        plan.register(&mut fabric)?;
        fabric.seal();

        let mut per_tile: Vec<Vec<Vec<ParticleRecord>>> = vec![vec![Vec::new(); nt]; nr];
        for p in particles {
            let (g, _) = geom.locate(p.pos, p.id)?;
            let r = decomp.rank_of_cell(g);
            let rl = decomp.frame(r).local(g);
            let tc = [0, 1, 2].map(|a| rl[a] as usize / geom.tile_shape[a]);
            per_tile[r][decomp.tile_index(tc)].push(p);
        }
        let cells = geom.cells_per_tile();
        let mut ranks = Vec::with_capacity(nr);
        for (r, tiles_in) in per_tile.into_iter().enumerate() {
            let mut tiles = Vec::with_capacity(nt);
            for (t, recs) in tiles_in.into_iter().enumerate() {
                let mut tile = init_tile(cells, config.ppc, config.disorder_fraction);
                tile.load(&TileFrame::new(&geom, &decomp, r, t), recs)?;
                tiles.push(tile);
            }
            let mut f = FieldSet::new(decomp.box_cells, geom.guard);
            if let Some(src) = fields {
                let o = decomp.frame(r).origin.map(|v| v as i64);
                for (dst, from) in [(&mut f.e, &src.e), (&mut f.b, &src.b), (&mut f.j, &src.j)] {
                    copy_box(from, dst, o);
                }
            }
            ranks.push(RankState {
                rank: r,
                tiles,
                fields: f,
                packed: PackedEB::default(),
                scratch: (0..nt)
                    .map(|_| TileScratch::new(order, geom.tile_shape, geom.guard))
                    .collect(),
                outboxes: vec![TileOutbox::default(); nt],
                send: SendLists::default(),
                received: Vec::new(),
            });
        }
        let dt = config.dt(&geom);
        let mut sim = Self {
            species: config.species(),
            solver: SolverState::new(&geom, dt),
            order,
            clocks: vec![VirtualClock::default(); nr],
            config,
            geom,
            decomp,
            ranks,
            fabric,
            halo,
            plan,
            steps_done: 0,
        };
        sim.fill_halo(|f| &mut f.e, 0)?;
        sim.fill_halo(|f| &mut f.b, 1)?;
        for c in &mut sim.clocks {
            *c = VirtualClock::default();
        }
        sim.repack();
        Ok(sim)
    }

    pub fn steps_done(&self) -> u64 {
        self.steps_done
    }

    pub fn cost(&self) -> &CostModel {
        self.fabric.cost()
    }

    pub fn fabric(&self) -> &RankFabric {
        &self.fabric
    }

    fn halo_epoch(&self, k: u64) -> u64 {
        (self.steps_done + 1) * 8 + k
    }

    fn fill_halo(
        &mut self,
        pick: impl Fn(&mut FieldSet) -> &mut VectorField,
        epoch: u64,
    ) -> Result<Vec<f64>> {
        let virt = self.config.virtual_time;
        let mut vs: Vec<&mut VectorField> =
            self.ranks.iter_mut().map(|r| pick(&mut r.fields)).collect();
        let clocks = virt.then_some(self.clocks.as_mut_slice());
        self.halo
            .exchange(&self.fabric, &mut vs, HaloKind::Fill, epoch, clocks)
    }

    fn repack(&mut self) {
        if self.config.variant.interp.is_batched() {
            for r in &mut self.ranks {
                r.fields.pack_eb(&mut r.packed);
            }
        }
    }

    /// Advances every rank by one step and returns the merged metrics.
    pub fn step(&mut self) -> Result<StepMetrics> {
        let step = self.steps_done + 1;
        let epoch = self.steps_done;
        let cfg = &self.config;
        let virt = cfg.virtual_time;
        let variant = cfg.variant;
        let comm = variant.comm;
        let cost = self.fabric.cost().clone();
        let nr = self.ranks.len();
        let frozen = cfg.freeze_after.is_some_and(|f| self.steps_done >= f);
        let deterministic = cfg.deterministic;
        let mut m: Vec<StepMetrics> = vec![
            StepMetrics {
                step,
                ..Default::default()
            };
            nr
        ];
        for c in &mut self.clocks {
            let now = c.now;
            c.forget_before(now);
        }
        let push = PushCoefficients::new(self.species.q, self.species.m, self.solver.dt);
        let inv_vol = 1.0 / self.geom.cell_volume();
        let geom_owned = self.geom.clone();
        let decomp_owned = self.decomp.clone();
        let geom = &geom_owned;
        let decomp = &decomp_owned;
        let nt = decomp.n_tiles_per_rank();
        let frames: Vec<Vec<TileFrame>> = (0..nr)
            .map(|r| {
                (0..nt)
                    .map(|t| TileFrame::new(geom, decomp, r, t))
                    .collect()
            })
            .collect();

        // Phase 1: gather, push, classify, write back (and route when fused)
        for (r, rs) in self.ranks.iter_mut().enumerate() {
            let RankState {
                tiles,
                fields,
                packed,
                scratch,
                outboxes,
                send,
                ..
            } = rs;
            let ctx = StepCtx {
                geom,
                fields,
                packed,
                order: self.order,
                push,
                q: self.species.q,
                inv_vol,
                interp: variant.interp,
                deposit: variant.deposit,
                fused: comm.fused(),
                frozen,
            };
            let t0 = Instant::now();
            let results: Vec<Result<TileCounts>> = tiles
                .par_iter_mut()
                .zip(outboxes.par_iter_mut())
                .zip(scratch.par_iter_mut())
                .zip(frames[r].par_iter())
                .map(|(((tile, ob), sc), tf)| phase1(tile, tf, &ctx, ob, sc))
                .collect();
            let wall = t0.elapsed().as_secs_f64();
            let c = first_error(results, step, r, "interpolation")?;
            let mm = &mut m[r];
            if virt {
                let sort_rate = if variant.interp.is_sow() {
                    cost.bin
                } else if variant.interp.is_reorder() {
                    cost.reorder
                } else {
                    cost.index
                };
                mm.t_sort += sort_rate * c.sorted as f64;
                mm.t_prep += cost.prep * c.gathered_batched as f64;
                mm.t_interpolation = cost.interp_fixed
                    + cost.gather_scalar * c.gathered_scalar as f64
                    + cost.gather_batched * c.gathered_batched as f64
                    + (cost.push + cost.write_back) * c.pushed as f64
                    + cost.route * c.routed as f64;
                mm.t_kernel += mm.t_interpolation;
                mm.t_interpolation += mm.t_sort + mm.t_prep;
            } else {
                let sort = c.sort_wall.min(wall);
                mm.t_sort += sort;
                mm.t_kernel += wall - sort;
                mm.t_interpolation = wall;
            }
            self.clocks[r].compute(mm.t_interpolation);
            mm.migrants_local = c.local_movers;
            mm.migrants_remote = c.remote_movers;
            send.clear();
            for t in 0..nt {
                let ob = std::mem::take(&mut outboxes[t]);
                for (dest, rec) in &ob.local {
                    tiles[*dest].inbox.push(*rec);
                }
                send.absorb(&ob);
                outboxes[t] = ob;
            }
        }

        // Issue right after the write-back for the fused variants
        if comm.fused() {
            for r in 0..nr {
                let t0 = Instant::now();
                let now = self.clocks[r].now;
                let issue = with_context(
                    emit_frames(
                        &self.plan,
                        &self.fabric,
                        r,
                        comm,
                        &self.ranks[r].send,
                        epoch,
                        now,
                    ),
                    step,
                    r,
                    None,
                    "emit",
                )?;
                m[r].t_issue += if virt {
                    issue
                } else {
                    t0.elapsed().as_secs_f64()
                };
                self.clocks[r].advance(issue);
            }
        }

        // Phase 2: deposition into per-tile buffers, reduced in tile order
        for (r, rs) in self.ranks.iter_mut().enumerate() {
            let RankState {
                tiles,
                fields,
                packed,
                scratch,
                ..
            } = rs;
            let ctx = StepCtx {
                geom,
                fields,
                packed,
                order: self.order,
                push,
                q: self.species.q,
                inv_vol,
                interp: variant.interp,
                deposit: variant.deposit,
                fused: comm.fused(),
                frozen,
            };
            let t0 = Instant::now();
            let results: Vec<Result<TileCounts>> = tiles
                .par_iter()
                .zip(scratch.par_iter_mut())
                .zip(frames[r].par_iter())
                .map(|((tile, sc), tf)| phase2(tile, tf, &ctx, sc))
                .collect();
            let wall_dep = t0.elapsed().as_secs_f64();
            let c = first_error(results, step, r, "deposition")?;
            let t1 = Instant::now();
            fields.j.zero();
            let mut nodes = 0;
            for (sc, tf) in scratch.iter().zip(&frames[r]) {
                nodes += reduce_tile_j(&sc.j, tf, &mut fields.j);
            }
            let wall_red = t1.elapsed().as_secs_f64();
            let mm = &mut m[r];
            let (sort, kernel, reduce) = if virt {
                (
                    cost.bin * c.deposit_binned as f64,
                    cost.deposit_fixed
                        + cost.deposit_scalar * c.deposited_scalar as f64
                        + cost.deposit_batched * c.deposited_batched as f64,
                    cost.tile_reduce * nodes as f64,
                )
            } else {
                let s = c.sort_wall.min(wall_dep);
                (s, wall_dep - s, wall_red)
            };
            mm.t_sort += sort;
            mm.t_kernel += kernel;
            mm.t_reduce += reduce;
            mm.t_deposit = sort + kernel + reduce;
            self.clocks[r].compute(mm.t_deposit);
            let n = c.pushed.max(c.deposited_batched + c.deposited_scalar);
            mm.flops_interp = FLOPS_INTERP * c.pushed;
            mm.flops_deposit = FLOPS_DEPOSIT * n;
        }

        if comm.fused() && comm.sync == SyncPoint::PostDeposit {
            self.converge_all(&mut m, step, epoch)?;
        }

        self.field_solve(&mut m, step)?;

        if comm.fused() && comm.sync == SyncPoint::PostFieldSolve {
            self.converge_all(&mut m, step, epoch)?;
        }

        if comm.is_bsp() {
            for r in 0..nr {
                let rs = &mut self.ranks[r];
                let t0 = Instant::now();
                let mut scanned = 0;
                let mut leavers = 0;
                rs.send.clear();
                for t in 0..nt {
                    scanned += with_context(
                        scan_and_pack(&rs.tiles[t], &frames[r][t], &mut rs.outboxes[t]),
                        step,
                        r,
                        Some(t),
                        "scan",
                    )?;
                    let ob = std::mem::take(&mut rs.outboxes[t]);
                    leavers += ob.len() as u64;
                    for (dest, rec) in &ob.local {
                        rs.tiles[*dest].inbox.push(*rec);
                    }
                    rs.send.absorb(&ob);
                    rs.outboxes[t] = ob;
                }
                let pack = if virt {
                    cost.scan * scanned as f64 + cost.pack * leavers as f64
                } else {
                    t0.elapsed().as_secs_f64()
                };
                m[r].t_pack += pack;
                self.clocks[r].compute(pack);
                let t1 = Instant::now();
                let now = self.clocks[r].now;
                let issue = with_context(
                    emit_frames(&self.plan, &self.fabric, r, comm, &rs.send, epoch, now),
                    step,
                    r,
                    None,
                    "emit",
                )?;
                m[r].t_issue += if virt {
                    issue
                } else {
                    t1.elapsed().as_secs_f64()
                };
                self.clocks[r].advance(issue);
            }
            self.converge_all(&mut m, step, epoch)?;
        }

        // Merge arrivals, drop leavers, swap buffers
        for (r, rs) in self.ranks.iter_mut().enumerate() {
            let t0 = Instant::now();
            let local: usize = rs
                .tiles
                .iter()
                .map(|t| t.inbox.len() + t.overflow.len())
                .sum();
            let received = std::mem::take(&mut rs.received);
            let n_recv = received.len();
            let merged = with_context(
                unpack_merge(&mut rs.tiles, &frames[r], received, deterministic),
                step,
                r,
                None,
                "unpack",
            )?;
            debug_assert_eq!(merged, local + n_recv);
            let mut truncated = 0;
            for (t, tile) in rs.tiles.iter_mut().enumerate() {
                truncated += if tile.writes_other() {
                    tile.output().tail_len()
                } else {
                    tile.output().len()
                };
                tile.truncate();
                with_context(tile.swap_buffers(), step, r, Some(t), "swap")?;
            }
            let post = if virt {
                cost.unpack * merged as f64 + cost.truncate * truncated as f64
            } else {
                t0.elapsed().as_secs_f64()
            };
            let mm = &mut m[r];
            mm.t_post_process += post;
            self.clocks[r].compute(post);
            mm.t_redistribute = mm.t_pack + mm.t_issue + mm.t_wait + mm.t_post_process;
            mm.n_particles = rs.tiles.iter().map(|t| t.len() as u64).sum();
        }

        self.steps_done += 1;
        Ok(StepMetrics::merge_ranks(&m))
    }

    fn converge_all(&mut self, m: &mut [StepMetrics], step: u64, epoch: u64) -> Result<()> {
        let virt = self.config.virtual_time;
        let comm = self.config.variant.comm;
        for r in 0..self.ranks.len() {
            let t0 = Instant::now();
            let clock = virt.then_some(&mut self.clocks[r]);
            let (waited, recs) = with_context(
                converge(&self.fabric, r, comm, epoch, clock),
                step,
                r,
                None,
                "converge",
            )?;
            m[r].t_wait += if virt {
                waited
            } else {
                t0.elapsed().as_secs_f64()
            };
            self.ranks[r].received = recs;
        }
        Ok(())
    }

    fn field_solve(&mut self, m: &mut [StepMetrics], step: u64) -> Result<()> {
        let virt = self.config.virtual_time;
        let t0 = Instant::now();
        let start: Vec<f64> = self.clocks.iter().map(|c| c.now).collect();
        let cells = self.decomp.box_cells.iter().product::<usize>() as f64;
        let update_cost = self.fabric.cost().field * cells;
        let s = self.solver;
        let rank_of = |e: Error| e.at(step, 0, None, "field");
        {
            let epoch = self.halo_epoch(0);
            let mut js: Vec<&mut VectorField> =
                self.ranks.iter_mut().map(|r| &mut r.fields.j).collect();
            let clocks = virt.then_some(self.clocks.as_mut_slice());
            self.halo
                .exchange(&self.fabric, &mut js, HaloKind::Fold, epoch, clocks)
                .map_err(rank_of)?;
        }
        let stages: [(FieldUpdate, bool); 3] = [
            (advance_b_half, true),
            (advance_e_full, false),
            (advance_b_half, true),
        ];
        for (k, (update, is_b)) in stages.into_iter().enumerate() {
            for (r, rs) in self.ranks.iter_mut().enumerate() {
                update(&mut rs.fields, &s);
                self.clocks[r].compute(update_cost);
            }
            let epoch = self.halo_epoch(1 + k as u64);
            if is_b {
                self.fill_halo(|f| &mut f.b, epoch).map_err(rank_of)?;
            } else {
                self.fill_halo(|f| &mut f.e, epoch).map_err(rank_of)?;
            }
        }
        self.repack();
        let wall = t0.elapsed().as_secs_f64();
        for (r, mm) in m.iter_mut().enumerate() {
            mm.t_field = if virt {
                self.clocks[r].now - start[r]
            } else {
                wall
            };
        }
        Ok(())
    }

    /// Warm-up steps (not recorded), then the measured steps with
    /// conservation diagnostics before the first and after every step.
    pub fn run(&mut self) -> Result<RunReport> {
        for _ in 0..self.config.warmup {
            self.step()?;
        }
        let mut history = vec![self.conserved()];
        let mut metrics = Vec::with_capacity(self.config.steps as usize);
        for _ in 0..self.config.steps {
            metrics.push(self.step()?);
            history.push(self.conserved());
        }
        Ok(RunReport {
            metrics,
            conservation: conservation_report(&history),
            checksum: self.checksum(),
        })
    }

    /// All particles sorted by id.
    pub fn particles(&self) -> Vec<ParticleRecord> {
        let mut out: Vec<ParticleRecord> = self
            .ranks
            .iter()
            .flat_map(|r| r.tiles.iter().flat_map(|t| t.records()))
            .collect();
        out.sort_unstable_by_key(|p| p.id);
        out
    }

    pub fn n_particles(&self) -> usize {
        self.ranks
            .iter()
            .flat_map(|r| &r.tiles)
            .map(|t| t.len())
            .sum()
    }

    /// Global E, B and J assembled from the rank interiors; E and B guards
    /// refilled periodically, J guards zero.
    pub fn global_fields(&self) -> FieldSet {
        let mut g = FieldSet::new(self.geom.n_cell, self.geom.guard);
        for (r, rs) in self.ranks.iter().enumerate() {
            let o = self.decomp.frame(r).origin.map(|v| v as i64);
            copy_box_into(&rs.fields.e, &mut g.e, o);
            copy_box_into(&rs.fields.b, &mut g.b, o);
            copy_box_into(&rs.fields.j, &mut g.j, o);
        }
        local_halo(&mut g.e, HaloKind::Fill);
        local_halo(&mut g.b, HaloKind::Fill);
        g
    }

    pub fn conserved(&self) -> ConservedQuantities {
        ConservedQuantities::measure(
            self.steps_done,
            &self.particles(),
            &self.global_fields(),
            self.species,
            self.geom.cell_volume(),
        )
    }

    /// Hash of every particle (by id) and every interior field value.
    pub fn checksum(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for p in self.particles() {
            p.pack().hash(&mut h);
        }
        let f = self.global_fields();
        for v in [&f.e, &f.b, &f.j] {
            for c in &v.comp {
                for x in c {
                    x.to_bits().hash(&mut h);
                }
            }
        }
        h.finish()
    }

    /// Tail length of every tile, rank-major.
    pub fn tail_lengths(&self) -> Vec<usize> {
        self.ranks
            .iter()
            .flat_map(|r| r.tiles.iter().map(|t| t.current().tail_len()))
            .collect()
    }

    /// Flat global cell of every particle, indexed by id; `u32::MAX` for
    /// ids not present.
    pub fn cell_map(&self) -> Result<Vec<u32>> {
        let mut map = Vec::new();
        for rs in &self.ranks {
            for tile in &rs.tiles {
                let b = tile.current();
                for s in b.occupied() {
                    let id = b.soa.id[s] as usize;
                    if id >= map.len() {
                        map.resize(id + 1, u32::MAX);
                    }
                    let (g, _) = self.geom.locate(b.soa.pos(s), b.soa.id[s])?;
                    map[id] = self.geom.flat_cell(g) as u32;
                }
            }
        }
        Ok(map)
    }

    /// Layout and ownership contract of every tile.
    pub fn check_layout(&self) -> Result<()> {
        for (r, rs) in self.ranks.iter().enumerate() {
            for (t, tile) in rs.tiles.iter().enumerate() {
                let tf = TileFrame::new(&self.geom, &self.decomp, r, t);
                with_context(
                    tile.check_invariants(&tf),
                    self.steps_done,
                    r,
                    Some(t),
                    "invariants",
                )?;
            }
        }
        Ok(())
    }

    /// Every id in `0..n_ids` present exactly once.
    pub fn check_id_set(&self, n_ids: u64) -> Result<()> {
        let mut seen = vec![false; n_ids as usize];
        let mut count = 0u64;
        for rs in &self.ranks {
            for tile in &rs.tiles {
                let b = tile.current();
                for s in b.occupied() {
                    let id = b.soa.id[s];
                    let slot = seen
                        .get_mut(id as usize)
                        .ok_or_else(|| Error::Comparison(format!("unknown particle id {id}")))?;
                    if *slot {
                        return Err(Error::Comparison(format!("particle id {id} duplicated")));
                    }
                    *slot = true;
                    count += 1;
                }
            }
        }
        if count != n_ids {
            return Err(Error::Comparison(format!(
                "{count} of {n_ids} particles present"
            )));
        }
        Ok(())
    }

    /// Sort-on-write layouts only: tails hold exactly the particles whose
    /// cell changed since `before` (a [`Self::cell_map`]); ordered regions
    /// hold exactly those that stayed.
    pub fn check_tail_movers(&self, before: &[u32]) -> Result<()> {
        if !self.config.variant.interp.is_sow() {
            return Ok(());
        }
        for rs in &self.ranks {
            for tile in &rs.tiles {
                let b = tile.current();
                for s in b.occupied() {
                    let id = b.soa.id[s];
                    let old = before
                        .get(id as usize)
                        .copied()
                        .filter(|c| *c != u32::MAX)
                        .ok_or_else(|| {
                            Error::Comparison(format!("particle {id} missing from snapshot"))
                        })?;
                    let (now, _) = self.geom.locate(b.soa.pos(s), id)?;
                    let moved = self.geom.flat_cell(now) as u32 != old;
                    let in_tail = s >= b.ptr_dis;
                    if moved != in_tail {
                        return Err(Error::Layout(format!(
                            "particle {id}: moved = {moved} but in tail = {in_tail}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// No particle waiting in an inbox or spill list.
    pub fn idle(&self) -> bool {
        self.ranks
            .iter()
            .flat_map(|r| &r.tiles)
            .all(|t| t.inbox.is_empty() && t.overflow.is_empty())
    }

    pub fn interp_supply(&self) -> InterpSupply {
        self.config.variant.interp
    }
}

/// Copies the box of `dst`'s interior size starting at global node `o`
/// from a global field (interior only).
fn copy_box(from: &VectorField, dst: &mut VectorField, o: [i64; 3]) {
    let n = dst.n.map(|v| v as i64);
    for c in 0..3 {
        for k in 0..n[2] {
            for j in 0..n[1] {
                let s = from.idx(o[0], o[1] + j, o[2] + k);
                let d = dst.idx(0, j, k);
                let w = n[0] as usize;
                dst.comp[c][d..d + w].copy_from_slice(&from.comp[c][s..s + w]);
            }
        }
    }
}

/// Inverse of [`copy_box`]: writes a rank interior into a global field.
fn copy_box_into(src: &VectorField, global: &mut VectorField, o: [i64; 3]) {
    let n = src.n.map(|v| v as i64);
    for c in 0..3 {
        for k in 0..n[2] {
            for j in 0..n[1] {
                let s = src.idx(0, j, k);
                let d = global.idx(o[0], o[1] + j, o[2] + k);
                let w = n[0] as usize;
                global.comp[c][d..d + w].copy_from_slice(&src.comp[c][s..s + w]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{DepositMode, VariantMatrix};
    use crate::redistribute::CommVariant;

    fn small(ranks: [usize; 3], variant: VariantMatrix) -> SimulationConfig {
        SimulationConfig {
            n_cell: [16; 3],
            ppc: 2,
            u_th: 0.05,
            steps: 6,
            warmup: 0,
            ranks,
            variant,
            ..Default::default()
        }
    }

    #[test]
    fn step_keeps_layout_and_ids() {
        let mut sim = Simulation::new(small([2, 2, 2], VariantMatrix::default())).unwrap();
        let n = sim.n_particles() as u64;
        for _ in 0..6 {
            let before = sim.cell_map().unwrap();
            let m = sim.step().unwrap();
            assert_eq!(m.n_particles, n);
            sim.check_layout().unwrap();
            sim.check_id_set(n).unwrap();
            sim.check_tail_movers(&before).unwrap();
        }
        assert!(sim.idle());
    }

    #[test]
    fn decomposition_does_not_change_result() {
        let v = VariantMatrix::new(
            InterpSupply::SowBatched,
            DepositMode::BatchedSowTailScalar,
            CommVariant::C0,
        );
        let mut a = Simulation::new(small([1, 1, 1], v)).unwrap();
        let mut b = Simulation::new(small([2, 2, 2], v)).unwrap();
        a.run().unwrap();
        b.run().unwrap();
        let (pa, pb) = (a.particles(), b.particles());
        assert_eq!(pa.len(), pb.len());
        let mut worst: f64 = 0.0;
        for (x, y) in pa.iter().zip(&pb) {
            for k in 0..3 {
                worst = worst.max((x.u[k] - y.u[k]).abs() / (x.u[k].abs() + 1e-30).max(1e-12));
            }
        }
        assert!(worst < 1e-10, "relative momentum difference {worst}");
    }

    #[test]
    fn comm_variants_bitwise() {
        let sums: Vec<u64> = CommVariant::ALL
            .into_iter()
            .map(|c| {
                let v = VariantMatrix {
                    comm: c,
                    ..Default::default()
                };
                let mut s = Simulation::new(small([2, 2, 2], v)).unwrap();
                s.run().unwrap().checksum
            })
            .collect();
        assert!(sums.windows(2).all(|w| w[0] == w[1]), "{sums:?}");
    }

    fn oracle_match(variant: VariantMatrix, ranks: [usize; 3], steps: usize) -> f64 {
        let cfg = SimulationConfig {
            n_cell: [16, 8, 8],
            ppc: 1,
            u_th: 0.05,
            ranks,
            variant,
            ..Default::default()
        };
        let geom = cfg.build_geometry().unwrap();
        let ps = init_workload(&cfg, &geom);
        let mut sim = Simulation::from_state(cfg.clone(), ps.clone(), None).unwrap();
        let mut o = crate::oracle::OracleState::new(&cfg, ps, None).unwrap();
        for _ in 0..steps {
            sim.step().unwrap();
            o.step().unwrap();
        }
        let r =
            crate::oracle::compare_states(&geom, &sim.particles(), &sim.global_fields(), &o, 1e-12)
                .unwrap();
        r.max_error()
    }

    #[test]
    fn matches_oracle() {
        let scalar = VariantMatrix::new(
            InterpSupply::UnsortedScalar,
            DepositMode::ScalarAtomic,
            CommVariant::C0,
        );
        let e = oracle_match(scalar, [1, 1, 1], 10);
        assert!(e <= 1e-12, "{e}");
        let e = oracle_match(VariantMatrix::default(), [2, 1, 1], 10);
        assert!(e <= 1e-12, "{e}");
    }
}
