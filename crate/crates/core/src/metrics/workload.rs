use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domain::{GridGeometry, ParticleRecord, SimulationConfig, Workload};

/// Random stream for one global cell: the same cell draws the same
/// particles whatever the rank decomposition.
fn cell_rng(seed: u64, flat_cell: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(flat_cell as u64);
    rng
}

fn fill_cell(
    cfg: &SimulationConfig,
    geom: &GridGeometry,
    ijk: [usize; 3],
    w: f64,
    out: &mut Vec<ParticleRecord>,
) {
    let flat = geom.flat_cell(ijk);
    let mut rng = cell_rng(cfg.seed, flat);
    for k in 0..cfg.ppc {
        let mut pos = [0.0; 3];
        let mut u = [0.0; 3];
        for a in 0..3 {
            let s: f64 = rng.random();
            pos[a] = geom.prob_lo[a] + (ijk[a] as f64 + s) * geom.dx[a];
        }
        for a in 0..3 {
            let n: f64 = rng.sample(StandardNormal);
            u[a] = cfg.u_th * n + cfg.drift[a];
        }
        out.push(ParticleRecord {
            id: (flat * cfg.ppc + k) as u64,
            pos: geom.wrap_position(pos),
            u,
            w,
        });
    }
}

fn generate(
    cfg: &SimulationConfig,
    geom: &GridGeometry,
    keep: impl Fn([usize; 3]) -> bool,
) -> Vec<ParticleRecord> {
    let w = if cfg.ppc == 0 {
        0.0
    } else {
        cfg.density * geom.cell_volume() / cfg.ppc as f64
    };
    let n = geom.n_cell;
    let mut out = Vec::new();
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                if keep([i, j, k]) {
                    fill_cell(cfg, geom, [i, j, k], w, &mut out);
                }
            }
        }
    }
    out
}

/// `ppc` particles in every cell at uniformly jittered positions, momenta
/// Gaussian with standard deviation `u_th` per component plus `drift`.
pub fn init_uniform_plasma(cfg: &SimulationConfig, geom: &GridGeometry) -> Vec<ParticleRecord> {
    generate(cfg, geom, |_| true)
}

/// Particles only in the central third of x, drifting with `drift`, so a
/// decomposition boundary inside the slab sees heavy migration.
pub fn init_migration_slab(cfg: &SimulationConfig, geom: &GridGeometry) -> Vec<ParticleRecord> {
    let n = geom.n_cell[0];
    let (lo, hi) = (n / 3, n - n / 3);
    generate(cfg, geom, |c| c[0] >= lo && c[0] < hi)
}

pub fn init_workload(cfg: &SimulationConfig, geom: &GridGeometry) -> Vec<ParticleRecord> {
    match cfg.workload {
        Workload::Uniform => init_uniform_plasma(cfg, geom),
        Workload::Slab => init_migration_slab(cfg, geom),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_counts_and_ids() {
        let cfg = SimulationConfig::default();
        let geom = cfg.build_geometry().unwrap();
        let ps = init_uniform_plasma(&cfg, &geom);
        assert_eq!(ps.len(), 262_144);
        assert!(ps.iter().enumerate().all(|(i, p)| p.id == i as u64));
        for p in ps.iter().step_by(997) {
            let c = geom.cell_of(p.pos, p.id).unwrap();
            assert_eq!(geom.flat_cell(c.ijk), p.id as usize / cfg.ppc);
        }
    }

    #[test]
    fn cold_single_particle_per_cell() {
        let cfg = SimulationConfig {
            ppc: 1,
            u_th: 0.0,
            n_cell: [8; 3],
            ..Default::default()
        };
        let geom = cfg.build_geometry().unwrap();
        let ps = init_uniform_plasma(&cfg, &geom);
        assert_eq!(ps.len(), 512);
        assert!(ps.iter().all(|p| p.u == [0.0; 3]));
    }

    #[test]
    fn same_seed_same_particles() {
        let cfg = SimulationConfig {
            n_cell: [8; 3],
            ..Default::default()
        };
        let geom = cfg.build_geometry().unwrap();
        assert_eq!(
            init_uniform_plasma(&cfg, &geom),
            init_uniform_plasma(&cfg, &geom)
        );
        let other = SimulationConfig {
            seed: 2,
            ..cfg.clone()
        };
        assert_ne!(
            init_uniform_plasma(&cfg, &geom),
            init_uniform_plasma(&other, &geom)
        );
    }

    #[test]
    fn slab_fills_central_third() {
        let cfg = SimulationConfig {
            workload: Workload::Slab,
            drift: [0.2, 0.0, 0.0],
            ..Default::default()
        };
        let geom = cfg.build_geometry().unwrap();
        let ps = init_migration_slab(&cfg, &geom);
        assert_eq!(ps.len(), 12 * 32 * 32 * 8);
        for p in &ps {
            let c = geom.cell_of(p.pos, p.id).unwrap().ijk[0];
            assert!((10..22).contains(&c));
        }
    }
}
