//! Virtual-time comparison of blocking redistribution against one-sided puts
//! issued before deposition: exposed issue and wait time per step.

use tilepic::domain::{SimulationConfig, Workload};
use tilepic::fabric::CostModel;
use tilepic::metrics::overlap_ratio;
use tilepic::pipeline::{Simulation, VariantMatrix};
use tilepic::redistribute::CommVariant;

fn exposure(comm: CommVariant, latency: f64) -> tilepic::Result<Vec<(f64, f64)>> {
    let cost = CostModel {
        latency_base: latency,
        ..Default::default()
    };
    let cfg = SimulationConfig {
        n_cell: [16; 3],
        workload: Workload::Slab,
        ppc: 4,
        u_th: 0.05,
        drift: [0.05, 0.0, 0.0],
        ranks: [2, 2, 2],
        virtual_time: true,
        variant: VariantMatrix {
            comm,
            ..Default::default()
        },
        cost,
        ..Default::default()
    };
    let mut sim = Simulation::new(cfg)?;
    (0..5)
        .map(|_| sim.step().map(|m| (m.t_issue, m.t_wait)))
        .collect()
}

fn main() -> tilepic::Result<()> {
    for latency in [2e-6, 2e-5, 2e-4] {
        println!("transfer latency {latency:.0e} s");
        let base = exposure(CommVariant::C0, latency)?;
        for comm in [
            CommVariant::C1,
            CommVariant::C2,
            CommVariant::C3,
            CommVariant::C4,
        ] {
            let over = exposure(comm, latency)?;
            let (b, o) = (base.last().unwrap(), over.last().unwrap());
            println!(
                "  {comm}: issue {:.3e} s  wait {:.3e} s  (C0: {:.3e} / {:.3e})  eta {:.3}",
                o.0,
                o.1,
                b.0,
                b.1,
                overlap_ratio(*b, *o)?
            );
        }
    }
    Ok(())
}
