//! 32^3 uniform plasma, 100 steps: conservation diagnostics and throughput.

use tilepic::domain::SimulationConfig;
use tilepic::pipeline::Simulation;

fn main() -> tilepic::Result<()> {
    let cfg = SimulationConfig {
        n_cell: [32; 3],
        ppc: 8,
        u_th: 0.01,
        steps: 100,
        warmup: 0,
        virtual_time: false,
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    let mut sim = Simulation::new(cfg)?;
    let report = sim.run()?;
    let wall = t0.elapsed().as_secs_f64();
    println!("{}", report.conservation.to_text());
    let n = sim.n_particles() as f64;
    println!(
        "{} particles, {} steps in {wall:.2} s ({:.3e} particle-steps/s)",
        n,
        report.metrics.len(),
        n * report.metrics.len() as f64 / wall
    );
    Ok(())
}
