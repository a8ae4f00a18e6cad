//! The tiled multi-rank pipeline stepped next to the brute-force reference.

use tilepic::domain::SimulationConfig;
use tilepic::harness::oracle_comparison;

fn main() -> tilepic::Result<()> {
    let cfg = SimulationConfig {
        n_cell: [16, 16, 8],
        ppc: 2,
        u_th: 0.05,
        ranks: [2, 2, 1],
        ..Default::default()
    };
    for steps in [1, 5, 20] {
        println!(
            "{} after {steps:>2} steps: {}",
            cfg.variant,
            oracle_comparison(&cfg, steps, 1e-12)?
        );
    }
    Ok(())
}
