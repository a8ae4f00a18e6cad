//! Every interpolation and deposit mode under one-sided redistribution,
//! timed on the virtual clock, written as CSV to stdout.

use tilepic::domain::SimulationConfig;
use tilepic::harness::{ablate, variant_product, write_ablation_csv};
use tilepic::pipeline::{DepositMode, InterpSupply};
use tilepic::redistribute::CommVariant;

fn main() -> tilepic::Result<()> {
    let base = SimulationConfig {
        n_cell: [16; 3],
        ppc: 8,
        u_th: 0.05,
        steps: 6,
        warmup: 2,
        virtual_time: true,
        ..Default::default()
    };
    let variants = variant_product(&InterpSupply::ALL, &DepositMode::ALL, &[CommVariant::C2]);
    let rows = ablate(&base, &variants)?;
    write_ablation_csv(std::io::stdout().lock(), &rows)
}
