//! Step timings and throughput formulas, conservation diagnostics, CSV
//! output and the workload generators.

mod conservation;
mod step;
mod workload;

pub use conservation::{
    conservation_report, phase_space_error, ConservationReport, ConservedQuantities,
};
pub use step::{
    fom_node, overlap_ratio, peak_efficiency, pps_cpp, read_csv, write_csv, StepMetrics,
    FLOPS_DEPOSIT, FLOPS_INTERP,
};
pub use workload::{init_migration_slab, init_uniform_plasma, init_workload};
