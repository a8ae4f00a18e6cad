//! Geometry, fields, particle records, decomposition and configuration.

mod config;
mod decomp;
mod fields;
mod geometry;
mod particle;

pub use config::{SimulationConfig, Workload};
pub use decomp::{direction_index, opposite, BoxFrame, Decomposition, DIRECTIONS};
pub use fields::{allocate_fields, FieldSet, PackedEB, VectorField};
pub use geometry::{CellId, GridGeometry, DEFAULT_TILE};
pub use particle::{gamma, ParticleRecord, Species, RECORD_BYTES};

/// SI constants (CODATA 2018).
pub mod consts {
    pub const C: f64 = 299_792_458.0;
    pub const EPS0: f64 = 8.854_187_812_8e-12;
    pub const MU0: f64 = 1.0 / (EPS0 * C * C);
    pub const Q_E: f64 = 1.602_176_634e-19;
    pub const M_E: f64 = 9.109_383_701_5e-31;
}
