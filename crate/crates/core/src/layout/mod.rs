//! Per-tile particle storage: the double-buffered ordered/disordered layout,
//! counting-sort bin indices and migration classification.

mod bins;
mod classify;
mod soa;
mod tile;

pub use bins::BinIndex;
pub use classify::{classify, ClassMasks, MoveClass, TileFrame};
pub use soa::ParticleSoa;
pub use tile::{init_tile, Buffer, ParticleTile, Segment};
