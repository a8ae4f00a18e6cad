//! Migrant frames, routing of leaving particles, and the five scheduling
//! variants for issuing and awaiting the exchange.

mod comm;
mod exchange;
mod frame;

pub use comm::{CommMode, CommVariant, SyncPoint};
pub use exchange::{
    converge, emit_frames, route_migrant, unpack_merge, ParticlePlan, SendLists, TileOutbox,
};
pub use frame::{decode_frames, encode_records, encode_with_spill, MigrantFrame};
