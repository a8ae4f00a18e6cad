mod phases;
mod sim;
mod variant;

pub use phases::{explicit_reorder, index_sort_supply};
pub use sim::{RankState, RunReport, Simulation};
pub use variant::{DepositMode, InterpSupply, VariantMatrix};
