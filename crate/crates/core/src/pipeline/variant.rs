use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::redistribute::CommVariant;

/// How Phase 1 walks particles and which gather kernel it calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterpSupply {
    /// G0: slot order, scalar gather.
    UnsortedScalar,
    /// G2: per-cell index permutation, scalar gather.
    IndexSortedScalar,
    /// G3: physical reorder copy every step, scalar gather.
    ExplicitReorderScalar,
    /// G4: dual-region sort-on-write layout, scalar gather.
    SowScalar,
    /// G5: per-cell index permutation, outer-product gather.
    IndexSortedBatched,
    /// G6: physical reorder copy every step, outer-product gather.
    ExplicitReorderBatched,
    /// G7: dual-region sort-on-write layout, outer-product gather.
    SowBatched,
}

impl InterpSupply {
    pub const ALL: [Self; 7] = [
        Self::UnsortedScalar,
        Self::IndexSortedScalar,
        Self::ExplicitReorderScalar,
        Self::SowScalar,
        Self::IndexSortedBatched,
        Self::ExplicitReorderBatched,
        Self::SowBatched,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Self::UnsortedScalar => "G0",
            Self::IndexSortedScalar => "G2",
            Self::ExplicitReorderScalar => "G3",
            Self::SowScalar => "G4",
            Self::IndexSortedBatched => "G5",
            Self::ExplicitReorderBatched => "G6",
            Self::SowBatched => "G7",
        }
    }

    pub fn is_sow(self) -> bool {
        matches!(self, Self::SowScalar | Self::SowBatched)
    }

    pub fn is_batched(self) -> bool {
        matches!(
            self,
            Self::IndexSortedBatched | Self::ExplicitReorderBatched | Self::SowBatched
        )
    }

    pub fn is_index_sorted(self) -> bool {
        matches!(self, Self::IndexSortedScalar | Self::IndexSortedBatched)
    }

    pub fn is_reorder(self) -> bool {
        matches!(
            self,
            Self::ExplicitReorderScalar | Self::ExplicitReorderBatched
        )
    }
}

/// How Phase 2 deposits current.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DepositMode {
    /// D0: scalar deposit in slot order.
    ScalarAtomic,
    /// D1: cell index over every particle, outer-product deposit.
    BatchedIndex,
    /// D2: ordered segments plus a binned tail, all outer-product.
    BatchedSowTailBin,
    /// D3: ordered segments outer-product, tail scalar.
    BatchedSowTailScalar,
}

impl DepositMode {
    pub const ALL: [Self; 4] = [
        Self::ScalarAtomic,
        Self::BatchedIndex,
        Self::BatchedSowTailBin,
        Self::BatchedSowTailScalar,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Self::ScalarAtomic => "D0",
            Self::BatchedIndex => "D1",
            Self::BatchedSowTailBin => "D2",
            Self::BatchedSowTailScalar => "D3",
        }
    }
}

impl FromStr for InterpSupply {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|g| g.code() == s)
            .ok_or_else(|| Error::config(None, format!("unknown interpolation mode '{s}'")))
    }
}

impl FromStr for DepositMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|d| d.code() == s)
            .ok_or_else(|| Error::config(None, format!("unknown deposit mode '{s}'")))
    }
}

/// One point of the ablation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VariantMatrix {
    pub interp: InterpSupply,
    pub deposit: DepositMode,
    pub comm: CommVariant,
}

impl Default for VariantMatrix {
    fn default() -> Self {
        Self {
            interp: InterpSupply::SowBatched,
            deposit: DepositMode::BatchedSowTailScalar,
            comm: CommVariant::C2,
        }
    }
}

impl VariantMatrix {
    pub fn new(interp: InterpSupply, deposit: DepositMode, comm: CommVariant) -> Self {
        Self {
            interp,
            deposit,
            comm,
        }
    }

    /// Every combination is executable: deposit modes that expect a
    /// physically ordered region fall back to their unordered path when the
    /// supply provides none.
    pub fn validate(&self) -> Result<()> {
        Ok(())
    }

    /// Whether the deposit runs exactly as named, rather than via fallback.
    pub fn is_native_pairing(&self) -> bool {
        match self.deposit {
            DepositMode::ScalarAtomic => true,
            DepositMode::BatchedIndex => self.interp.is_index_sorted(),
            DepositMode::BatchedSowTailBin | DepositMode::BatchedSowTailScalar => {
                self.interp.is_sow()
            }
        }
    }
}

impl Display for VariantMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{},{},{}",
            self.interp.code(),
            self.deposit.code(),
            self.comm.code()
        )
    }
}

impl FromStr for VariantMatrix {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::config(
                None,
                format!("variant '{s}' must be G?,D?,C?"),
            ));
        }
        Ok(Self::new(
            parts[0].parse()?,
            parts[1].parse()?,
            parts[2].parse()?,
        ))
    }
}
