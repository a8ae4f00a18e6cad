use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CommMode {
    /// Blocking scan, pack, send and wait at the end of the step.
    Bsp,
    /// FIFO channels whose transfers progress only with the receiver.
    TwoSided,
    /// Notified puts into pre-registered regions.
    OneSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyncPoint {
    PostDeposit,
    PostFieldSolve,
}

/// Transport and wait placement of particle redistribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CommVariant {
    pub mode: CommMode,
    pub sync: SyncPoint,
}

impl CommVariant {
    pub const C0: Self = Self {
        mode: CommMode::Bsp,
        sync: SyncPoint::PostFieldSolve,
    };
    pub const C1: Self = Self {
        mode: CommMode::TwoSided,
        sync: SyncPoint::PostDeposit,
    };
    pub const C2: Self = Self {
        mode: CommMode::OneSided,
        sync: SyncPoint::PostDeposit,
    };
    pub const C3: Self = Self {
        mode: CommMode::TwoSided,
        sync: SyncPoint::PostFieldSolve,
    };
    pub const C4: Self = Self {
        mode: CommMode::OneSided,
        sync: SyncPoint::PostFieldSolve,
    };
    pub const ALL: [Self; 5] = [Self::C0, Self::C1, Self::C2, Self::C3, Self::C4];

    pub fn code(self) -> &'static str {
        match (self.mode, self.sync) {
            (CommMode::Bsp, _) => "C0",
            (CommMode::TwoSided, SyncPoint::PostDeposit) => "C1",
            (CommMode::OneSided, SyncPoint::PostDeposit) => "C2",
            (CommMode::TwoSided, SyncPoint::PostFieldSolve) => "C3",
            (CommMode::OneSided, SyncPoint::PostFieldSolve) => "C4",
        }
    }

    pub fn is_bsp(self) -> bool {
        self.mode == CommMode::Bsp
    }

    /// Packing happens inside the write-back instead of a separate scan.
    pub fn fused(self) -> bool {
        !self.is_bsp()
    }
}

impl Display for CommVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for CommVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|c| c.code() == s)
            .ok_or_else(|| Error::config(None, format!("unknown comm mode '{s}'")))
    }
}
