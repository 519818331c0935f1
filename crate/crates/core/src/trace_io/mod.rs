//! Instruction traces: the on-disk formats, windowed streaming, and a
//! synthetic loop-nest generator for fixtures.
//!
//! Two v1 formats exist:
//!
//! * **binary** (little-endian): a 16-byte header (magic `RAINTRC1`,
//!   `u32` version `1`, `u32` reserved `0`) followed by fixed 16-byte
//!   records of `u64 address`, `u32 size`, `u32 flags`. `flags` is reserved
//!   and must be zero.
//! * **text**: one instruction per line, `<hex-address> <decimal-size>`.
//!   Lines starting with `#` and blank lines are ignored. A `0x` prefix on
//!   the address is accepted.
//!
//! Only addresses and sizes are kept. Control-flow discontinuities are
//! inferred from them (`next.address != cur.address + cur.size`).

mod format;
mod synth;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{
    load_trace, open_trace, write_trace, BinaryTraceWriter, TraceReader, TraceStream,
    BINARY_HEADER_LEN, BINARY_MAGIC, BINARY_RECORD_LEN, BINARY_VERSION,
};
pub use synth::{AlternatePath, LoopSpec, NestedLoop, PlacedLoop, ProgramSpec, SpecError};

/// One executed guest instruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceItem {
    pub address: u64,
    pub size: u32,
}

impl TraceItem {
    pub const fn new(address: u64, size: u32) -> Self {
        Self { address, size }
    }

    /// Address of the instruction that would follow on sequential flow.
    #[inline]
    pub fn fall_through(&self) -> u64 {
        self.address.wrapping_add(self.size as u64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Binary,
    Text,
}

impl FromStr for TraceFormat {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" | "bin" => Ok(Self::Binary),
            "text" | "txt" => Ok(Self::Text),
            other => Err(TraceError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for TraceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Binary => "binary",
            Self::Text => "text",
        })
    }
}

/// Skip/limit window applied before any consumer sees an item.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub skip: u64,
    /// `None` means unbounded.
    pub limit: Option<u64>,
}

impl Window {
    pub const ALL: Window = Window { skip: 0, limit: None };

    pub fn new(skip: u64, limit: Option<u64>) -> Self {
        Self { skip, limit }
    }

    /// Number of items a window yields over a trace of `total` items.
    pub fn yielded(&self, total: u64) -> u64 {
        let rest = total.saturating_sub(self.skip);
        self.limit.map_or(rest, |l| l.min(rest))
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown trace format `{0}` (expected `binary` or `text`)")]
    UnknownFormat(String),
    #[error("bad trace header: {0}")]
    Header(String),
    #[error("truncated record at byte offset {offset}")]
    Truncated { offset: u64 },
    #[error("record at byte offset {offset}: nonzero flags {flags:#x}")]
    NonzeroFlags { offset: u64, flags: u32 },
    #[error("record at byte offset {offset}: instruction size must be >= 1")]
    ZeroSizeRecord { offset: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
