//! The on-disk container.
//!
//! ```text
//! ["SPQF"] [row group 0] [row group 1] ... [footer] [footer length: u32] ["SPQF"]
//! row group := ["SPRG"] [meta length: u32] [row group meta] [page bytes ...]
//! ```
//!
//! A row group holds one chunk per column (TYPE, LEVELS, X, Y and optionally
//! ID). TYPE is a single run-length encoded page. The other chunks are split
//! into aligned page slots: slot `i` of LEVELS, X, Y and ID covers the same
//! whole records, so a slot's x/y statistics bound every record in it.
//!
//! See `FORMAT.md` at the repository root for the byte-level layout.

mod inspect;
mod levels;
mod meta;
mod prune;
mod reader;
mod rle;
mod stats;
mod writer;

use std::fmt;
use std::str::FromStr;

pub use inspect::{inspect, ChunkReport, ColumnTotal, HistogramReport, InspectReport, PageReport, RowGroupReport};
pub use levels::{pack_levels, unpack_levels, LevelEntry};
pub use meta::{ChunkMeta, Footer, PageMeta, RowGroupMeta};
pub use prune::{prune_pages, PrunePlan, RowGroupSelection};
pub use reader::{FileReader, QueryResult, Record, Records, Source};
pub use rle::{rle_decode_types, rle_encode_types, TypeRun};
pub use stats::PageStats;
pub use writer::{encode_row_group, recover, write_file, FileWriter, InvalidPolicy, WriteSummary};

use crate::error::Error;
use crate::sfc::{Curve, DEFAULT_BATCH_SIZE};

pub const MAGIC: &[u8; 4] = b"SPQF";
pub const ROW_GROUP_MAGIC: &[u8; 4] = b"SPRG";
pub const VERSION: u16 = 1;
pub const DEFAULT_PAGE_SIZE: usize = 1 << 20;
pub const DEFAULT_ROW_GROUP_BYTES: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum ColumnId {
    Type = 0,
    Levels = 1,
    X = 2,
    Y = 3,
    Id = 4,
}

impl ColumnId {
    pub fn from_u8(v: u8) -> crate::Result<Self> {
        Ok(match v {
            0 => ColumnId::Type,
            1 => ColumnId::Levels,
            2 => ColumnId::X,
            3 => ColumnId::Y,
            4 => ColumnId::Id,
            other => return Err(Error::format(format!("unknown column id {other}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ColumnId::Type => "type",
            ColumnId::Levels => "levels",
            ColumnId::X => "x",
            ColumnId::Y => "y",
            ColumnId::Id => "id",
        }
    }
}

impl fmt::Display for ColumnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// First byte of every non-empty page payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Encoding {
    Raw = 0,
    FpDelta = 1,
    Rle = 2,
    PackedLevels = 3,
    Plain = 4,
    /// Zero-value coordinate page, no payload.
    Empty = 255,
}

impl Encoding {
    pub fn from_u8(v: u8) -> crate::Result<Self> {
        Ok(match v {
            0 => Encoding::Raw,
            1 => Encoding::FpDelta,
            2 => Encoding::Rle,
            3 => Encoding::PackedLevels,
            4 => Encoding::Plain,
            255 => Encoding::Empty,
            other => return Err(Error::format(format!("unknown page encoding {other}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Encoding::Raw => "raw",
            Encoding::FpDelta => "fp-delta",
            Encoding::Rle => "rle",
            Encoding::PackedLevels => "packed-levels",
            Encoding::Plain => "plain",
            Encoding::Empty => "empty",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
#[repr(u8)]
pub enum Compression {
    #[default]
    None = 0,
    Deflate = 1,
}

impl Compression {
    pub fn from_u8(v: u8) -> crate::Result<Self> {
        match v {
            0 => Ok(Compression::None),
            1 => Ok(Compression::Deflate),
            other => Err(Error::format(format!("unknown compression flag {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Compression::None => "none",
            Compression::Deflate => "deflate",
        }
    }
}

impl FromStr for Compression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Compression::None),
            "deflate" | "gzip" => Ok(Compression::Deflate),
            other => Err(Error::InvalidArgument(format!("unknown compression '{other}' (expected none or deflate)"))),
        }
    }
}

/// How coordinate pages are encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum CoordinateEncoding {
    /// FP-delta, falling back to raw when it does not save space.
    #[default]
    Auto,
    Raw,
}

#[derive(Debug, Clone)]
pub struct WriteOptions {
    /// Uncompressed target size of one coordinate page in bytes.
    pub page_size: usize,
    pub compression: Compression,
    pub sort: Curve,
    /// Records per sort batch and upper bound on records per row group.
    pub batch_size: usize,
    /// Upper bound on raw coordinate bytes per row group.
    pub row_group_bytes: usize,
    pub coordinates: CoordinateEncoding,
    /// Store a 64-bit sequence-number column.
    pub with_ids: bool,
    pub on_invalid: InvalidPolicy,
}

impl Default for WriteOptions {
    fn default() -> Self {
        WriteOptions {
            page_size: DEFAULT_PAGE_SIZE,
            compression: Compression::None,
            sort: Curve::None,
            batch_size: DEFAULT_BATCH_SIZE,
            row_group_bytes: DEFAULT_ROW_GROUP_BYTES,
            coordinates: CoordinateEncoding::Auto,
            with_ids: false,
            on_invalid: InvalidPolicy::Abort,
        }
    }
}

impl WriteOptions {
    pub(crate) fn values_per_page(&self) -> usize {
        (self.page_size.saturating_sub(1) / 8).max(1)
    }

    pub(crate) fn describe(&self) -> String {
        format!(
            "geocolumn {}; page_size={}; compression={}; sort={}; batch_size={}; coordinates={}",
            env!("CARGO_PKG_VERSION"),
            self.page_size,
            self.compression.name(),
            self.sort.name(),
            self.batch_size,
            match self.coordinates {
                CoordinateEncoding::Auto => "auto",
                CoordinateEncoding::Raw => "raw",
            }
        )
    }
}
