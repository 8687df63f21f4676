//! Packing of (repetition, definition) level pairs, 2 + 2 bits per entry.

use super::Encoding;
use crate::codec::{BitReader, BitWriter};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelEntry {
    pub rep: u8,
    pub def: u8,
}

/// `[flag][entries: rep (2 bits) then def (2 bits), LSB-first]`
pub fn pack_levels(entries: &[LevelEntry]) -> Vec<u8> {
    let mut w = BitWriter::with_capacity(1 + entries.len().div_ceil(2));
    w.write(Encoding::PackedLevels as u64, 8);
    for e in entries {
        debug_assert!(e.rep < 4 && e.def < 4);
        w.write(e.rep as u64, 2);
        w.write(e.def as u64, 2);
    }
    w.finish()
}

pub fn unpack_levels(bytes: &[u8], count: usize) -> Result<Vec<LevelEntry>> {
    let (&flag, rest) = bytes.split_first().ok_or_else(|| Error::corruption("empty LEVELS page"))?;
    if flag != Encoding::PackedLevels as u8 {
        return Err(Error::format(format!("LEVELS page has encoding flag {flag}")));
    }
    if rest.len() != count.div_ceil(2) {
        return Err(Error::corruption(format!("LEVELS page holds {} bytes for {count} entries", rest.len())));
    }
    let mut r = BitReader::new(rest);
    (0..count)
        .map(|_| Ok(LevelEntry { rep: r.read(2)? as u8, def: r.read(2)? as u8 }))
        .collect()
}
