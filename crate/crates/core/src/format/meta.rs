//! Row group and footer metadata records.
//!
//! All integers are little-endian fixed width except the varints used inside
//! TYPE pages. Floats are stored as their IEEE 754 bit patterns.

use super::stats::PageStats;
use super::{ColumnId, Compression, Encoding, VERSION};
use crate::error::{Error, Result};
use crate::geometry::{Rect, RectAccumulator};

pub(crate) fn write_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

pub(crate) fn read_varint(c: &mut Cursor<'_>) -> Result<u64> {
    let mut v = 0u64;
    for shift in (0..64).step_by(7) {
        let b = c.u8()?;
        v |= ((b & 0x7f) as u64) << shift;
        if b & 0x80 == 0 {
            return Ok(v);
        }
    }
    Err(Error::corruption("varint longer than 10 bytes"))
}

pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::corruption(format!(
                "metadata truncated: wanted {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
}

trait Put {
    fn put_u8(&mut self, v: u8);
    fn put_u16(&mut self, v: u16);
    fn put_u32(&mut self, v: u32);
    fn put_u64(&mut self, v: u64);
    fn put_f64(&mut self, v: f64);
}

impl Put for Vec<u8> {
    fn put_u8(&mut self, v: u8) {
        self.push(v);
    }
    fn put_u16(&mut self, v: u16) {
        self.extend_from_slice(&v.to_le_bytes());
    }
    fn put_u32(&mut self, v: u32) {
        self.extend_from_slice(&v.to_le_bytes());
    }
    fn put_u64(&mut self, v: u64) {
        self.extend_from_slice(&v.to_le_bytes());
    }
    fn put_f64(&mut self, v: f64) {
        self.put_u64(v.to_bits());
    }
}

fn put_stats(out: &mut Vec<u8>, s: &PageStats) {
    out.put_f64(s.min);
    out.put_f64(s.max);
    out.put_u64(s.value_count);
    out.put_u64(s.null_count);
}

fn get_stats(c: &mut Cursor<'_>) -> Result<PageStats> {
    Ok(PageStats { min: c.f64()?, max: c.f64()?, value_count: c.u64()?, null_count: c.u64()? })
}

/// Location and statistics of one page.
#[derive(Debug, Clone, PartialEq)]
pub struct PageMeta {
    /// Offset relative to the row group's data start.
    pub offset: u64,
    pub stored_len: u32,
    /// Payload length before compression.
    pub raw_len: u32,
    pub encoding: Encoding,
    pub compression: Compression,
    /// First record covered, relative to the row group.
    pub first_record: u64,
    pub record_count: u64,
    /// Repetition level of the first entry. Slots start on record boundaries,
    /// so this is 0 for every page the writer produces.
    pub start_rep_level: u8,
    pub stats: PageStats,
}

impl PageMeta {
    pub const ENCODED_LEN: usize = 8 + 4 + 4 + 1 + 1 + 8 + 8 + 1 + 32;

    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u64(self.offset);
        out.put_u32(self.stored_len);
        out.put_u32(self.raw_len);
        out.put_u8(self.encoding as u8);
        out.put_u8(self.compression as u8);
        out.put_u64(self.first_record);
        out.put_u64(self.record_count);
        out.put_u8(self.start_rep_level);
        put_stats(out, &self.stats);
    }

    fn decode(c: &mut Cursor<'_>) -> Result<Self> {
        Ok(PageMeta {
            offset: c.u64()?,
            stored_len: c.u32()?,
            raw_len: c.u32()?,
            encoding: Encoding::from_u8(c.u8()?)?,
            compression: Compression::from_u8(c.u8()?)?,
            first_record: c.u64()?,
            record_count: c.u64()?,
            start_rep_level: c.u8()?,
            stats: get_stats(c)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkMeta {
    pub column: ColumnId,
    /// Fold of the page statistics.
    pub stats: PageStats,
    pub pages: Vec<PageMeta>,
}

impl ChunkMeta {
    pub fn stored_bytes(&self) -> u64 {
        self.pages.iter().map(|p| p.stored_len as u64).sum()
    }

    pub fn raw_bytes(&self) -> u64 {
        self.pages.iter().map(|p| p.raw_len as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowGroupMeta {
    /// Absolute file offset of the first page byte.
    pub data_offset: u64,
    pub data_len: u64,
    pub record_count: u64,
    pub coord_count: u64,
    pub level_count: u64,
    pub chunks: Vec<ChunkMeta>,
}

impl RowGroupMeta {
    pub fn chunk(&self, column: ColumnId) -> Option<&ChunkMeta> {
        self.chunks.iter().find(|c| c.column == column)
    }

    /// Number of aligned page slots (pages per LEVELS/X/Y/ID chunk).
    pub fn slot_count(&self) -> usize {
        self.chunk(ColumnId::X).map_or(0, |c| c.pages.len())
    }

    /// Non-NaN bounding box of the coordinates in this row group.
    pub fn bbox(&self) -> Option<Rect> {
        let x = self.chunk(ColumnId::X)?.stats;
        let y = self.chunk(ColumnId::Y)?.stats;
        (x.has_range() && y.has_range()).then_some(Rect { xmin: x.min, ymin: y.min, xmax: x.max, ymax: y.max })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.put_u64(self.data_offset);
        out.put_u64(self.data_len);
        out.put_u64(self.record_count);
        out.put_u64(self.coord_count);
        out.put_u64(self.level_count);
        out.put_u32(self.chunks.len() as u32);
        for chunk in &self.chunks {
            out.put_u8(chunk.column as u8);
            put_stats(&mut out, &chunk.stats);
            out.put_u32(chunk.pages.len() as u32);
            for page in &chunk.pages {
                page.encode(&mut out);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(bytes);
        let rg = Self::decode_from(&mut c)?;
        if !c.is_empty() {
            return Err(Error::corruption("trailing bytes in row group metadata"));
        }
        Ok(rg)
    }

    fn decode_from(c: &mut Cursor<'_>) -> Result<Self> {
        let data_offset = c.u64()?;
        let data_len = c.u64()?;
        let record_count = c.u64()?;
        let coord_count = c.u64()?;
        let level_count = c.u64()?;
        let n_chunks = c.u32()?;
        let mut chunks = Vec::with_capacity(n_chunks.min(8) as usize);
        for _ in 0..n_chunks {
            let column = ColumnId::from_u8(c.u8()?)?;
            let stats = get_stats(c)?;
            let n_pages = c.u32()? as usize;
            if n_pages > c.buf.len() / PageMeta::ENCODED_LEN + 1 {
                return Err(Error::corruption(format!("implausible page count {n_pages}")));
            }
            let pages = (0..n_pages).map(|_| PageMeta::decode(c)).collect::<Result<_>>()?;
            chunks.push(ChunkMeta { column, stats, pages });
        }
        let rg = RowGroupMeta { data_offset, data_len, record_count, coord_count, level_count, chunks };
        rg.check()?;
        Ok(rg)
    }

    /// Structural consistency of the metadata itself.
    pub fn check(&self) -> Result<()> {
        if self.record_count == 0 {
            return Err(Error::corruption("row group with zero records"));
        }
        let chunk = |id| self.chunk(id).ok_or_else(|| Error::corruption(format!("row group lacks {id} chunk")));
        let types = chunk(ColumnId::Type)?;
        if types.pages.len() != 1 || types.stats.value_count != self.record_count {
            return Err(Error::corruption("TYPE chunk must be one page covering every record"));
        }
        let x = chunk(ColumnId::X)?;
        let y = chunk(ColumnId::Y)?;
        let levels = chunk(ColumnId::Levels)?;
        if x.stats.value_count != self.coord_count || y.stats.value_count != self.coord_count {
            return Err(Error::corruption("X/Y chunk value counts disagree with row group"));
        }
        if levels.stats.value_count != self.level_count {
            return Err(Error::corruption("LEVELS chunk value count disagrees with row group"));
        }
        let slots = x.pages.len();
        let mut aligned: Vec<&ChunkMeta> = vec![levels, y];
        if let Some(ids) = self.chunk(ColumnId::Id) {
            if ids.stats.value_count != self.record_count {
                return Err(Error::corruption("ID chunk value count disagrees with row group"));
            }
            aligned.push(ids);
        }
        for c in &aligned {
            if c.pages.len() != slots {
                return Err(Error::corruption(format!("{} chunk has {} pages, X has {slots}", c.column, c.pages.len())));
            }
        }
        let mut next_record = 0;
        for (i, p) in x.pages.iter().enumerate() {
            if p.first_record != next_record || p.record_count == 0 {
                return Err(Error::corruption(format!("slot {i} does not continue the record sequence")));
            }
            for c in &aligned {
                let q = &c.pages[i];
                if q.first_record != p.first_record || q.record_count != p.record_count {
                    return Err(Error::corruption(format!("slot {i} of {} is misaligned", c.column)));
                }
            }
            if y.pages[i].stats.value_count != p.stats.value_count {
                return Err(Error::corruption(format!("slot {i}: X and Y value counts differ")));
            }
            next_record += p.record_count;
        }
        if next_record != self.record_count {
            return Err(Error::corruption("slots do not cover every record"));
        }
        for c in &self.chunks {
            for p in &c.pages {
                if p.offset.checked_add(p.stored_len as u64).is_none_or(|end| end > self.data_len) {
                    return Err(Error::corruption(format!("{} page extends past its row group", c.column)));
                }
            }
        }
        Ok(())
    }
}

/// Self-describing file metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Footer {
    pub version: u16,
    pub has_ids: bool,
    pub record_count: u64,
    pub bbox: Option<Rect>,
    pub created_by: String,
    pub row_groups: Vec<RowGroupMeta>,
}

impl Footer {
    pub fn new(created_by: String, has_ids: bool, row_groups: Vec<RowGroupMeta>) -> Self {
        let mut acc = RectAccumulator::default();
        for rg in &row_groups {
            if let Some(r) = rg.bbox() {
                acc.add_rect(&r);
            }
        }
        Footer {
            version: VERSION,
            has_ids,
            record_count: row_groups.iter().map(|r| r.record_count).sum(),
            bbox: acc.finish(),
            created_by,
            row_groups,
        }
    }

    pub fn page_slot_count(&self) -> usize {
        self.row_groups.iter().map(RowGroupMeta::slot_count).sum()
    }

    /// First global record index of every row group.
    pub fn row_group_starts(&self) -> Vec<u64> {
        let mut next = 0;
        self.row_groups
            .iter()
            .map(|rg| {
                let s = next;
                next += rg.record_count;
                s
            })
            .collect()
    }

    /// Footer describing only the first `n` row groups.
    pub fn truncated(&self, n: usize) -> Footer {
        Footer::new(self.created_by.clone(), self.has_ids, self.row_groups[..n.min(self.row_groups.len())].to_vec())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.put_u16(self.version);
        out.put_u8(u8::from(self.has_ids));
        out.put_u64(self.record_count);
        let b = self.bbox.unwrap_or(Rect {
            xmin: f64::INFINITY,
            ymin: f64::INFINITY,
            xmax: f64::NEG_INFINITY,
            ymax: f64::NEG_INFINITY,
        });
        for v in [b.xmin, b.ymin, b.xmax, b.ymax] {
            out.put_f64(v);
        }
        out.put_u32(self.created_by.len() as u32);
        out.extend_from_slice(self.created_by.as_bytes());
        out.put_u32(self.row_groups.len() as u32);
        for rg in &self.row_groups {
            let bytes = rg.encode();
            out.put_u32(bytes.len() as u32);
            out.extend_from_slice(&bytes);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(bytes);
        let version = c.u16()?;
        if version != VERSION {
            return Err(Error::Unsupported(format!("format version {version} (this build reads {VERSION})")));
        }
        let flags = c.u8()?;
        if flags > 1 {
            return Err(Error::format(format!("unknown footer flags {flags:#x}")));
        }
        let record_count = c.u64()?;
        let (xmin, ymin, xmax, ymax) = (c.f64()?, c.f64()?, c.f64()?, c.f64()?);
        let bbox = (xmin <= xmax && ymin <= ymax).then_some(Rect { xmin, ymin, xmax, ymax });
        let len = c.u32()? as usize;
        let created_by = String::from_utf8(c.take(len)?.to_vec())
            .map_err(|_| Error::corruption("creation metadata is not UTF-8"))?;
        let n = c.u32()?;
        let mut row_groups = Vec::new();
        for _ in 0..n {
            let len = c.u32()? as usize;
            row_groups.push(RowGroupMeta::decode(c.take(len)?)?);
        }
        if !c.is_empty() {
            return Err(Error::corruption("trailing bytes in footer"));
        }
        let footer = Footer { version, has_ids: flags & 1 == 1, record_count, bbox, created_by, row_groups };
        if footer.row_groups.iter().map(|r| r.record_count).sum::<u64>() != record_count {
            return Err(Error::corruption("footer record count disagrees with row groups"));
        }
        if footer.row_groups.iter().any(|rg| rg.chunk(ColumnId::Id).is_some() != footer.has_ids) {
            return Err(Error::corruption("ID column presence disagrees with footer flag"));
        }
        Ok(footer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn varint_round_trip() {
        for v in [0u64, 1, 127, 128, 300, 1 << 35, u64::MAX] {
            let mut out = Vec::new();
            write_varint(&mut out, v);
            let mut c = Cursor::new(&out);
            assert_eq!(read_varint(&mut c).unwrap(), v);
            assert!(c.is_empty());
        }
    }

    #[test]
    fn empty_footer_round_trip() {
        let f = Footer::new("test".into(), false, vec![]);
        assert_eq!(Footer::decode(&f.encode()).unwrap(), f);
    }

    #[test]
    fn wrong_version_unsupported() {
        let mut bytes = Footer::new("test".into(), false, vec![]).encode();
        bytes[0] = 9;
        assert!(matches!(Footer::decode(&bytes), Err(Error::Unsupported(_))));
    }

    #[test]
    fn truncated_metadata_is_corruption() {
        let bytes = Footer::new("test".into(), false, vec![]).encode();
        assert!(matches!(Footer::decode(&bytes[..bytes.len() - 2]), Err(Error::Corruption(_))));
    }
}
