use std::io::Read;
use std::sync::atomic::{AtomicU64, Ordering};

use flate2::read::DeflateDecoder;

use super::levels::{unpack_levels, LevelEntry};
use super::meta::{Footer, PageMeta, RowGroupMeta};
use super::prune::prune_pages;
use super::rle::decode_type_page;
use super::{ColumnId, Compression, Encoding, MAGIC};
use crate::codec::fpdelta::decode_page;
use crate::columnar::{from_columnar, ColumnarGeometry, LeveledCoordinate, DEF_EMPTY, DEF_PRESENT, REP_RECORD};
use crate::error::{Error, Result};
use crate::geometry::{Coord, Geometry, GeometryType, Rect};

/// Random-access byte source.
pub trait Source {
    fn len(&self) -> Result<u64>;
    fn read_at(&self, offset: u64, buf: &mut [u8]) -> Result<()>;

    fn is_empty(&self) -> Result<bool> {
        Ok(self.len()? == 0)
    }
}

fn slice_at(bytes: &[u8], offset: u64, buf: &mut [u8]) -> Result<()> {
    let start = usize::try_from(offset).map_err(|_| Error::corruption("offset out of range"))?;
    let src = start
        .checked_add(buf.len())
        .and_then(|end| bytes.get(start..end))
        .ok_or_else(|| Error::corruption(format!("read of {} bytes at {offset} runs past end of file", buf.len())))?;
    buf.copy_from_slice(src);
    Ok(())
}

impl Source for [u8] {
    fn len(&self) -> Result<u64> {
        Ok(<[u8]>::len(self) as u64)
    }
    fn read_at(&self, offset: u64, buf: &mut [u8]) -> Result<()> {
        slice_at(self, offset, buf)
    }
}

impl Source for Vec<u8> {
    fn len(&self) -> Result<u64> {
        Ok(self.as_slice().len() as u64)
    }
    fn read_at(&self, offset: u64, buf: &mut [u8]) -> Result<()> {
        slice_at(self, offset, buf)
    }
}

impl<S: Source + ?Sized> Source for &S {
    fn len(&self) -> Result<u64> {
        (**self).len()
    }
    fn read_at(&self, offset: u64, buf: &mut [u8]) -> Result<()> {
        (**self).read_at(offset, buf)
    }
}

impl Source for std::fs::File {
    fn len(&self) -> Result<u64> {
        Ok(self.metadata()?.len())
    }

    #[cfg(unix)]
    fn read_at(&self, offset: u64, buf: &mut [u8]) -> Result<()> {
        use std::os::unix::fs::FileExt;
        self.read_exact_at(buf, offset).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::corruption(format!("read at {offset} runs past end of file")),
            _ => Error::Io(e),
        })
    }

    #[cfg(not(unix))]
    fn read_at(&self, offset: u64, buf: &mut [u8]) -> Result<()> {
        use std::io::{Seek, SeekFrom};
        let mut f = self;
        f.seek(SeekFrom::Start(offset))?;
        f.read_exact(buf)?;
        Ok(())
    }
}

/// A decoded record. `index` is its position in file order; `id` is the
/// stored sequence number when the file has an ID column.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub index: u64,
    pub id: Option<u64>,
    pub geometry: Geometry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub records: Vec<Record>,
    pub pages_selected: usize,
    pub pages_total: usize,
    /// Page bytes fetched from the source for this query.
    pub bytes_read: u64,
}

pub struct FileReader<S: Source> {
    source: S,
    file_len: u64,
    footer: Footer,
    footer_len: u64,
    bytes_read: AtomicU64,
}

impl<S: Source> FileReader<S> {
    pub fn open(source: S) -> Result<Self> {
        let file_len = source.len()?;
        let mut head = [0u8; 4];
        if file_len < 4 {
            return Err(Error::Unsupported("file too short to hold the magic".into()));
        }
        source.read_at(0, &mut head)?;
        if &head != MAGIC {
            return Err(Error::Unsupported("not a geocolumn file (bad magic)".into()));
        }
        if file_len < 16 {
            return Err(Error::corruption("file truncated: no footer"));
        }
        let mut tail = [0u8; 8];
        source.read_at(file_len - 8, &mut tail)?;
        if &tail[4..] != MAGIC {
            return Err(Error::corruption("file truncated: trailing magic missing"));
        }
        let footer_len = u32::from_le_bytes(tail[..4].try_into().expect("4 bytes")) as u64;
        if footer_len > file_len - 12 {
            return Err(Error::corruption(format!("footer length {footer_len} exceeds file size {file_len}")));
        }
        let footer_start = file_len - 8 - footer_len;
        let mut buf = vec![0u8; footer_len as usize];
        source.read_at(footer_start, &mut buf)?;
        let footer = Footer::decode(&buf)?;
        let mut prev_end = 4;
        for (i, rg) in footer.row_groups.iter().enumerate() {
            let end = rg.data_offset.checked_add(rg.data_len);
            if rg.data_offset < prev_end || end.is_none_or(|e| e > footer_start) {
                return Err(Error::corruption(format!("row group {i} lies outside the data region")));
            }
            prev_end = end.expect("checked");
        }
        Ok(FileReader { source, file_len, footer, footer_len: footer_len + 8, bytes_read: AtomicU64::new(0) })
    }

    pub fn footer(&self) -> &Footer {
        &self.footer
    }

    pub fn file_len(&self) -> u64 {
        self.file_len
    }

    /// Footer bytes including the length word and trailing magic.
    pub fn footer_len(&self) -> u64 {
        self.footer_len
    }

    /// Page bytes read since the reader was opened.
    pub fn bytes_read(&self) -> u64 {
        self.bytes_read.load(Ordering::Relaxed)
    }

    /// Reads and decompresses one page payload.
    pub fn read_page(&self, rg: &RowGroupMeta, page: &PageMeta) -> Result<Vec<u8>> {
        let mut stored = vec![0u8; page.stored_len as usize];
        self.source.read_at(rg.data_offset + page.offset, &mut stored)?;
        self.bytes_read.fetch_add(stored.len() as u64, Ordering::Relaxed);
        let raw = match page.compression {
            Compression::None => stored,
            Compression::Deflate => {
                let mut out = Vec::with_capacity((page.raw_len as usize).min(1 << 24));
                DeflateDecoder::new(stored.as_slice())
                    .take(page.raw_len as u64 + 1)
                    .read_to_end(&mut out)
                    .map_err(|e| Error::corruption(format!("deflate stream: {e}")))?;
                out
            }
        };
        if raw.len() != page.raw_len as usize {
            return Err(Error::corruption(format!("page decompressed to {} bytes, expected {}", raw.len(), page.raw_len)));
        }
        Ok(raw)
    }

    fn row_group(&self, index: usize) -> Result<&RowGroupMeta> {
        self.footer.row_groups.get(index).ok_or_else(|| Error::InvalidArgument(format!("no row group {index}")))
    }

    fn chunk(rg: &RowGroupMeta, id: ColumnId) -> Result<&super::meta::ChunkMeta> {
        rg.chunk(id).ok_or_else(|| Error::corruption(format!("row group lacks {id} chunk")))
    }

    /// Geometry types of every record in a row group.
    pub fn read_types(&self, index: usize) -> Result<Vec<GeometryType>> {
        let rg = self.row_group(index)?;
        let chunk = Self::chunk(rg, ColumnId::Type)?;
        let page = &chunk.pages[0];
        self.read_page(rg, page)
            .and_then(|bytes| decode_type_page(&bytes, rg.record_count as usize))
            .map_err(|e| e.at(format_args!("row group {index}, TYPE page at offset {}", rg.data_offset + page.offset)))
    }

    fn read_coords(&self, rg: &RowGroupMeta, page: &PageMeta) -> Result<Vec<f64>> {
        let count = page.stats.value_count as usize;
        let payload = self.read_page(rg, page)?;
        let expected = match payload.first() {
            None => Encoding::Empty,
            Some(&flag) => Encoding::from_u8(flag)?,
        };
        if page.encoding != expected {
            return Err(Error::corruption(format!(
                "page metadata says {} but payload is {}",
                page.encoding.name(),
                expected.name()
            )));
        }
        let values = decode_page(&payload, count)?;
        page.stats.verify(&values)?;
        Ok(values)
    }

    /// Decodes the records of one page slot.
    pub fn read_slot(&self, rg_index: usize, slot: usize, types: &[GeometryType]) -> Result<Vec<Record>> {
        let rg = self.row_group(rg_index)?;
        let start = self.footer.row_group_starts()[rg_index];
        let levels_meta = Self::chunk(rg, ColumnId::Levels)?
            .pages
            .get(slot)
            .ok_or_else(|| Error::InvalidArgument(format!("row group {rg_index} has no slot {slot}")))?;
        let xm = &Self::chunk(rg, ColumnId::X)?.pages[slot];
        let ym = &Self::chunk(rg, ColumnId::Y)?.pages[slot];
        let at = |column: ColumnId, page: &PageMeta| {
            let offset = rg.data_offset + page.offset;
            move |e: Error| e.at(format_args!("row group {rg_index}, slot {slot}, {column} page at offset {offset}"))
        };
        let levels = self
            .read_page(rg, levels_meta)
            .and_then(|b| unpack_levels(&b, levels_meta.stats.value_count as usize))
            .map_err(at(ColumnId::Levels, levels_meta))?;
        let xs = self.read_coords(rg, xm).map_err(at(ColumnId::X, xm))?;
        let ys = self.read_coords(rg, ym).map_err(at(ColumnId::Y, ym))?;
        let ids = match rg.chunk(ColumnId::Id) {
            Some(c) => Some(
                self.read_page(rg, &c.pages[slot])
                    .and_then(|b| decode_ids(&b, xm.record_count as usize))
                    .map_err(at(ColumnId::Id, &c.pages[slot]))?,
            ),
            None => None,
        };
        let first = xm.first_record as usize;
        let count = xm.record_count as usize;
        let types = types
            .get(first..first + count)
            .ok_or_else(|| Error::corruption(format!("row group {rg_index}, slot {slot} covers records beyond the TYPE page")))?;
        let records = assemble(types, &levels, &xs, &ys).map_err(|e| e.at(format_args!("row group {rg_index}, slot {slot}")))?;
        Ok(records
            .into_iter()
            .enumerate()
            .map(|(i, geometry)| Record {
                index: start + (first + i) as u64,
                id: ids.as_ref().map(|ids| ids[i]),
                geometry,
            })
            .collect())
    }

    /// Decodes every record of one row group.
    pub fn read_row_group(&self, index: usize) -> Result<Vec<Record>> {
        let types = self.read_types(index)?;
        let mut out = Vec::with_capacity(types.len());
        for slot in 0..self.row_group(index)?.slot_count() {
            out.extend(self.read_slot(index, slot, &types)?);
        }
        Ok(out)
    }

    /// Streams all records, one row group in memory at a time.
    pub fn records(&self) -> Records<'_, S> {
        Records { reader: self, next_group: 0, buffer: Vec::new().into_iter(), failed: false }
    }

    pub fn read_all(&self) -> Result<Vec<Geometry>> {
        self.records().map(|r| r.map(|r| r.geometry)).collect()
    }

    /// Records whose bounding box intersects `query`, reading only the page
    /// slots that survive statistics pruning.
    pub fn range_query(&self, query: &Rect) -> Result<QueryResult> {
        let before = self.bytes_read();
        let plan = prune_pages(&self.footer, query);
        let mut records = Vec::new();
        for sel in &plan.row_groups {
            let types = self.read_types(sel.row_group)?;
            for &slot in &sel.slots {
                for r in self.read_slot(sel.row_group, slot, &types)? {
                    if r.geometry.mbr().is_some_and(|m| m.intersects(query)) {
                        records.push(r);
                    }
                }
            }
        }
        Ok(QueryResult {
            records,
            pages_selected: plan.slots_selected(),
            pages_total: plan.slots_total,
            bytes_read: self.bytes_read() - before,
        })
    }
}

pub struct Records<'a, S: Source> {
    reader: &'a FileReader<S>,
    next_group: usize,
    buffer: std::vec::IntoIter<Record>,
    failed: bool,
}

impl<S: Source> Iterator for Records<'_, S> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(r) = self.buffer.next() {
                return Some(Ok(r));
            }
            if self.failed || self.next_group >= self.reader.footer.row_groups.len() {
                return None;
            }
            let g = self.next_group;
            self.next_group += 1;
            match self.reader.read_row_group(g) {
                Ok(records) => self.buffer = records.into_iter(),
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

fn decode_ids(bytes: &[u8], count: usize) -> Result<Vec<u64>> {
    match bytes.split_first() {
        Some((&flag, rest)) if flag == Encoding::Plain as u8 && rest.len() == count * 8 => {
            Ok(rest.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
        }
        _ => Err(Error::corruption("malformed ID page")),
    }
}

/// Splits a slot's level stream into records and rebuilds each geometry.
fn assemble(types: &[GeometryType], levels: &[LevelEntry], xs: &[f64], ys: &[f64]) -> Result<Vec<Geometry>> {
    if xs.len() != ys.len() {
        return Err(Error::corruption("X and Y pages hold different value counts"));
    }
    let mut out = Vec::with_capacity(types.len());
    let mut li = 0;
    let mut vi = 0;
    for &ty in types {
        let head = levels.get(li).ok_or_else(|| Error::corruption("level stream ends before the last record"))?;
        if head.rep != REP_RECORD {
            return Err(Error::structure(format!("record starts with repetition level {}", head.rep)));
        }
        if head.def == DEF_EMPTY {
            if ty != GeometryType::Empty {
                return Err(Error::structure(format!("{} record has no coordinates", ty.name())));
            }
            li += 1;
            out.push(Geometry::Empty);
            continue;
        }
        let mut values = Vec::new();
        loop {
            let e = levels[li];
            if e.def != DEF_PRESENT {
                return Err(Error::structure(format!("unexpected definition level {}", e.def)));
            }
            let coord = Coord::new(
                *xs.get(vi).ok_or_else(|| Error::corruption("coordinate pages shorter than the level stream"))?,
                ys[vi],
            );
            values.push(LeveledCoordinate { coord, rep_level: e.rep, def_level: e.def });
            li += 1;
            vi += 1;
            if levels.get(li).is_none_or(|n| n.rep == REP_RECORD) {
                break;
            }
        }
        out.push(from_columnar(&ColumnarGeometry { geometry_type: ty, values })?);
    }
    if li != levels.len() || vi != xs.len() {
        return Err(Error::corruption("slot holds more levels or coordinates than its records use"));
    }
    Ok(out)
}
