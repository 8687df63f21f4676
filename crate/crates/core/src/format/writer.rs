use std::io::Write;

use flate2::write::DeflateEncoder;

use super::levels::{pack_levels, LevelEntry};
use super::meta::{ChunkMeta, Footer, PageMeta, RowGroupMeta};
use super::rle::{encode_type_page, rle_encode_types};
use super::stats::PageStats;
use super::{ColumnId, Compression, CoordinateEncoding, Encoding, WriteOptions, MAGIC, ROW_GROUP_MAGIC};
use crate::codec::fpdelta::{encode_page, PageEncoding};
use crate::columnar::{records_of, to_columnar, ColumnarGeometry, DEF_EMPTY, REP_RECORD};
use crate::error::{Error, Result};
use crate::geometry::{Coord, Geometry, RectAccumulator};
use crate::sfc::sort_batch_by;

/// What to do with a record that fails validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InvalidPolicy {
    #[default]
    Abort,
    Skip,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WriteSummary {
    pub records_written: u64,
    pub records_skipped: u64,
    pub row_groups: usize,
    pub bytes_written: u64,
    /// Stored bytes per column across all row groups.
    pub column_bytes: Vec<(ColumnId, u64)>,
}

struct PendingRecord {
    id: u64,
    columnar: ColumnarGeometry,
}

impl PendingRecord {
    fn rep_point(&self) -> Option<Coord> {
        let mut acc = RectAccumulator::default();
        self.columnar.values.iter().for_each(|v| acc.add(&v.coord));
        acc.finish().map(|r| r.center())
    }
}

/// Streaming writer. Records are buffered into sort batches; each flushed
/// batch becomes one or more complete row groups.
pub struct FileWriter<W: Write> {
    out: W,
    opts: WriteOptions,
    pos: u64,
    batch: Vec<PendingRecord>,
    row_groups: Vec<RowGroupMeta>,
    inputs_seen: u64,
    next_id: u64,
    skipped: u64,
}

impl<W: Write> FileWriter<W> {
    pub fn new(mut out: W, opts: WriteOptions) -> Result<Self> {
        if opts.page_size == 0 || opts.batch_size == 0 {
            return Err(Error::InvalidArgument("page size and batch size must be positive".into()));
        }
        out.write_all(MAGIC)?;
        Ok(FileWriter {
            out,
            opts,
            pos: MAGIC.len() as u64,
            batch: Vec::new(),
            row_groups: Vec::new(),
            inputs_seen: 0,
            next_id: 0,
            skipped: 0,
        })
    }

    /// Adds one input geometry. A collection contributes its flattened
    /// members as separate records.
    pub fn write(&mut self, g: Geometry) -> Result<()> {
        let index = self.inputs_seen;
        self.inputs_seen += 1;
        let converted = records_of(g).and_then(|members| members.iter().map(to_columnar).collect::<Result<Vec<_>>>());
        let members = match converted {
            Ok(m) => m,
            Err(e) if self.opts.on_invalid == InvalidPolicy::Skip => {
                log::warn!("skipping record {index}: {e}");
                self.skipped += 1;
                return Ok(());
            }
            Err(e) => return Err(Error::Record { index, source: Box::new(e) }),
        };
        for columnar in members {
            self.batch.push(PendingRecord { id: self.next_id, columnar });
            self.next_id += 1;
            if self.batch.len() >= self.opts.batch_size {
                self.flush_batch()?;
            }
        }
        Ok(())
    }

    fn flush_batch(&mut self) -> Result<()> {
        if self.batch.is_empty() {
            return Ok(());
        }
        let mut batch = std::mem::take(&mut self.batch);
        sort_batch_by(&mut batch, PendingRecord::rep_point, self.opts.sort);
        let mut start = 0;
        while start < batch.len() {
            let mut end = start;
            let mut coord_bytes = 0usize;
            while end < batch.len() && end - start < self.opts.batch_size {
                let bytes = batch[end].columnar.values.len() * 16;
                if end > start && coord_bytes + bytes > self.opts.row_group_bytes {
                    break;
                }
                coord_bytes += bytes;
                end += 1;
            }
            let (meta, bytes) = encode_row_group_pending(&batch[start..end], &self.opts, self.pos);
            self.out.write_all(&bytes)?;
            self.out.flush()?;
            self.pos += bytes.len() as u64;
            self.row_groups.push(meta);
            start = end;
        }
        Ok(())
    }

    /// Flushes pending records and writes the footer.
    pub fn finish(mut self) -> Result<WriteSummary> {
        self.flush_batch()?;
        let footer = Footer::new(self.opts.describe(), self.opts.with_ids, std::mem::take(&mut self.row_groups));
        let bytes = footer.encode();
        self.out.write_all(&bytes)?;
        self.out.write_all(&(bytes.len() as u32).to_le_bytes())?;
        self.out.write_all(MAGIC)?;
        self.out.flush()?;
        self.pos += bytes.len() as u64 + 8;

        let mut column_bytes: Vec<(ColumnId, u64)> = Vec::new();
        for rg in &footer.row_groups {
            for c in &rg.chunks {
                match column_bytes.iter_mut().find(|(id, _)| *id == c.column) {
                    Some((_, n)) => *n += c.stored_bytes(),
                    None => column_bytes.push((c.column, c.stored_bytes())),
                }
            }
        }
        column_bytes.sort();
        Ok(WriteSummary {
            records_written: footer.record_count,
            records_skipped: self.skipped,
            row_groups: footer.row_groups.len(),
            bytes_written: self.pos,
            column_bytes,
        })
    }
}

/// Writes every geometry of `records` into a complete file.
pub fn write_file<W: Write>(out: W, records: impl IntoIterator<Item = Geometry>, opts: &WriteOptions) -> Result<WriteSummary> {
    let mut w = FileWriter::new(out, opts.clone())?;
    for g in records {
        w.write(g)?;
    }
    w.finish()
}

struct BuiltPage {
    bytes: Vec<u8>,
    meta: PageMeta,
}

fn build_page(
    payload: Vec<u8>,
    encoding: Encoding,
    compression: Compression,
    stats: PageStats,
    first_record: u64,
    record_count: u64,
) -> BuiltPage {
    let raw_len = payload.len() as u32;
    let (bytes, compression) = match compression {
        Compression::Deflate if !payload.is_empty() => {
            let mut enc = DeflateEncoder::new(Vec::new(), flate2::Compression::default());
            enc.write_all(&payload).expect("in-memory write");
            let packed = enc.finish().expect("in-memory write");
            if packed.len() < payload.len() {
                (packed, Compression::Deflate)
            } else {
                (payload, Compression::None)
            }
        }
        _ => (payload, Compression::None),
    };
    BuiltPage {
        meta: PageMeta {
            offset: 0,
            stored_len: bytes.len() as u32,
            raw_len,
            encoding,
            compression,
            first_record,
            record_count,
            start_rep_level: REP_RECORD,
            stats,
        },
        bytes,
    }
}

/// A run of whole records sharing one page slot.
#[derive(Debug, Clone, Copy)]
struct Slot {
    first_record: usize,
    record_count: usize,
    first_value: usize,
    value_count: usize,
    first_level: usize,
    level_count: usize,
}

fn plan_slots(records: &[PendingRecord], values_per_page: usize) -> Vec<Slot> {
    let mut slots = Vec::new();
    let mut cur = Slot { first_record: 0, record_count: 0, first_value: 0, value_count: 0, first_level: 0, level_count: 0 };
    for r in records {
        let values = r.columnar.values.len();
        if cur.record_count > 0 && cur.value_count + values > values_per_page {
            let next = Slot {
                first_record: cur.first_record + cur.record_count,
                record_count: 0,
                first_value: cur.first_value + cur.value_count,
                value_count: 0,
                first_level: cur.first_level + cur.level_count,
                level_count: 0,
            };
            slots.push(cur);
            cur = next;
        }
        cur.record_count += 1;
        cur.value_count += values;
        cur.level_count += values.max(1);
    }
    if cur.record_count > 0 {
        slots.push(cur);
    }
    slots
}

fn coordinate_pages(values: &[f64], slots: &[Slot], opts: &WriteOptions) -> Vec<BuiltPage> {
    slots
        .iter()
        .map(|s| {
            let vals = &values[s.first_value..s.first_value + s.value_count];
            let page = encode_page(vals, opts.coordinates == CoordinateEncoding::Auto);
            let encoding = match (vals.is_empty(), page.encoding) {
                (true, _) => Encoding::Empty,
                (false, PageEncoding::Raw) => Encoding::Raw,
                (false, PageEncoding::FpDelta) => Encoding::FpDelta,
            };
            let stats = PageStats::from_values(vals.iter().copied());
            build_page(page.bytes, encoding, opts.compression, stats, s.first_record as u64, s.record_count as u64)
        })
        .collect()
}

/// Encodes one row group, header included. `file_offset` is where the
/// returned bytes will start in the file.
fn encode_row_group_pending(records: &[PendingRecord], opts: &WriteOptions, file_offset: u64) -> (RowGroupMeta, Vec<u8>) {
    let mut types = Vec::with_capacity(records.len());
    let mut levels = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in records {
        let c = &r.columnar;
        types.push(c.geometry_type);
        if c.values.is_empty() {
            levels.push(LevelEntry { rep: REP_RECORD, def: DEF_EMPTY });
        }
        for v in &c.values {
            levels.push(LevelEntry { rep: v.rep_level, def: v.def_level });
            xs.push(v.coord.x);
            ys.push(v.coord.y);
        }
    }
    let slots = plan_slots(records, opts.values_per_page());

    let type_page = build_page(
        encode_type_page(&rle_encode_types(&types)),
        Encoding::Rle,
        opts.compression,
        PageStats::from_values(types.iter().map(|t| t.code() as f64)),
        0,
        records.len() as u64,
    );
    let level_pages: Vec<BuiltPage> = slots
        .iter()
        .map(|s| {
            let entries = &levels[s.first_level..s.first_level + s.level_count];
            let stats = PageStats::from_values(entries.iter().map(|e| e.rep as f64));
            build_page(pack_levels(entries), Encoding::PackedLevels, opts.compression, stats, s.first_record as u64, s.record_count as u64)
        })
        .collect();
    let (x_pages, y_pages) = std::thread::scope(|scope| {
        let xh = scope.spawn(|| coordinate_pages(&xs, &slots, opts));
        let y_pages = coordinate_pages(&ys, &slots, opts);
        (xh.join().expect("x page encoder panicked"), y_pages)
    });
    let id_pages: Option<Vec<BuiltPage>> = opts.with_ids.then(|| {
        slots
            .iter()
            .map(|s| {
                let ids: Vec<u64> = records[s.first_record..s.first_record + s.record_count].iter().map(|r| r.id).collect();
                let mut payload = Vec::with_capacity(1 + ids.len() * 8);
                payload.push(Encoding::Plain as u8);
                ids.iter().for_each(|id| payload.extend_from_slice(&id.to_le_bytes()));
                let stats = PageStats::from_values(ids.iter().map(|&id| id as f64));
                build_page(payload, Encoding::Plain, opts.compression, stats, s.first_record as u64, s.record_count as u64)
            })
            .collect()
    });

    let mut data = Vec::new();
    let mut chunks = Vec::new();
    let mut columns: Vec<(ColumnId, Vec<BuiltPage>)> =
        vec![(ColumnId::Type, vec![type_page]), (ColumnId::Levels, level_pages), (ColumnId::X, x_pages), (ColumnId::Y, y_pages)];
    if let Some(ids) = id_pages {
        columns.push((ColumnId::Id, ids));
    }
    for (column, pages) in columns {
        let mut stats = PageStats::default();
        let mut metas = Vec::with_capacity(pages.len());
        for mut p in pages {
            p.meta.offset = data.len() as u64;
            data.extend_from_slice(&p.bytes);
            stats.merge(&p.meta.stats);
            metas.push(p.meta);
        }
        chunks.push(ChunkMeta { column, stats, pages: metas });
    }

    let mut meta = RowGroupMeta {
        data_offset: 0,
        data_len: data.len() as u64,
        record_count: records.len() as u64,
        coord_count: xs.len() as u64,
        level_count: levels.len() as u64,
        chunks,
    };
    let meta_len = meta.encode().len() as u64;
    meta.data_offset = file_offset + 8 + meta_len;
    let meta_bytes = meta.encode();
    debug_assert_eq!(meta_bytes.len() as u64, meta_len);

    let mut out = Vec::with_capacity(8 + meta_bytes.len() + data.len());
    out.extend_from_slice(ROW_GROUP_MAGIC);
    out.extend_from_slice(&(meta_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta_bytes);
    out.extend_from_slice(&data);
    (meta, out)
}

/// Encodes already-validated geometries as one row group starting at
/// `file_offset`. Record ids are their positions in `records`.
pub fn encode_row_group(records: &[Geometry], opts: &WriteOptions, file_offset: u64) -> Result<(RowGroupMeta, Vec<u8>)> {
    let pending = records
        .iter()
        .enumerate()
        .map(|(i, g)| Ok(PendingRecord { id: i as u64, columnar: to_columnar(g)? }))
        .collect::<Result<Vec<_>>>()?;
    if pending.is_empty() {
        return Err(Error::InvalidArgument("a row group needs at least one record".into()));
    }
    Ok(encode_row_group_pending(&pending, opts, file_offset))
}

/// Rebuilds a valid file from the complete row groups at the start of
/// `bytes`, discarding anything after the last intact one.
pub fn recover(bytes: &[u8]) -> Result<Vec<u8>> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Unsupported("missing file magic".into()));
    }
    let mut pos = 4usize;
    let mut row_groups = Vec::new();
    while bytes.len() >= pos + 8 && &bytes[pos..pos + 4] == ROW_GROUP_MAGIC {
        let meta_len = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().expect("4 bytes")) as usize;
        let Some(meta_bytes) = bytes.get(pos + 8..pos + 8 + meta_len) else { break };
        let Ok(meta) = RowGroupMeta::decode(meta_bytes) else { break };
        let data_start = (pos + 8 + meta_len) as u64;
        if meta.data_offset != data_start || data_start + meta.data_len > bytes.len() as u64 {
            break;
        }
        pos = (data_start + meta.data_len) as usize;
        row_groups.push(meta);
    }
    let has_ids = row_groups.first().is_some_and(|rg| rg.chunk(ColumnId::Id).is_some());
    let footer = Footer::new("recovered".into(), has_ids, row_groups);
    let fb = footer.encode();
    let mut out = bytes[..pos].to_vec();
    out.extend_from_slice(&fb);
    out.extend_from_slice(&(fb.len() as u32).to_le_bytes());
    out.extend_from_slice(MAGIC);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::FileReader;
    use crate::geometry::{coords, Polygon};

    fn sample() -> Vec<Geometry> {
        vec![
            Geometry::Point(Coord::new(1.0, 2.0)),
            Geometry::Empty,
            Geometry::LineString(coords(&[(0.0, 0.0), (3.0, 1.0), (4.0, 4.0)])),
            Geometry::Polygon(Polygon::new(coords(&[(0.0, 0.0), (0.0, 2.0), (2.0, 2.0), (2.0, 0.0), (0.0, 0.0)]), vec![])),
            Geometry::MultiPoint(coords(&[(5.0, 5.0), (6.0, 6.0)])),
        ]
    }

    fn write(records: Vec<Geometry>, opts: &WriteOptions) -> (Vec<u8>, WriteSummary) {
        let mut out = Vec::new();
        let summary = write_file(&mut out, records, opts).unwrap();
        (out, summary)
    }

    #[test]
    fn round_trip_small_pages() {
        let opts = WriteOptions { page_size: 17, with_ids: true, ..Default::default() };
        let (bytes, summary) = write(sample(), &opts);
        assert_eq!(summary.records_written, 5);
        assert_eq!(summary.bytes_written, bytes.len() as u64);
        let r = FileReader::open(bytes).unwrap();
        assert!(r.footer().page_slot_count() > 1);
        let recs: Vec<_> = r.records().collect::<Result<_>>().unwrap();
        assert_eq!(recs.iter().map(|r| r.geometry.clone()).collect::<Vec<_>>(), sample());
        assert_eq!(recs.iter().map(|r| r.id).collect::<Vec<_>>(), (0..5).map(Some).collect::<Vec<_>>());
    }

    #[test]
    fn oversized_record_gets_own_slot() {
        let line: Vec<Coord> = (0..100).map(|i| Coord::new(i as f64, 0.5)).collect();
        let recs = vec![Geometry::Point(Coord::new(0.0, 0.0)), Geometry::LineString(line), Geometry::Point(Coord::new(1.0, 1.0))];
        let opts = WriteOptions { page_size: 81, ..Default::default() };
        let (bytes, _) = write(recs.clone(), &opts);
        let r = FileReader::open(bytes).unwrap();
        let x = r.footer().row_groups[0].chunk(ColumnId::X).unwrap();
        assert_eq!(x.pages.iter().map(|p| p.record_count).collect::<Vec<_>>(), vec![1, 1, 1]);
        assert_eq!(r.read_all().unwrap(), recs);
    }

    #[test]
    fn batch_size_bounds_row_groups() {
        let recs: Vec<_> = (0..10).map(|i| Geometry::Point(Coord::new(i as f64, 0.0))).collect();
        let opts = WriteOptions { batch_size: 3, ..Default::default() };
        let (bytes, summary) = write(recs.clone(), &opts);
        assert_eq!(summary.row_groups, 4);
        assert_eq!(FileReader::open(bytes).unwrap().read_all().unwrap(), recs);
    }

    #[test]
    fn row_group_bytes_bound() {
        let recs: Vec<_> = (0..10).map(|i| Geometry::Point(Coord::new(i as f64, 0.0))).collect();
        let opts = WriteOptions { row_group_bytes: 40, ..Default::default() };
        let (_, summary) = write(recs, &opts);
        assert_eq!(summary.row_groups, 5);
    }

    #[test]
    fn invalid_record_policies() {
        let bad = Geometry::LineString(coords(&[(0.0, 0.0)]));
        let recs = vec![Geometry::Point(Coord::new(0.0, 0.0)), bad, Geometry::Point(Coord::new(1.0, 0.0))];
        let err = write_file(Vec::new(), recs.clone(), &WriteOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Record { index: 1, .. }), "{err}");
        let opts = WriteOptions { on_invalid: InvalidPolicy::Skip, ..Default::default() };
        let (bytes, summary) = write(recs, &opts);
        assert_eq!((summary.records_written, summary.records_skipped), (2, 1));
        assert_eq!(FileReader::open(bytes).unwrap().footer().record_count, 2);
    }

    #[test]
    fn collections_flatten_into_records() {
        let gc = Geometry::GeometryCollection(vec![
            Geometry::Point(Coord::new(0.0, 0.0)),
            Geometry::GeometryCollection(vec![Geometry::Point(Coord::new(1.0, 1.0))]),
        ]);
        let (bytes, summary) = write(vec![gc], &WriteOptions::default());
        assert_eq!(summary.records_written, 2);
        assert_eq!(
            FileReader::open(bytes).unwrap().read_all().unwrap(),
            vec![Geometry::Point(Coord::new(0.0, 0.0)), Geometry::Point(Coord::new(1.0, 1.0))]
        );
    }

    #[test]
    fn deflate_only_when_smaller() {
        let recs: Vec<_> = (0..2000).map(|i| Geometry::Point(Coord::new((i % 7) as f64, 3.0))).collect();
        let opts = WriteOptions { compression: Compression::Deflate, ..Default::default() };
        let (bytes, _) = write(recs.clone(), &opts);
        let r = FileReader::open(bytes).unwrap();
        for c in &r.footer().row_groups[0].chunks {
            for p in &c.pages {
                match p.compression {
                    Compression::Deflate => assert!(p.stored_len < p.raw_len),
                    Compression::None => assert_eq!(p.stored_len, p.raw_len),
                }
            }
        }
        assert_eq!(r.read_all().unwrap(), recs);
    }

    #[test]
    fn empty_input_gives_valid_file() {
        let (bytes, summary) = write(vec![], &WriteOptions::default());
        assert_eq!(summary.row_groups, 0);
        let r = FileReader::open(bytes).unwrap();
        assert_eq!(r.footer().record_count, 0);
        assert!(r.footer().bbox.is_none());
    }

    #[test]
    fn recover_keeps_complete_row_groups() {
        let recs: Vec<_> = (0..9).map(|i| Geometry::Point(Coord::new(i as f64, 1.0))).collect();
        let opts = WriteOptions { batch_size: 3, ..Default::default() };
        let (bytes, _) = write(recs.clone(), &opts);
        let rgs = FileReader::open(bytes.clone()).unwrap().footer().row_groups.clone();
        let cut = (rgs[2].data_offset + 5) as usize;
        let fixed = recover(&bytes[..cut]).unwrap();
        assert_eq!(FileReader::open(fixed).unwrap().read_all().unwrap(), recs[..6].to_vec());
    }

    #[test]
    fn encode_row_group_offsets() {
        let (meta, bytes) = encode_row_group(&sample(), &WriteOptions::default(), 4).unwrap();
        assert_eq!(&bytes[..4], ROW_GROUP_MAGIC);
        assert_eq!(meta.data_offset + meta.data_len, 4 + bytes.len() as u64);
        assert_eq!(meta.record_count, 5);
    }
}
