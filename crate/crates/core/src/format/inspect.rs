use serde::Serialize;

use super::meta::{ChunkMeta, PageMeta, RowGroupMeta};
use super::reader::{FileReader, Source};
use super::stats::PageStats;
use super::{ColumnId, Encoding};
use crate::codec::fpdelta::{best_width, decode_page, DeltaHistogram};
use crate::error::Result;

/// Distribution of exact significant bits of the zigzag deltas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramReport {
    pub value_count: u64,
    pub delta_count: u64,
    /// `bins[k]`: deltas needing exactly `k` bits, `k` in `0..=64`.
    pub bins: Vec<u64>,
    /// `at_least[k]`: deltas needing `k` or more bits.
    pub at_least: Vec<u64>,
    pub mean_bits: f64,
    /// Width the encoder would choose for this distribution.
    pub best_width: u32,
}

impl HistogramReport {
    fn from_histogram(h: &DeltaHistogram) -> Self {
        HistogramReport {
            value_count: h.value_count,
            delta_count: h.delta_count(),
            bins: h.bins.to_vec(),
            at_least: h.suffix_sums().to_vec(),
            mean_bits: h.mean_bits(),
            best_width: best_width(h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageReport {
    /// Absolute file offset.
    pub offset: u64,
    pub stored_bytes: u64,
    pub raw_bytes: u64,
    pub encoding: &'static str,
    pub compression: &'static str,
    pub first_record: u64,
    pub record_count: u64,
    pub value_count: u64,
    pub null_count: u64,
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Delta width of an FP-delta coordinate page.
    pub delta_bits: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChunkReport {
    pub column: &'static str,
    pub stored_bytes: u64,
    pub raw_bytes: u64,
    pub value_count: u64,
    pub null_count: u64,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub pages: Vec<PageReport>,
    pub histogram: Option<HistogramReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowGroupReport {
    pub index: usize,
    pub offset: u64,
    /// Row group magic, length word and metadata.
    pub header_bytes: u64,
    pub data_bytes: u64,
    pub record_count: u64,
    pub coord_count: u64,
    pub bbox: Option<[f64; 4]>,
    pub chunks: Vec<ChunkReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnTotal {
    pub column: &'static str,
    pub stored_bytes: u64,
    pub raw_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InspectReport {
    pub file_size: u64,
    pub header_bytes: u64,
    /// Footer, its length word and the trailing magic.
    pub footer_bytes: u64,
    pub version: u16,
    pub created_by: String,
    pub record_count: u64,
    pub has_ids: bool,
    pub bbox: Option<[f64; 4]>,
    pub page_slots: usize,
    pub columns: Vec<ColumnTotal>,
    pub x_histogram: HistogramReport,
    pub y_histogram: HistogramReport,
    pub row_groups: Vec<RowGroupReport>,
}

fn range(s: &PageStats) -> (Option<f64>, Option<f64>) {
    if s.has_range() {
        (Some(s.min), Some(s.max))
    } else {
        (None, None)
    }
}

fn page_report<S: Source>(
    reader: &FileReader<S>,
    rg: &RowGroupMeta,
    column: ColumnId,
    p: &PageMeta,
    hist: &mut DeltaHistogram,
) -> Result<PageReport> {
    let mut delta_bits = None;
    if matches!(column, ColumnId::X | ColumnId::Y) && p.stats.value_count > 0 {
        let payload = reader.read_page(rg, p)?;
        if p.encoding == Encoding::FpDelta {
            delta_bits = payload.get(1).map(|&b| b as u32);
        }
        let values = decode_page(&payload, p.stats.value_count as usize)?;
        hist.merge(&DeltaHistogram::from_values(&values));
    }
    let (min, max) = range(&p.stats);
    Ok(PageReport {
        offset: rg.data_offset + p.offset,
        stored_bytes: p.stored_len as u64,
        raw_bytes: p.raw_len as u64,
        encoding: p.encoding.name(),
        compression: p.compression.name(),
        first_record: p.first_record,
        record_count: p.record_count,
        value_count: p.stats.value_count,
        null_count: p.stats.null_count,
        min,
        max,
        delta_bits,
    })
}

fn chunk_report<S: Source>(reader: &FileReader<S>, rg: &RowGroupMeta, c: &ChunkMeta) -> Result<(ChunkReport, DeltaHistogram)> {
    let mut hist = DeltaHistogram::new();
    let pages = c.pages.iter().map(|p| page_report(reader, rg, c.column, p, &mut hist)).collect::<Result<Vec<_>>>()?;
    let coords = matches!(c.column, ColumnId::X | ColumnId::Y);
    let (min, max) = range(&c.stats);
    let report = ChunkReport {
        column: c.column.name(),
        stored_bytes: c.stored_bytes(),
        raw_bytes: c.raw_bytes(),
        value_count: c.stats.value_count,
        null_count: c.stats.null_count,
        min,
        max,
        pages,
        histogram: coords.then(|| HistogramReport::from_histogram(&hist)),
    };
    Ok((report, hist))
}

/// Full storage report. Decodes every coordinate page to build the delta
/// histograms.
pub fn inspect<S: Source>(reader: &FileReader<S>) -> Result<InspectReport> {
    let footer = reader.footer();
    let mut x_hist = DeltaHistogram::new();
    let mut y_hist = DeltaHistogram::new();
    let mut columns: Vec<ColumnTotal> = Vec::new();
    let mut row_groups = Vec::with_capacity(footer.row_groups.len());
    for (index, rg) in footer.row_groups.iter().enumerate() {
        let header_bytes = 8 + rg.encode().len() as u64;
        let mut chunks = Vec::with_capacity(rg.chunks.len());
        for c in &rg.chunks {
            let (report, hist) = chunk_report(reader, rg, c)?;
            match c.column {
                ColumnId::X => x_hist.merge(&hist),
                ColumnId::Y => y_hist.merge(&hist),
                _ => {}
            }
            match columns.iter_mut().find(|t| t.column == report.column) {
                Some(t) => {
                    t.stored_bytes += report.stored_bytes;
                    t.raw_bytes += report.raw_bytes;
                }
                None => columns.push(ColumnTotal {
                    column: report.column,
                    stored_bytes: report.stored_bytes,
                    raw_bytes: report.raw_bytes,
                }),
            }
            chunks.push(report);
        }
        row_groups.push(RowGroupReport {
            index,
            offset: rg.data_offset - header_bytes,
            header_bytes,
            data_bytes: rg.data_len,
            record_count: rg.record_count,
            coord_count: rg.coord_count,
            bbox: rg.bbox().map(|b| [b.xmin, b.ymin, b.xmax, b.ymax]),
            chunks,
        });
    }
    Ok(InspectReport {
        file_size: reader.file_len(),
        header_bytes: 4,
        footer_bytes: reader.footer_len(),
        version: footer.version,
        created_by: footer.created_by.clone(),
        record_count: footer.record_count,
        has_ids: footer.has_ids,
        bbox: footer.bbox.map(|b| [b.xmin, b.ymin, b.xmax, b.ymax]),
        page_slots: footer.page_slot_count(),
        columns,
        x_histogram: HistogramReport::from_histogram(&x_hist),
        y_histogram: HistogramReport::from_histogram(&y_hist),
        row_groups,
    })
}

impl InspectReport {
    /// Human-readable summary.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "file size      {} bytes", self.file_size);
        let _ = writeln!(s, "created by     {}", self.created_by);
        let _ = writeln!(s, "records        {}", self.record_count);
        let _ = writeln!(s, "row groups     {}", self.row_groups.len());
        let _ = writeln!(s, "page slots     {}", self.page_slots);
        if let Some([a, b, c, d]) = self.bbox {
            let _ = writeln!(s, "bbox           {a} {b} {c} {d}");
        }
        let _ = writeln!(s, "header         {} bytes", self.header_bytes);
        let rg_headers: u64 = self.row_groups.iter().map(|r| r.header_bytes).sum();
        let _ = writeln!(s, "rg headers     {rg_headers} bytes");
        let _ = writeln!(s, "footer         {} bytes", self.footer_bytes);
        let _ = writeln!(s, "\n{:<8} {:>14} {:>14} {:>8}", "column", "stored", "raw", "ratio");
        for c in &self.columns {
            let ratio = if c.raw_bytes == 0 { 1.0 } else { c.stored_bytes as f64 / c.raw_bytes as f64 };
            let _ = writeln!(s, "{:<8} {:>14} {:>14} {:>8.3}", c.column, c.stored_bytes, c.raw_bytes, ratio);
        }
        for (name, h) in [("x", &self.x_histogram), ("y", &self.y_histogram)] {
            let _ = writeln!(
                s,
                "\n{name} deltas: {} values, mean {:.2} bits, best width {}",
                h.delta_count, h.mean_bits, h.best_width
            );
            for (k, &n) in h.bins.iter().enumerate().filter(|(_, &n)| n > 0) {
                let _ = writeln!(s, "  {k:>2} bits  {n:>12}  (>= {k}: {})", h.at_least[k]);
            }
        }
        let mut widths: Vec<(u32, usize)> = Vec::new();
        for p in self.row_groups.iter().flat_map(|r| &r.chunks).flat_map(|c| &c.pages) {
            if let Some(w) = p.delta_bits {
                match widths.iter_mut().find(|(x, _)| *x == w) {
                    Some((_, n)) => *n += 1,
                    None => widths.push((w, 1)),
                }
            }
        }
        widths.sort();
        if !widths.is_empty() {
            let _ = writeln!(s, "\npage delta widths:");
            for (w, n) in widths {
                let _ = writeln!(s, "  n={w:<2} {n} pages");
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{write_file, WriteOptions};
    use crate::geometry::{Coord, Geometry};

    #[test]
    fn accounting_identity() {
        let recs: Vec<_> = (0..300).map(|i| Geometry::Point(Coord::new(i as f64 * 0.25, 1.0 + i as f64))).collect();
        let mut bytes = Vec::new();
        write_file(&mut bytes, recs, &WriteOptions { page_size: 401, batch_size: 100, ..Default::default() }).unwrap();
        let r = FileReader::open(bytes.as_slice()).unwrap();
        let rep = inspect(&r).unwrap();
        let chunk_bytes: u64 = rep.row_groups.iter().flat_map(|g| &g.chunks).map(|c| c.stored_bytes).sum();
        let headers: u64 = rep.row_groups.iter().map(|g| g.header_bytes).sum();
        assert_eq!(rep.header_bytes + headers + chunk_bytes, rep.file_size - rep.footer_bytes);
        assert_eq!(rep.x_histogram.delta_count, 300 - rep.page_slots as u64);
        assert_eq!(rep.x_histogram.at_least[0], rep.x_histogram.delta_count);
        assert!(rep.to_text().contains("records        300"));
        assert!(serde_json::to_string(&rep).is_ok());
    }
}
