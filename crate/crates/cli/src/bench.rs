//! Size and timing matrix over coordinate encoding, sort order and compression.

use std::io::{self, Write};
use std::time::Instant;

use geocolumn::format::{prune_pages, ColumnId, Compression, CoordinateEncoding, FileReader, WriteOptions};
use geocolumn::io::generate_synthetic;
use geocolumn::{Curve, Geometry, Rect};
use serde::Serialize;

use crate::{for_each_input, kind_of, print_json, BenchArgs, ReportFormat, Result};

#[derive(Debug, Serialize)]
struct BenchRow {
    coordinates: &'static str,
    sort: &'static str,
    compression: &'static str,
    file_bytes: u64,
    coordinate_bytes: u64,
    /// Coordinate bytes relative to 16 bytes per coordinate pair.
    coordinate_ratio: f64,
    /// Mean fraction of page slots a query reads.
    pages_read_fraction: f64,
    write_seconds: f64,
    read_seconds: f64,
}

#[derive(Debug, Serialize)]
struct BenchReport {
    records: usize,
    coordinates: u64,
    queries: usize,
    rows: Vec<BenchRow>,
    /// Extra write time of FP-delta over raw for the same sort and compression.
    /// Timings are informational and vary between machines.
    fpdelta_write_overhead: Vec<Overhead>,
}

#[derive(Debug, Serialize)]
struct Overhead {
    sort: &'static str,
    compression: &'static str,
    ratio: f64,
}

fn load(a: &BenchArgs) -> Result<Vec<Geometry>> {
    match &a.input {
        Some(path) => {
            let kind = kind_of(path, a.from)?;
            let mut out = Vec::new();
            for_each_input(path, kind, |g| {
                out.push(g);
                Ok(())
            })?;
            Ok(out)
        }
        None => Ok(generate_synthetic(&a.synth.spec())?.collect()),
    }
}

/// Evenly spaced records act as query centers, each square covering 1% of
/// the data extent per axis.
fn queries(data: &[Geometry], n: usize) -> Vec<Rect> {
    let mut acc: Option<Rect> = None;
    for r in data.iter().filter_map(Geometry::mbr) {
        acc = Some(acc.map_or(r, |a| a.union(&r)));
    }
    let Some(extent) = acc else { return Vec::new() };
    let (hw, hh) = (extent.width() * 0.005, extent.height() * 0.005);
    let centers: Vec<_> = data.iter().filter_map(Geometry::mbr).collect();
    if centers.is_empty() || n == 0 {
        return Vec::new();
    }
    (0..n)
        .filter_map(|i| {
            let c = centers[i * centers.len() / n].center();
            Rect::new(c.x - hw, c.y - hh, c.x + hw, c.y + hh).ok()
        })
        .collect()
}

pub(crate) fn run(a: &BenchArgs) -> Result<()> {
    let data = load(a)?;
    let coords: u64 = data.iter().map(|g| g.coord_count() as u64).sum();
    let rects = queries(&data, a.queries);
    let mut rows = Vec::new();
    for coding in [CoordinateEncoding::Raw, CoordinateEncoding::Auto] {
        for sort in [Curve::None, Curve::Z, Curve::Hilbert] {
            for compression in [Compression::None, Compression::Deflate] {
                let opts = WriteOptions {
                    page_size: a.page_size,
                    compression,
                    sort,
                    batch_size: a.batch_size as usize,
                    coordinates: coding,
                    ..Default::default()
                };
                log::info!("bench {coding:?} {} {}", sort.name(), compression.name());
                let mut buf = Vec::new();
                let t = Instant::now();
                let summary = geocolumn::format::write_file(&mut buf, data.iter().cloned(), &opts)?;
                let write_seconds = t.elapsed().as_secs_f64();
                let t = Instant::now();
                let reader = FileReader::open(buf.as_slice())?;
                let mut n = 0usize;
                for r in reader.records() {
                    r?;
                    n += 1;
                }
                let read_seconds = t.elapsed().as_secs_f64();
                debug_assert_eq!(n, summary.records_written as usize);
                let coordinate_bytes: u64 = summary
                    .column_bytes
                    .iter()
                    .filter(|(c, _)| matches!(c, ColumnId::X | ColumnId::Y))
                    .map(|(_, b)| *b)
                    .sum();
                let fractions: Vec<f64> = rects
                    .iter()
                    .map(|q| {
                        let plan = prune_pages(reader.footer(), q);
                        if plan.slots_total == 0 { 0.0 } else { plan.slots_selected() as f64 / plan.slots_total as f64 }
                    })
                    .collect();
                rows.push(BenchRow {
                    coordinates: match coding {
                        CoordinateEncoding::Raw => "raw",
                        CoordinateEncoding::Auto => "fpdelta",
                    },
                    sort: sort.name(),
                    compression: compression.name(),
                    file_bytes: summary.bytes_written,
                    coordinate_bytes,
                    coordinate_ratio: if coords == 0 { 0.0 } else { coordinate_bytes as f64 / (16 * coords) as f64 },
                    pages_read_fraction: if fractions.is_empty() {
                        0.0
                    } else {
                        fractions.iter().sum::<f64>() / fractions.len() as f64
                    },
                    write_seconds,
                    read_seconds,
                });
            }
        }
    }
    let half = rows.len() / 2;
    let fpdelta_write_overhead = rows[..half]
        .iter()
        .zip(&rows[half..])
        .map(|(raw, fp)| Overhead {
            sort: raw.sort,
            compression: raw.compression,
            ratio: if fp.write_seconds > 0.0 { (fp.write_seconds - raw.write_seconds) / fp.write_seconds } else { 0.0 },
        })
        .collect();
    let report = BenchReport { records: data.len(), coordinates: coords, queries: rects.len(), rows, fpdelta_write_overhead };
    let mut out = io::stdout().lock();
    match a.format {
        ReportFormat::Json => print_json(&report, &mut out),
        ReportFormat::Text => write_text(&report, &mut out),
    }
}

fn write_text(r: &BenchReport, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "records {}, coordinates {}, queries {}", r.records, r.coordinates, r.queries)?;
    writeln!(
        out,
        "{:<8} {:<8} {:<8} {:>12} {:>12} {:>7} {:>8} {:>9} {:>9}",
        "coords", "sort", "compress", "file B", "coord B", "ratio", "pages", "write s", "read s"
    )?;
    for row in &r.rows {
        writeln!(
            out,
            "{:<8} {:<8} {:<8} {:>12} {:>12} {:>7.4} {:>8.4} {:>9.3} {:>9.3}",
            row.coordinates,
            row.sort,
            row.compression,
            row.file_bytes,
            row.coordinate_bytes,
            row.coordinate_ratio,
            row.pages_read_fraction,
            row.write_seconds,
            row.read_seconds
        )?;
    }
    writeln!(out, "timings are informational")?;
    for o in &r.fpdelta_write_overhead {
        writeln!(out, "fpdelta write overhead ({}, {}): {:.3}", o.sort, o.compression, o.ratio)?;
    }
    Ok(())
}
