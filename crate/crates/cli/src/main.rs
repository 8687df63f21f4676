use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use geocolumn::format::{
    inspect, Compression, CoordinateEncoding, FileReader, FileWriter, InvalidPolicy, WriteOptions, WriteSummary,
    DEFAULT_PAGE_SIZE,
};
use geocolumn::io::{generate_synthetic, read_geojson, read_wkt, GeoJsonWriter, SyntheticSpec};
use geocolumn::sfc::DEFAULT_BATCH_SIZE;
use geocolumn::{Curve, Geometry, Rect};
use serde::Serialize;

mod bench;

type Result<T> = std::result::Result<T, geocolumn::Error>;

#[derive(Parser)]
#[command(name = "geocolumn", version, about = "Columnar storage for geospatial vector data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between GeoJSON, WKT and the columnar container.
    Convert(ConvertArgs),
    /// Run a rectangle query against a container file.
    Query(QueryArgs),
    /// Report sizes, statistics and delta histograms of a container file.
    Inspect(InspectArgs),
    /// Measure sizes and timings across encodings, sort orders and compression.
    Bench(BenchArgs),
    /// Write synthetic clustered data.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    #[value(alias = "container")]
    Spqf,
    Geojson,
    Wkt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum ReportFormat {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum TextKind {
    #[default]
    Wkt,
    Geojson,
}

#[derive(Args, Clone, Debug)]
struct WriteArgs {
    /// Target uncompressed coordinate page size in bytes (suffixes K, KiB, M, MiB).
    #[arg(long, default_value_t = DEFAULT_PAGE_SIZE, value_parser = parse_size)]
    page_size: usize,
    #[arg(long, default_value = "none")]
    compression: Compression,
    #[arg(long, default_value = "none")]
    sort: Curve,
    /// Records per sort batch, also the upper bound on records per row group.
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE as u64, value_parser = clap::value_parser!(u64).range(1..))]
    batch_size: u64,
    /// Store coordinates as raw 64-bit values instead of FP-delta.
    #[arg(long)]
    raw: bool,
    /// Add a record sequence-number column.
    #[arg(long)]
    with_ids: bool,
    /// Drop invalid records instead of failing.
    #[arg(long)]
    skip_invalid: bool,
}

impl WriteArgs {
    fn options(&self) -> WriteOptions {
        WriteOptions {
            page_size: self.page_size,
            compression: self.compression,
            sort: self.sort,
            batch_size: self.batch_size as usize,
            coordinates: if self.raw { CoordinateEncoding::Raw } else { CoordinateEncoding::Auto },
            with_ids: self.with_ids,
            on_invalid: if self.skip_invalid { InvalidPolicy::Skip } else { InvalidPolicy::Abort },
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct ConvertArgs {
    input: PathBuf,
    output: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long)]
    from: Option<Kind>,
    /// Output format; inferred from the extension when omitted.
    #[arg(long)]
    to: Option<Kind>,
    #[command(flatten)]
    write: WriteArgs,
    #[arg(long, value_enum, default_value_t)]
    format: ReportFormat,
}

#[derive(Args)]
struct QueryArgs {
    file: PathBuf,
    /// Query rectangle as xmin,ymin,xmax,ymax.
    #[arg(long, value_parser = parse_rect, allow_hyphen_values = true)]
    rect: Rect,
    /// Encoding of the matching geometries.
    #[arg(long, value_enum, default_value_t)]
    to: TextKind,
    /// Write matches here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Format of the counter report.
    #[arg(long, value_enum, default_value_t)]
    format: ReportFormat,
}

#[derive(Args)]
struct InspectArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    format: ReportFormat,
}

#[derive(Args, Clone)]
struct SynthArgs {
    #[arg(long, default_value_t = 200_000)]
    count: u64,
    #[arg(long, default_value_t = 100)]
    clusters: usize,
    /// Cluster standard deviation as a fraction of the domain width.
    #[arg(long, default_value_t = 0.01)]
    stddev: f64,
    /// Domain as xmin,ymin,xmax,ymax.
    #[arg(long, value_parser = parse_rect, allow_hyphen_values = true, default_value = "-180,-90,180,90")]
    bbox: Rect,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit regular polygons of this radius instead of points.
    #[arg(long)]
    polygons: Option<f64>,
}

impl SynthArgs {
    fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            count: self.count,
            clusters: self.clusters,
            bbox: self.bbox,
            seed: self.seed,
            polygon_radius: self.polygons,
            ..Default::default()
        }
        .with_relative_stddev(self.stddev)
    }
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark this file instead of synthetic data.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    from: Option<Kind>,
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long, default_value_t = 1 << 16, value_parser = parse_size)]
    page_size: usize,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE as u64, value_parser = clap::value_parser!(u64).range(1..))]
    batch_size: u64,
    /// Random 0.01%-area queries used to measure pruning.
    #[arg(long, default_value_t = 20)]
    queries: usize,
    #[arg(long, value_enum, default_value_t)]
    format: ReportFormat,
}

#[derive(Args)]
struct GenerateArgs {
    output: PathBuf,
    #[arg(long)]
    to: Option<Kind>,
    #[command(flatten)]
    synth: SynthArgs,
    #[command(flatten)]
    write: WriteArgs,
    #[arg(long, value_enum, default_value_t)]
    format: ReportFormat,
}

fn parse_size(s: &str) -> std::result::Result<usize, String> {
    let t = s.trim();
    let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    let (digits, unit) = t.split_at(split);
    let n: usize = digits.parse().map_err(|_| format!("invalid size '{s}'"))?;
    let mult = match unit.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1,
        "k" | "kb" | "kib" => 1 << 10,
        "m" | "mb" | "mib" => 1 << 20,
        other => return Err(format!("unknown size unit '{other}'")),
    };
    match n.checked_mul(mult) {
        Some(0) | None => Err(format!("size '{s}' must be positive and fit in memory")),
        Some(v) => Ok(v),
    }
}

fn parse_rect(s: &str) -> std::result::Result<Rect, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(format!("expected xmin,ymin,xmax,ymax, got '{s}'"));
    }
    let mut v = [0.0; 4];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|_| format!("'{p}' is not a number"))?;
    }
    Rect::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn kind_of(path: &Path, explicit: Option<Kind>) -> Result<Kind> {
    if let Some(k) = explicit {
        return Ok(k);
    }
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("spqf") | Some("gcol") => Ok(Kind::Spqf),
        Some("geojson") | Some("json") => Ok(Kind::Geojson),
        Some("wkt") | Some("txt") => Ok(Kind::Wkt),
        _ => Err(geocolumn::Error::InvalidArgument(format!(
            "cannot infer the format of '{}'; pass --from/--to",
            path.display()
        ))),
    }
}

fn open_file(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| geocolumn::Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn open_text(path: &Path) -> Result<Box<dyn io::BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdin().lock()));
    }
    Ok(Box::new(BufReader::new(open_file(path)?)))
}

/// Feeds every geometry of `path` to `f` in file order.
fn for_each_input(path: &Path, kind: Kind, mut f: impl FnMut(Geometry) -> Result<()>) -> Result<u64> {
    match kind {
        Kind::Geojson => read_geojson(open_text(path)?, f),
        Kind::Wkt => {
            let mut n = 0;
            for g in read_wkt(open_text(path)?) {
                f(g?)?;
                n += 1;
            }
            Ok(n)
        }
        Kind::Spqf => {
            let reader = FileReader::open(open_file(path)?)?;
            let mut n = 0;
            for r in reader.records() {
                f(r?.geometry)?;
                n += 1;
            }
            Ok(n)
        }
    }
}

/// Output file that only appears under its final name once complete.
struct Staged {
    tmp: Option<tempfile::NamedTempFile>,
    path: PathBuf,
}

impl Staged {
    fn create(path: &Path) -> Result<(Self, Box<dyn Write>)> {
        if path == Path::new("-") {
            return Ok((Staged { tmp: None, path: path.into() }, Box::new(io::stdout().lock())));
        }
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let tmp = tempfile::NamedTempFile::new_in(dir)?;
        let file = tmp.as_file().try_clone()?;
        Ok((Staged { tmp: Some(tmp), path: path.into() }, Box::new(file)))
    }

    fn commit(self) -> Result<()> {
        if let Some(tmp) = self.tmp {
            tmp.persist(&self.path).map_err(|e| geocolumn::Error::Io(e.error))?;
        }
        Ok(())
    }
}

enum Sink {
    Container(FileWriter<BufWriter<Box<dyn Write>>>),
    Geojson(GeoJsonWriter<Box<dyn Write>>),
    Wkt(BufWriter<Box<dyn Write>>, u64),
}

impl Sink {
    fn new(kind: Kind, out: Box<dyn Write>, opts: &WriteOptions) -> Result<Self> {
        Ok(match kind {
            Kind::Spqf => Sink::Container(FileWriter::new(BufWriter::new(out), opts.clone())?),
            Kind::Geojson => Sink::Geojson(GeoJsonWriter::new(out)?),
            Kind::Wkt => Sink::Wkt(BufWriter::new(out), 0),
        })
    }

    fn write(&mut self, g: Geometry) -> Result<()> {
        match self {
            Sink::Container(w) => w.write(g),
            Sink::Geojson(w) => w.write(&g),
            Sink::Wkt(w, n) => {
                writeln!(w, "{}", geocolumn::io::format_wkt(&g))?;
                *n += 1;
                Ok(())
            }
        }
    }

    fn finish(self) -> Result<ConvertSummary> {
        match self {
            Sink::Container(w) => Ok(ConvertSummary::from(w.finish()?)),
            Sink::Geojson(w) => Ok(ConvertSummary { records: w.finish()?, ..Default::default() }),
            Sink::Wkt(mut w, n) => {
                w.flush()?;
                Ok(ConvertSummary { records: n, ..Default::default() })
            }
        }
    }
}

#[derive(Debug, Default, Serialize)]
struct ConvertSummary {
    records: u64,
    skipped: u64,
    bytes_written: Option<u64>,
    row_groups: Option<usize>,
    columns: std::collections::BTreeMap<&'static str, u64>,
}

impl From<WriteSummary> for ConvertSummary {
    fn from(s: WriteSummary) -> Self {
        ConvertSummary {
            records: s.records_written,
            skipped: s.records_skipped,
            bytes_written: Some(s.bytes_written),
            row_groups: Some(s.row_groups),
            columns: s.column_bytes.iter().map(|(c, n)| (c.name(), *n)).collect(),
        }
    }
}

fn print_json(v: &impl Serialize, to: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *to, v).map_err(io::Error::from)?;
    writeln!(to)?;
    Ok(())
}

fn report_summary(s: &ConvertSummary, format: ReportFormat, to_stderr: bool) -> Result<()> {
    let mut out: Box<dyn Write> = if to_stderr { Box::new(io::stderr()) } else { Box::new(io::stdout()) };
    if format == ReportFormat::Json {
        return print_json(s, &mut *out);
    }
    writeln!(out, "records      {}", s.records)?;
    if s.skipped > 0 {
        writeln!(out, "skipped      {}", s.skipped)?;
    }
    if let Some(b) = s.bytes_written {
        writeln!(out, "bytes        {b}")?;
    }
    if let Some(n) = s.row_groups {
        writeln!(out, "row groups   {n}")?;
    }
    for (c, n) in &s.columns {
        writeln!(out, "column {c:<6}{n:>12} bytes")?;
    }
    Ok(())
}

fn write_stream(
    output: &Path,
    kind: Kind,
    opts: &WriteOptions,
    fill: impl FnOnce(&mut Sink) -> Result<()>,
) -> Result<ConvertSummary> {
    let (staged, out) = Staged::create(output)?;
    let mut sink = Sink::new(kind, out, opts)?;
    fill(&mut sink)?;
    let summary = sink.finish()?;
    staged.commit()?;
    Ok(summary)
}

fn cmd_convert(a: &ConvertArgs) -> Result<()> {
    let from = kind_of(&a.input, a.from)?;
    let to = kind_of(&a.output, a.to)?;
    let opts = a.write.options();
    log::info!("converting {} ({from:?}) to {} ({to:?})", a.input.display(), a.output.display());
    let summary = write_stream(&a.output, to, &opts, |sink| for_each_input(&a.input, from, |g| sink.write(g)).map(|_| ()))?;
    report_summary(&summary, a.format, a.output == Path::new("-"))
}

#[derive(Serialize)]
struct QueryReport {
    records: usize,
    pages_selected: usize,
    pages_total: usize,
    bytes_read: u64,
    file_size: u64,
}

fn cmd_query(a: &QueryArgs) -> Result<()> {
    let reader = FileReader::open(open_file(&a.file)?)?;
    let result = reader.range_query(&a.rect)?;
    let report = QueryReport {
        records: result.records.len(),
        pages_selected: result.pages_selected,
        pages_total: result.pages_total,
        bytes_read: result.bytes_read,
        file_size: reader.file_len(),
    };
    let target = a.output.clone().unwrap_or_else(|| PathBuf::from("-"));
    let kind = match a.to {
        TextKind::Wkt => Kind::Wkt,
        TextKind::Geojson => Kind::Geojson,
    };
    write_stream(&target, kind, &WriteOptions::default(), |sink| {
        result.records.into_iter().try_for_each(|r| sink.write(r.geometry))
    })?;
    let mut out: Box<dyn Write> = if a.output.is_some() { Box::new(io::stdout()) } else { Box::new(io::stderr()) };
    match a.format {
        ReportFormat::Json => print_json(&report, &mut *out),
        ReportFormat::Text => {
            let ratio = if report.pages_total == 0 { 0.0 } else { report.pages_selected as f64 / report.pages_total as f64 };
            writeln!(
                out,
                "records {}; pages selected {}/{} ({ratio:.4}); bytes read {} of {}",
                report.records, report.pages_selected, report.pages_total, report.bytes_read, report.file_size
            )?;
            Ok(())
        }
    }
}

fn cmd_inspect(a: &InspectArgs) -> Result<()> {
    let reader = FileReader::open(open_file(&a.file)?)?;
    let report = inspect(&reader)?;
    let mut out = io::stdout().lock();
    match a.format {
        ReportFormat::Json => print_json(&report, &mut out),
        ReportFormat::Text => {
            out.write_all(report.to_text().as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let to = kind_of(&a.output, a.to)?;
    let data = generate_synthetic(&a.synth.spec())?;
    let summary = write_stream(&a.output, to, &a.write.options(), |sink| data.into_iter().try_for_each(|g| sink.write(g)))?;
    report_summary(&summary, a.format, a.output == Path::new("-"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Convert(a) => cmd_convert(&a),
        Command::Query(a) => cmd_query(&a),
        Command::Inspect(a) => cmd_inspect(&a),
        Command::Bench(a) => bench::run(&a),
        Command::Generate(a) => cmd_generate(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GEOCOLUMN_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(geocolumn::Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("geocolumn: error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn sizes() {
        assert_eq!(parse_size("4096"), Ok(4096));
        assert_eq!(parse_size("64K"), Ok(65536));
        assert_eq!(parse_size("64KiB"), Ok(65536));
        assert_eq!(parse_size("1M"), Ok(1 << 20));
        assert!(parse_size("0").is_err());
        assert!(parse_size("12Q").is_err());
        assert!(parse_size("").is_err());
    }

    #[test]
    fn rects() {
        let r = parse_rect("-1.5, 2, 3e1,4").unwrap();
        assert_eq!((r.xmin, r.ymin, r.xmax, r.ymax), (-1.5, 2.0, 30.0, 4.0));
        assert!(parse_rect("1,2,3").is_err());
        assert!(parse_rect("3,0,1,1").is_err());
        assert!(parse_rect("x,0,1,1").is_err());
    }

    #[test]
    fn kinds_from_extension() {
        assert_eq!(kind_of(Path::new("a.SPQF"), None).unwrap(), Kind::Spqf);
        assert_eq!(kind_of(Path::new("a.json"), None).unwrap(), Kind::Geojson);
        assert_eq!(kind_of(Path::new("a.txt"), None).unwrap(), Kind::Wkt);
        assert_eq!(kind_of(Path::new("-"), Some(Kind::Wkt)).unwrap(), Kind::Wkt);
        assert!(kind_of(Path::new("a.shp"), None).is_err());
    }

    #[test]
    fn query_rect_is_a_usage_error() {
        let err = Cli::try_parse_from(["geocolumn", "query", "f.spqf", "--rect", "1,1,0,0"]).err().unwrap();
        assert_eq!(err.exit_code(), 2);
        assert!(Cli::try_parse_from(["geocolumn", "query", "f.spqf", "--rect", "-1,-1,0,0"]).is_ok());
    }
}
