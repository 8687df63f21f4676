//! Well-known text, one geometry per line.

use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::geometry::{close_ring, Coord, Geometry, Polygon};

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Word(&'a str),
    Open,
    Close,
    Comma,
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
    peeked: Option<(usize, Tok<'a>)>,
}

fn word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '.' | '+' | '-' | '_')
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { text, pos: 0, peeked: None }
    }

    fn error(&self, at: usize, message: impl Into<String>) -> Error {
        Error::Parse { position: format!("offset {at}"), message: message.into() }
    }

    fn scan(&mut self) -> Result<Option<(usize, Tok<'a>)>> {
        let rest = &self.text[self.pos..];
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
        let start = self.pos;
        let Some(c) = trimmed.chars().next() else { return Ok(None) };
        let tok = match c {
            '(' => Tok::Open,
            ')' => Tok::Close,
            ',' => Tok::Comma,
            c if word_char(c) => {
                let len = trimmed.find(|c: char| !word_char(c)).unwrap_or(trimmed.len());
                self.pos += len;
                return Ok(Some((start, Tok::Word(&trimmed[..len]))));
            }
            other => return Err(self.error(start, format!("unexpected character '{other}'"))),
        };
        self.pos += 1;
        Ok(Some((start, tok)))
    }

    fn peek(&mut self) -> Result<Option<&(usize, Tok<'a>)>> {
        if self.peeked.is_none() {
            self.peeked = self.scan()?;
        }
        Ok(self.peeked.as_ref())
    }

    fn next(&mut self) -> Result<(usize, Tok<'a>)> {
        if let Some(t) = self.peeked.take() {
            return Ok(t);
        }
        let end = self.text.len();
        self.scan()?.ok_or_else(|| self.error(end, "unexpected end of input"))
    }

    fn expect(&mut self, want: Tok<'static>, what: &str) -> Result<()> {
        let (at, tok) = self.next()?;
        if tok != want {
            return Err(self.error(at, format!("expected {what}, found {}", describe(&tok))));
        }
        Ok(())
    }

    /// Consumes `EMPTY` if it comes next.
    fn empty(&mut self) -> Result<bool> {
        if let Some((_, Tok::Word(w))) = self.peek()? {
            if w.eq_ignore_ascii_case("EMPTY") {
                self.next()?;
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn peek_is(&mut self, want: &Tok<'static>) -> Result<bool> {
        Ok(self.peek()?.is_some_and(|(_, t)| t == want))
    }

    /// Parses `item (',' item)* ')'` after an already consumed `(`.
    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T>) -> Result<Vec<T>> {
        let mut out = vec![item(self)?];
        loop {
            let (at, tok) = self.next()?;
            match tok {
                Tok::Comma => out.push(item(self)?),
                Tok::Close => return Ok(out),
                other => return Err(self.error(at, format!("expected ',' or ')', found {}", describe(&other)))),
            }
        }
    }

    fn number(&mut self) -> Result<f64> {
        let (at, tok) = self.next()?;
        match tok {
            Tok::Word(w) => w.parse::<f64>().map_err(|_| self.error(at, format!("invalid number '{w}'"))),
            other => Err(self.error(at, format!("expected a number, found {}", describe(&other)))),
        }
    }

    fn coord(&mut self) -> Result<Coord> {
        let x = self.number()?;
        let y = self.number()?;
        if let Some((at, Tok::Word(_))) = self.peek()? {
            let at = *at;
            return Err(self.error(at, "only two-dimensional coordinates are supported"));
        }
        Ok(Coord::new(x, y))
    }

    fn coord_seq(&mut self) -> Result<Vec<Coord>> {
        self.expect(Tok::Open, "'('")?;
        self.list(Self::coord)
    }

    fn ring(&mut self) -> Result<Vec<Coord>> {
        let mut r = self.coord_seq()?;
        close_ring(&mut r);
        Ok(r)
    }

    fn polygon_body(&mut self) -> Result<Polygon> {
        self.expect(Tok::Open, "'('")?;
        Ok(Polygon { rings: self.list(Self::ring)? })
    }

    fn geometry(&mut self, depth: usize) -> Result<Geometry> {
        let (at, tok) = self.next()?;
        let Tok::Word(tag) = tok else {
            return Err(self.error(at, format!("expected a geometry keyword, found {}", describe(&tok))));
        };
        let tag = tag.to_ascii_uppercase();
        let known = ["POINT", "LINESTRING", "POLYGON", "MULTIPOINT", "MULTILINESTRING", "MULTIPOLYGON", "GEOMETRYCOLLECTION"];
        if !known.contains(&tag.as_str()) {
            return Err(self.error(at, format!("unknown geometry type '{tag}'")));
        }
        if let Some((at, Tok::Word(w))) = self.peek()? {
            if !w.eq_ignore_ascii_case("EMPTY") {
                let (at, w) = (*at, w.to_string());
                return Err(self.error(at, format!("unsupported dimension or modifier '{w}'")));
            }
        }
        if self.empty()? {
            return Ok(match tag.as_str() {
                "GEOMETRYCOLLECTION" => Geometry::GeometryCollection(Vec::new()),
                _ => Geometry::Empty,
            });
        }
        Ok(match tag.as_str() {
            "POINT" => {
                self.expect(Tok::Open, "'('")?;
                let c = self.coord()?;
                self.expect(Tok::Close, "')'")?;
                Geometry::Point(c)
            }
            "LINESTRING" => Geometry::LineString(self.coord_seq()?),
            "POLYGON" => Geometry::Polygon(self.polygon_body()?),
            "MULTIPOINT" => {
                self.expect(Tok::Open, "'('")?;
                Geometry::MultiPoint(self.list(|l| {
                    if l.peek_is(&Tok::Open)? {
                        l.next()?;
                        let c = l.coord()?;
                        l.expect(Tok::Close, "')'")?;
                        Ok(c)
                    } else {
                        l.coord()
                    }
                })?)
            }
            "MULTILINESTRING" => {
                self.expect(Tok::Open, "'('")?;
                Geometry::MultiLineString(self.list(Self::coord_seq)?)
            }
            "MULTIPOLYGON" => {
                self.expect(Tok::Open, "'('")?;
                Geometry::MultiPolygon(self.list(Self::polygon_body)?)
            }
            _ => {
                if depth >= crate::columnar::MAX_COLLECTION_DEPTH {
                    return Err(self.error(at, "GeometryCollection nested too deeply"));
                }
                self.expect(Tok::Open, "'('")?;
                Geometry::GeometryCollection(self.list(|l| l.geometry(depth + 1))?)
            }
        })
    }
}

fn describe(t: &Tok<'_>) -> String {
    match t {
        Tok::Word(w) => format!("'{w}'"),
        Tok::Open => "'('".into(),
        Tok::Close => "')'".into(),
        Tok::Comma => "','".into(),
    }
}

/// Parses one WKT geometry. Unclosed rings are closed by repeating their
/// first coordinate.
pub fn parse_wkt(text: &str) -> Result<Geometry> {
    let mut lex = Lexer::new(text);
    let g = lex.geometry(0)?;
    if let Some((at, tok)) = lex.peek()? {
        let (at, d) = (*at, describe(tok));
        return Err(lex.error(at, format!("trailing input starting with {d}")));
    }
    Ok(g)
}

/// Shortest decimal text that parses back to the same bits. NaN payloads
/// are not preserved.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "Inf".into() } else { "-Inf".into() }
    } else if v != 0.0 && !(1e-5..1e16).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn write_coord(out: &mut String, c: &Coord) {
    let _ = write!(out, "{} {}", format_f64(c.x), format_f64(c.y));
}

fn write_seq(out: &mut String, cs: &[Coord]) {
    out.push('(');
    for (i, c) in cs.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_coord(out, c);
    }
    out.push(')');
}

fn write_polygon(out: &mut String, p: &Polygon) {
    out.push('(');
    for (i, r) in p.rings.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_seq(out, r);
    }
    out.push(')');
}

fn write_list<T>(out: &mut String, items: &[T], mut f: impl FnMut(&mut String, &T)) {
    out.push('(');
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        f(out, item);
    }
    out.push(')');
}

fn write_geometry(out: &mut String, g: &Geometry) {
    match g {
        Geometry::Empty => out.push_str("POINT EMPTY"),
        Geometry::Point(c) => {
            out.push_str("POINT (");
            write_coord(out, c);
            out.push(')');
        }
        Geometry::LineString(cs) => {
            out.push_str("LINESTRING ");
            write_seq(out, cs);
        }
        Geometry::Polygon(p) => {
            out.push_str("POLYGON ");
            write_polygon(out, p);
        }
        Geometry::MultiPoint(cs) => {
            out.push_str("MULTIPOINT ");
            write_list(out, cs, |o, c| {
                o.push('(');
                write_coord(o, c);
                o.push(')');
            });
        }
        Geometry::MultiLineString(ls) => {
            out.push_str("MULTILINESTRING ");
            write_list(out, ls, |o, l| write_seq(o, l));
        }
        Geometry::MultiPolygon(ps) => {
            out.push_str("MULTIPOLYGON ");
            write_list(out, ps, write_polygon);
        }
        Geometry::GeometryCollection(gs) if gs.is_empty() => out.push_str("GEOMETRYCOLLECTION EMPTY"),
        Geometry::GeometryCollection(gs) => {
            out.push_str("GEOMETRYCOLLECTION ");
            write_list(out, gs, write_geometry);
        }
    }
}

pub fn format_wkt(g: &Geometry) -> String {
    let mut s = String::new();
    write_geometry(&mut s, g);
    s
}

/// Streams geometries from WKT text, one per non-blank line. Lines starting
/// with `#` are skipped.
pub struct WktReader<R> {
    input: R,
    line: String,
    line_no: usize,
}

impl<R: BufRead> WktReader<R> {
    pub fn new(input: R) -> Self {
        WktReader { input, line: String::new(), line_no: 0 }
    }
}

impl<R: BufRead> Iterator for WktReader<R> {
    type Item = Result<Geometry>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.line.clear();
            match self.input.read_line(&mut self.line) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let text = self.line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            return Some(parse_wkt(text).map_err(|e| match e {
                Error::Parse { position, message } => {
                    Error::Parse { position: format!("line {}, {position}", self.line_no), message }
                }
                other => other,
            }));
        }
    }
}

pub fn read_wkt<R: BufRead>(input: R) -> WktReader<R> {
    WktReader::new(input)
}

/// Writes one WKT line per geometry.
pub fn write_wkt<W: std::io::Write>(mut out: W, geometries: impl IntoIterator<Item = Geometry>) -> Result<u64> {
    let mut n = 0;
    for g in geometries {
        writeln!(out, "{}", format_wkt(&g))?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}
