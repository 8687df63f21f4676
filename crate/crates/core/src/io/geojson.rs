//! GeoJSON geometries, Features and FeatureCollections.
//!
//! The `features` array of a FeatureCollection is streamed: each feature is
//! converted and handed to the caller before the next one is parsed.
//! Properties are discarded.

use std::cell::RefCell;
use std::fmt;
use std::io::{Read, Write};

use serde::de::{DeserializeSeed, Deserializer, IgnoredAny, MapAccess, SeqAccess, Visitor};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{close_ring, Coord, Geometry, Polygon};

fn parse_error(path: &str, message: impl Into<String>) -> Error {
    Error::Parse { position: path.to_string(), message: message.into() }
}

fn position(v: &Value, path: &str) -> Result<Coord> {
    let Value::Array(items) = v else {
        return Err(parse_error(path, "position must be an array of numbers"));
    };
    if items.len() != 2 {
        return Err(parse_error(path, format!("position has {} elements; only 2D positions are supported", items.len())));
    }
    let num = |i: usize| {
        items[i].as_f64().ok_or_else(|| parse_error(&format!("{path}[{i}]"), "coordinate is not a number"))
    };
    Ok(Coord::new(num(0)?, num(1)?))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| parse_error(path, "expected an array"))
}

fn positions(v: &Value, path: &str) -> Result<Vec<Coord>> {
    array(v, path)?.iter().enumerate().map(|(i, p)| position(p, &format!("{path}[{i}]"))).collect()
}

fn polygon(v: &Value, path: &str) -> Result<Polygon> {
    let rings = array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut ring = positions(r, &format!("{path}[{i}]"))?;
            close_ring(&mut ring);
            Ok(ring)
        })
        .collect::<Result<_>>()?;
    Ok(Polygon { rings })
}

/// Converts a parsed GeoJSON geometry object. `null` becomes `Empty`.
pub fn geometry_from_value(v: &Value, path: &str) -> Result<Geometry> {
    geometry_at_depth(v, path, 0)
}

fn geometry_at_depth(v: &Value, path: &str, depth: usize) -> Result<Geometry> {
    let obj = match v {
        Value::Null => return Ok(Geometry::Empty),
        Value::Object(o) => o,
        _ => return Err(parse_error(path, "geometry must be an object or null")),
    };
    let ty = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| parse_error(path, "geometry lacks a string \"type\""))?;
    if ty == "GeometryCollection" {
        if depth >= crate::columnar::MAX_COLLECTION_DEPTH {
            return Err(parse_error(path, "GeometryCollection nested too deeply"));
        }
        let gpath = format!("{path}.geometries");
        let members = obj.get("geometries").ok_or_else(|| parse_error(path, "GeometryCollection lacks \"geometries\""))?;
        return Ok(Geometry::GeometryCollection(
            array(members, &gpath)?
                .iter()
                .enumerate()
                .map(|(i, g)| geometry_at_depth(g, &format!("{gpath}[{i}]"), depth + 1))
                .collect::<Result<_>>()?,
        ));
    }
    let cpath = format!("{path}.coordinates");
    let coords = obj.get("coordinates").ok_or_else(|| parse_error(path, format!("{ty} lacks \"coordinates\"")))?;
    if !matches!(ty, "Point" | "LineString" | "Polygon" | "MultiPoint" | "MultiLineString" | "MultiPolygon") {
        return Err(parse_error(&format!("{path}.type"), format!("unknown geometry type '{ty}'")));
    }
    let items = array(coords, &cpath)?;
    if items.is_empty() {
        return Ok(Geometry::Empty);
    }
    let item_path = |i: usize| format!("{cpath}[{i}]");
    Ok(match ty {
        "Point" => Geometry::Point(position(coords, &cpath)?),
        "LineString" => Geometry::LineString(positions(coords, &cpath)?),
        "Polygon" => Geometry::Polygon(polygon(coords, &cpath)?),
        "MultiPoint" => Geometry::MultiPoint(positions(coords, &cpath)?),
        "MultiLineString" => Geometry::MultiLineString(
            items.iter().enumerate().map(|(i, c)| positions(c, &item_path(i))).collect::<Result<_>>()?,
        ),
        _ => Geometry::MultiPolygon(items.iter().enumerate().map(|(i, c)| polygon(c, &item_path(i))).collect::<Result<_>>()?),
    })
}

/// Converts a Feature or bare geometry object.
fn feature_or_geometry(v: &Value, path: &str) -> Result<Geometry> {
    match v.get("type").and_then(Value::as_str) {
        Some("Feature") => {
            let g = v.get("geometry").ok_or_else(|| parse_error(path, "Feature lacks \"geometry\""))?;
            geometry_from_value(g, &format!("{path}.geometry"))
        }
        Some("FeatureCollection") => Err(parse_error(path, "nested FeatureCollection")),
        _ => geometry_from_value(v, path),
    }
}

type Sink<'a> = &'a mut dyn FnMut(Geometry) -> Result<()>;

/// Holds the first non-JSON error raised while streaming, so it survives the
/// trip through serde's error type.
struct Ctx<'a> {
    sink: Sink<'a>,
    error: Option<Error>,
    count: u64,
}

struct FeaturesSeed<'c, 'a>(&'c RefCell<Ctx<'a>>);

impl<'de> DeserializeSeed<'de> for FeaturesSeed<'_, '_> {
    type Value = ();

    fn deserialize<D: Deserializer<'de>>(self, d: D) -> std::result::Result<(), D::Error> {
        d.deserialize_seq(self)
    }
}

impl<'de> Visitor<'de> for FeaturesSeed<'_, '_> {
    type Value = ();

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("an array of features")
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<(), A::Error> {
        let mut i = 0usize;
        while let Some(v) = seq.next_element::<Value>()? {
            let path = format!("features[{i}]");
            if v.get("type").and_then(Value::as_str) != Some("Feature") {
                return Err(serde::de::Error::custom(format!("{path}: expected a Feature")));
            }
            let mut ctx = self.0.borrow_mut();
            let outcome = feature_or_geometry(&v, &path).and_then(|g| (ctx.sink)(g));
            if let Err(e) = outcome {
                let msg = e.to_string();
                ctx.error = Some(e);
                return Err(serde::de::Error::custom(msg));
            }
            ctx.count += 1;
            i += 1;
        }
        Ok(())
    }
}

struct DocumentSeed<'c, 'a>(&'c RefCell<Ctx<'a>>);

impl<'de> DeserializeSeed<'de> for DocumentSeed<'_, '_> {
    type Value = ();

    fn deserialize<D: Deserializer<'de>>(self, d: D) -> std::result::Result<(), D::Error> {
        d.deserialize_map(self)
    }
}

impl<'de> Visitor<'de> for DocumentSeed<'_, '_> {
    type Value = ();

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a GeoJSON object")
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<(), A::Error> {
        let mut rest = Map::new();
        let mut streamed = false;
        while let Some(key) = map.next_key::<String>()? {
            match key.as_str() {
                "features" => {
                    if rest.get("type").is_some_and(|t| t != "FeatureCollection") {
                        return Err(serde::de::Error::custom("\"features\" outside a FeatureCollection"));
                    }
                    map.next_value_seed(FeaturesSeed(self.0))?;
                    streamed = true;
                }
                "properties" | "bbox" | "id" | "crs" => {
                    map.next_value::<IgnoredAny>()?;
                }
                _ => {
                    let v = map.next_value::<Value>()?;
                    rest.insert(key, v);
                }
            }
        }
        let ty = rest.get("type").and_then(Value::as_str).map(str::to_owned);
        match (ty.as_deref(), streamed) {
            (Some("FeatureCollection"), true) => Ok(()),
            (Some("FeatureCollection"), false) => Err(serde::de::Error::custom("FeatureCollection lacks \"features\"")),
            (_, true) => Err(serde::de::Error::custom("\"features\" outside a FeatureCollection")),
            (None, false) => Err(serde::de::Error::custom("object lacks a string \"type\"")),
            (Some(_), false) => {
                let mut ctx = self.0.borrow_mut();
                let outcome = feature_or_geometry(&Value::Object(rest), "$").and_then(|g| (ctx.sink)(g));
                if let Err(e) = outcome {
                    let msg = e.to_string();
                    ctx.error = Some(e);
                    return Err(serde::de::Error::custom(msg));
                }
                ctx.count += 1;
                Ok(())
            }
        }
    }
}

/// Parses a GeoJSON document from `input`, calling `sink` for each geometry
/// in document order. Returns the number of geometries delivered.
pub fn read_geojson<R: Read>(input: R, mut sink: impl FnMut(Geometry) -> Result<()>) -> Result<u64> {
    let ctx = RefCell::new(Ctx { sink: &mut sink, error: None, count: 0 });
    let mut de = serde_json::Deserializer::from_reader(std::io::BufReader::new(input));
    let outcome = DocumentSeed(&ctx).deserialize(&mut de).and_then(|()| de.end());
    let mut ctx = ctx.into_inner();
    match outcome {
        Ok(()) => Ok(ctx.count),
        Err(_) if ctx.error.is_some() => Err(ctx.error.take().expect("checked")),
        Err(e) if e.is_io() => Err(Error::Io(e.into())),
        Err(e) => Err(Error::Parse { position: format!("line {} column {}", e.line(), e.column()), message: e.to_string() }),
    }
}

/// Parses a whole GeoJSON document held in memory.
pub fn parse_geojson(text: &str) -> Result<Vec<Geometry>> {
    let mut out = Vec::new();
    read_geojson(text.as_bytes(), |g| {
        out.push(g);
        Ok(())
    })?;
    Ok(out)
}

fn num(v: f64) -> Result<Value> {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .ok_or_else(|| Error::InvalidArgument(format!("GeoJSON cannot represent coordinate {v}")))
}

fn pos(c: &Coord) -> Result<Value> {
    Ok(Value::Array(vec![num(c.x)?, num(c.y)?]))
}

fn seq(cs: &[Coord]) -> Result<Value> {
    Ok(Value::Array(cs.iter().map(pos).collect::<Result<_>>()?))
}

fn rings(p: &Polygon) -> Result<Value> {
    Ok(Value::Array(p.rings.iter().map(|r| seq(r)).collect::<Result<_>>()?))
}

/// GeoJSON geometry object for `g`. `Empty` is written as a Point with no
/// coordinates. Non-finite coordinates are rejected.
pub fn geometry_to_value(g: &Geometry) -> Result<Value> {
    let (ty, coords) = match g {
        Geometry::Empty => ("Point", Value::Array(vec![])),
        Geometry::Point(c) => ("Point", pos(c)?),
        Geometry::LineString(cs) => ("LineString", seq(cs)?),
        Geometry::Polygon(p) => ("Polygon", rings(p)?),
        Geometry::MultiPoint(cs) => ("MultiPoint", seq(cs)?),
        Geometry::MultiLineString(ls) => ("MultiLineString", Value::Array(ls.iter().map(|l| seq(l)).collect::<Result<_>>()?)),
        Geometry::MultiPolygon(ps) => ("MultiPolygon", Value::Array(ps.iter().map(rings).collect::<Result<_>>()?)),
        Geometry::GeometryCollection(gs) => {
            let members = gs.iter().map(geometry_to_value).collect::<Result<_>>()?;
            return Ok(serde_json::json!({ "type": "GeometryCollection", "geometries": Value::Array(members) }));
        }
    };
    Ok(serde_json::json!({ "type": ty, "coordinates": coords }))
}

/// Incremental FeatureCollection writer; features carry empty properties.
pub struct GeoJsonWriter<W: Write> {
    out: std::io::BufWriter<W>,
    count: u64,
}

impl<W: Write> GeoJsonWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut out = std::io::BufWriter::new(out);
        out.write_all(b"{\"type\":\"FeatureCollection\",\"features\":[")?;
        Ok(GeoJsonWriter { out, count: 0 })
    }

    pub fn write(&mut self, g: &Geometry) -> Result<()> {
        let value = geometry_to_value(g)?;
        if self.count > 0 {
            self.out.write_all(b",")?;
        }
        self.out.write_all(b"\n{\"type\":\"Feature\",\"properties\":{},\"geometry\":")?;
        serde_json::to_writer(&mut self.out, &value).map_err(std::io::Error::from)?;
        self.out.write_all(b"}")?;
        self.count += 1;
        Ok(())
    }

    /// Closes the document and returns the number of features written.
    pub fn finish(mut self) -> Result<u64> {
        self.out.write_all(b"\n]}\n")?;
        self.out.flush()?;
        Ok(self.count)
    }
}

/// Writes `geometries` as one FeatureCollection.
pub fn write_geojson<W: Write>(out: W, geometries: impl IntoIterator<Item = Geometry>) -> Result<u64> {
    let mut w = GeoJsonWriter::new(out)?;
    for g in geometries {
        w.write(&g)?;
    }
    w.finish()
}
