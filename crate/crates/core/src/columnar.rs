//! Mapping between geometries and the unified type/part/coordinate columns.
//!
//! Every record is a type code plus a stream of coordinates tagged with
//! repetition and definition levels:
//!
//! | rep | meaning                          |
//! |-----|----------------------------------|
//! | 0   | first value of a new record      |
//! | 1   | first value of a new part        |
//! | 2   | continues the current part       |
//!
//! Present coordinates carry definition level 2. An empty geometry has no
//! coordinate values; the container writes a single `(rep 0, def 0)` level
//! entry for it.
//!
//! Polygon rings are normalized on write: shells clockwise, holes
//! counter-clockwise. MultiPolygon reassembly relies on that convention.

use crate::error::{Error, Result};
use crate::geometry::{validate_ring, Coord, Geometry, GeometryType, Polygon};

pub const REP_RECORD: u8 = 0;
pub const REP_PART: u8 = 1;
pub const REP_CONTINUE: u8 = 2;

pub const DEF_EMPTY: u8 = 0;
pub const DEF_PRESENT: u8 = 2;

pub const MAX_COLLECTION_DEPTH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeveledCoordinate {
    pub coord: Coord,
    pub rep_level: u8,
    pub def_level: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnarGeometry {
    pub geometry_type: GeometryType,
    pub values: Vec<LeveledCoordinate>,
}

impl ColumnarGeometry {
    /// Splits the value stream into parts at repetition levels 0 and 1.
    pub fn parts(&self) -> Vec<Vec<Coord>> {
        let mut parts: Vec<Vec<Coord>> = Vec::new();
        for v in &self.values {
            if v.rep_level != REP_CONTINUE || parts.is_empty() {
                parts.push(Vec::new());
            }
            parts.last_mut().expect("pushed above").push(v.coord);
        }
        parts
    }

    pub fn from_parts(geometry_type: GeometryType, parts: &[Vec<Coord>]) -> Self {
        let mut values = Vec::with_capacity(parts.iter().map(Vec::len).sum());
        for (pi, part) in parts.iter().enumerate() {
            for (ci, &coord) in part.iter().enumerate() {
                let rep_level = match (pi, ci) {
                    (0, 0) => REP_RECORD,
                    (_, 0) => REP_PART,
                    _ => REP_CONTINUE,
                };
                values.push(LeveledCoordinate { coord, rep_level, def_level: DEF_PRESENT });
            }
        }
        ColumnarGeometry { geometry_type, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingOrientation {
    Cw,
    Ccw,
    Degenerate,
}

impl RingOrientation {
    pub fn reversed(self) -> Self {
        match self {
            RingOrientation::Cw => RingOrientation::Ccw,
            RingOrientation::Ccw => RingOrientation::Cw,
            RingOrientation::Degenerate => RingOrientation::Degenerate,
        }
    }
}

/// Orientation from the sign of the shoelace sum, y-up convention
/// (positive area is counter-clockwise).
///
/// The edge terms are split by sign and each half is summed in ascending
/// magnitude order, so reversing a ring swaps the two halves exactly and the
/// result flips even when rounding dominates a near-zero area.
pub fn ring_orientation(ring: &[Coord]) -> RingOrientation {
    let mut pos = Vec::with_capacity(ring.len());
    let mut neg = Vec::with_capacity(ring.len());
    for w in ring.windows(2) {
        let t = w[0].x * w[1].y - w[1].x * w[0].y;
        if t.is_nan() {
            return RingOrientation::Degenerate;
        }
        if t > 0.0 {
            pos.push(t);
        } else if t < 0.0 {
            neg.push(-t);
        }
    }
    let sum = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.iter().sum::<f64>()
    };
    let area = sum(&mut pos) - sum(&mut neg);
    if area > 0.0 {
        RingOrientation::Ccw
    } else if area < 0.0 {
        RingOrientation::Cw
    } else {
        RingOrientation::Degenerate
    }
}

fn oriented(ring: &[Coord], want: RingOrientation) -> Vec<Coord> {
    let mut out = ring.to_vec();
    if ring_orientation(ring) == want.reversed() {
        out.reverse();
    }
    out
}

fn normalize_polygon(p: &Polygon) -> Polygon {
    Polygon {
        rings: p
            .rings
            .iter()
            .enumerate()
            .map(|(i, r)| oriented(r, if i == 0 { RingOrientation::Cw } else { RingOrientation::Ccw }))
            .collect(),
    }
}

/// Applies the storage orientation convention: shells CW, holes CCW.
/// Degenerate rings are left untouched.
pub fn normalize_orientation(g: &Geometry) -> Geometry {
    match g {
        Geometry::Polygon(p) => Geometry::Polygon(normalize_polygon(p)),
        Geometry::MultiPolygon(ps) => Geometry::MultiPolygon(ps.iter().map(normalize_polygon).collect()),
        Geometry::GeometryCollection(gs) => Geometry::GeometryCollection(gs.iter().map(normalize_orientation).collect()),
        other => other.clone(),
    }
}

/// Decomposes a geometry into its columnar form.
pub fn to_columnar(g: &Geometry) -> Result<ColumnarGeometry> {
    g.validate()?;
    let (ty, parts): (GeometryType, Vec<Vec<Coord>>) = match g {
        Geometry::Empty => return Ok(ColumnarGeometry { geometry_type: GeometryType::Empty, values: Vec::new() }),
        Geometry::Point(c) => (GeometryType::Point, vec![vec![*c]]),
        Geometry::LineString(cs) => (GeometryType::LineString, vec![cs.clone()]),
        Geometry::Polygon(p) => (GeometryType::Polygon, normalize_polygon(p).rings),
        Geometry::MultiPoint(cs) => (GeometryType::MultiPoint, cs.iter().map(|c| vec![*c]).collect()),
        Geometry::MultiLineString(ls) => (GeometryType::MultiLineString, ls.clone()),
        Geometry::MultiPolygon(ps) => {
            let mut rings = Vec::new();
            for (i, p) in ps.iter().enumerate() {
                let p = normalize_polygon(p);
                if ring_orientation(p.shell()) != RingOrientation::Cw {
                    return Err(Error::invalid(format!(
                        "MultiPolygon member {i} has a zero-area shell and cannot be reassembled"
                    )));
                }
                rings.extend(p.rings);
            }
            (GeometryType::MultiPolygon, rings)
        }
        Geometry::GeometryCollection(_) => {
            return Err(Error::invalid("GeometryCollection must be flattened before columnar encoding"))
        }
    };
    Ok(ColumnarGeometry::from_parts(ty, &parts))
}

/// Reassembles a geometry from its columnar form.
pub fn from_columnar(c: &ColumnarGeometry) -> Result<Geometry> {
    check_levels(&c.values)?;
    let parts = c.parts();
    let ty = c.geometry_type;
    if ty == GeometryType::Empty {
        if !parts.is_empty() {
            return Err(Error::structure("empty geometry carries coordinates"));
        }
        return Ok(Geometry::Empty);
    }
    if parts.is_empty() {
        return Err(Error::structure(format!("{} record has no coordinates", ty.name())));
    }
    let single_coord = |parts: &[Vec<Coord>]| -> Result<Vec<Coord>> {
        parts
            .iter()
            .map(|p| match p.as_slice() {
                [c] => Ok(*c),
                _ => Err(Error::structure(format!("{} part must hold exactly one coordinate", ty.name()))),
            })
            .collect()
    };
    let line = |p: Vec<Coord>| -> Result<Vec<Coord>> {
        if p.len() < 2 {
            return Err(Error::structure("line part shorter than 2 coordinates"));
        }
        Ok(p)
    };
    let ring = |p: Vec<Coord>| -> Result<Vec<Coord>> {
        validate_ring(&p).map_err(|e| Error::structure(e.to_string()))?;
        Ok(p)
    };
    let g = match ty {
        GeometryType::Empty => unreachable!(),
        GeometryType::Point => {
            if parts.len() != 1 {
                return Err(Error::structure("Point must have exactly one part"));
            }
            Geometry::Point(single_coord(&parts)?[0])
        }
        GeometryType::LineString => {
            if parts.len() != 1 {
                return Err(Error::structure("LineString must have exactly one part"));
            }
            Geometry::LineString(line(parts.into_iter().next().expect("one part"))?)
        }
        GeometryType::Polygon => Geometry::Polygon(Polygon { rings: parts.into_iter().map(ring).collect::<Result<_>>()? }),
        GeometryType::MultiPoint => Geometry::MultiPoint(single_coord(&parts)?),
        GeometryType::MultiLineString => Geometry::MultiLineString(parts.into_iter().map(line).collect::<Result<_>>()?),
        GeometryType::MultiPolygon => {
            let mut polygons = Vec::new();
            let mut pending: Option<Polygon> = None;
            for p in parts {
                let r = ring(p)?;
                if ring_orientation(&r) == RingOrientation::Cw {
                    polygons.extend(pending.take());
                    pending = Some(Polygon { rings: vec![r] });
                } else {
                    match pending.as_mut() {
                        Some(poly) => poly.rings.push(r),
                        None => return Err(Error::structure("MultiPolygon starts with a hole")),
                    }
                }
            }
            polygons.extend(pending);
            Geometry::MultiPolygon(polygons)
        }
    };
    Ok(g)
}

fn check_levels(values: &[LeveledCoordinate]) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if v.def_level != DEF_PRESENT {
            return Err(Error::structure(format!("value {i} has definition level {}", v.def_level)));
        }
        let ok = match i {
            0 => v.rep_level == REP_RECORD,
            _ => v.rep_level == REP_PART || v.rep_level == REP_CONTINUE,
        };
        if !ok {
            return Err(Error::structure(format!("value {i} has repetition level {}", v.rep_level)));
        }
    }
    Ok(())
}

/// Depth-first flattening of nested collections.
pub fn flatten_collection(members: &[Geometry]) -> Result<Vec<Geometry>> {
    fn walk(members: &[Geometry], depth: usize, out: &mut Vec<Geometry>) -> Result<()> {
        if depth > MAX_COLLECTION_DEPTH {
            return Err(Error::invalid(format!("GeometryCollection nesting exceeds {MAX_COLLECTION_DEPTH} levels")));
        }
        for g in members {
            match g {
                Geometry::GeometryCollection(inner) => walk(inner, depth + 1, out)?,
                leaf => out.push(leaf.clone()),
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(members, 1, &mut out)?;
    Ok(out)
}

/// Expands a geometry into storable records: collections become their
/// flattened members, anything else is returned as-is.
pub fn records_of(g: Geometry) -> Result<Vec<Geometry>> {
    match g {
        Geometry::GeometryCollection(members) => flatten_collection(&members),
        other => Ok(vec![other]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::coords;

    fn reps(c: &ColumnarGeometry) -> Vec<u8> {
        c.values.iter().map(|v| v.rep_level).collect()
    }

    #[test]
    fn point_maps_to_one_part() {
        let c = to_columnar(&Geometry::Point(Coord::new(3., 2.))).unwrap();
        assert_eq!(c.geometry_type.code(), 1);
        assert_eq!(c.parts(), vec![coords(&[(3., 2.)])]);
        assert_eq!(reps(&c), vec![0]);
    }

    #[test]
    fn linestring_maps_to_one_part() {
        let c = to_columnar(&Geometry::LineString(coords(&[(1., 1.), (2., 3.), (1., 4.)]))).unwrap();
        assert_eq!(c.geometry_type.code(), 2);
        assert_eq!(c.parts(), vec![coords(&[(1., 1.), (2., 3.), (1., 4.)])]);
        assert_eq!(reps(&c), vec![0, 2, 2]);
    }

    #[test]
    fn polygon_with_hole() {
        let shell = coords(&[(1., 1.), (2., 4.), (5., 5.), (5., 1.), (1., 1.)]);
        let mut hole = coords(&[(3., 2.), (4., 2.), (4., 3.)]);
        crate::geometry::close_ring(&mut hole);
        let c = to_columnar(&Geometry::Polygon(Polygon::new(shell.clone(), vec![hole.clone()]))).unwrap();
        assert_eq!(c.geometry_type.code(), 3);
        assert_eq!(reps(&c), vec![0, 2, 2, 2, 2, 1, 2, 2, 2]);
        // shell already CW, hole already CCW: stored as given
        assert_eq!(c.parts(), vec![shell, hole]);
    }

    #[test]
    fn multipoint_one_part_per_point() {
        let c = to_columnar(&Geometry::MultiPoint(coords(&[(1., 3.), (2., 4.), (4., 3.)]))).unwrap();
        assert_eq!(c.geometry_type.code(), 4);
        assert_eq!(reps(&c), vec![0, 1, 1]);
    }

    #[test]
    fn empty_has_no_values() {
        let c = to_columnar(&Geometry::Empty).unwrap();
        assert_eq!(c.geometry_type.code(), 0);
        assert!(c.values.is_empty());
        assert_eq!(from_columnar(&c).unwrap(), Geometry::Empty);
    }

    #[test]
    fn orientation_cases() {
        assert_eq!(ring_orientation(&coords(&[(1., 1.), (2., 4.), (5., 5.), (5., 1.), (1., 1.)])), RingOrientation::Cw);
        assert_eq!(ring_orientation(&coords(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.), (0., 0.)])), RingOrientation::Ccw);
        assert_eq!(ring_orientation(&coords(&[(0., 0.), (1., 1.), (2., 2.), (0., 0.)])), RingOrientation::Degenerate);
    }

    #[test]
    fn figure6_multipolygon() {
        let parts = vec![
            coords(&[(2., 4.), (5., 5.), (5., 2.), (3., 2.), (2., 4.)]),
            coords(&[(3., 3.), (4., 3.), (4., 4.), (3., 3.)]),
            coords(&[(1., 1.), (1., 2.), (3., 1.), (1., 1.)]),
        ];
        let c = ColumnarGeometry::from_parts(GeometryType::MultiPolygon, &parts);
        let Geometry::MultiPolygon(ps) = from_columnar(&c).unwrap() else { panic!("not a multipolygon") };
        assert_eq!(ps.iter().map(|p| p.holes().len()).collect::<Vec<_>>(), vec![1, 0]);
    }

    #[test]
    fn multipolygon_hole_first_is_structural_error() {
        let parts = vec![coords(&[(0., 0.), (1., 0.), (1., 1.), (0., 0.)])];
        let c = ColumnarGeometry::from_parts(GeometryType::MultiPolygon, &parts);
        assert!(matches!(from_columnar(&c), Err(Error::Structure(_))));
    }

    #[test]
    fn degenerate_multipolygon_shell_rejected_on_write() {
        let g = Geometry::MultiPolygon(vec![Polygon::new(coords(&[(0., 0.), (1., 1.), (2., 2.), (0., 0.)]), vec![])]);
        assert!(to_columnar(&g).is_err());
    }

    #[test]
    fn collection_rejected_by_to_columnar() {
        assert!(to_columnar(&Geometry::GeometryCollection(vec![])).is_err());
    }

    #[test]
    fn flatten_cases() {
        let a = Geometry::Point(Coord::new(1., 1.));
        let b = Geometry::LineString(coords(&[(0., 0.), (1., 1.)]));
        let c = Geometry::Point(Coord::new(2., 2.));
        let gc = vec![a.clone(), Geometry::GeometryCollection(vec![b.clone(), c.clone()])];
        assert_eq!(flatten_collection(&gc).unwrap(), vec![a.clone(), b, c]);
        assert!(flatten_collection(&[]).unwrap().is_empty());
        let deep = vec![Geometry::GeometryCollection(vec![Geometry::GeometryCollection(vec![a.clone()])])];
        assert_eq!(flatten_collection(&deep).unwrap(), vec![a.clone()]);
    }

    #[test]
    fn flatten_depth_limit() {
        let mut g = Geometry::Point(Coord::new(0., 0.));
        for _ in 0..MAX_COLLECTION_DEPTH - 1 {
            g = Geometry::GeometryCollection(vec![g]);
        }
        // outermost member list counts as depth 1
        assert!(flatten_collection(&[g.clone()]).is_ok());
        assert!(flatten_collection(&[Geometry::GeometryCollection(vec![g])]).is_err());
    }

    #[test]
    fn unknown_levels_rejected() {
        let mut c = to_columnar(&Geometry::LineString(coords(&[(0., 0.), (1., 1.)]))).unwrap();
        c.values[1].rep_level = 0;
        assert!(from_columnar(&c).is_err());
    }
}
