//! In-memory geometry model.
//!
//! Coordinates compare by bit pattern, so `NaN` payloads, `-0.0` and infinities
//! survive equality checks exactly as they survive the file format.

use std::fmt;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};

/// A 2D coordinate. Equality and hashing are bit-exact.
#[derive(Clone, Copy, Default)]
pub struct Coord {
    pub x: f64,
    pub y: f64,
}

impl Coord {
    pub const fn new(x: f64, y: f64) -> Self {
        Coord { x, y }
    }

    pub fn bits(&self) -> (u64, u64) {
        (self.x.to_bits(), self.y.to_bits())
    }
}

impl PartialEq for Coord {
    fn eq(&self, other: &Self) -> bool {
        self.bits() == other.bits()
    }
}

impl Eq for Coord {}

impl Hash for Coord {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.bits().hash(state);
    }
}

impl fmt::Debug for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {:?})", self.x, self.y)
    }
}

impl From<(f64, f64)> for Coord {
    fn from((x, y): (f64, f64)) -> Self {
        Coord { x, y }
    }
}

/// Builds a coordinate list from `(x, y)` tuples.
pub fn coords(points: &[(f64, f64)]) -> Vec<Coord> {
    points.iter().copied().map(Coord::from).collect()
}

/// Geometry type codes as stored in the TYPE column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum GeometryType {
    Empty = 0,
    Point = 1,
    LineString = 2,
    Polygon = 3,
    MultiPoint = 4,
    MultiLineString = 5,
    MultiPolygon = 6,
}

impl GeometryType {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => GeometryType::Empty,
            1 => GeometryType::Point,
            2 => GeometryType::LineString,
            3 => GeometryType::Polygon,
            4 => GeometryType::MultiPoint,
            5 => GeometryType::MultiLineString,
            6 => GeometryType::MultiPolygon,
            other => return Err(Error::format(format!("unknown geometry type code {other}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            GeometryType::Empty => "Empty",
            GeometryType::Point => "Point",
            GeometryType::LineString => "LineString",
            GeometryType::Polygon => "Polygon",
            GeometryType::MultiPoint => "MultiPoint",
            GeometryType::MultiLineString => "MultiLineString",
            GeometryType::MultiPolygon => "MultiPolygon",
        }
    }
}

/// A polygon: the first ring is the shell, the rest are holes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Polygon {
    pub rings: Vec<Vec<Coord>>,
}

impl Polygon {
    pub fn new(shell: Vec<Coord>, holes: Vec<Vec<Coord>>) -> Self {
        let mut rings = Vec::with_capacity(1 + holes.len());
        rings.push(shell);
        rings.extend(holes);
        Polygon { rings }
    }

    pub fn shell(&self) -> &[Coord] {
        self.rings.first().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn holes(&self) -> &[Vec<Coord>] {
        self.rings.get(1..).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Geometry {
    Empty,
    Point(Coord),
    LineString(Vec<Coord>),
    Polygon(Polygon),
    MultiPoint(Vec<Coord>),
    MultiLineString(Vec<Vec<Coord>>),
    MultiPolygon(Vec<Polygon>),
    GeometryCollection(Vec<Geometry>),
}

impl Geometry {
    /// Type code for storage. Collections have none; they are flattened first.
    pub fn geometry_type(&self) -> Option<GeometryType> {
        Some(match self {
            Geometry::Empty => GeometryType::Empty,
            Geometry::Point(_) => GeometryType::Point,
            Geometry::LineString(_) => GeometryType::LineString,
            Geometry::Polygon(_) => GeometryType::Polygon,
            Geometry::MultiPoint(_) => GeometryType::MultiPoint,
            Geometry::MultiLineString(_) => GeometryType::MultiLineString,
            Geometry::MultiPolygon(_) => GeometryType::MultiPolygon,
            Geometry::GeometryCollection(_) => return None,
        })
    }

    /// Visits every coordinate in storage order.
    pub fn for_each_coord(&self, f: &mut impl FnMut(&Coord)) {
        match self {
            Geometry::Empty => {}
            Geometry::Point(c) => f(c),
            Geometry::LineString(cs) | Geometry::MultiPoint(cs) => cs.iter().for_each(f),
            Geometry::Polygon(p) => p.rings.iter().flatten().for_each(f),
            Geometry::MultiLineString(ls) => ls.iter().flatten().for_each(f),
            Geometry::MultiPolygon(ps) => ps.iter().flat_map(|p| p.rings.iter().flatten()).for_each(f),
            Geometry::GeometryCollection(gs) => gs.iter().for_each(|g| g.for_each_coord(f)),
        }
    }

    pub fn coord_count(&self) -> usize {
        let mut n = 0;
        self.for_each_coord(&mut |_| n += 1);
        n
    }

    /// Minimum bounding rectangle, ignoring NaN ordinates. `None` when no
    /// finite-or-infinite ordinate exists on some axis.
    pub fn mbr(&self) -> Option<Rect> {
        let mut acc = RectAccumulator::default();
        self.for_each_coord(&mut |c| acc.add(c));
        acc.finish()
    }

    /// Checks the structural invariants of the in-memory type.
    pub fn validate(&self) -> Result<()> {
        match self {
            Geometry::Empty | Geometry::Point(_) => Ok(()),
            Geometry::LineString(cs) => validate_line(cs),
            Geometry::Polygon(p) => validate_polygon(p),
            Geometry::MultiPoint(cs) => {
                if cs.is_empty() {
                    return Err(Error::invalid("MultiPoint has no points"));
                }
                Ok(())
            }
            Geometry::MultiLineString(ls) => {
                if ls.is_empty() {
                    return Err(Error::invalid("MultiLineString has no lines"));
                }
                ls.iter().try_for_each(|l| validate_line(l))
            }
            Geometry::MultiPolygon(ps) => {
                if ps.is_empty() {
                    return Err(Error::invalid("MultiPolygon has no polygons"));
                }
                ps.iter().try_for_each(validate_polygon)
            }
            Geometry::GeometryCollection(gs) => gs.iter().try_for_each(Geometry::validate),
        }
    }
}

fn validate_line(cs: &[Coord]) -> Result<()> {
    if cs.len() < 2 {
        return Err(Error::invalid(format!("LineString needs at least 2 coordinates, got {}", cs.len())));
    }
    Ok(())
}

pub(crate) fn validate_ring(ring: &[Coord]) -> Result<()> {
    if ring.len() < 4 {
        return Err(Error::invalid(format!("ring needs at least 4 coordinates, got {}", ring.len())));
    }
    if ring.first() != ring.last() {
        return Err(Error::invalid("ring is not closed"));
    }
    Ok(())
}

fn validate_polygon(p: &Polygon) -> Result<()> {
    if p.rings.is_empty() {
        return Err(Error::invalid("Polygon has no rings"));
    }
    p.rings.iter().try_for_each(|r| validate_ring(r))
}

/// Closes a ring in place by appending its first coordinate if needed.
pub fn close_ring(ring: &mut Vec<Coord>) {
    if let (Some(first), Some(last)) = (ring.first().copied(), ring.last()) {
        if first != *last {
            ring.push(first);
        }
    }
}

/// Axis-aligned rectangle with closed bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        if !(xmin <= xmax && ymin <= ymax) {
            return Err(Error::InvalidArgument(format!(
                "rectangle requires xmin <= xmax and ymin <= ymax, got [{xmin}, {ymin}, {xmax}, {ymax}]"
            )));
        }
        Ok(Rect { xmin, ymin, xmax, ymax })
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.xmin <= other.xmax && other.xmin <= self.xmax && self.ymin <= other.ymax && other.ymin <= self.ymax
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn center(&self) -> Coord {
        Coord::new(self.xmin / 2.0 + self.xmax / 2.0, self.ymin / 2.0 + self.ymax / 2.0)
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect {
            xmin: self.xmin.min(other.xmin),
            ymin: self.ymin.min(other.ymin),
            xmax: self.xmax.max(other.xmax),
            ymax: self.ymax.max(other.ymax),
        }
    }
}

/// Folds coordinates into a bounding rectangle, skipping NaN ordinates.
#[derive(Debug, Clone, Copy)]
pub struct RectAccumulator {
    xmin: f64,
    ymin: f64,
    xmax: f64,
    ymax: f64,
}

impl Default for RectAccumulator {
    fn default() -> Self {
        RectAccumulator {
            xmin: f64::INFINITY,
            ymin: f64::INFINITY,
            xmax: f64::NEG_INFINITY,
            ymax: f64::NEG_INFINITY,
        }
    }
}

impl RectAccumulator {
    pub fn add(&mut self, c: &Coord) {
        if !c.x.is_nan() {
            self.xmin = self.xmin.min(c.x);
            self.xmax = self.xmax.max(c.x);
        }
        if !c.y.is_nan() {
            self.ymin = self.ymin.min(c.y);
            self.ymax = self.ymax.max(c.y);
        }
    }

    pub fn add_rect(&mut self, r: &Rect) {
        self.add(&Coord::new(r.xmin, r.ymin));
        self.add(&Coord::new(r.xmax, r.ymax));
    }

    pub fn finish(&self) -> Option<Rect> {
        (self.xmin <= self.xmax && self.ymin <= self.ymax).then_some(Rect {
            xmin: self.xmin,
            ymin: self.ymin,
            xmax: self.xmax,
            ymax: self.ymax,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coord_equality_is_bitwise() {
        let nan_a = f64::from_bits(0x7ff8_0000_0000_0001);
        let nan_b = f64::from_bits(0x7ff8_0000_0000_0002);
        assert_eq!(Coord::new(nan_a, 0.0), Coord::new(nan_a, 0.0));
        assert_ne!(Coord::new(nan_a, 0.0), Coord::new(nan_b, 0.0));
        assert_ne!(Coord::new(0.0, 0.0), Coord::new(-0.0, 0.0));
    }

    #[test]
    fn type_codes() {
        for code in 0..=6u8 {
            assert_eq!(GeometryType::from_code(code).unwrap().code(), code);
        }
        assert!(matches!(GeometryType::from_code(7), Err(Error::Format(_))));
    }

    #[test]
    fn validation_rejects_bad_rings() {
        let open = Geometry::Polygon(Polygon::new(coords(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.)]), vec![]));
        assert!(open.validate().is_err());
        let short = Geometry::Polygon(Polygon::new(coords(&[(0., 0.), (1., 0.), (0., 0.)]), vec![]));
        assert!(short.validate().is_err());
        assert!(Geometry::LineString(coords(&[(0., 0.)])).validate().is_err());
        assert!(Geometry::MultiPoint(vec![]).validate().is_err());
        assert!(Geometry::MultiPolygon(vec![]).validate().is_err());
    }

    #[test]
    fn close_ring_appends_first() {
        let mut ring = coords(&[(3., 2.), (4., 2.), (4., 3.)]);
        close_ring(&mut ring);
        assert_eq!(ring.len(), 4);
        assert_eq!(ring[0], ring[3]);
        close_ring(&mut ring);
        assert_eq!(ring.len(), 4);
    }

    #[test]
    fn mbr_skips_nan() {
        let g = Geometry::MultiPoint(coords(&[(1., f64::NAN), (f64::NAN, 5.), (3., 2.)]));
        assert_eq!(g.mbr(), Some(Rect { xmin: 1., ymin: 2., xmax: 3., ymax: 5. }));
        assert_eq!(Geometry::Point(Coord::new(f64::NAN, 1.)).mbr(), None);
        assert_eq!(Geometry::Empty.mbr(), None);
    }

    #[test]
    fn rect_rejects_inverted() {
        assert!(Rect::new(1., 0., 0., 1.).is_err());
        assert!(Rect::new(0., f64::NAN, 1., 1.).is_err());
        let a = Rect::new(0., 0., 1., 1.).unwrap();
        let b = Rect::new(1., 1., 2., 2.).unwrap();
        assert!(a.intersects(&b));
    }
}
