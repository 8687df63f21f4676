//! Deterministic clustered test data.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{Coord, Geometry, Polygon, Rect};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub count: u64,
    pub clusters: usize,
    /// Standard deviation of each cluster in coordinate units.
    pub stddev: f64,
    /// Cluster centers are drawn uniformly from this box.
    pub bbox: Rect,
    pub seed: u64,
    /// When set, each record is a regular polygon of this radius around the
    /// sampled point instead of the point itself.
    pub polygon_radius: Option<f64>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            count: 1_000_000,
            clusters: 100,
            stddev: 3.6,
            bbox: Rect { xmin: -180.0, ymin: -90.0, xmax: 180.0, ymax: 90.0 },
            seed: 0,
            polygon_radius: None,
        }
    }
}

impl SyntheticSpec {
    /// Spec whose stddev is `fraction` of the domain width.
    pub fn with_relative_stddev(mut self, fraction: f64) -> Self {
        self.stddev = fraction * self.bbox.width();
        self
    }
}

pub struct SyntheticIter {
    rng: ChaCha8Rng,
    centers: Vec<Coord>,
    noise: Normal<f64>,
    remaining: u64,
    polygon_radius: Option<f64>,
}

impl Iterator for SyntheticIter {
    type Item = Geometry;

    fn next(&mut self) -> Option<Geometry> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let c = self.centers[self.rng.random_range(0..self.centers.len())];
        let p = Coord::new(c.x + self.noise.sample(&mut self.rng), c.y + self.noise.sample(&mut self.rng));
        Some(match self.polygon_radius {
            None => Geometry::Point(p),
            Some(r) => {
                let k = self.rng.random_range(4..=12usize);
                let phase = self.rng.random::<f64>() * TAU;
                let mut ring: Vec<Coord> = (0..k)
                    .map(|i| {
                        let a = phase - TAU * i as f64 / k as f64;
                        Coord::new(p.x + r * a.cos(), p.y + r * a.sin())
                    })
                    .collect();
                ring.push(ring[0]);
                Geometry::Polygon(Polygon { rings: vec![ring] })
            }
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

/// Gaussian clusters around uniformly placed centers. The same spec always
/// produces the same sequence.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticIter> {
    if spec.count > 0 && spec.clusters == 0 {
        return Err(Error::InvalidArgument("synthetic data needs at least one cluster".into()));
    }
    if !(spec.stddev.is_finite() && spec.stddev >= 0.0) {
        return Err(Error::InvalidArgument(format!("invalid cluster stddev {}", spec.stddev)));
    }
    let noise = Normal::new(0.0, spec.stddev).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    if let Some(r) = spec.polygon_radius {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid polygon radius {r}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let b = spec.bbox;
    let centers = (0..spec.clusters)
        .map(|_| Coord::new(b.xmin + rng.random::<f64>() * b.width(), b.ymin + rng.random::<f64>() * b.height()))
        .collect();
    Ok(SyntheticIter { rng, centers, noise, remaining: spec.count, polygon_radius: spec.polygon_radius })
}

/// Deterministic in-place shuffle.
pub fn shuffle<T>(items: &mut [T], seed: u64) {
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
}

/// Coordinates that stress the codec: NaNs with assorted payloads, signed
/// zeros, infinities, subnormals and extremes.
pub const SPECIAL_VALUES: [f64; 12] = [
    f64::NAN,
    0.0,
    -0.0,
    f64::INFINITY,
    f64::NEG_INFINITY,
    5e-324,
    -2.2250738585072e-308,
    f64::MIN_POSITIVE,
    f64::MAX,
    f64::MIN,
    f64::EPSILON,
    1e-300,
];

/// Random geometries of every storable type: empties, points, lines,
/// polygons with holes and multi-part forms. With `adversarial`, some
/// coordinates are replaced by [`SPECIAL_VALUES`] or NaNs with random
/// payloads. Multipolygon shells stay finite so their orientation is defined.
pub struct RandomGeometries {
    rng: ChaCha8Rng,
    remaining: u64,
    adversarial: bool,
}

pub fn random_geometries(count: u64, seed: u64, adversarial: bool) -> RandomGeometries {
    RandomGeometries { rng: ChaCha8Rng::seed_from_u64(seed), remaining: count, adversarial }
}

impl RandomGeometries {
    fn value(&mut self, center: f64, special: bool) -> f64 {
        if special && self.adversarial && self.rng.random_bool(0.08) {
            if self.rng.random_bool(0.2) {
                let payload = self.rng.random::<u64>() & ((1 << 51) - 1);
                let sign = if self.rng.random() { 1u64 << 63 } else { 0 };
                return f64::from_bits(sign | 0x7ff8_0000_0000_0000 | payload);
            }
            if self.rng.random_bool(0.2) {
                return f64::from_bits(self.rng.random_range(1..1u64 << 52));
            }
            return SPECIAL_VALUES[self.rng.random_range(0..SPECIAL_VALUES.len())];
        }
        center + self.rng.random_range(-1.0..1.0)
    }

    fn coord(&mut self, c: Coord, special: bool) -> Coord {
        Coord::new(self.value(c.x, special), self.value(c.y, special))
    }

    fn center(&mut self) -> Coord {
        Coord::new(self.rng.random_range(-180.0..180.0), self.rng.random_range(-90.0..90.0))
    }

    fn line(&mut self, special: bool) -> Vec<Coord> {
        let c = self.center();
        let n = self.rng.random_range(2..20);
        let mut out: Vec<Coord> = (0..n).map(|_| self.coord(c, special)).collect();
        if self.rng.random_bool(0.1) {
            out.push(*out.last().expect("non-empty"));
        }
        out
    }

    fn ring(&mut self, c: Coord, radius: f64, special: bool) -> Vec<Coord> {
        let k = self.rng.random_range(3..12usize);
        let dir = if self.rng.random() { 1.0 } else { -1.0 };
        let mut ring: Vec<Coord> = (0..k)
            .map(|i| {
                let a = dir * TAU * i as f64 / k as f64;
                let p = Coord::new(c.x + radius * a.cos(), c.y + radius * a.sin());
                if special && self.adversarial && self.rng.random_bool(0.05) {
                    self.coord(p, true)
                } else {
                    p
                }
            })
            .collect();
        ring.push(ring[0]);
        ring
    }

    fn polygon(&mut self, special_shell: bool) -> Polygon {
        let c = self.center();
        let mut rings = vec![self.ring(c, 1.0, special_shell)];
        for _ in 0..self.rng.random_range(0..4) {
            let off = Coord::new(c.x + self.rng.random_range(-0.4..0.4), c.y + self.rng.random_range(-0.4..0.4));
            rings.push(self.ring(off, 0.1, true));
        }
        Polygon { rings }
    }
}

impl Iterator for RandomGeometries {
    type Item = Geometry;

    fn next(&mut self) -> Option<Geometry> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        Some(match self.rng.random_range(0..7) {
            0 => Geometry::Empty,
            1 => {
                let c = self.center();
                Geometry::Point(self.coord(c, true))
            }
            2 => Geometry::LineString(self.line(true)),
            3 => Geometry::Polygon(self.polygon(true)),
            4 => {
                let c = self.center();
                Geometry::MultiPoint((0..self.rng.random_range(1..10)).map(|_| self.coord(c, true)).collect())
            }
            5 => Geometry::MultiLineString((0..self.rng.random_range(1..5)).map(|_| self.line(true)).collect()),
            _ => Geometry::MultiPolygon((0..self.rng.random_range(1..4)).map(|_| self.polygon(false)).collect()),
        })
    }
}
