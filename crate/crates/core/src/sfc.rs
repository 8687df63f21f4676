//! Batch-wise space-filling-curve sorting.
//!
//! Records are buffered into batches; each batch's bounding box is mapped onto
//! a 2^16 x 2^16 grid and records are stably sorted by the Z-order or Hilbert
//! key of their MBR center.

use std::collections::VecDeque;
use std::str::FromStr;

use crate::error::Error;
use crate::geometry::{Coord, Geometry, RectAccumulator};

pub const GRID_BITS: u32 = 16;
pub const GRID_MAX: u32 = (1 << GRID_BITS) - 1;
pub const DEFAULT_BATCH_SIZE: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum Curve {
    #[default]
    None,
    Z,
    Hilbert,
}

impl Curve {
    pub fn name(self) -> &'static str {
        match self {
            Curve::None => "none",
            Curve::Z => "z",
            Curve::Hilbert => "hilbert",
        }
    }
}

impl FromStr for Curve {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Curve::None),
            "z" | "zorder" | "z-order" | "morton" => Ok(Curve::Z),
            "hilbert" => Ok(Curve::Hilbert),
            other => Err(Error::InvalidArgument(format!("unknown curve '{other}' (expected none, z or hilbert)"))),
        }
    }
}

/// Spreads the bits of `v` into the even positions of a `u64`.
fn spread_bits(v: u32) -> u64 {
    let mut x = v as u64;
    x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

/// Morton interleave of two 32-bit values; x in even bits, y in odd bits.
pub fn morton_interleave(x: u32, y: u32) -> u64 {
    spread_bits(x) | (spread_bits(y) << 1)
}

/// Z-order key of a grid cell. Cells outside the grid are clamped.
pub fn z_key(cx: u32, cy: u32) -> u64 {
    morton_interleave(cx.min(GRID_MAX), cy.min(GRID_MAX))
}

/// Hilbert index of `(x, y)` on a `2^order x 2^order` grid.
pub fn hilbert_index(order: u32, x: u32, y: u32) -> u64 {
    assert!((1..=32).contains(&order), "hilbert order {order} out of range");
    let n: u64 = 1 << order;
    let (mut x, mut y) = (x as u64 & (n - 1), y as u64 & (n - 1));
    let mut d = 0u64;
    let mut s = n >> 1;
    while s > 0 {
        let rx = u64::from(x & s != 0);
        let ry = u64::from(y & s != 0);
        d += s * s * ((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                x = n - 1 - x;
                y = n - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s >>= 1;
    }
    d
}

/// Hilbert key at order 16. Cells outside the grid are clamped.
pub fn hilbert_key(cx: u32, cy: u32) -> u64 {
    hilbert_index(GRID_BITS, cx.min(GRID_MAX), cy.min(GRID_MAX))
}

/// Center of the geometry's MBR; `None` for geometries without a bounding box.
pub fn representative_point(g: &Geometry) -> Option<Coord> {
    g.mbr().map(|r| r.center())
}

/// Maps a batch's bounding box onto the grid.
#[derive(Debug, Clone, Copy)]
pub struct GridMapping {
    min: (f64, f64),
    scale: (f64, f64),
}

impl GridMapping {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Coord>) -> Self {
        let mut acc = RectAccumulator::default();
        for p in points {
            if p.x.is_finite() && p.y.is_finite() {
                acc.add(p);
            }
        }
        let axis = |lo: f64, hi: f64| {
            let extent = hi - lo;
            if extent > 0.0 && extent.is_finite() {
                (lo, (GRID_MAX as f64 + 1.0) / extent)
            } else {
                (lo, 0.0)
            }
        };
        match acc.finish() {
            Some(r) => {
                let (mx, sx) = axis(r.xmin, r.xmax);
                let (my, sy) = axis(r.ymin, r.ymax);
                GridMapping { min: (mx, my), scale: (sx, sy) }
            }
            None => GridMapping { min: (0.0, 0.0), scale: (0.0, 0.0) },
        }
    }

    fn axis_cell(v: f64, min: f64, scale: f64) -> u32 {
        if scale == 0.0 || v.is_nan() {
            return 0;
        }
        let c = ((v - min) * scale).floor();
        if c <= 0.0 {
            0
        } else if c >= GRID_MAX as f64 {
            GRID_MAX
        } else {
            c as u32
        }
    }

    pub fn cell(&self, p: &Coord) -> (u32, u32) {
        (Self::axis_cell(p.x, self.min.0, self.scale.0), Self::axis_cell(p.y, self.min.1, self.scale.1))
    }
}

fn curve_key(curve: Curve, cell: (u32, u32)) -> u64 {
    match curve {
        Curve::None => 0,
        Curve::Z => z_key(cell.0, cell.1),
        Curve::Hilbert => hilbert_key(cell.0, cell.1),
    }
}

/// Curve keys for a batch, computed against the batch's own bounding box.
/// Items without a representative point get key 0.
pub fn batch_keys<T>(items: &[T], rep_point: impl Fn(&T) -> Option<Coord>, curve: Curve) -> Vec<u64> {
    let reps: Vec<Option<Coord>> = items.iter().map(rep_point).collect();
    let grid = GridMapping::from_points(reps.iter().flatten());
    reps.iter().map(|r| r.map_or(0, |p| curve_key(curve, grid.cell(&p)))).collect()
}

/// Stably sorts one batch in place by curve key.
pub fn sort_batch_by<T>(items: &mut Vec<T>, rep_point: impl Fn(&T) -> Option<Coord>, curve: Curve) {
    if curve == Curve::None || items.len() < 2 {
        return;
    }
    let keys = batch_keys(items, rep_point, curve);
    let mut keyed: Vec<(u64, T)> = keys.into_iter().zip(items.drain(..)).collect();
    keyed.sort_by_key(|(k, _)| *k);
    items.extend(keyed.into_iter().map(|(_, t)| t));
}

pub fn sort_batch(records: &mut Vec<Geometry>, curve: Curve) {
    sort_batch_by(records, representative_point, curve);
}

/// Streaming adapter: buffers up to `batch_size` records, sorts, emits.
pub struct SortStream<I> {
    inner: I,
    curve: Curve,
    batch_size: usize,
    ready: VecDeque<Geometry>,
    done: bool,
}

pub fn sort_stream<I: IntoIterator<Item = Geometry>>(records: I, curve: Curve, batch_size: usize) -> SortStream<I::IntoIter> {
    SortStream { inner: records.into_iter(), curve, batch_size: batch_size.max(1), ready: VecDeque::new(), done: false }
}

impl<I: Iterator<Item = Geometry>> Iterator for SortStream<I> {
    type Item = Geometry;

    fn next(&mut self) -> Option<Geometry> {
        if self.curve == Curve::None {
            return self.inner.next();
        }
        if self.ready.is_empty() && !self.done {
            let mut batch: Vec<Geometry> = self.inner.by_ref().take(self.batch_size).collect();
            if batch.len() < self.batch_size {
                self.done = true;
            }
            sort_batch(&mut batch, self.curve);
            self.ready = batch.into();
        }
        self.ready.pop_front()
    }
}
