//! Columnar storage for geospatial vector data.
//!
//! Geometries are decomposed into a TYPE column, a LEVELS column and two
//! coordinate columns (`x`, `y`). Coordinates are FP-delta encoded per page and
//! every page carries min/max statistics, so rectangle queries can skip pages
//! whose bounding box misses the query.

pub mod codec;
pub mod columnar;
pub mod error;
pub mod format;
pub mod geometry;
pub mod io;
pub mod sfc;

pub use error::{Error, Result};
pub use format::{FileReader, FileWriter, WriteOptions};
pub use geometry::{Coord, Geometry, GeometryType, Polygon, Rect};
pub use sfc::Curve;
