//! Interchange formats and synthetic data.

pub mod geojson;
pub mod synth;
pub mod wkt;

pub use geojson::{parse_geojson, read_geojson, write_geojson, GeoJsonWriter};
pub use synth::{generate_synthetic, random_geometries, SyntheticSpec};
pub use wkt::{format_wkt, parse_wkt, read_wkt, write_wkt};
