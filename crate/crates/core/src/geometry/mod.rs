//! Closed planar sets, their ingestion from GeoJSON and WKT, membership
//! predicates, and adjacency for the neighbourhood-based baselines.
//!
//! Polygons always denote filled regions: a point strictly inside a polygon
//! belongs to it, as does every point of its boundary. Coordinates are taken
//! as planar; no projection is applied.

pub mod adjacency;
pub mod geojson;
pub mod predicates;
pub mod types;
pub mod wkt;

pub use adjacency::{derive_adjacency, AdjacencyMatrix};
pub use geojson::{parse_geojson, write_geojson, AttributeTable, AttributeValue};
pub use predicates::point_in_geom;
pub use types::{BoundingBox, Geom, GeometrySet, Point, Polygon, Ring};
pub use wkt::{format_wkt, parse_wkt};
