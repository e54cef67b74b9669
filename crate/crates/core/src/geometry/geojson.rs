//! GeoJSON `FeatureCollection` ingestion and output.
//!
//! Every feature must carry an identifier, taken from the property named by
//! `id_field` (falling back to the feature-level `id` member). All remaining
//! scalar properties become columns of an [`AttributeTable`] aligned with the
//! site order of the returned [`GeometrySet`].

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use super::types::{Geom, GeometrySet, Point, Polygon};
use crate::error::{GeoJsonError, GeometryError};

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeValue {
    Number(f64),
    Text(String),
    Null,
}

impl AttributeValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AttributeValue::Number(v) => Some(*v),
            AttributeValue::Text(s) => s.trim().parse().ok(),
            AttributeValue::Null => None,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            AttributeValue::Number(v) if v.is_finite() => json!(v),
            AttributeValue::Number(_) | AttributeValue::Null => Value::Null,
            AttributeValue::Text(s) => Value::String(s.clone()),
        }
    }
}

/// Column-oriented site attributes; row `i` belongs to site `ids[i]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttributeTable {
    ids: Vec<String>,
    columns: BTreeMap<String, Vec<AttributeValue>>,
}

impl AttributeTable {
    pub fn new(ids: Vec<String>) -> Self {
        Self {
            ids,
            columns: BTreeMap::new(),
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn column(&self, name: &str) -> Option<&[AttributeValue]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    /// Numeric view of a column; missing or non-numeric cells become `None`.
    pub fn numeric(&self, name: &str) -> Option<Vec<Option<f64>>> {
        self.columns
            .get(name)
            .map(|c| c.iter().map(AttributeValue::as_f64).collect())
    }

    pub fn set_column(&mut self, name: impl Into<String>, values: Vec<AttributeValue>) {
        assert_eq!(values.len(), self.ids.len(), "column length mismatch");
        self.columns.insert(name.into(), values);
    }

    pub fn set_numeric(&mut self, name: impl Into<String>, values: &[f64]) {
        self.set_column(
            name,
            values.iter().map(|&v| AttributeValue::Number(v)).collect(),
        );
    }

    fn row_properties(&self, i: usize) -> Map<String, Value> {
        self.columns
            .iter()
            .map(|(k, col)| (k.clone(), col[i].to_json()))
            .collect()
    }
}

pub fn parse_geojson(
    text: &str,
    id_field: &str,
) -> Result<(GeometrySet, AttributeTable), GeoJsonError> {
    let root: Value = serde_json::from_str(text)?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(GeoJsonError::Structure("missing `type: FeatureCollection`".into()));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| GeoJsonError::Structure("`features` is not an array".into()))?;

    let mut sites = Vec::with_capacity(features.len());
    let mut rows: Vec<Map<String, Value>> = Vec::with_capacity(features.len());
    for (index, feature) in features.iter().enumerate() {
        let empty = Map::new();
        let props = feature
            .get("properties")
            .and_then(Value::as_object)
            .unwrap_or(&empty);
        let id = props
            .get(id_field)
            .or_else(|| feature.get("id"))
            .and_then(id_string)
            .ok_or_else(|| GeoJsonError::MissingId {
                index,
                field: id_field.to_string(),
            })?;
        let geometry = feature
            .get("geometry")
            .ok_or_else(|| GeoJsonError::Structure(format!("feature {index} has no geometry")))?;
        let geom = geometry_from_json(geometry, index)?;
        sites.push((id, geom));
        let mut row = props.clone();
        row.remove(id_field);
        rows.push(row);
    }
    let ids: Vec<String> = sites.iter().map(|(id, _)| id.clone()).collect();
    let gs = GeometrySet::new(sites).map_err(GeoJsonError::Set)?;

    let mut table = AttributeTable::new(ids);
    let mut names: Vec<&String> = rows.iter().flat_map(|r| r.keys()).collect();
    names.sort();
    names.dedup();
    for name in names {
        let values = rows
            .iter()
            .map(|r| match r.get(name) {
                Some(Value::Number(n)) => n.as_f64().map_or(AttributeValue::Null, AttributeValue::Number),
                Some(Value::String(s)) => AttributeValue::Text(s.clone()),
                Some(Value::Bool(b)) => AttributeValue::Number(if *b { 1.0 } else { 0.0 }),
                _ => AttributeValue::Null,
            })
            .collect();
        table.set_column(name.clone(), values);
    }
    Ok((gs, table))
}

fn id_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn geometry_from_json(g: &Value, index: usize) -> Result<Geom, GeoJsonError> {
    let kind = g.get("type").and_then(Value::as_str).unwrap_or("null");
    let coords = g.get("coordinates");
    let structure = |what: &str| GeoJsonError::Structure(format!("feature {index}: {what}"));
    let geometry = |source: GeometryError| GeoJsonError::Geometry { index, source };
    match kind {
        "Point" => {
            let p = coords
                .and_then(position)
                .ok_or_else(|| structure("invalid Point coordinates"))?;
            Point::checked(p.x, p.y).map(Geom::Point).map_err(geometry)
        }
        "Polygon" => {
            let rings = coords
                .and_then(rings)
                .ok_or_else(|| structure("invalid Polygon coordinates"))?;
            polygon_from_rings(rings).map(Geom::Polygon).map_err(geometry)
        }
        "MultiPolygon" => {
            let parts = coords
                .and_then(Value::as_array)
                .ok_or_else(|| structure("invalid MultiPolygon coordinates"))?;
            let polys = parts
                .iter()
                .map(|p| {
                    rings(p)
                        .ok_or_else(|| structure("invalid MultiPolygon coordinates"))
                        .and_then(|r| polygon_from_rings(r).map_err(geometry))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Geom::multi(polys).map_err(geometry)
        }
        other => Err(GeoJsonError::UnsupportedGeometry {
            index,
            kind: other.to_string(),
        }),
    }
}

fn position(v: &Value) -> Option<Point> {
    let a = v.as_array()?;
    if a.len() < 2 {
        return None;
    }
    Some(Point::new(a[0].as_f64()?, a[1].as_f64()?))
}

fn rings(v: &Value) -> Option<Vec<Vec<Point>>> {
    v.as_array()?
        .iter()
        .map(|ring| ring.as_array()?.iter().map(position).collect())
        .collect()
}

fn polygon_from_rings(mut rings: Vec<Vec<Point>>) -> Result<Polygon, GeometryError> {
    if rings.is_empty() {
        return Err(GeometryError::RingTooShort { found: 0 });
    }
    let exterior = rings.remove(0);
    Polygon::new(exterior, rings)
}

pub fn geom_to_json(g: &Geom) -> Value {
    fn ring(r: &super::types::Ring) -> Value {
        let v = r.vertices();
        Value::Array(
            v.iter()
                .chain(std::iter::once(&v[0]))
                .map(|p| json!([p.x, p.y]))
                .collect(),
        )
    }
    fn poly(p: &Polygon) -> Value {
        Value::Array(p.rings().map(ring).collect())
    }
    match g {
        Geom::Point(p) => json!({"type": "Point", "coordinates": [p.x, p.y]}),
        Geom::Polygon(p) => json!({"type": "Polygon", "coordinates": poly(p)}),
        Geom::MultiPolygon(ps) => json!({
            "type": "MultiPolygon",
            "coordinates": Value::Array(ps.iter().map(poly).collect()),
        }),
    }
}

/// Serializes sites and their attributes as a `FeatureCollection`.
pub fn write_geojson(gs: &GeometrySet, table: &AttributeTable, id_field: &str) -> String {
    let features: Vec<Value> = gs
        .iter()
        .enumerate()
        .map(|(i, (id, g))| {
            let mut props = Map::new();
            props.insert(id_field.to_string(), Value::String(id.to_string()));
            if i < table.len() {
                props.extend(table.row_properties(i));
            }
            json!({"type": "Feature", "properties": props, "geometry": geom_to_json(g)})
        })
        .collect();
    let doc = json!({"type": "FeatureCollection", "features": features});
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_SQUARES: &str = r#"{
      "type": "FeatureCollection",
      "features": [
        {"type": "Feature", "properties": {"id": "a", "cases": 3, "name": "west"},
         "geometry": {"type": "Polygon", "coordinates": [[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
        {"type": "Feature", "properties": {"id": "b", "cases": 5.5},
         "geometry": {"type": "Polygon", "coordinates": [[[1,0],[2,0],[2,1],[1,1],[1,0]]]}}
      ]
    }"#;

    #[test]
    fn parses_two_squares_with_properties() {
        let (gs, table) = parse_geojson(TWO_SQUARES, "id").unwrap();
        assert_eq!(gs.len(), 2);
        assert_eq!(gs.ids(), ["a", "b"]);
        assert_eq!(table.numeric("cases").unwrap(), vec![Some(3.0), Some(5.5)]);
        assert_eq!(
            table.column("name").unwrap(),
            [AttributeValue::Text("west".into()), AttributeValue::Null]
        );
        assert!(!table.has_column("id"));
    }

    #[test]
    fn mixed_point_and_polygon_accepted() {
        let text = r#"{"type":"FeatureCollection","features":[
          {"type":"Feature","properties":{"id":"p"},"geometry":{"type":"Point","coordinates":[0.5,0.5]}},
          {"type":"Feature","properties":{"id":"q"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}}
        ]}"#;
        let (gs, _) = parse_geojson(text, "id").unwrap();
        assert_eq!(gs.len(), 2);
        assert!(gs.geoms()[0].is_point());
    }

    #[test]
    fn linestring_is_unsupported() {
        let text = r#"{"type":"FeatureCollection","features":[
          {"type":"Feature","properties":{"id":"l"},"geometry":{"type":"LineString","coordinates":[[0,0],[1,1]]}}
        ]}"#;
        let err = parse_geojson(text, "id").unwrap_err();
        assert!(err.to_string().contains("unsupported geometry"), "{err}");
    }

    #[test]
    fn error_cases() {
        assert!(matches!(parse_geojson("{", "id"), Err(GeoJsonError::Json(_))));
        let dup = TWO_SQUARES.replace("\"b\"", "\"a\"");
        assert!(matches!(
            parse_geojson(&dup, "id"),
            Err(GeoJsonError::Set(GeometryError::DuplicateId(_)))
        ));
        let short = r#"{"type":"FeatureCollection","features":[
          {"type":"Feature","properties":{"id":"s"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[0,0]]]}}
        ]}"#;
        let err = parse_geojson(short, "id").unwrap_err();
        assert!(err.is_geometry());
        let noid = TWO_SQUARES.replace("\"id\": \"a\", ", "");
        assert!(matches!(
            parse_geojson(&noid, "id"),
            Err(GeoJsonError::MissingId { index: 0, .. })
        ));
    }

    #[test]
    fn written_collection_parses_back() {
        let (gs, table) = parse_geojson(TWO_SQUARES, "id").unwrap();
        let text = write_geojson(&gs, &table, "id");
        let (gs2, table2) = parse_geojson(&text, "id").unwrap();
        assert_eq!(gs, gs2);
        assert_eq!(table, table2);
    }
}
