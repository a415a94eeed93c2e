//! GeoJSON and CSV serialization of scenes and results.
//!
//! Coordinates are local meters (not longitude/latitude); consumers that
//! need geographic placement can translate the features themselves. Only the
//! small GeoJSON subset actually produced here is modeled.

use crate::campaign::RadioMap;
use crate::environment::GridLayout;
use crate::geometry::{LabeledSegments, LosState, Point2, Region, Route};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

/// A GeoJSON feature with free-form properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    #[serde(rename = "type")]
    pub kind: String,
    pub geometry: Value,
    pub properties: Map<String, Value>,
}

/// A GeoJSON feature collection with optional top-level metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCollection {
    #[serde(rename = "type")]
    pub kind: String,
    pub features: Vec<Feature>,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub metadata: Map<String, Value>,
}

impl FeatureCollection {
    pub fn new(features: Vec<Feature>) -> Self {
        Self { kind: "FeatureCollection".into(), features, metadata: Map::new() }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn ring_coords(ring: &[Point2]) -> Value {
    // GeoJSON rings are explicitly closed
    let mut coords: Vec<Value> = ring.iter().map(|p| json!([p.x, p.y])).collect();
    if let Some(first) = ring.first() {
        coords.push(json!([first.x, first.y]));
    }
    Value::Array(coords)
}

fn polygon_geometry(outer: &[Point2], holes: &[Vec<Point2>]) -> Value {
    let mut rings = vec![ring_coords(outer)];
    rings.extend(holes.iter().map(|h| ring_coords(h)));
    json!({ "type": "Polygon", "coordinates": rings })
}

/// A city layout as a feature collection: one polygon per building with a
/// `height_m` property, plus grid metadata.
pub fn layout_to_geojson(layout: &GridLayout) -> FeatureCollection {
    let features = layout
        .buildings
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let mut properties = Map::new();
            properties.insert("building_index".into(), json!(i));
            properties.insert("height_m".into(), json!(b.height()));
            Feature {
                kind: "Feature".into(),
                geometry: polygon_geometry(b.base(), &[]),
                properties,
            }
        })
        .collect();
    let mut fc = FeatureCollection::new(features);
    fc.metadata.insert("building_width_m".into(), json!(layout.building_width));
    fc.metadata.insert("street_width_m".into(), json!(layout.street_width));
    fc.metadata.insert("count_x".into(), json!(layout.count_x));
    fc.metadata.insert("count_y".into(), json!(layout.count_y));
    fc.metadata.insert(
        "bounds".into(),
        json!([layout.bounds.min_x, layout.bounds.min_y, layout.bounds.max_x, layout.bounds.max_y]),
    );
    fc
}

/// Parses a layout feature collection written by [`layout_to_geojson`].
pub fn layout_from_geojson(fc: &FeatureCollection) -> Result<GridLayout> {
    use crate::geometry::{Building, Rect};
    let meta_f64 = |key: &str| -> Result<f64> {
        fc.metadata
            .get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::Config(format!("layout metadata missing '{key}'")))
    };
    let bounds = fc
        .metadata
        .get("bounds")
        .and_then(Value::as_array)
        .filter(|b| b.len() == 4)
        .map(|b| {
            Rect::new(
                b[0].as_f64().unwrap_or(f64::NAN),
                b[1].as_f64().unwrap_or(f64::NAN),
                b[2].as_f64().unwrap_or(f64::NAN),
                b[3].as_f64().unwrap_or(f64::NAN),
            )
        })
        .ok_or_else(|| Error::Config("layout metadata missing 'bounds'".into()))?;
    let mut buildings = Vec::with_capacity(fc.features.len());
    for (i, f) in fc.features.iter().enumerate() {
        if f.geometry["type"] != json!("Polygon") {
            return Err(Error::Config(format!("feature {i}: expected Polygon geometry")));
        }
        let ring = f.geometry["coordinates"][0]
            .as_array()
            .ok_or_else(|| Error::Config(format!("feature {i}: malformed coordinates")))?;
        let mut base = Vec::with_capacity(ring.len().saturating_sub(1));
        // drop the closing duplicate vertex
        for coord in &ring[..ring.len().saturating_sub(1)] {
            let pair = coord
                .as_array()
                .filter(|c| c.len() >= 2)
                .ok_or_else(|| Error::Config(format!("feature {i}: malformed coordinate")))?;
            base.push(Point2::new(
                pair[0].as_f64().unwrap_or(f64::NAN),
                pair[1].as_f64().unwrap_or(f64::NAN),
            ));
        }
        let height = f
            .properties
            .get("height_m")
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::Config(format!("feature {i}: missing 'height_m'")))?;
        buildings.push(Building::new(base, height)?);
    }
    Ok(GridLayout {
        building_width: meta_f64("building_width_m")?,
        street_width: meta_f64("street_width_m")?,
        count_x: meta_f64("count_x")? as usize,
        count_y: meta_f64("count_y")? as usize,
        buildings,
        bounds,
    })
}

/// A polygonal region (e.g. a LOS map or shadow union) as polygon features.
pub fn region_to_geojson(region: &Region, label: &str) -> FeatureCollection {
    let features = region
        .polygons
        .iter()
        .map(|poly| {
            let mut properties = Map::new();
            properties.insert("label".into(), json!(label));
            Feature {
                kind: "Feature".into(),
                geometry: polygon_geometry(&poly.outer, &poly.holes),
                properties,
            }
        })
        .collect();
    FeatureCollection::new(features)
}

/// A segmented route as one LineString feature per LOS/NLOS span.
pub fn segments_to_geojson(route: &Route, segments: &LabeledSegments) -> FeatureCollection {
    let features = segments
        .segments
        .iter()
        .map(|span| {
            let a = route.point_at(span.start);
            let b = route.point_at(span.end);
            let mut properties = Map::new();
            properties.insert(
                "los".into(),
                json!(match span.state {
                    LosState::Los => "LOS",
                    LosState::Nlos => "NLOS",
                }),
            );
            properties.insert("start_m".into(), json!(span.start));
            properties.insert("end_m".into(), json!(span.end));
            Feature {
                kind: "Feature".into(),
                geometry: json!({
                    "type": "LineString",
                    "coordinates": [[a.x, a.y], [b.x, b.y]],
                }),
                properties,
            }
        })
        .collect();
    FeatureCollection::new(features)
}

/// An empirical CDF as `value,cumulative_probability` CSV.
pub fn cdf_to_csv(cdf: &[(f64, f64)], value_header: &str) -> String {
    let mut out = format!("{value_header},cdf\n");
    for (v, p) in cdf {
        out.push_str(&format!("{v},{p}\n"));
    }
    out
}

/// A radio map as row-major CSV with a header comment carrying the grid
/// geometry. Footprint cells are written as `nan`.
pub fn radio_map_to_csv(map: &RadioMap) -> String {
    let mut out = format!(
        "# origin_x={} origin_y={} spacing={} width={} height={}\n",
        map.origin.x, map.origin.y, map.spacing, map.width, map.height
    );
    for iy in 0..map.height {
        let row: Vec<String> = (0..map.width)
            .map(|ix| {
                let v = map.at(ix, iy);
                if v.is_nan() { "nan".to_string() } else { format!("{v:.4}") }
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
