//! GeoJSON builders. Positions are `[lon, lat]`; every collection carries the
//! projection origin as a foreign member so planar km coordinates can be
//! recovered.

use isogloss_core::dataio::{unproject, Dataset, GeoPoint};
use isogloss_core::field::{ContourLevel, ContourSet, GradientPath};
use isogloss_core::Point;
use serde_json::{json, Value};

pub fn origin_member(origin: GeoPoint) -> Value {
    json!({ "lon": origin.lon, "lat": origin.lat })
}

pub fn position(p: Point, origin: GeoPoint) -> Value {
    let g = unproject(p, origin);
    json!([g.lon, g.lat])
}

fn line(points: &[Point], origin: GeoPoint) -> Value {
    Value::Array(points.iter().map(|&p| position(p, origin)).collect())
}

fn collection(features: Vec<Value>, origin: GeoPoint) -> Value {
    json!({
        "type": "FeatureCollection",
        "origin": origin_member(origin),
        "features": features,
    })
}

fn level_feature(c: &ContourLevel, origin: GeoPoint) -> Value {
    json!({
        "type": "Feature",
        "geometry": {
            "type": "MultiLineString",
            "coordinates": c.polylines.iter().map(|l| line(&l.points, origin)).collect::<Vec<_>>(),
        },
        "properties": {
            "level": c.level,
            "closed": c.polylines.iter().map(|l| l.closed).collect::<Vec<_>>(),
            "length_km": c.polylines.iter().map(|l| l.length()).sum::<f64>(),
        },
    })
}

/// One collection holding a MultiLineString feature per level.
pub fn contours(set: &ContourSet, origin: GeoPoint) -> Value {
    collection(
        set.levels
            .iter()
            .map(|c| level_feature(c, origin))
            .collect(),
        origin,
    )
}

/// One single-feature collection per level.
pub fn contour_levels(set: &ContourSet, origin: GeoPoint) -> Vec<Value> {
    set.levels
        .iter()
        .map(|c| collection(vec![level_feature(c, origin)], origin))
        .collect()
}

/// LineString from the start through every crossing, with the segment table.
pub fn path_feature(path: &GradientPath, origin: GeoPoint) -> Value {
    let mut pts = Vec::with_capacity(path.crossings.len() + 1);
    pts.push(path.start);
    pts.extend(&path.crossings);
    json!({
        "type": "Feature",
        "geometry": { "type": "LineString", "coordinates": line(&pts, origin) },
        "properties": {
            "levels": path.levels,
            "segment_lengths_km": path.segment_lengths,
            "total_length_km": path.total_length(),
            "status": path.status,
        },
    })
}

pub fn paths(paths: &[GradientPath], origin: GeoPoint) -> Value {
    collection(
        paths.iter().map(|p| path_feature(p, origin)).collect(),
        origin,
    )
}

/// Locality points; with `feature`, only observed ones, tagged with their value.
pub fn localities(ds: &Dataset, feature: Option<usize>) -> Value {
    let origin = ds.origin();
    let features = ds
        .localities()
        .iter()
        .enumerate()
        .filter_map(|(i, l)| {
            let mut props = json!({ "id": l.id, "x_km": l.x_km, "y_km": l.y_km });
            if let Some(f) = feature {
                props["g_index"] = json!(ds.value(i, f)?);
            }
            Some(json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [l.lon_deg, l.lat_deg] },
                "properties": props,
            }))
        })
        .collect();
    collection(features, origin)
}
