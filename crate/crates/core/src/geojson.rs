//! GeoJSON FeatureCollection builders for map-ready output: planned
//! strategies per location, the worst-case witness path, and debug layers
//! for the conflict geometry. Coordinates are emitted in the instance's own
//! planar frame unless a CRS tag says otherwise.

use serde_json::{json, Value};

use crate::geometry::{infeasible_pairs, infeasible_triples, SegmentPath};
use crate::model::{Instance, RetrofitPlan, TornadoScenario};

fn feature(geometry: Value, properties: Value) -> Value {
    json!({ "type": "Feature", "geometry": geometry, "properties": properties })
}

fn collection(features: Vec<Value>) -> Value {
    json!({ "type": "FeatureCollection", "features": features })
}

fn segment_coords(seg: &SegmentPath) -> Value {
    json!([[seg.e0.x, seg.e0.y], [seg.e1.x, seg.e1.y]])
}

/// Distinguishable fill colors per strategy index (cycled past the palette).
const STRATEGY_COLORS: [&str; 6] =
    ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

/// Locations colored by assigned strategy, plus the worst-case path when a
/// witness is available.
pub fn plan_geojson(
    instance: &Instance,
    plan: &RetrofitPlan,
    worst: Option<&TornadoScenario>,
) -> Value {
    let mut features: Vec<Value> = instance
        .locations
        .iter()
        .enumerate()
        .map(|(l, loc)| {
            let s = plan.strategy(l);
            let hit = worst.map_or(false, |sc| sc.z[l]);
            feature(
                json!({ "type": "Point", "coordinates": [loc.x, loc.y] }),
                json!({
                    "id": loc.id,
                    "strategy": s,
                    "population": loc.population,
                    "area_m2": loc.area_m2,
                    "hit_by_worst_case": hit,
                    "marker-color": STRATEGY_COLORS[s % STRATEGY_COLORS.len()],
                }),
            )
        })
        .collect();
    if let Some(seg) = worst.and_then(|sc| sc.witness.as_ref()) {
        features.push(feature(
            json!({ "type": "LineString", "coordinates": segment_coords(seg) }),
            json!({ "role": "worst_case_path", "length_miles": seg.length(),
                    "stroke": "#000000" }),
        ));
    }
    collection(features)
}

/// Debug layer: conflict pairs as lines and conflict triples as triangles.
pub fn conflict_geojson(instance: &Instance) -> Value {
    let points = instance.points();
    let mut features = Vec::new();
    for pair in infeasible_pairs(&points, instance.delta, instance.length) {
        let (a, b) = (&points[pair.0], &points[pair.1]);
        features.push(feature(
            json!({ "type": "LineString",
                    "coordinates": [[a.x, a.y], [b.x, b.y]] }),
            json!({ "conflict": "pair", "locations": [pair.0, pair.1] }),
        ));
    }
    for t in infeasible_triples(&points, instance.delta) {
        let (a, b, c) = (&points[t.0], &points[t.1], &points[t.2]);
        features.push(feature(
            json!({ "type": "Polygon",
                    "coordinates": [[[a.x, a.y], [b.x, b.y], [c.x, c.y], [a.x, a.y]]] }),
            json!({ "conflict": "triple", "locations": [t.0, t.1, t.2] }),
        ));
    }
    collection(features)
}

/// Debug layer for an ad-hoc feasibility query: the centers, their coverage
/// radius, and the witness (if the set was coverable).
pub fn cover_query_geojson(
    centers: &[(f64, f64)],
    delta: f64,
    witness: Option<&SegmentPath>,
) -> Value {
    let mut features: Vec<Value> = centers
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            feature(
                json!({ "type": "Point", "coordinates": [x, y] }),
                json!({ "index": i, "coverage_radius_miles": delta }),
            )
        })
        .collect();
    if let Some(seg) = witness {
        features.push(feature(
            json!({ "type": "LineString", "coordinates": segment_coords(seg) }),
            json!({ "role": "witness", "length_miles": seg.length() }),
        ));
    }
    collection(features)
}
