//! GeoJSON (RFC 7946) export of GPS fixes and the cells an event stream
//! visited, tagged with whether filtering kept them.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use crate::geo::{Circle, LocalFrame};
use crate::model::{format_timestamp, CellId, CoveragePlan, GpsFix, Trajectory};

pub const CIRCLE_SEGMENTS: usize = 64;

/// Closed counter-clockwise ring of `[lon, lat]` positions approximating the
/// circle, `CIRCLE_SEGMENTS + 1` positions long.
pub fn circle_ring(circle: &Circle) -> Vec<[f64; 2]> {
    let frame = LocalFrame::new(circle.center());
    let r = circle.radius();
    let mut ring: Vec<[f64; 2]> = (0..CIRCLE_SEGMENTS)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / CIRCLE_SEGMENTS as f64;
            let p = frame.to_geo(r * theta.cos(), r * theta.sin());
            [p.lon(), p.lat()]
        })
        .collect();
    ring.push(ring[0]);
    ring
}

/// Builds the feature collection. Cells without coverage information are
/// left out since they have no geometry.
pub fn export(
    plan: &CoveragePlan,
    original: &Trajectory,
    gps: &[GpsFix],
    filtered: &Trajectory,
) -> Value {
    let kept: BTreeSet<&CellId> = filtered.events().iter().map(|e| &e.cell_id).collect();
    let mut seen: BTreeSet<&CellId> = BTreeSet::new();
    let mut features = Vec::new();

    for fix in gps {
        features.push(json!({
            "type": "Feature",
            "geometry": {
                "type": "Point",
                "coordinates": [fix.position.lon(), fix.position.lat()],
            },
            "properties": { "kind": "gps", "timestamp": format_timestamp(&fix.timestamp) },
        }));
    }

    for id in original
        .events()
        .iter()
        .chain(filtered.events())
        .map(|e| &e.cell_id)
    {
        if !seen.insert(id) {
            continue;
        }
        let Some(cell) = plan.get(id) else { continue };
        let status = if kept.contains(id) { "kept" } else { "removed" };
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "Polygon", "coordinates": [circle_ring(&cell.coverage)] },
            "properties": {
                "kind": "cell",
                "cell_id": id.as_str(),
                "radius_m": cell.coverage.radius(),
                "status": status,
            },
        }));
    }

    json!({ "type": "FeatureCollection", "features": features })
}
