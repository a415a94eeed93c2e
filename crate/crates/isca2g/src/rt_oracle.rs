//! Brute-force ray-traced LOS classifier.
//!
//! For each query point, a straight 3D ray is cast from the ABS to the
//! ground point and tested against every wall of every building. If the ray
//! crosses a footprint edge at a height at or below the building roof, the
//! point is NLOS. Deliberately naive (no spatial acceleration): this is the
//! ground truth the shadow-projection path is validated against, and the
//! baseline for the speedup benchmark.
//!
//! Tie-breaks match the geometry module: grazing a footprint corner or edge
//! counts as an intersection (shadows are closed sets).

use crate::geometry::{AbsState, Building, LosState, Point2, Route};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Per-sample RT labels along a route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtLabels {
    pub sample_arclengths: Vec<f64>,
    pub labels: Vec<LosState>,
}

impl RtLabels {
    pub fn sample_count(&self) -> usize {
        self.labels.len()
    }
}

/// Crossing parameters (t along abs->ue, in [0, 1]) of the 2D ray with one
/// footprint edge. Collinear overlaps report the far end of the overlap,
/// where the ray is lowest.
fn edge_crossing_ts(p: Point2, q: Point2, a: Point2, b: Point2, out: &mut Vec<f64>) {
    let r = (q.x - p.x, q.y - p.y);
    let s = (b.x - a.x, b.y - a.y);
    let denom = r.0 * s.1 - r.1 * s.0;
    let ap = (a.x - p.x, a.y - p.y);
    let cross_ap_r = ap.0 * r.1 - ap.1 * r.0;
    let len = (r.0 * r.0 + r.1 * r.1).sqrt().max(1.0);
    if denom.abs() <= 1e-12 * len {
        if cross_ap_r.abs() <= 1e-9 * len {
            let leg2 = r.0 * r.0 + r.1 * r.1;
            let ta = (ap.0 * r.0 + ap.1 * r.1) / leg2;
            let tb = ((b.x - p.x) * r.0 + (b.y - p.y) * r.1) / leg2;
            let hi = ta.max(tb).min(1.0);
            let lo = ta.min(tb).max(0.0);
            if lo <= hi {
                out.push(hi);
            }
        }
        return;
    }
    let t = (ap.0 * s.1 - ap.1 * s.0) / denom;
    let u = cross_ap_r / denom;
    if (-1e-12..=1.0 + 1e-12).contains(&t) && (-1e-12..=1.0 + 1e-12).contains(&u) {
        out.push(t.clamp(0.0, 1.0));
    }
}

/// Classifies one ground point by casting a ray from the ABS.
///
/// The ray height at fractional distance `t` from the ABS is
/// `h_abs * (1 - t)` (UE at ground level); the point is NLOS iff some wall
/// crossing happens at or below the roof of its building.
pub fn los_at_point(ue: Point2, abs: &AbsState, buildings: &[Building]) -> Result<LosState> {
    let mut crossings: Vec<f64> = Vec::new();
    for b in buildings {
        if b.footprint_contains(ue) {
            return Err(Error::InvalidQuery(format!(
                "query point ({}, {}) lies inside a building footprint",
                ue.x, ue.y
            )));
        }
        crossings.clear();
        let base = b.base();
        let n = base.len();
        for i in 0..n {
            edge_crossing_ts(abs.position, ue, base[i], base[(i + 1) % n], &mut crossings);
        }
        for &t in &crossings {
            let ray_height = abs.height * (1.0 - t);
            if ray_height <= b.height() {
                return Ok(LosState::Nlos);
            }
        }
    }
    Ok(LosState::Los)
}

/// Uniform arc-length sampling of a route, classified point by point.
///
/// Costs O(M * N * v) wall checks for M samples, N buildings with v walls.
pub fn segment_route_rt(
    route: &Route,
    samples_per_meter: f64,
    abs: &AbsState,
    buildings: &[Building],
) -> Result<RtLabels> {
    if !(samples_per_meter > 0.0) {
        return Err(Error::InvalidParameters("samples_per_meter must be > 0".into()));
    }
    let length = route.length();
    let count = (length * samples_per_meter).round() as usize;
    let mut sample_arclengths = Vec::with_capacity(count + 1);
    let mut labels = Vec::with_capacity(count + 1);
    for k in 0..=count {
        let s = if k == count { length } else { k as f64 / samples_per_meter };
        let p = route.point_at(s);
        sample_arclengths.push(s);
        labels.push(los_at_point(p, abs, buildings)?);
    }
    Ok(RtLabels { sample_arclengths, labels })
}

/// One disagreement between the RT labels and a GBSP segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub arclength: f64,
    pub rt: LosState,
    pub gbsp: LosState,
}

/// Comparison of RT sample labels against a GBSP route segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchReport {
    pub compared: usize,
    pub excluded_near_boundary: usize,
    pub mismatches: Vec<Mismatch>,
}

impl MismatchReport {
    pub fn mismatch_count(&self) -> usize {
        self.mismatches.len()
    }
}

/// Compares labels sample by sample, skipping samples within `epsilon` of a
/// GBSP segment boundary where the two float pipelines may legitimately
/// round differently.
pub fn compare_labels(
    gbsp: &crate::geometry::LabeledSegments,
    rt: &RtLabels,
    epsilon: f64,
) -> MismatchReport {
    let mut report =
        MismatchReport { compared: 0, excluded_near_boundary: 0, mismatches: Vec::new() };
    for (&s, &rt_label) in rt.sample_arclengths.iter().zip(rt.labels.iter()) {
        if gbsp.boundary_distance(s) <= epsilon {
            report.excluded_near_boundary += 1;
            continue;
        }
        report.compared += 1;
        let gbsp_label = gbsp.label_at(s);
        if gbsp_label != rt_label {
            report.mismatches.push(Mismatch { arclength: s, rt: rt_label, gbsp: gbsp_label });
        }
    }
    report
}
