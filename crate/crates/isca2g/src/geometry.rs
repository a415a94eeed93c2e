//! Deterministic geometry-based shadow projection (GBSP).
//!
//! Buildings are vertical prisms over simple polygonal bases. With the ABS as
//! a point light source, each building casts a ground shadow; the union of
//! all shadows is the NLOS region, and the LOS map is the outdoor area minus
//! that union. Routes are segmented into LOS/NLOS spans by intersecting them
//! with the shadow region.
//!
//! Conventions:
//! - rings are stored open (first vertex not repeated), outer rings CCW,
//!   hole rings CW;
//! - shadow regions are closed sets: a point exactly on a shadow boundary is
//!   NLOS;
//! - all boolean operations snap vertices to a 1e-9 m grid.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

use geo::algorithm::orient::{Direction, Orient};
use geo::{Area, BooleanOps, MultiPolygon};
use i_overlay::core::fill_rule::FillRule;
use i_overlay::core::overlay_rule::OverlayRule;

/// Vertex snap grid for boolean operations, in meters.
pub const SNAP_TOLERANCE: f64 = 1e-9;

/// Distance below which a point counts as lying on a ring boundary.
const BOUNDARY_EPS: f64 = 1e-9;

/// Parameter-space tolerance when deduplicating route crossings.
const PARAM_EPS: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Basic types
// ---------------------------------------------------------------------------

/// A point in the horizontal ground plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Cross product of (b - a) x (c - a).
pub(crate) fn cross(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Axis-aligned rectangle, used for target-area bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self { min_x, min_y, max_x, max_y }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    /// Corners as an open CCW ring.
    pub fn to_ring(&self) -> Vec<Point2> {
        vec![
            Point2::new(self.min_x, self.min_y),
            Point2::new(self.max_x, self.min_y),
            Point2::new(self.max_x, self.max_y),
            Point2::new(self.min_x, self.max_y),
        ]
    }

    /// Largest distance from `p` to any corner of the rectangle.
    fn max_corner_distance(&self, p: Point2) -> f64 {
        self.to_ring()
            .iter()
            .map(|c| c.distance(&p))
            .fold(0.0, f64::max)
    }
}

/// LOS state of a point or route span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LosState {
    Los,
    Nlos,
}

// ---------------------------------------------------------------------------
// Buildings and the ABS
// ---------------------------------------------------------------------------

/// A building: a vertical prism given by its polygonal base and height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    base: Vec<Point2>,
    height: f64,
}

impl Building {
    /// Validates and normalizes the base to CCW order.
    pub fn new(mut base: Vec<Point2>, height: f64) -> Result<Self> {
        if base.len() < 3 {
            return Err(Error::InvalidPolygon {
                index: 0,
                reason: format!("base has {} vertices, need >= 3", base.len()),
            });
        }
        if !(height > 0.0) || !height.is_finite() {
            return Err(Error::InvalidParameters(format!(
                "building height must be finite and > 0, got {height}"
            )));
        }
        if base.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidPolygon {
                index: 0,
                reason: "non-finite base vertex".into(),
            });
        }
        let area = ring_signed_area(&base);
        if area.abs() < 1e-12 {
            return Err(Error::InvalidPolygon { index: 0, reason: "zero-area base".into() });
        }
        if area < 0.0 {
            base.reverse();
        }
        if !ring_is_simple(&base) {
            return Err(Error::InvalidPolygon {
                index: 0,
                reason: "self-intersecting base".into(),
            });
        }
        Ok(Self { base, height })
    }

    pub fn base(&self) -> &[Point2] {
        &self.base
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn vertex_count(&self) -> usize {
        self.base.len()
    }

    pub fn footprint_area(&self) -> f64 {
        ring_signed_area(&self.base)
    }

    /// True when every turn of the CCW base is left or straight.
    pub fn is_convex(&self) -> bool {
        let n = self.base.len();
        (0..n).all(|i| {
            cross(self.base[i], self.base[(i + 1) % n], self.base[(i + 2) % n]) >= -1e-12
        })
    }

    pub fn bbox(&self) -> Rect {
        let mut r = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.base {
            r.min_x = r.min_x.min(p.x);
            r.min_y = r.min_y.min(p.y);
            r.max_x = r.max_x.max(p.x);
            r.max_y = r.max_y.max(p.y);
        }
        r
    }

    /// Closed point-in-footprint test.
    pub fn footprint_contains(&self, p: Point2) -> bool {
        point_in_ring(&self.base, p) != RingLocation::Outside
    }
}

/// Aerial base station pose: horizontal position and hover height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsState {
    pub position: Point2,
    pub height: f64,
}

impl AbsState {
    pub fn new(position: Point2, height: f64) -> Result<Self> {
        if !(height > 0.0) || !height.is_finite() {
            return Err(Error::InvalidParameters(format!(
                "ABS height must be finite and > 0, got {height}"
            )));
        }
        Ok(Self { position, height })
    }
}

// ---------------------------------------------------------------------------
// Regions (polygons with holes)
// ---------------------------------------------------------------------------

/// One simple polygon with optional holes. Outer ring CCW, holes CW, open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonRings {
    pub outer: Vec<Point2>,
    pub holes: Vec<Vec<Point2>>,
}

/// A set of interior-disjoint polygons within known bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub polygons: Vec<PolygonRings>,
    pub bounds: Rect,
}

impl Region {
    pub fn empty(bounds: Rect) -> Self {
        Self { polygons: Vec::new(), bounds }
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    pub fn area(&self) -> f64 {
        polygon_area(self)
    }

    /// Closed containment: boundary points are inside.
    pub fn contains_closed(&self, p: Point2) -> bool {
        for poly in &self.polygons {
            match point_in_ring(&poly.outer, p) {
                RingLocation::Outside => continue,
                RingLocation::OnBoundary => return true,
                RingLocation::Inside => {
                    let mut in_hole = false;
                    for hole in &poly.holes {
                        match point_in_ring(hole, p) {
                            RingLocation::OnBoundary => return true,
                            RingLocation::Inside => {
                                in_hole = true;
                                break;
                            }
                            RingLocation::Outside => {}
                        }
                    }
                    if !in_hole {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// Where a point lies relative to a ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingLocation {
    Inside,
    OnBoundary,
    Outside,
}

/// Signed area of an open ring (positive when CCW).
pub fn ring_signed_area(ring: &[Point2]) -> f64 {
    let n = ring.len();
    let mut sum = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        sum += a.x * b.y - b.x * a.y;
    }
    sum / 2.0
}

/// O(n^2) simplicity check: no two non-adjacent edges intersect.
fn ring_is_simple(ring: &[Point2]) -> bool {
    let n = ring.len();
    for i in 0..n {
        let (a1, a2) = (ring[i], ring[(i + 1) % n]);
        for j in (i + 1)..n {
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (b1, b2) = (ring[j], ring[(j + 1) % n]);
            if segments_properly_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

fn segments_properly_intersect(p: Point2, q: Point2, a: Point2, b: Point2) -> bool {
    let d1 = cross(p, q, a);
    let d2 = cross(p, q, b);
    let d3 = cross(a, b, p);
    let d4 = cross(a, b, q);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Closed point-in-ring test with an explicit on-boundary answer.
pub fn point_in_ring(ring: &[Point2], p: Point2) -> RingLocation {
    let n = ring.len();
    // boundary check first
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if point_on_segment(p, a, b) {
            return RingLocation::OnBoundary;
        }
    }
    // even-odd ray cast to +x
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x_int = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_int {
                inside = !inside;
            }
        }
    }
    if inside {
        RingLocation::Inside
    } else {
        RingLocation::Outside
    }
}

fn point_on_segment(p: Point2, a: Point2, b: Point2) -> bool {
    if p.x < a.x.min(b.x) - BOUNDARY_EPS
        || p.x > a.x.max(b.x) + BOUNDARY_EPS
        || p.y < a.y.min(b.y) - BOUNDARY_EPS
        || p.y > a.y.max(b.y) + BOUNDARY_EPS
    {
        return false;
    }
    let len = a.distance(&b);
    if len < BOUNDARY_EPS {
        return p.distance(&a) <= BOUNDARY_EPS;
    }
    let d = cross(a, b, p).abs() / len;
    if d > BOUNDARY_EPS {
        return false;
    }
    let t = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / (len * len);
    (-BOUNDARY_EPS / len..=1.0 + BOUNDARY_EPS / len).contains(&t)
}

// ---------------------------------------------------------------------------
// geo interop
// ---------------------------------------------------------------------------

fn snap(v: f64) -> f64 {
    (v / SNAP_TOLERANCE).round() * SNAP_TOLERANCE
}

fn ring_to_geo(ring: &[Point2]) -> geo::LineString<f64> {
    geo::LineString::from(
        ring.iter().map(|p| (snap(p.x), snap(p.y))).collect::<Vec<_>>(),
    )
}

fn region_to_geo(region: &Region) -> MultiPolygon<f64> {
    MultiPolygon::new(
        region
            .polygons
            .iter()
            .map(|poly| {
                geo::Polygon::new(
                    ring_to_geo(&poly.outer),
                    poly.holes.iter().map(|h| ring_to_geo(h)).collect(),
                )
            })
            .collect(),
    )
}

fn geo_ring_to_points(ls: &geo::LineString<f64>) -> Vec<Point2> {
    let mut pts: Vec<Point2> = ls.coords().map(|c| Point2::new(c.x, c.y)).collect();
    if pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    pts
}

fn geo_to_region(mp: MultiPolygon<f64>, bounds: Rect) -> Region {
    let oriented = mp.orient(Direction::Default);
    let mut polygons = Vec::new();
    for poly in oriented.0 {
        let outer = geo_ring_to_points(poly.exterior());
        if outer.len() < 3 || ring_signed_area(&outer).abs() < 1e-12 {
            continue;
        }
        let holes = poly
            .interiors()
            .iter()
            .map(geo_ring_to_points)
            .filter(|h| h.len() >= 3 && ring_signed_area(h).abs() >= 1e-12)
            .collect();
        polygons.push(PolygonRings { outer, holes });
    }
    Region { polygons, bounds }
}

fn bounds_to_geo(bounds: Rect) -> geo::Polygon<f64> {
    geo::Polygon::new(ring_to_geo(&bounds.to_ring()), vec![])
}

fn clip_region_to_bounds(region: Region) -> Region {
    if region.is_empty() {
        return region;
    }
    let bounds = region.bounds;
    let clipped = region_to_geo(&region).intersection(&MultiPolygon::new(vec![bounds_to_geo(bounds)]));
    geo_to_region(clipped, bounds)
}

// ---------------------------------------------------------------------------
// Convex hull
// ---------------------------------------------------------------------------

/// Andrew monotone chain; returns a strictly convex CCW ring.
///
/// Duplicate and collinear points are eliminated before/while building the
/// hull (grid layouts create exactly-collinear edges).
pub fn convex_hull(points: &[Point2]) -> Result<Vec<Point2>> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    pts.dedup_by(|a, b| a.distance(b) < 1e-12);
    if pts.len() < 3 {
        return Err(Error::DegenerateHull(points.len()));
    }
    let build = |iter: &mut dyn Iterator<Item = Point2>| {
        let mut chain: Vec<Point2> = Vec::new();
        for p in iter {
            while chain.len() >= 2
                && cross(chain[chain.len() - 2], chain[chain.len() - 1], p) <= 0.0
            {
                chain.pop();
            }
            chain.push(p);
        }
        chain
    };
    let lower = build(&mut pts.iter().copied());
    let upper = build(&mut pts.iter().rev().copied());
    let mut hull = lower;
    hull.pop();
    hull.extend(upper.iter().take(upper.len().saturating_sub(1)));
    if hull.len() < 3 {
        return Err(Error::DegenerateHull(points.len()));
    }
    Ok(hull)
}

/// Sutherland-Hodgman clip of a ring against an axis-aligned rectangle.
///
/// Exact for convex subjects; for non-convex subjects the result may contain
/// degenerate bridging edges, which the boolean union downstream removes.
fn clip_ring_to_rect(ring: &[Point2], rect: Rect) -> Vec<Point2> {
    // each plane: (inside predicate, intersection along an edge)
    type Plane = (Box<dyn Fn(Point2) -> bool>, Box<dyn Fn(Point2, Point2) -> Point2>);
    let planes: Vec<Plane> = vec![
        (
            Box::new(move |p: Point2| p.x >= rect.min_x),
            Box::new(move |a: Point2, b: Point2| {
                let t = (rect.min_x - a.x) / (b.x - a.x);
                Point2::new(rect.min_x, a.y + t * (b.y - a.y))
            }),
        ),
        (
            Box::new(move |p: Point2| p.x <= rect.max_x),
            Box::new(move |a: Point2, b: Point2| {
                let t = (rect.max_x - a.x) / (b.x - a.x);
                Point2::new(rect.max_x, a.y + t * (b.y - a.y))
            }),
        ),
        (
            Box::new(move |p: Point2| p.y >= rect.min_y),
            Box::new(move |a: Point2, b: Point2| {
                let t = (rect.min_y - a.y) / (b.y - a.y);
                Point2::new(a.x + t * (b.x - a.x), rect.min_y)
            }),
        ),
        (
            Box::new(move |p: Point2| p.y <= rect.max_y),
            Box::new(move |a: Point2, b: Point2| {
                let t = (rect.max_y - a.y) / (b.y - a.y);
                Point2::new(a.x + t * (b.x - a.x), rect.max_y)
            }),
        ),
    ];
    let mut current = ring.to_vec();
    for (inside, intersect) in planes {
        if current.is_empty() {
            break;
        }
        let mut next = Vec::with_capacity(current.len() + 4);
        for i in 0..current.len() {
            let a = current[i];
            let b = current[(i + 1) % current.len()];
            let a_in = inside(a);
            let b_in = inside(b);
            if a_in {
                next.push(a);
                if !b_in {
                    next.push(intersect(a, b));
                }
            } else if b_in {
                next.push(intersect(a, b));
            }
        }
        current = next;
    }
    current.dedup_by(|a, b| a.distance(b) < 1e-12);
    if current.len() > 1 && current.first().unwrap().distance(current.last().unwrap()) < 1e-12 {
        current.pop();
    }
    current
}

// ---------------------------------------------------------------------------
// Shadow projection
// ---------------------------------------------------------------------------

/// Projects a roof vertex onto the ground plane with the ABS as light source.
pub fn project_roof_vertex(vertex: Point2, building_height: f64, abs: &AbsState) -> Result<Point2> {
    if building_height >= abs.height {
        return Err(Error::DegenerateProjection { building: building_height, abs: abs.height });
    }
    let scale = abs.height / (abs.height - building_height);
    let p = Point2::new(
        scale * (vertex.x - abs.position.x) + abs.position.x,
        scale * (vertex.y - abs.position.y) + abs.position.y,
    );
    if !p.x.is_finite() || !p.y.is_finite() {
        return Err(Error::DegenerateProjection { building: building_height, abs: abs.height });
    }
    Ok(p)
}

/// Ground shadow of a single building, clipped to `bounds`.
///
/// Convex footprints below the ABS use the convex hull of base and projected
/// roof vertices; non-convex ones use footprint plus per-wall-face shadow
/// quads. Buildings at or above the ABS height occlude an unbounded wedge,
/// represented by far-extended rays and clipped to `bounds`.
pub fn building_shadow(b: &Building, abs: &AbsState, bounds: Rect) -> Result<Region> {
    if b.height() < abs.height {
        let projections: Vec<Point2> = b
            .base()
            .iter()
            .map(|v| project_roof_vertex(*v, b.height(), abs))
            .collect::<Result<_>>()?;
        if b.is_convex() {
            let mut pts = b.base().to_vec();
            pts.extend_from_slice(&projections);
            let hull = convex_hull(&pts)?;
            let clipped = clip_ring_to_rect(&hull, bounds);
            let polygons = if clipped.len() >= 3 && ring_signed_area(&clipped).abs() > 1e-12 {
                vec![PolygonRings { outer: clipped, holes: vec![] }]
            } else {
                vec![]
            };
            Ok(Region { polygons, bounds })
        } else {
            let mut parts: Vec<PolygonRings> = Vec::new();
            parts.push(PolygonRings { outer: b.base().to_vec(), holes: vec![] });
            let n = b.vertex_count();
            for i in 0..n {
                let j = (i + 1) % n;
                let quad = vec![b.base()[i], b.base()[j], projections[j], projections[i]];
                push_clipped_quad(&mut parts, quad, bounds);
            }
            union_parts(parts, bounds)
        }
    } else {
        // Occlusion wedge: every point whose ray from the ABS passes through
        // the footprint is shadowed, regardless of distance.
        if b.footprint_contains(abs.position) {
            return Ok(Region {
                polygons: vec![PolygonRings { outer: bounds.to_ring(), holes: vec![] }],
                bounds,
            });
        }
        let reach = bounds.max_corner_distance(abs.position) + bounds.diagonal();
        let mut parts: Vec<PolygonRings> = Vec::new();
        parts.push(PolygonRings { outer: b.base().to_vec(), holes: vec![] });
        let n = b.vertex_count();
        for i in 0..n {
            let j = (i + 1) % n;
            let (vi, vj) = (b.base()[i], b.base()[j]);
            let ui = unit_from(abs.position, vi);
            let uj = unit_from(abs.position, vj);
            let (Some(ui), Some(uj)) = (ui, uj) else { continue };
            // far points must stay beyond bounds even for near-parallel rays
            let cos_half = ((ui.0 + uj.0) / 2.0).hypot((ui.1 + uj.1) / 2.0);
            let k = (4.0 * reach / cos_half.max(1e-9)).min(1e9);
            let far_i = Point2::new(abs.position.x + ui.0 * k, abs.position.y + ui.1 * k);
            let far_j = Point2::new(abs.position.x + uj.0 * k, abs.position.y + uj.1 * k);
            let quad = vec![vi, vj, far_j, far_i];
            push_clipped_quad(&mut parts, quad, bounds);
        }
        union_parts(parts, bounds)
    }
}

fn unit_from(origin: Point2, target: Point2) -> Option<(f64, f64)> {
    let dx = target.x - origin.x;
    let dy = target.y - origin.y;
    let len = dx.hypot(dy);
    if len < 1e-12 {
        None
    } else {
        Some((dx / len, dy / len))
    }
}

fn push_clipped_quad(parts: &mut Vec<PolygonRings>, mut quad: Vec<Point2>, bounds: Rect) {
    if ring_signed_area(&quad) < 0.0 {
        quad.reverse();
    }
    let clipped = clip_ring_to_rect(&quad, bounds);
    if clipped.len() >= 3 && ring_signed_area(&clipped).abs() > 1e-12 {
        parts.push(PolygonRings { outer: clipped, holes: vec![] });
    }
}

fn union_parts(parts: Vec<PolygonRings>, bounds: Rect) -> Result<Region> {
    let region = Region { polygons: parts, bounds };
    let unioned = union_shadows(std::slice::from_ref(&region), bounds)?;
    Ok(unioned)
}

/// Union of building shadows, clipped to `bounds`.
///
/// All rings go through one plane sweep (non-zero winding over every outer
/// and hole ring), so the cost is O(V log V) in the total vertex count
/// rather than growing with repeated pairwise merges.
pub fn union_shadows(shadows: &[Region], bounds: Rect) -> Result<Region> {
    let mut contours: Vec<Vec<[f64; 2]>> = Vec::new();
    for (index, shadow) in shadows.iter().enumerate() {
        for poly in &shadow.polygons {
            if poly.outer.len() < 3 || ring_signed_area(&poly.outer).abs() < 1e-12 {
                return Err(Error::InvalidPolygon {
                    index,
                    reason: "degenerate ring after snapping".into(),
                });
            }
            contours.push(ring_to_contour(&poly.outer, true));
            for hole in &poly.holes {
                contours.push(ring_to_contour(hole, false));
            }
        }
    }
    if contours.is_empty() {
        return Ok(Region::empty(bounds));
    }
    let shapes = i_overlay::float::overlay::FloatOverlay::with_subj(&contours)
        .overlay(OverlayRule::Subject, FillRule::NonZero);
    let mut polygons = Vec::new();
    for shape in shapes {
        let mut rings = shape.into_iter().map(|c| {
            let mut ring: Vec<Point2> = c.into_iter().map(|p| Point2::new(p[0], p[1])).collect();
            if ring.len() > 1 && ring.first() == ring.last() {
                ring.pop();
            }
            ring
        });
        let Some(outer) = rings.next() else { continue };
        if outer.len() < 3 || ring_signed_area(&outer).abs() < 1e-12 {
            continue;
        }
        let outer = oriented(outer, true);
        let holes = rings
            .filter(|h| h.len() >= 3 && ring_signed_area(h).abs() >= 1e-12)
            .map(|h| oriented(h, false))
            .collect();
        polygons.push(PolygonRings { outer, holes });
    }
    Ok(clip_region_to_bounds(Region { polygons, bounds }))
}

/// Snapped ring as an i_overlay contour with the requested orientation
/// (CCW for filled outers, CW for holes, per the non-zero winding rule).
fn ring_to_contour(ring: &[Point2], ccw: bool) -> Vec<[f64; 2]> {
    let mut contour: Vec<[f64; 2]> = ring.iter().map(|p| [snap(p.x), snap(p.y)]).collect();
    if (ring_signed_area(ring) > 0.0) != ccw {
        contour.reverse();
    }
    contour
}

fn oriented(ring: Vec<Point2>, ccw: bool) -> Vec<Point2> {
    if (ring_signed_area(&ring) > 0.0) == ccw {
        ring
    } else {
        let mut r = ring;
        r.reverse();
        r
    }
}

/// LOS map: outdoor area minus the total shadow region.
pub fn los_map(outdoor: &Region, total_shadow: &Region) -> Result<Region> {
    if total_shadow.is_empty() {
        return Ok(outdoor.clone());
    }
    let diff = region_to_geo(outdoor).difference(&region_to_geo(total_shadow));
    Ok(geo_to_region(diff, outdoor.bounds))
}

/// LOS/NLOS probabilities as the area ratio of shadowed outdoor space.
pub fn los_probability(total_shadow: &Region, outdoor: &Region) -> Result<(f64, f64)> {
    let outdoor_area = outdoor.area();
    if outdoor_area <= 0.0 {
        return Err(Error::InvalidEnvironment("outdoor area is zero".into()));
    }
    let shadowed = if total_shadow.is_empty() {
        0.0
    } else {
        region_to_geo(total_shadow)
            .intersection(&region_to_geo(outdoor))
            .unsigned_area()
    };
    let p_nlos = (shadowed / outdoor_area).clamp(0.0, 1.0);
    Ok((1.0 - p_nlos, p_nlos))
}

/// Total area of a region: outer rings minus holes (shoelace formula).
pub fn polygon_area(region: &Region) -> f64 {
    let mut total = 0.0;
    for poly in &region.polygons {
        let mut a = ring_signed_area(&poly.outer).abs();
        for hole in &poly.holes {
            a -= ring_signed_area(hole).abs();
        }
        total += a.max(0.0);
    }
    total
}

// ---------------------------------------------------------------------------
// Routes and segmentation
// ---------------------------------------------------------------------------

/// A polyline route through the outdoor area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    waypoints: Vec<Point2>,
}

impl Route {
    pub fn new(waypoints: Vec<Point2>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidRoute("need at least 2 waypoints".into()));
        }
        for pair in waypoints.windows(2) {
            if pair[0].distance(&pair[1]) < 1e-12 {
                return Err(Error::InvalidRoute("consecutive waypoints coincide".into()));
            }
        }
        Ok(Self { waypoints })
    }

    pub fn waypoints(&self) -> &[Point2] {
        &self.waypoints
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }

    /// Position at arc length `s` (clamped to the route).
    pub fn point_at(&self, s: f64) -> Point2 {
        let mut remaining = s.max(0.0);
        for pair in self.waypoints.windows(2) {
            let len = pair[0].distance(&pair[1]);
            if remaining <= len {
                let t = if len > 0.0 { remaining / len } else { 0.0 };
                return Point2::new(
                    pair[0].x + t * (pair[1].x - pair[0].x),
                    pair[0].y + t * (pair[1].y - pair[0].y),
                );
            }
            remaining -= len;
        }
        *self.waypoints.last().unwrap()
    }
}

/// One labeled span of a route, by arc length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledSpan {
    pub start: f64,
    pub end: f64,
    pub state: LosState,
}

/// Contiguous LOS/NLOS partition of a route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSegments {
    pub segments: Vec<LabeledSpan>,
}

impl LabeledSegments {
    /// Builds the partition of `[0, total_length]` from NLOS intervals.
    fn from_nlos_intervals(mut intervals: Vec<(f64, f64)>, total_length: f64) -> Self {
        intervals.retain(|(a, b)| b - a > PARAM_EPS);
        intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (a, b) in intervals {
            match merged.last_mut() {
                Some(last) if a <= last.1 + PARAM_EPS => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        let mut segments = Vec::new();
        let mut cursor = 0.0;
        for (a, b) in merged {
            let a = a.clamp(0.0, total_length);
            let b = b.clamp(0.0, total_length);
            if a - cursor > PARAM_EPS {
                segments.push(LabeledSpan { start: cursor, end: a, state: LosState::Los });
            }
            if b - a > PARAM_EPS {
                segments.push(LabeledSpan {
                    start: segments.last().map_or(0.0, |s| s.end),
                    end: b,
                    state: LosState::Nlos,
                });
            }
            cursor = segments.last().map_or(cursor, |s| s.end);
        }
        if total_length - cursor > PARAM_EPS || segments.is_empty() {
            segments.push(LabeledSpan { start: cursor, end: total_length, state: LosState::Los });
        } else if let Some(last) = segments.last_mut() {
            last.end = total_length;
        }
        Self { segments }
    }

    pub fn total_length(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }

    /// Label at arc length `s`; shared boundaries resolve to NLOS (shadows
    /// are closed sets).
    pub fn label_at(&self, s: f64) -> LosState {
        let s = s.clamp(0.0, self.total_length());
        for span in &self.segments {
            if s >= span.start - PARAM_EPS && s <= span.end + PARAM_EPS {
                if span.state == LosState::Nlos {
                    return LosState::Nlos;
                }
                if s < span.end - PARAM_EPS {
                    return LosState::Los;
                }
                // on the right boundary of an LOS span: defer to the next span
            }
        }
        self.segments
            .iter()
            .find(|sp| s >= sp.start - PARAM_EPS && s <= sp.end + PARAM_EPS)
            .map_or(LosState::Los, |sp| sp.state)
    }

    /// Distance from `s` to the nearest internal segment boundary.
    pub fn boundary_distance(&self, s: f64) -> f64 {
        let mut best = f64::INFINITY;
        for span in &self.segments[..self.segments.len().saturating_sub(1)] {
            best = best.min((s - span.end).abs());
        }
        best
    }

    pub fn lengths_of(&self, state: LosState) -> Vec<f64> {
        self.segments
            .iter()
            .filter(|s| s.state == state)
            .map(|s| s.end - s.start)
            .collect()
    }

    pub fn total_length_of(&self, state: LosState) -> f64 {
        self.lengths_of(state).iter().sum()
    }
}

/// Parameter values in `[0, 1]` where segment `p->q` crosses edge `a->b`.
///
/// Collinear overlaps contribute both overlap endpoints; grazing touches
/// contribute a single value.
fn segment_edge_crossings(p: Point2, q: Point2, a: Point2, b: Point2, out: &mut Vec<f64>) {
    let r = (q.x - p.x, q.y - p.y);
    let s = (b.x - a.x, b.y - a.y);
    let denom = r.0 * s.1 - r.1 * s.0;
    let qp = (a.x - p.x, a.y - p.y);
    let cross_qp_r = qp.0 * r.1 - qp.1 * r.0;
    let leg_len2 = r.0 * r.0 + r.1 * r.1;
    if denom.abs() <= 1e-12 * leg_len2.sqrt().max(1.0) {
        if cross_qp_r.abs() <= 1e-9 * leg_len2.sqrt().max(1.0) {
            // collinear: project edge endpoints onto the leg
            let ta = (qp.0 * r.0 + qp.1 * r.1) / leg_len2;
            let tb = ((b.x - p.x) * r.0 + (b.y - p.y) * r.1) / leg_len2;
            let lo = ta.min(tb).max(0.0);
            let hi = ta.max(tb).min(1.0);
            if lo <= hi {
                out.push(lo);
                out.push(hi);
            }
        }
        return;
    }
    let t = (qp.0 * s.1 - qp.1 * s.0) / denom;
    let u = cross_qp_r / denom;
    if (-1e-12..=1.0 + 1e-12).contains(&t) && (-1e-12..=1.0 + 1e-12).contains(&u) {
        out.push(t.clamp(0.0, 1.0));
    }
}

fn region_rings(region: &Region) -> impl Iterator<Item = &Vec<Point2>> {
    region
        .polygons
        .iter()
        .flat_map(|p| std::iter::once(&p.outer).chain(p.holes.iter()))
}

/// NLOS (inside-closed-region) intervals of the leg `p->q` in leg parameters.
fn leg_inside_intervals(p: Point2, q: Point2, region: &Region) -> Vec<(f64, f64)> {
    let mut ts = vec![0.0, 1.0];
    for ring in region_rings(region) {
        let n = ring.len();
        for i in 0..n {
            segment_edge_crossings(p, q, ring[i], ring[(i + 1) % n], &mut ts);
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup_by(|a, b| (*a - *b).abs() < PARAM_EPS);
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let mid = Point2::new(
            p.x + 0.5 * (t0 + t1) * (q.x - p.x),
            p.y + 0.5 * (t0 + t1) * (q.y - p.y),
        );
        if region.contains_closed(mid) {
            match intervals.last_mut() {
                Some((_, end)) if (*end - t0).abs() < PARAM_EPS => *end = t1,
                _ => intervals.push((t0, t1)),
            }
        }
    }
    intervals
}

fn nlos_intervals_along_route(route: &Route, region: &Region) -> Vec<(f64, f64)> {
    let mut intervals = Vec::new();
    let mut offset = 0.0;
    for pair in route.waypoints().windows(2) {
        let len = pair[0].distance(&pair[1]);
        for (t0, t1) in leg_inside_intervals(pair[0], pair[1], region) {
            intervals.push((offset + t0 * len, offset + t1 * len));
        }
        offset += len;
    }
    intervals
}

/// Partitions a route into LOS/NLOS spans against the total shadow region.
///
/// A point is NLOS iff it lies in the closed shadow region; isolated boundary
/// touches have zero length and are dropped.
pub fn segment_route(route: &Route, total_shadow: &Region) -> LabeledSegments {
    let intervals = nlos_intervals_along_route(route, total_shadow);
    LabeledSegments::from_nlos_intervals(intervals, route.length())
}

/// Partitions a route against per-building shadows without forming the 2D
/// union: the union happens on 1D arc-length intervals instead.
///
/// Equivalent to [`segment_route`] on [`union_shadows`] of the same shadows,
/// but with crossings computed directly from the exact shadow vertices. Used
/// by the campaign pipeline where crossing positions must match the
/// ray-traced oracle to well below the 1e-6 m comparison band.
pub fn segment_route_shadows(route: &Route, shadows: &[Region]) -> LabeledSegments {
    let mut intervals = Vec::new();
    for shadow in shadows {
        intervals.extend(nlos_intervals_along_route(route, shadow));
    }
    LabeledSegments::from_nlos_intervals(intervals, route.length())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn abs(x: f64, y: f64, h: f64) -> AbsState {
        AbsState::new(Point2::new(x, y), h).unwrap()
    }

    fn square(x0: f64, y0: f64, side: f64) -> Vec<Point2> {
        vec![
            Point2::new(x0, y0),
            Point2::new(x0 + side, y0),
            Point2::new(x0 + side, y0 + side),
            Point2::new(x0, y0 + side),
        ]
    }

    fn region_from_ring(ring: Vec<Point2>, bounds: Rect) -> Region {
        Region { polygons: vec![PolygonRings { outer: ring, holes: vec![] }], bounds }
    }

    #[test]
    fn projection_direct_substitution() {
        let p = project_roof_vertex(Point2::new(10.0, 0.0), 20.0, &abs(0.0, 0.0, 100.0)).unwrap();
        assert!((p.x - 12.5).abs() < 1e-12 && p.y.abs() < 1e-12);
    }

    #[test]
    fn projection_under_abs_is_identity() {
        let p = project_roof_vertex(Point2::new(0.0, 0.0), 50.0, &abs(0.0, 0.0, 100.0)).unwrap();
        assert_eq!((p.x, p.y), (0.0, 0.0));
    }

    #[test]
    fn projection_scale_factor_two() {
        let p = project_roof_vertex(Point2::new(5.0, 5.0), 50.0, &abs(0.0, 0.0, 100.0)).unwrap();
        assert!((p.x - 10.0).abs() < 1e-12 && (p.y - 10.0).abs() < 1e-12);
    }

    #[test]
    fn projection_at_or_above_abs_height_fails() {
        let err = project_roof_vertex(Point2::new(1.0, 1.0), 100.0, &abs(0.0, 0.0, 100.0));
        assert!(matches!(err, Err(Error::DegenerateProjection { .. })));
    }

    #[test]
    fn unit_square_shadow_is_six_vertex_hull() {
        // generic ABS pose: two base and all four projected corners survive
        let b = Building::new(square(10.0, 5.0, 1.0), 20.0).unwrap();
        let bounds = Rect::new(-50.0, -50.0, 50.0, 50.0);
        let shadow = building_shadow(&b, &abs(0.0, 0.0, 100.0), bounds).unwrap();
        assert_eq!(shadow.polygons.len(), 1);
        assert_eq!(shadow.polygons[0].outer.len(), 6);
        // far corner (11, 6) projects to (13.75, 7.5)
        assert!(shadow.contains_closed(Point2::new(13.75, 7.5)));
        for v in b.base() {
            assert!(shadow.contains_closed(*v));
        }
    }

    #[test]
    fn shadow_above_centroid_stays_near_footprint() {
        // ABS directly above the centroid: every projection is the footprint
        // scaled about the centroid, so the shadow hull equals the scaled
        // footprint. Verify with a point-sampling check on a 0.1 m grid.
        let b = Building::new(square(-5.0, -5.0, 10.0), 50.0).unwrap();
        let a = abs(0.0, 0.0, 100.0);
        let bounds = Rect::new(-100.0, -100.0, 100.0, 100.0);
        let shadow = building_shadow(&b, &a, bounds).unwrap();
        let scale = a.height / (a.height - b.height());
        let mut mismatches = 0usize;
        let mut total = 0usize;
        let mut y = -12.0;
        while y <= 12.0 {
            let mut x = -12.0;
            while x <= 12.0 {
                let p = Point2::new(x, y);
                let expected = p.x.abs() <= 5.0 * scale + 1e-9 && p.y.abs() <= 5.0 * scale + 1e-9;
                total += 1;
                if expected != shadow.contains_closed(p) {
                    // tolerate only points on the scaled boundary
                    if (p.x.abs() - 5.0 * scale).abs() > 1e-6
                        && (p.y.abs() - 5.0 * scale).abs() > 1e-6
                    {
                        mismatches += 1;
                    }
                }
                x += 0.1;
            }
            y += 0.1;
        }
        assert!(total > 10_000);
        assert_eq!(mismatches, 0);
    }

    #[test]
    fn tall_building_shadow_is_clipped_wedge() {
        let b = Building::new(square(40.0, 40.0, 20.0), 120.0).unwrap();
        let a = abs(0.0, 0.0, 100.0);
        let bounds = Rect::new(0.0, 0.0, 100.0, 100.0);
        let shadow = building_shadow(&b, &a, bounds).unwrap();
        // everything behind the building (seen from the ABS) is shadowed
        assert!(shadow.contains_closed(Point2::new(90.0, 90.0)));
        assert!(shadow.contains_closed(Point2::new(50.0, 50.0)));
        assert!(!shadow.contains_closed(Point2::new(10.0, 10.0)));
        assert!(!shadow.contains_closed(Point2::new(90.0, 10.0)));
        // area bounded by the clip
        assert!(shadow.area() <= bounds.area() + 1e-6);
    }

    #[test]
    fn union_disjoint_squares() {
        let bounds = Rect::new(0.0, 0.0, 100.0, 100.0);
        let a = region_from_ring(square(0.0, 0.0, 2.0), bounds);
        let b = region_from_ring(square(10.0, 10.0, 2.0), bounds);
        let u = union_shadows(&[a, b], bounds).unwrap();
        assert!((u.area() - 8.0).abs() < 1e-9);
        assert_eq!(u.polygons.len(), 2);
    }

    #[test]
    fn union_idempotent() {
        let bounds = Rect::new(0.0, 0.0, 100.0, 100.0);
        let a = region_from_ring(square(1.0, 1.0, 3.0), bounds);
        let u = union_shadows(&[a.clone(), a], bounds).unwrap();
        assert!((u.area() - 9.0).abs() < 1e-9);
    }

    #[test]
    fn los_map_identity_and_annihilation() {
        let bounds = Rect::new(0.0, 0.0, 10.0, 10.0);
        let outdoor = region_from_ring(bounds.to_ring(), bounds);
        let empty = Region::empty(bounds);
        let l = los_map(&outdoor, &empty).unwrap();
        assert!((l.area() - 100.0).abs() < 1e-9);
        let full = region_from_ring(bounds.to_ring(), bounds);
        let l2 = los_map(&outdoor, &full).unwrap();
        assert!(l2.area() < 1e-9);
    }

    #[test]
    fn los_probability_no_buildings() {
        let bounds = Rect::new(0.0, 0.0, 10.0, 10.0);
        let outdoor = region_from_ring(bounds.to_ring(), bounds);
        let (p_los, p_nlos) = los_probability(&Region::empty(bounds), &outdoor).unwrap();
        assert_eq!(p_los, 1.0);
        assert_eq!(p_nlos, 0.0);
    }

    #[test]
    fn los_probability_half_covered() {
        let bounds = Rect::new(0.0, 0.0, 10.0, 10.0);
        let outdoor = region_from_ring(bounds.to_ring(), bounds);
        let shadow = region_from_ring(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(10.0, 0.0),
                Point2::new(10.0, 5.0),
                Point2::new(0.0, 5.0),
            ],
            bounds,
        );
        let (p_los, p_nlos) = los_probability(&shadow, &outdoor).unwrap();
        assert!((p_nlos - 0.5).abs() < 1e-9);
        assert!((p_los - 0.5).abs() < 1e-9);
    }

    #[test]
    fn los_probability_rejects_empty_outdoor() {
        let bounds = Rect::new(0.0, 0.0, 10.0, 10.0);
        let err = los_probability(&Region::empty(bounds), &Region::empty(bounds));
        assert!(matches!(err, Err(Error::InvalidEnvironment(_))));
    }

    #[test]
    fn polygon_area_examples() {
        let bounds = Rect::new(0.0, 0.0, 10.0, 10.0);
        let unit = region_from_ring(square(0.0, 0.0, 1.0), bounds);
        assert!((polygon_area(&unit) - 1.0).abs() < 1e-12);
        let mut with_hole = region_from_ring(square(0.0, 0.0, 1.0), bounds);
        let mut hole = square(0.25, 0.25, 0.5);
        hole.reverse();
        with_hole.polygons[0].holes.push(hole);
        assert!((polygon_area(&with_hole) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn hull_of_square_is_square() {
        let hull = convex_hull(&square(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(hull.len(), 4);
        assert!((ring_signed_area(&hull) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hull_drops_interior_point() {
        let mut pts = square(0.0, 0.0, 2.0);
        pts.push(Point2::new(1.0, 1.0));
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.len(), 4);
    }

    #[test]
    fn hull_rejects_collinear() {
        let pts = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(2.0, 2.0)];
        assert!(matches!(convex_hull(&pts), Err(Error::DegenerateHull(_))));
    }

    /// O(n^2) gift-wrapping reference hull.
    fn gift_wrap(points: &[Point2]) -> Vec<Point2> {
        let start = *points
            .iter()
            .min_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()))
            .unwrap();
        let mut hull = vec![start];
        let mut current = start;
        loop {
            let mut candidate = points[0];
            for &p in points {
                if p.distance(&current) < 1e-12 {
                    continue;
                }
                let c = cross(current, candidate, p);
                if candidate.distance(&current) < 1e-12
                    || c < 0.0
                    || (c.abs() < 1e-12 && current.distance(&p) > current.distance(&candidate))
                {
                    candidate = p;
                }
            }
            if candidate.distance(&start) < 1e-12 {
                break;
            }
            hull.push(candidate);
            current = candidate;
        }
        hull
    }

    #[test]
    fn hull_matches_gift_wrapping_on_manhattan_shadow_points() {
        let b = Building::new(square(30.0, 40.0, 12.0), 18.0).unwrap();
        let a = abs(5.0, 7.0, 90.0);
        let mut pts = b.base().to_vec();
        for v in b.base() {
            pts.push(project_roof_vertex(*v, b.height(), &a).unwrap());
        }
        let hull = convex_hull(&pts).unwrap();
        let reference = gift_wrap(&pts);
        assert!(hull.len() <= 8);
        assert_eq!(hull.len(), reference.len());
        for p in &reference {
            assert!(hull.iter().any(|q| q.distance(p) < 1e-9));
        }
    }

    #[test]
    fn convex_hull_matches_wall_face_construction() {
        // Convex-hull/wall-face equivalence invariant: symmetric difference
        // below 1e-6 m^2 for convex prisms below the ABS.
        let bounds = Rect::new(-200.0, -200.0, 200.0, 200.0);
        let a = abs(3.0, -7.0, 80.0);
        let b = Building::new(square(20.0, 10.0, 15.0), 35.0).unwrap();
        let hull_region = building_shadow(&b, &a, bounds).unwrap();
        // general wall-face construction
        let projections: Vec<Point2> = b
            .base()
            .iter()
            .map(|v| project_roof_vertex(*v, b.height(), &a).unwrap())
            .collect();
        let mut parts = vec![PolygonRings { outer: b.base().to_vec(), holes: vec![] }];
        for i in 0..4 {
            let j = (i + 1) % 4;
            push_clipped_quad(
                &mut parts,
                vec![b.base()[i], b.base()[j], projections[j], projections[i]],
                bounds,
            );
        }
        let general = union_parts(parts, bounds).unwrap();
        let sym_diff = region_to_geo(&hull_region)
            .xor(&region_to_geo(&general))
            .unsigned_area();
        // tolerance covers the boolean backend's coordinate quantization
        // (~1e-7 m at this extent) along the shared boundary
        assert!(sym_diff < 1e-4, "symmetric difference {sym_diff}");
    }

    #[test]
    fn route_outside_shadows_is_single_los_segment() {
        let bounds = Rect::new(0.0, 0.0, 100.0, 100.0);
        let shadow = region_from_ring(square(50.0, 50.0, 10.0), bounds);
        let route =
            Route::new(vec![Point2::new(0.0, 0.0), Point2::new(100.0, 0.0)]).unwrap();
        let segs = segment_route(&route, &shadow);
        assert_eq!(segs.segments.len(), 1);
        assert_eq!(segs.segments[0].state, LosState::Los);
        assert!((segs.total_length() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn route_through_square_shadow_has_chord_nlos() {
        let bounds = Rect::new(0.0, 0.0, 100.0, 100.0);
        let shadow = region_from_ring(square(40.0, 0.0, 20.0), bounds);
        let route =
            Route::new(vec![Point2::new(0.0, 10.0), Point2::new(100.0, 10.0)]).unwrap();
        let segs = segment_route(&route, &shadow);
        assert_eq!(segs.segments.len(), 3);
        assert_eq!(segs.segments[1].state, LosState::Nlos);
        let nlos_len = segs.total_length_of(LosState::Nlos);
        assert!((nlos_len - 20.0).abs() < 1e-9, "chord length {nlos_len}");
        assert!((segs.total_length() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn segment_route_shadows_matches_union_route() {
        let bounds = Rect::new(0.0, 0.0, 100.0, 100.0);
        let shadows = vec![
            region_from_ring(square(10.0, 0.0, 15.0), bounds),
            region_from_ring(square(20.0, 0.0, 15.0), bounds),
            region_from_ring(square(60.0, 0.0, 5.0), bounds),
        ];
        let union = union_shadows(&shadows, bounds).unwrap();
        let route = Route::new(vec![Point2::new(0.0, 5.0), Point2::new(100.0, 5.0)]).unwrap();
        let a = segment_route(&route, &union);
        let b = segment_route_shadows(&route, &shadows);
        assert_eq!(a.segments.len(), b.segments.len());
        for (x, y) in a.segments.iter().zip(b.segments.iter()) {
            assert_eq!(x.state, y.state);
            assert!((x.start - y.start).abs() < 1e-7);
            assert!((x.end - y.end).abs() < 1e-7);
        }
    }

    #[test]
    fn boundary_point_labels_nlos() {
        let bounds = Rect::new(0.0, 0.0, 100.0, 100.0);
        let shadow = region_from_ring(square(40.0, 0.0, 20.0), bounds);
        let route =
            Route::new(vec![Point2::new(0.0, 10.0), Point2::new(100.0, 10.0)]).unwrap();
        let segs = segment_route(&route, &shadow);
        assert_eq!(segs.label_at(40.0), LosState::Nlos);
        assert_eq!(segs.label_at(60.0), LosState::Nlos);
        assert_eq!(segs.label_at(39.999), LosState::Los);
    }

    proptest! {
        #[test]
        fn projection_collinear_and_farther(
            vx in -400.0..400.0f64, vy in -400.0..400.0f64,
            ax in -400.0..400.0f64, ay in -400.0..400.0f64,
            hb in 1.0..99.0f64, habs in 100.0..250.0f64,
        ) {
            let a = abs(ax, ay, habs);
            let v = Point2::new(vx, vy);
            let s = project_roof_vertex(v, hb, &a).unwrap();
            let c = cross(a.position, v, s);
            let scale = v.distance(&a.position).max(1.0) * s.distance(&a.position).max(1.0);
            prop_assert!(c.abs() / scale < 1e-9);
            prop_assert!(s.distance(&a.position) >= v.distance(&a.position) - 1e-9);
        }

        #[test]
        fn hull_contains_all_inputs(
            pts in proptest::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 3..40)
        ) {
            let points: Vec<Point2> = pts.iter().map(|&(x, y)| Point2::new(x, y)).collect();
            if let Ok(hull) = convex_hull(&points) {
                let bounds = Rect::new(-200.0, -200.0, 200.0, 200.0);
                let region = region_from_ring(hull, bounds);
                for p in &points {
                    prop_assert!(region.contains_closed(*p));
                }
            }
        }

        #[test]
        fn union_contains_inputs_and_bounds_area(
            squares in proptest::collection::vec((0.0..80.0f64, 0.0..80.0f64, 1.0..15.0f64), 1..8)
        ) {
            let bounds = Rect::new(0.0, 0.0, 100.0, 100.0);
            let regions: Vec<Region> = squares
                .iter()
                .map(|&(x, y, s)| region_from_ring(square(x, y, s), bounds))
                .collect();
            let total: f64 = regions.iter().map(Region::area).sum();
            let u = union_shadows(&regions, bounds).unwrap();
            // slack: boolean-backend quantization (~1e-7 m) times perimeter
            prop_assert!(u.area() <= total + 1e-4);
            for r in &regions {
                let c = Point2::new(
                    r.polygons[0].outer[0].x + 0.5,
                    r.polygons[0].outer[0].y + 0.5,
                );
                if bounds.contains(c) {
                    prop_assert!(u.contains_closed(c));
                }
            }
        }

        #[test]
        fn segmentation_conserves_length(
            shadows in proptest::collection::vec((0.0..90.0f64, 0.0..90.0f64, 1.0..20.0f64), 0..10),
            y in 1.0..99.0f64,
        ) {
            let bounds = Rect::new(0.0, 0.0, 100.0, 100.0);
            let regions: Vec<Region> = shadows
                .iter()
                .map(|&(x, yy, s)| region_from_ring(square(x, yy, s), bounds))
                .collect();
            let route = Route::new(vec![Point2::new(0.0, y), Point2::new(100.0, y)]).unwrap();
            let segs = segment_route_shadows(&route, &regions);
            let sum: f64 = segs.segments.iter().map(|s| s.end - s.start).sum();
            prop_assert!((sum - 100.0).abs() < 1e-9 * 100.0);
            for pair in segs.segments.windows(2) {
                prop_assert!(pair[0].state != pair[1].state);
                prop_assert!((pair[0].end - pair[1].start).abs() < 1e-12);
            }
        }
    }
}
