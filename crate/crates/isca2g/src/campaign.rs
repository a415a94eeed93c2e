//! Seeded Monte-Carlo experiment harness.
//!
//! A campaign runs many independent realizations of: generate a
//! Manhattan-grid city, place the ABS at random, build a pedestrian street
//! route, segment it into LOS/NLOS spans via shadow projection, evaluate the
//! channel along it with correlated fading, and extract outage segments per
//! EIRP. Aggregates are CDFs of segment lengths and channel loss plus outage
//! probabilities.
//!
//! Routes follow the street graph: straight legs between intersections with
//! a configurable probability of turning at each one, walking near the
//! building line on the side of the street facing the ABS. LOS/NLOS and
//! outage run statistics are collected per street leg: a run ends when the
//! route turns into a different street canyon, and the short corner
//! transitions between legs are excluded.
//!
//! All randomness derives from a single master seed: every realization uses
//! independent streams keyed by (master_seed, realization index, purpose),
//! so realizations can run in parallel and results do not depend on the
//! execution order or thread count.

use crate::channel::{self, outage_threshold, shadow_std, ChannelParams, LinkGeometry};
use crate::environment::{generate_manhattan, GridLayout, ItuParams, Preset};
use crate::fading::{map_unit_field, route_unit_process, MapSpec};
use crate::geometry::{
    building_shadow, segment_route_shadows, union_shadows, AbsState, Building, LabeledSegments,
    LosState, Point2, Rect, Region, Route,
};
use crate::rt_oracle::{compare_labels, segment_route_rt, Mismatch};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// RNG purpose tags for stream derivation.
pub mod stream {
    pub const LAYOUT: u64 = 1;
    pub const ABS: u64 = 2;
    pub const ROUTE: u64 = 3;
    pub const FADING: u64 = 4;
    pub const SCENE: u64 = 5;
    pub const RADIO_MAP: u64 = 6;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent RNG stream keyed by (master seed, realization index, purpose).
pub fn derive_rng(master_seed: u64, index: u64, purpose: u64) -> ChaCha12Rng {
    let seed = splitmix64(master_seed ^ splitmix64(index ^ splitmix64(purpose)));
    ChaCha12Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Environment selection: a preset name or explicit ITU parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvironmentSpec {
    Name(String),
    Params(ItuParams),
}

impl EnvironmentSpec {
    pub fn resolve(&self) -> Result<ItuParams> {
        match self {
            EnvironmentSpec::Name(name) => Ok(crate::environment::preset(name.parse::<Preset>()?)),
            EnvironmentSpec::Params(p) => {
                p.validate()?;
                Ok(p.clone())
            }
        }
    }
}

/// Route construction policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RoutePolicy {
    /// `"street-route"`: a walk along the street graph that may turn at
    /// intersections, keeping close to the building line facing the ABS.
    Named(String),
    /// Explicit waypoints in meters.
    Explicit { waypoints: Vec<[f64; 2]> },
}

/// Seeded description of one Monte-Carlo campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub environment: EnvironmentSpec,
    pub realizations: usize,
    pub route: RoutePolicy,
    pub route_length_m: f64,
    /// Probability of turning at each street intersection.
    pub route_turn_prob: f64,
    /// Walking distance from the adjacent building faces, meters; capped at
    /// the street centerline (St/2).
    pub route_wall_offset_m: f64,
    pub target_side_m: f64,
    pub abs_x_m: [f64; 2],
    pub abs_y_m: [f64; 2],
    pub abs_height_m: [f64; 2],
    pub eirp_dbm: Vec<f64>,
    pub sensitivity_dbm: f64,
    pub sample_step_m: f64,
    pub master_seed: u64,
    /// Regenerate the city (heights included) for every realization when
    /// false; reuse realization 0's city when true.
    pub fixed_layout: bool,
    pub channel: ChannelParams,
    /// Cell size for radio maps, meters.
    pub grid_spacing_m: f64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            environment: EnvironmentSpec::Name("Suburban".into()),
            realizations: 1000,
            route: RoutePolicy::Named("street-route".into()),
            route_length_m: 1000.0,
            route_turn_prob: 0.44,
            route_wall_offset_m: 0.25,
            target_side_m: 1000.0,
            abs_x_m: [0.0, 1000.0],
            abs_y_m: [0.0, 1000.0],
            abs_height_m: [30.0, 250.0],
            eirp_dbm: vec![13.0, 18.0, 23.0],
            sensitivity_dbm: -84.7,
            sample_step_m: 1.0,
            master_seed: 1,
            fixed_layout: false,
            channel: ChannelParams::default(),
            grid_spacing_m: 2.0,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        self.environment.resolve()?;
        self.channel.validate()?;
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be >= 1".into()));
        }
        if !(self.sample_step_m > 0.0) {
            return Err(Error::Config("sample_step_m must be > 0".into()));
        }
        for (name, range) in
            [("abs_x_m", self.abs_x_m), ("abs_y_m", self.abs_y_m), ("abs_height_m", self.abs_height_m)]
        {
            if !(range[0] <= range[1]) {
                return Err(Error::Config(format!("{name} bounds must be ordered")));
            }
        }
        if self.abs_height_m[0] <= 0.0 {
            return Err(Error::Config("abs_height_m must be positive".into()));
        }
        if let RoutePolicy::Named(name) = &self.route {
            if name != "street-route" {
                return Err(Error::Config(format!("unknown route policy '{name}'")));
            }
        }
        if !(0.0..=1.0).contains(&self.route_turn_prob) {
            return Err(Error::Config("route_turn_prob must be in [0, 1]".into()));
        }
        if !(self.route_wall_offset_m >= 0.0) {
            return Err(Error::Config("route_wall_offset_m must be >= 0".into()));
        }
        if self.eirp_dbm.is_empty() {
            return Err(Error::Config("eirp_dbm must not be empty".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: CampaignConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

// ---------------------------------------------------------------------------
// Per-realization results
// ---------------------------------------------------------------------------

/// Compact description of the generated city in one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutSummary {
    pub count_x: usize,
    pub count_y: usize,
    pub heights_digest: u64,
}

fn heights_digest(layout: &GridLayout) -> u64 {
    let mut acc = 0xcbf2_9ce4_8422_2325u64;
    for b in &layout.buildings {
        acc ^= b.height().to_bits();
        acc = acc.wrapping_mul(0x0000_0100_0000_01B3);
    }
    acc
}

/// One channel sample along the route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub arclength_m: f64,
    pub x: f64,
    pub y: f64,
    pub theta_deg: f64,
    pub los: LosState,
    pub reference_db: f64,
    pub excess_db: f64,
    pub fading_db: f64,
    pub total_db: f64,
}

/// The channel evaluated along a route at a fixed sampling step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTrace {
    pub samples: Vec<TraceSample>,
}

/// Everything produced by a single realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationResult {
    pub index: usize,
    pub layout: LayoutSummary,
    pub abs: AbsState,
    pub p_los: f64,
    pub segments: LabeledSegments,
    /// Arc-length spans of the straight street legs of the route.
    pub leg_spans: Vec<(f64, f64)>,
    pub trace: ChannelTrace,
    /// Outage segments (start, end) in meters, parallel to the config's
    /// `eirp_dbm` list.
    pub outage_segments: Vec<Vec<(f64, f64)>>,
}

// ---------------------------------------------------------------------------
// Route construction
// ---------------------------------------------------------------------------

/// A route plus the arc-length spans of its straight street legs.
///
/// The gaps between consecutive leg spans are the short corner transitions
/// where the walk crosses from one street canyon to the next; per-leg
/// statistics exclude them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteWalk {
    pub route: Route,
    pub leg_spans: Vec<(f64, f64)>,
}

/// Walk parameters of the street-route policy.
#[derive(Debug, Clone, Copy)]
pub struct WalkParams {
    pub turn_prob: f64,
    pub wall_offset_m: f64,
}

/// Builds the route for one realization.
///
/// The street policy performs a walk on the street graph: starting from a
/// random intersection in a random direction, it advances one block at a
/// time and turns left or right with probability `turn_prob` at each
/// intersection, reflecting at the layout boundary. Each straight leg is
/// shifted off the street centerline to `wall_offset_m` from the building
/// faces on the side of the street facing the ABS, and consecutive legs are
/// joined by short corner transitions. The walk is trimmed to the requested
/// length.
pub fn build_route(
    layout: &GridLayout,
    policy: &RoutePolicy,
    route_length_m: f64,
    walk: WalkParams,
    abs: &AbsState,
    rng: &mut impl Rng,
) -> Result<RouteWalk> {
    match policy {
        RoutePolicy::Named(name) if name == "street-route" => {
            street_walk(layout, route_length_m, walk, abs, rng)
        }
        RoutePolicy::Named(name) => Err(Error::Config(format!("unknown route policy '{name}'"))),
        RoutePolicy::Explicit { waypoints } => {
            let points: Vec<Point2> =
                waypoints.iter().map(|w| Point2::new(w[0], w[1])).collect();
            for p in &points {
                if layout.buildings.iter().any(|b| {
                    b.bbox().contains(*p) && b.footprint_contains(*p)
                }) {
                    return Err(Error::InvalidRoute(format!(
                        "waypoint ({}, {}) lies inside a building footprint",
                        p.x, p.y
                    )));
                }
            }
            let route = Route::new(points)?;
            // every polyline edge is a leg
            let mut leg_spans = Vec::new();
            let mut acc = 0.0;
            for pair in route.waypoints().windows(2) {
                let next = acc + pair[0].distance(&pair[1]);
                leg_spans.push((acc, next));
                acc = next;
            }
            Ok(RouteWalk { route, leg_spans })
        }
    }
}

fn street_walk(
    layout: &GridLayout,
    route_length_m: f64,
    walk: WalkParams,
    abs: &AbsState,
    rng: &mut impl Rng,
) -> Result<RouteWalk> {
    let pitch = layout.pitch();
    let st = layout.street_width;
    let count_x = layout.count_x as i64;
    let count_y = layout.count_y as i64;
    // vertical street centerlines and horizontal street centerlines
    let xc = |i: i64| (i as f64 - 1.0) * pitch + st / 2.0;
    let yc = |j: i64| j as f64 * pitch - st / 2.0;

    let mut i = rng.gen_range(1..=count_x);
    let mut j = rng.gen_range(1..=count_y);
    let dirs: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
    let mut d = dirs[rng.gen_range(0..4)];
    let mut nodes = vec![(i, j)];
    let mut walked = 0.0;
    while walked < route_length_m {
        if rng.gen_bool(walk.turn_prob) {
            d = if rng.gen_bool(0.5) { (d.1, d.0) } else { (-d.1, -d.0) };
        }
        // reflect off the layout boundary; fall back to the other axis on
        // degenerate single-street grids
        if i + d.0 < 1 || i + d.0 > count_x {
            d.0 = -d.0;
            if i + d.0 < 1 || i + d.0 > count_x {
                d = (0, if j < count_y { 1 } else { -1 });
            }
        }
        if d.1 != 0 && (j + d.1 < 1 || j + d.1 > count_y) {
            d.1 = -d.1;
            if j + d.1 < 1 || j + d.1 > count_y {
                if count_x < 2 {
                    break;
                }
                d = (if i < count_x { 1 } else { -1 }, 0);
            }
        }
        i += d.0;
        j += d.1;
        nodes.push((i, j));
        walked += pitch;
    }

    // compress collinear node runs into straight legs
    let mut legs: Vec<((i64, i64), (i64, i64))> = Vec::new();
    let mut start = nodes[0];
    for w in nodes.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        if (b.0 - a.0, b.1 - a.1) != (c.0 - b.0, c.1 - b.1) {
            legs.push((start, b));
            start = b;
        }
    }
    legs.push((start, *nodes.last().unwrap()));

    // shift each leg from the street centerline toward the ABS side
    let shift = (st / 2.0 - walk.wall_offset_m).max(0.0);
    let mut points: Vec<Point2> = Vec::new();
    let mut leg_spans = Vec::new();
    let mut acc = 0.0;
    for (a, b) in &legs {
        let (p1, p2) = if a.1 == b.1 {
            let y0 = yc(a.1);
            let y = y0 + (abs.position.y - y0).signum() * shift;
            (Point2::new(xc(a.0), y), Point2::new(xc(b.0), y))
        } else {
            let x0 = xc(a.0);
            let x = x0 + (abs.position.x - x0).signum() * shift;
            (Point2::new(x, yc(a.1)), Point2::new(x, yc(b.1)))
        };
        if let Some(&last) = points.last() {
            acc += last.distance(&p1);
        }
        let leg_start = acc;
        points.push(p1);
        acc += p1.distance(&p2);
        leg_spans.push((leg_start, acc));
        points.push(p2);
    }

    // trim the walk to the requested length
    if acc > route_length_m {
        while points.len() >= 2 {
            let n = points.len();
            let seg = points[n - 2].distance(&points[n - 1]);
            let base = acc - seg;
            if base >= route_length_m && n > 2 {
                points.pop();
                acc = base;
            } else {
                let t = (route_length_m - base) / seg;
                let (a, b) = (points[n - 2], points[n - 1]);
                points[n - 1] = Point2::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t);
                break;
            }
        }
        leg_spans.retain(|&(s, _)| s < route_length_m);
        if let Some(last) = leg_spans.last_mut() {
            last.1 = last.1.min(route_length_m);
        }
    }
    points.dedup_by(|a, b| a.distance(b) < 1e-9);
    Ok(RouteWalk { route: Route::new(points)?, leg_spans })
}

/// Lengths of same-state label runs restricted to the straight street legs.
///
/// Each labeled span is intersected with each leg span; pieces inside the
/// corner transitions between legs are dropped.
pub fn leg_lengths(
    segments: &LabeledSegments,
    leg_spans: &[(f64, f64)],
    state: LosState,
) -> Vec<f64> {
    let mut out = Vec::new();
    for span in &segments.segments {
        if span.state != state {
            continue;
        }
        for &(a, b) in leg_spans {
            let lo = span.start.max(a);
            let hi = span.end.min(b);
            if hi > lo + 1e-9 {
                out.push(hi - lo);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Channel tracing
// ---------------------------------------------------------------------------

/// Evaluates the channel along a segmented route.
///
/// One correlated unit-variance fading process runs along the whole route;
/// the LOS state only modulates the local standard deviation, keeping the
/// fading spatially continuous across LOS/NLOS transitions.
pub fn trace_route(
    route: &Route,
    segments: &LabeledSegments,
    abs: &AbsState,
    params: &ChannelParams,
    sample_step_m: f64,
    rng: &mut impl Rng,
) -> Result<ChannelTrace> {
    let length = route.length();
    let count = (length / sample_step_m).floor() as usize;
    let mut arclengths: Vec<f64> = (0..=count).map(|k| k as f64 * sample_step_m).collect();
    if length - arclengths[arclengths.len() - 1] > 1e-9 {
        arclengths.push(length);
    }
    let unit = route_unit_process(&arclengths, params.decorr_distance_m, rng)?;
    let reference_db = channel::reference_path_loss(abs.height, params.frequency_hz);
    let mut samples = Vec::with_capacity(arclengths.len());
    for (&s, &u) in arclengths.iter().zip(unit.iter()) {
        let p = route.point_at(s);
        let los = segments.label_at(s);
        let geom = LinkGeometry::new(p.distance(&abs.position), abs.height);
        let excess_db = channel::excess_path_loss(geom.elevation_deg, los)?;
        let fading_db = shadow_std(geom.elevation_deg, los, params) * u;
        samples.push(TraceSample {
            arclength_m: s,
            x: p.x,
            y: p.y,
            theta_deg: geom.elevation_deg,
            los,
            reference_db,
            excess_db,
            fading_db,
            total_db: reference_db + excess_db + fading_db,
        });
    }
    Ok(ChannelTrace { samples })
}

/// Maximal runs of samples whose loss strictly exceeds the threshold.
///
/// Each run is reported as [first-sample arc length, last-sample arc length
/// + step], capped at the route length; resolution equals the sampling step.
/// Runs are additionally split at the given arc-length cuts (street-leg
/// boundaries), so an outage distance never spans a corner.
pub fn outage_segments(
    trace: &ChannelTrace,
    threshold_db: f64,
    step_m: f64,
    cuts: &[f64],
) -> Vec<(f64, f64)> {
    let mut segments = Vec::new();
    let route_end = trace.samples.last().map_or(0.0, |s| s.arclength_m);
    let mut run_start: Option<f64> = None;
    let mut run_end = 0.0;
    let mut next_cut = 0usize;
    for sample in &trace.samples {
        while next_cut < cuts.len() && cuts[next_cut] <= sample.arclength_m {
            next_cut += 1;
            if let Some(start) = run_start.take() {
                segments.push((start, (run_end + step_m).min(route_end)));
            }
        }
        if sample.total_db > threshold_db {
            if run_start.is_none() {
                run_start = Some(sample.arclength_m);
            }
            run_end = sample.arclength_m;
        } else if let Some(start) = run_start.take() {
            segments.push((start, (run_end + step_m).min(route_end)));
        }
    }
    if let Some(start) = run_start {
        segments.push((start, (run_end + step_m).min(route_end)));
    }
    segments
}

// ---------------------------------------------------------------------------
// Realizations and campaigns
// ---------------------------------------------------------------------------

/// Shadows of every building in a layout.
pub fn layout_shadows(layout: &GridLayout, abs: &AbsState) -> Result<Vec<Region>> {
    layout
        .buildings
        .iter()
        .map(|b| building_shadow(b, abs, layout.bounds))
        .collect()
}

/// LOS probability of a layout from the shadow-union area.
///
/// Footprints always lie inside their own shadow, so the shadowed outdoor
/// area is the union area minus the total footprint area.
pub fn layout_los_probability(layout: &GridLayout, total_shadow_area: f64) -> f64 {
    let footprint_total: f64 = layout.buildings.iter().map(|b| b.footprint_area()).sum();
    let outdoor = layout.bounds.area() - footprint_total;
    if outdoor <= 0.0 {
        return 0.0;
    }
    let p_nlos = ((total_shadow_area - footprint_total) / outdoor).clamp(0.0, 1.0);
    1.0 - p_nlos
}

/// Runs realization `index` of a campaign.
pub fn run_realization(config: &CampaignConfig, index: usize) -> Result<RealizationResult> {
    let params = config.environment.resolve()?;
    let layout_index = if config.fixed_layout { 0 } else { index as u64 };
    let mut rng_layout = derive_rng(config.master_seed, layout_index, stream::LAYOUT);
    let layout = generate_manhattan(&params, config.target_side_m, &mut rng_layout)?;

    let mut rng_abs = derive_rng(config.master_seed, index as u64, stream::ABS);
    let abs = AbsState::new(
        Point2::new(
            sample_range(config.abs_x_m, &mut rng_abs),
            sample_range(config.abs_y_m, &mut rng_abs),
        ),
        sample_range(config.abs_height_m, &mut rng_abs),
    )?;

    let mut rng_route = derive_rng(config.master_seed, index as u64, stream::ROUTE);
    let walk = build_route(
        &layout,
        &config.route,
        config.route_length_m,
        WalkParams {
            turn_prob: config.route_turn_prob,
            wall_offset_m: config.route_wall_offset_m,
        },
        &abs,
        &mut rng_route,
    )?;
    let route = walk.route;
    let leg_spans = walk.leg_spans;

    let shadows = layout_shadows(&layout, &abs)?;
    let total = union_shadows(&shadows, layout.bounds)?;
    let p_los = layout_los_probability(&layout, total.area());
    let segments = segment_route_shadows(&route, &shadows);

    let mut rng_fading = derive_rng(config.master_seed, index as u64, stream::FADING);
    let trace = trace_route(
        &route,
        &segments,
        &abs,
        &config.channel,
        config.sample_step_m,
        &mut rng_fading,
    )?;

    let mut cuts: Vec<f64> = leg_spans.iter().flat_map(|&(a, b)| [a, b]).collect();
    cuts.dedup();
    let outage = config
        .eirp_dbm
        .iter()
        .map(|&eirp| {
            outage_segments(
                &trace,
                outage_threshold(eirp, config.sensitivity_dbm),
                config.sample_step_m,
                &cuts,
            )
        })
        .collect();

    Ok(RealizationResult {
        index,
        layout: LayoutSummary {
            count_x: layout.count_x,
            count_y: layout.count_y,
            heights_digest: heights_digest(&layout),
        },
        abs,
        p_los,
        segments,
        leg_spans,
        trace,
        outage_segments: outage,
    })
}

fn sample_range(range: [f64; 2], rng: &mut impl Rng) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.gen_range(range[0]..range[1])
    }
}

/// Aggregated campaign statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    pub environment: String,
    pub realizations: usize,
    pub master_seed: u64,
    pub route_length_total_m: f64,
    pub p_los_mean: f64,
    /// Empirical CDF of LOS segment lengths (value m, cumulative prob).
    pub los_lengths_cdf: Vec<(f64, f64)>,
    pub nlos_lengths_cdf: Vec<(f64, f64)>,
    /// Empirical CDF of total channel loss, values rounded to 0.01 dB.
    pub loss_cdf: Vec<(f64, f64)>,
    pub outage: Vec<OutageStats>,
}

/// Outage statistics for one EIRP level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageStats {
    pub eirp_dbm: f64,
    pub threshold_db: f64,
    /// Total outage length over total route length.
    pub outage_probability: f64,
    pub outage_length_total_m: f64,
    pub outage_lengths_cdf: Vec<(f64, f64)>,
}

/// Right-continuous empirical CDF over the given values.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("empirical_cdf over no values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut cdf: Vec<(f64, f64)> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match cdf.last_mut() {
            Some(last) if last.0 == *v => last.1 = p,
            _ => cdf.push((*v, p)),
        }
    }
    Ok(cdf)
}

/// CDF evaluated at `x` (fraction of mass at or below `x`).
pub fn cdf_at(cdf: &[(f64, f64)], x: f64) -> f64 {
    let mut p = 0.0;
    for &(v, q) in cdf {
        if v <= x {
            p = q;
        } else {
            break;
        }
    }
    p
}

/// Smallest value whose cumulative probability reaches `q`.
pub fn cdf_quantile(cdf: &[(f64, f64)], q: f64) -> f64 {
    for &(v, p) in cdf {
        if p >= q {
            return v;
        }
    }
    cdf.last().map_or(f64::NAN, |l| l.0)
}

/// Aggregates per-realization results into campaign statistics.
///
/// Aggregation is a pure fold over the ordered result list, so the outcome
/// is independent of how the realizations were executed.
pub fn aggregate(config: &CampaignConfig, results: &[RealizationResult]) -> Result<CampaignStats> {
    if results.is_empty() {
        return Err(Error::EmptyInput("no realizations to aggregate".into()));
    }
    let environment = config.environment.resolve()?.name;
    let mut los_lengths = Vec::new();
    let mut nlos_lengths = Vec::new();
    let mut losses = Vec::new();
    let mut route_total = 0.0;
    let mut p_los_sum = 0.0;
    for r in results {
        los_lengths.extend(leg_lengths(&r.segments, &r.leg_spans, LosState::Los));
        nlos_lengths.extend(leg_lengths(&r.segments, &r.leg_spans, LosState::Nlos));
        losses.extend(r.trace.samples.iter().map(|s| (s.total_db * 100.0).round() / 100.0));
        route_total += r.segments.total_length();
        p_los_sum += r.p_los;
    }
    let mut outage = Vec::new();
    for (k, &eirp) in config.eirp_dbm.iter().enumerate() {
        let mut lengths = Vec::new();
        let mut total = 0.0;
        for r in results {
            for &(start, end) in &r.outage_segments[k] {
                lengths.push(end - start);
                total += end - start;
            }
        }
        outage.push(OutageStats {
            eirp_dbm: eirp,
            threshold_db: outage_threshold(eirp, config.sensitivity_dbm),
            outage_probability: if route_total > 0.0 { total / route_total } else { 0.0 },
            outage_length_total_m: total,
            outage_lengths_cdf: if lengths.is_empty() {
                Vec::new()
            } else {
                empirical_cdf(&lengths)?
            },
        });
    }
    Ok(CampaignStats {
        environment,
        realizations: results.len(),
        master_seed: config.master_seed,
        route_length_total_m: route_total,
        p_los_mean: p_los_sum / results.len() as f64,
        los_lengths_cdf: if los_lengths.is_empty() { Vec::new() } else { empirical_cdf(&los_lengths)? },
        nlos_lengths_cdf: if nlos_lengths.is_empty() {
            Vec::new()
        } else {
            empirical_cdf(&nlos_lengths)?
        },
        loss_cdf: empirical_cdf(&losses)?,
        outage,
    })
}

/// All outputs of a campaign run.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResults {
    pub realizations: Vec<RealizationResult>,
    pub stats: CampaignStats,
}

/// Runs a full campaign, realizations in parallel, aggregation in index
/// order.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignResults> {
    config.validate()?;
    let realizations: Vec<RealizationResult> = (0..config.realizations)
        .into_par_iter()
        .map(|i| run_realization(config, i))
        .collect::<Result<_>>()?;
    let stats = aggregate(config, &realizations)?;
    Ok(CampaignResults { realizations, stats })
}

// ---------------------------------------------------------------------------
// Radio maps
// ---------------------------------------------------------------------------

/// A raster of predicted channel loss for one ABS pose. Footprint cells are
/// NaN (no data).
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap {
    pub origin: Point2,
    pub spacing: f64,
    pub width: usize,
    pub height: usize,
    pub loss_db: Vec<f64>,
    pub los: Vec<Option<LosState>>,
}

impl RadioMap {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.loss_db[iy * self.width + ix]
    }
}

fn region_bbox(region: &Region) -> Rect {
    let mut r = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for poly in &region.polygons {
        for p in &poly.outer {
            r.min_x = r.min_x.min(p.x);
            r.min_y = r.min_y.min(p.y);
            r.max_x = r.max_x.max(p.x);
            r.max_y = r.max_y.max(p.y);
        }
    }
    r
}

/// Computes a radio map over the outdoor cells of a scene.
///
/// Every outdoor cell center gets reference + excess loss for its LOS state
/// (from the per-building shadows) plus sigma-scaled fading from one shared
/// correlated 2D field.
pub fn radio_map(
    buildings: &[Building],
    bounds: Rect,
    abs: &AbsState,
    grid_spacing_m: f64,
    params: &ChannelParams,
    rng: &mut impl Rng,
) -> Result<RadioMap> {
    if !(grid_spacing_m > 0.0) || grid_spacing_m > params.decorr_distance_m / 2.0 {
        return Err(Error::InvalidParameters(format!(
            "grid spacing must be in (0, d_decorr/2], got {grid_spacing_m}"
        )));
    }
    let width = (bounds.width() / grid_spacing_m).ceil() as usize;
    let height = (bounds.height() / grid_spacing_m).ceil() as usize;
    let spec = MapSpec {
        origin: Point2::new(bounds.min_x, bounds.min_y),
        spacing: grid_spacing_m,
        width,
        height,
    };
    let field = map_unit_field(&spec, params.decorr_distance_m, rng)?;
    let shadows: Vec<(Rect, Region)> = buildings
        .iter()
        .map(|b| building_shadow(b, abs, bounds).map(|s| (region_bbox(&s), s)))
        .collect::<Result<_>>()?;
    let footprints: Vec<(Rect, &Building)> = buildings.iter().map(|b| (b.bbox(), b)).collect();
    let reference_db = channel::reference_path_loss(abs.height, params.frequency_hz);
    let mut loss_db = vec![f64::NAN; width * height];
    let mut los = vec![None; width * height];
    for iy in 0..height {
        for ix in 0..width {
            let center = field.cell_center(ix, iy);
            if footprints
                .iter()
                .any(|(bbox, b)| bbox.contains(center) && b.footprint_contains(center))
            {
                continue;
            }
            let state = if shadows
                .iter()
                .any(|(bbox, s)| bbox.contains(center) && s.contains_closed(center))
            {
                LosState::Nlos
            } else {
                LosState::Los
            };
            let geom = LinkGeometry::new(center.distance(&abs.position), abs.height);
            let excess_db = channel::excess_path_loss(geom.elevation_deg, state)?;
            let fading_db = shadow_std(geom.elevation_deg, state, params) * field.at(ix, iy);
            loss_db[iy * width + ix] = reference_db + excess_db + fading_db;
            los[iy * width + ix] = Some(state);
        }
    }
    Ok(RadioMap { origin: spec.origin, spacing: grid_spacing_m, width, height, loss_db, los })
}

// ---------------------------------------------------------------------------
// GBSP vs RT validation
// ---------------------------------------------------------------------------

/// Outcome of validating shadow-projection labels against the RT oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub scenes: usize,
    pub points_compared: usize,
    pub points_excluded: usize,
    pub mismatches: Vec<(usize, Mismatch)>,
}

impl ValidationReport {
    pub fn mismatch_count(&self) -> usize {
        self.mismatches.len()
    }
}

/// Runs randomized scenes and compares shadow-projection route labels with
/// the brute-force ray-traced oracle at uniformly sampled points.
///
/// Presets rotate across scenes; ABS poses and routes are drawn per scene
/// from the campaign bounds. `inject_flip` flips one RT label per scene, as
/// a self-test of the comparison.
pub fn validate_gbsp_vs_rt(
    config: &CampaignConfig,
    scenes: usize,
    samples_per_meter: f64,
    epsilon_m: f64,
    inject_flip: bool,
) -> Result<ValidationReport> {
    let reports: Vec<(usize, usize, Vec<(usize, Mismatch)>)> = (0..scenes)
        .into_par_iter()
        .map(|scene| -> Result<(usize, usize, Vec<(usize, Mismatch)>)> {
            let preset_name = Preset::ALL[scene % Preset::ALL.len()];
            let params = crate::environment::preset(preset_name);
            let mut rng = derive_rng(config.master_seed, scene as u64, stream::SCENE);
            let layout = generate_manhattan(&params, config.target_side_m, &mut rng)?;
            let abs = AbsState::new(
                Point2::new(
                    sample_range(config.abs_x_m, &mut rng),
                    sample_range(config.abs_y_m, &mut rng),
                ),
                sample_range(config.abs_height_m, &mut rng),
            )?;
            let walk = build_route(
                &layout,
                &config.route,
                config.route_length_m,
                WalkParams {
                    turn_prob: config.route_turn_prob,
                    wall_offset_m: config.route_wall_offset_m,
                },
                &abs,
                &mut rng,
            )?;
            let route = walk.route;
            let shadows = layout_shadows(&layout, &abs)?;
            let gbsp = segment_route_shadows(&route, &shadows);
            let mut rt = segment_route_rt(&route, samples_per_meter, &abs, &layout.buildings)?;
            if inject_flip && !rt.labels.is_empty() {
                let mid = rt.labels.len() / 2;
                rt.labels[mid] = match rt.labels[mid] {
                    LosState::Los => LosState::Nlos,
                    LosState::Nlos => LosState::Los,
                };
            }
            let report = compare_labels(&gbsp, &rt, epsilon_m);
            Ok((
                report.compared,
                report.excluded_near_boundary,
                report.mismatches.iter().map(|m| (scene, *m)).collect(),
            ))
        })
        .collect::<Result<_>>()?;
    let mut out =
        ValidationReport { scenes, points_compared: 0, points_excluded: 0, mismatches: Vec::new() };
    for (compared, excluded, mismatches) in reports {
        out.points_compared += compared;
        out.points_excluded += excluded;
        out.mismatches.extend(mismatches);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::preset;

    fn small_config(env: &str, realizations: usize, seed: u64) -> CampaignConfig {
        CampaignConfig {
            environment: EnvironmentSpec::Name(env.into()),
            realizations,
            master_seed: seed,
            ..CampaignConfig::default()
        }
    }

    #[test]
    fn empirical_cdf_examples() {
        assert_eq!(empirical_cdf(&[5.0]).unwrap(), vec![(5.0, 1.0)]);
        let cdf = empirical_cdf(&[1.0, 1.0, 3.0]).unwrap();
        assert_eq!(cdf.len(), 2);
        assert!((cdf[0].1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(cdf[1], (3.0, 1.0));
        assert!(empirical_cdf(&[]).is_err());
    }

    fn default_walk() -> WalkParams {
        WalkParams { turn_prob: 0.44, wall_offset_m: 0.25 }
    }

    fn test_abs() -> AbsState {
        AbsState::new(Point2::new(400.0, 700.0), 120.0).unwrap()
    }

    #[test]
    fn explicit_route_of_exact_length() {
        let mut rng = derive_rng(1, 0, stream::LAYOUT);
        let layout = generate_manhattan(&preset(Preset::Suburban), 1000.0, &mut rng).unwrap();
        let y = layout.pitch() - layout.street_width / 2.0;
        let policy = RoutePolicy::Explicit { waypoints: vec![[0.0, y], [1000.0, y]] };
        let mut rng2 = derive_rng(1, 0, stream::ROUTE);
        let walk =
            build_route(&layout, &policy, 1000.0, default_walk(), &test_abs(), &mut rng2).unwrap();
        assert!((walk.route.length() - 1000.0).abs() < 1e-9);
        assert_eq!(walk.leg_spans, vec![(0.0, 1000.0)]);
    }

    #[test]
    fn street_walk_hugs_wall_and_partitions_length() {
        let mut rng = derive_rng(3, 0, stream::LAYOUT);
        let layout = generate_manhattan(&preset(Preset::Suburban), 1000.0, &mut rng).unwrap();
        let st = layout.street_width;
        for seed in 0..20u64 {
            let mut rng_route = derive_rng(seed, 0, stream::ROUTE);
            let walk = build_route(
                &layout,
                &RoutePolicy::Named("street-route".into()),
                1000.0,
                default_walk(),
                &test_abs(),
                &mut rng_route,
            )
            .unwrap();
            assert!((walk.route.length() - 1000.0).abs() < 1e-9);
            // legs ordered, disjoint, within the route
            let mut prev = 0.0;
            for &(a, b) in &walk.leg_spans {
                assert!(a >= prev - 1e-9 && b > a && b <= 1000.0 + 1e-9);
                prev = b;
            }
            // every leg runs 0.25 m from a building face: its cross-axis
            // coordinate sits at wall_offset or St - wall_offset within a street
            for pair in walk.route.waypoints().windows(2) {
                let (p, q) = (pair[0], pair[1]);
                if (p.x - q.x).abs() < 1e-9 || (p.y - q.y).abs() < 1e-9 {
                    let coord = if (p.y - q.y).abs() < 1e-9 { p.y } else { p.x };
                    let along_x = (p.y - q.y).abs() < 1e-9;
                    let within = if along_x {
                        // horizontal streets span [j*pitch - St, j*pitch]
                        coord.rem_euclid(layout.pitch())
                    } else {
                        coord.rem_euclid(layout.pitch())
                    };
                    let into_street =
                        if along_x { within - (layout.pitch() - st) } else { within };
                    let from_wall = into_street.min(st - into_street);
                    if (q.x - p.x).hypot(q.y - p.y) > st {
                        assert!(
                            (from_wall - 0.25).abs() < 1e-9,
                            "leg at {coord} is {from_wall} m from the wall"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn street_route_deterministic_per_seed() {
        let mut rng = derive_rng(3, 0, stream::LAYOUT);
        let layout = generate_manhattan(&preset(Preset::Urban), 1000.0, &mut rng).unwrap();
        let a = build_route(
            &layout,
            &RoutePolicy::Named("street-route".into()),
            1000.0,
            default_walk(),
            &test_abs(),
            &mut derive_rng(9, 4, stream::ROUTE),
        )
        .unwrap();
        let b = build_route(
            &layout,
            &RoutePolicy::Named("street-route".into()),
            1000.0,
            default_walk(),
            &test_abs(),
            &mut derive_rng(9, 4, stream::ROUTE),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn waypoint_inside_footprint_rejected() {
        let mut rng = derive_rng(3, 0, stream::LAYOUT);
        let layout = generate_manhattan(&preset(Preset::Suburban), 1000.0, &mut rng).unwrap();
        let inside = layout.buildings[0].base()[0];
        let policy = RoutePolicy::Explicit {
            waypoints: vec![[inside.x + 1.0, inside.y + 1.0], [0.0, 0.0]],
        };
        let err =
            build_route(&layout, &policy, 1000.0, default_walk(), &test_abs(), &mut derive_rng(0, 0, 0));
        assert!(matches!(err, Err(Error::InvalidRoute(_))));
    }

    #[test]
    fn leg_lengths_exclude_corner_transitions() {
        use crate::geometry::LabeledSpan;
        let segments = LabeledSegments {
            segments: vec![
                LabeledSpan { start: 0.0, end: 30.0, state: LosState::Nlos },
                LabeledSpan { start: 30.0, end: 100.0, state: LosState::Los },
            ],
        };
        // legs [0,20] and [25,100]: the 20..25 corner is excluded
        let spans = vec![(0.0, 20.0), (25.0, 100.0)];
        assert_eq!(leg_lengths(&segments, &spans, LosState::Nlos), vec![20.0, 5.0]);
        assert_eq!(leg_lengths(&segments, &spans, LosState::Los), vec![70.0]);
    }

    #[test]
    fn geometry_free_trace_is_fspl_plus_fading() {
        // no shadows: single LOS segment, loss = FSPL at slant distance + fading
        let route = Route::new(vec![Point2::new(0.0, 0.0), Point2::new(1000.0, 0.0)]).unwrap();
        let segments = segment_route_shadows(&route, &[]);
        assert_eq!(segments.segments.len(), 1);
        let abs = AbsState::new(Point2::new(500.0, 300.0), 120.0).unwrap();
        let params = ChannelParams::default();
        let mut rng = derive_rng(0, 0, stream::FADING);
        let trace = trace_route(&route, &segments, &abs, &params, 1.0, &mut rng).unwrap();
        assert_eq!(trace.samples.len(), 1001);
        for s in &trace.samples {
            let d3d = (s.x - 500.0).hypot(s.y - 300.0).hypot(120.0);
            let fspl = 20.0
                * (4.0 * std::f64::consts::PI * d3d * params.frequency_hz
                    / channel::SPEED_OF_LIGHT)
                    .log10();
            assert!((s.total_db - s.fading_db - fspl).abs() < 1e-9);
        }
    }

    #[test]
    fn outage_segment_rules() {
        let mk = |losses: &[f64]| ChannelTrace {
            samples: losses
                .iter()
                .enumerate()
                .map(|(i, &l)| TraceSample {
                    arclength_m: i as f64,
                    x: 0.0,
                    y: 0.0,
                    theta_deg: 45.0,
                    los: LosState::Los,
                    reference_db: l,
                    excess_db: 0.0,
                    fading_db: 0.0,
                    total_db: l,
                })
                .collect(),
        };
        // all below threshold
        assert!(outage_segments(&mk(&[90.0, 95.0]), 100.0, 1.0, &[]).is_empty());
        // single above-threshold sample at 1 m step
        let segs = outage_segments(&mk(&[90.0, 101.0, 90.0, 90.0]), 100.0, 1.0, &[]);
        assert_eq!(segs, vec![(1.0, 2.0)]);
        // exact threshold is not outage
        assert!(outage_segments(&mk(&[100.0, 100.0]), 100.0, 1.0, &[]).is_empty());
        // run reaching route end is capped
        let segs = outage_segments(&mk(&[90.0, 101.0, 102.0]), 100.0, 1.0, &[]);
        assert_eq!(segs, vec![(1.0, 2.0)]);
        // a leg-boundary cut splits a run in two
        let segs = outage_segments(&mk(&[101.0, 102.0, 103.0, 104.0]), 100.0, 1.0, &[2.0]);
        assert_eq!(segs, vec![(0.0, 2.0), (2.0, 3.0)]);
    }

    #[test]
    fn realization_is_deterministic_and_partitions_route() {
        let config = small_config("Urban", 1, 77);
        let a = run_realization(&config, 0).unwrap();
        let b = run_realization(&config, 0).unwrap();
        assert_eq!(a, b);
        let total = a.segments.total_length_of(LosState::Los)
            + a.segments.total_length_of(LosState::Nlos);
        assert!((total - 1000.0).abs() < 1e-6);
        // trace additivity and flag consistency
        for s in &a.trace.samples {
            assert_eq!(s.total_db, s.reference_db + s.excess_db + s.fading_db);
            assert_eq!(s.los, a.segments.label_at(s.arclength_m));
        }
    }

    #[test]
    fn seed_isolation_across_realizations() {
        let config = small_config("Suburban", 3, 123);
        let r1 = run_realization(&config, 1).unwrap();
        // a different master seed changes realization 0 but index-derived
        // streams keep realization 1 untouched when only index 0's stream
        // would differ; here we check independence of index order instead
        let r1_again = run_realization(&config, 1).unwrap();
        assert_eq!(r1, r1_again);
        let r0 = run_realization(&config, 0).unwrap();
        assert_ne!(r0.abs, r1.abs);
    }

    #[test]
    fn single_realization_campaign_matches_realization() {
        let config = small_config("Suburban", 1, 5);
        let results = run_campaign(&config).unwrap();
        assert_eq!(results.realizations.len(), 1);
        let r = &results.realizations[0];
        assert!((results.stats.p_los_mean - r.p_los).abs() < 1e-15);
        assert!((results.stats.route_length_total_m - r.segments.total_length()).abs() < 1e-9);
    }

    #[test]
    fn outage_monotone_in_eirp() {
        let config = small_config("HighRiseUrban", 5, 99);
        let results = run_campaign(&config).unwrap();
        // eirp list is ascending, so thresholds ascend and outage shrinks
        for r in &results.realizations {
            let low: f64 =
                r.outage_segments[0].iter().map(|(a, b)| b - a).sum();
            let high: f64 =
                r.outage_segments[2].iter().map(|(a, b)| b - a).sum();
            assert!(high <= low + 1e-9);
        }
    }

    #[test]
    fn radio_map_empty_scene_is_slant_fspl() {
        let bounds = Rect::new(0.0, 0.0, 100.0, 100.0);
        let abs = AbsState::new(Point2::new(50.0, 50.0), 120.0).unwrap();
        let mut params = ChannelParams::default();
        params.rho_los = 0.0;
        params.rho_nlos = 0.0;
        let mut rng = derive_rng(0, 0, stream::RADIO_MAP);
        let map = radio_map(&[], bounds, &abs, 2.0, &params, &mut rng).unwrap();
        let mut min_val = f64::INFINITY;
        let mut min_cell = (0usize, 0usize);
        for iy in 0..map.height {
            for ix in 0..map.width {
                let v = map.at(ix, iy);
                let center = Point2::new(
                    map.origin.x + (ix as f64 + 0.5) * map.spacing,
                    map.origin.y + (iy as f64 + 0.5) * map.spacing,
                );
                let d3d = center.distance(&abs.position).hypot(abs.height);
                let fspl = 20.0
                    * (4.0 * std::f64::consts::PI * d3d * params.frequency_hz
                        / channel::SPEED_OF_LIGHT)
                        .log10();
                assert!((v - fspl).abs() < 1e-9);
                if v < min_val {
                    min_val = v;
                    min_cell = (ix, iy);
                }
            }
        }
        // minimum within one cell of the ABS nadir
        let center = Point2::new(
            map.origin.x + (min_cell.0 as f64 + 0.5) * map.spacing,
            map.origin.y + (min_cell.1 as f64 + 0.5) * map.spacing,
        );
        assert!(center.distance(&abs.position) <= map.spacing * std::f64::consts::SQRT_2);
    }

    #[test]
    fn radio_map_nlos_cells_match_shadows() {
        let mut rng = derive_rng(8, 0, stream::LAYOUT);
        let layout = generate_manhattan(&preset(Preset::Urban), 300.0, &mut rng).unwrap();
        let abs = AbsState::new(Point2::new(20.0, 20.0), 90.0).unwrap();
        let mut rng_map = derive_rng(8, 0, stream::RADIO_MAP);
        let map = radio_map(
            &layout.buildings,
            layout.bounds,
            &abs,
            2.0,
            &ChannelParams::default(),
            &mut rng_map,
        )
        .unwrap();
        // cross-check every outdoor cell against the ray-traced oracle
        let mut checked = 0;
        for iy in 0..map.height {
            for ix in 0..map.width {
                if let Some(state) = map.los[iy * map.width + ix] {
                    let center = Point2::new(
                        map.origin.x + (ix as f64 + 0.5) * map.spacing,
                        map.origin.y + (iy as f64 + 0.5) * map.spacing,
                    );
                    let expected =
                        crate::rt_oracle::los_at_point(center, &abs, &layout.buildings).unwrap();
                    assert_eq!(state, expected, "cell ({ix},{iy})");
                    checked += 1;
                }
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn validation_flip_detected() {
        let config = small_config("Suburban", 1, 21);
        let clean = validate_gbsp_vs_rt(&config, 2, 1.0, 1e-6, false).unwrap();
        assert_eq!(clean.mismatch_count(), 0, "{:?}", clean.mismatches);
        let flipped = validate_gbsp_vs_rt(&config, 2, 1.0, 1e-6, true).unwrap();
        assert!(flipped.mismatch_count() >= 1);
    }

    #[test]
    fn config_json_roundtrip_and_defaults() {
        let config = CampaignConfig::from_json(r#"{"environment": "Urban", "realizations": 3}"#)
            .unwrap();
        assert_eq!(config.realizations, 3);
        assert_eq!(config.eirp_dbm, vec![13.0, 18.0, 23.0]);
        assert!((config.sensitivity_dbm + 84.7).abs() < 1e-12);
        assert!(CampaignConfig::from_json(r#"{"environment": "Atlantis"}"#).is_err());
        assert!(CampaignConfig::from_json(r#"{"bogus_key": 1}"#).is_err());
    }
}
