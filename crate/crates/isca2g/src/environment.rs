//! ITU Manhattan-grid urban layout generation.
//!
//! A layout is a regular grid of square buildings of width `W` separated by
//! streets of width `St`, derived from the ITU environmental triple
//! (alpha, beta, gamma): built-up area ratio, buildings per km^2, and the
//! Rayleigh scale of the building-height distribution.

use crate::geometry::{los_map, Building, Point2, PolygonRings, Rect, Region};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Named ITU environment presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    Suburban,
    Urban,
    DenseUrban,
    HighRiseUrban,
}

impl Preset {
    pub const ALL: [Preset; 4] =
        [Preset::Suburban, Preset::Urban, Preset::DenseUrban, Preset::HighRiseUrban];
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "suburban" => Ok(Preset::Suburban),
            "urban" => Ok(Preset::Urban),
            "denseurban" | "dense" => Ok(Preset::DenseUrban),
            "highriseurban" | "highrise" => Ok(Preset::HighRiseUrban),
            other => Err(Error::InvalidEnvironment(format!("unknown preset '{other}'"))),
        }
    }
}

/// ITU environmental parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItuParams {
    /// Built-up area ratio, in (0, 1).
    pub alpha: f64,
    /// Buildings per km^2.
    pub beta: f64,
    /// Rayleigh scale of building heights, meters.
    pub gamma: f64,
    pub name: String,
}

impl ItuParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameters(format!("alpha must be in (0,1): {}", self.alpha)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidParameters(format!("beta must be > 0: {}", self.beta)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParameters(format!("gamma must be > 0: {}", self.gamma)));
        }
        Ok(())
    }
}

/// Parameters for a named environment.
pub fn preset(name: Preset) -> ItuParams {
    let (alpha, beta, gamma, label) = match name {
        Preset::Suburban => (0.1, 750.0, 8.0, "Suburban"),
        Preset::Urban => (0.3, 500.0, 15.0, "Urban"),
        Preset::DenseUrban => (0.5, 300.0, 20.0, "DenseUrban"),
        Preset::HighRiseUrban => (0.5, 300.0, 50.0, "HighRiseUrban"),
    };
    ItuParams { alpha, beta, gamma, name: label.to_string() }
}

/// Building width `W = 1000 sqrt(alpha/beta)` and street width
/// `St = 1000/sqrt(beta) - W`, both in meters.
pub fn grid_dimensions(params: &ItuParams) -> Result<(f64, f64)> {
    params.validate()?;
    let w = 1000.0 * (params.alpha / params.beta).sqrt();
    let st = 1000.0 / params.beta.sqrt() - w;
    if st <= 0.0 {
        return Err(Error::InvalidParameters(format!(
            "street width {st:.3} m <= 0 for alpha={} beta={}",
            params.alpha, params.beta
        )));
    }
    Ok((w, st))
}

/// A generated Manhattan-grid city.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub building_width: f64,
    pub street_width: f64,
    pub count_x: usize,
    pub count_y: usize,
    pub buildings: Vec<Building>,
    pub bounds: Rect,
}

impl GridLayout {
    pub fn building_count(&self) -> usize {
        self.buildings.len()
    }

    /// Street pitch `St + W`.
    pub fn pitch(&self) -> f64 {
        self.building_width + self.street_width
    }
}

/// Draws one Rayleigh(scale) sample.
fn rayleigh(scale: f64, rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen::<f64>();
    scale * (-2.0 * (1.0 - u).ln()).sqrt()
}

/// Generates a Manhattan grid with Rayleigh-sampled heights.
///
/// Building (i, j), 1-based, occupies x in [(i-1)(St+W)+St, i(St+W)] and
/// y in [(j-1)(St+W), (j-1)(St+W)+W]. The grid holds as many whole
/// building/street pitches as fit in `target_side`; no partial buildings.
pub fn generate_manhattan(
    params: &ItuParams,
    target_side: f64,
    rng: &mut impl Rng,
) -> Result<GridLayout> {
    let (w, st) = grid_dimensions(params)?;
    let pitch = w + st;
    if target_side <= pitch {
        return Err(Error::InvalidParameters(format!(
            "target side {target_side} m must exceed one street+building pitch {pitch:.3} m"
        )));
    }
    let count = (target_side / pitch).floor() as usize;
    let mut buildings = Vec::with_capacity(count * count);
    for i in 1..=count {
        for j in 1..=count {
            let x0 = (i - 1) as f64 * pitch + st;
            let x1 = i as f64 * pitch;
            let y0 = (j - 1) as f64 * pitch;
            let y1 = y0 + w;
            let height = rayleigh(params.gamma, rng);
            buildings.push(Building::new(
                vec![
                    Point2::new(x0, y0),
                    Point2::new(x1, y0),
                    Point2::new(x1, y1),
                    Point2::new(x0, y1),
                ],
                height,
            )?);
        }
    }
    Ok(GridLayout {
        building_width: w,
        street_width: st,
        count_x: count,
        count_y: count,
        buildings,
        bounds: Rect::new(0.0, 0.0, target_side, target_side),
    })
}

/// Outdoor area: the target-area bounds minus all building footprints.
pub fn outdoor_area(layout: &GridLayout) -> Result<Region> {
    let bounds_region = Region {
        polygons: vec![PolygonRings { outer: layout.bounds.to_ring(), holes: vec![] }],
        bounds: layout.bounds,
    };
    if layout.buildings.is_empty() {
        return Ok(bounds_region);
    }
    let footprints = Region {
        polygons: layout
            .buildings
            .iter()
            .map(|b| PolygonRings { outer: b.base().to_vec(), holes: vec![] })
            .collect(),
        bounds: layout.bounds,
    };
    los_map(&bounds_region, &footprints)
}
