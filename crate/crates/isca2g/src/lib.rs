//! Spatially consistent air-to-ground (A2G) channel simulator.
//!
//! The simulator determines line-of-sight (LOS) conditions between an aerial
//! base station (ABS) and ground users by projecting 3D buildings into ground
//! shadows, unioning the shadows into a total shadow region, and subtracting
//! that region from the outdoor area. The resulting LOS map drives a
//! LOS-aware path-loss model combined with spatially correlated shadow
//! fading, producing channel traces along user routes and radio maps over
//! whole areas.
//!
//! Modules:
//! - [`geometry`]: shadow projection, polygon booleans, LOS maps, route
//!   segmentation (the deterministic core).
//! - [`environment`]: ITU Manhattan-grid city generation.
//! - [`channel`]: reference path loss, elevation-dependent excess loss,
//!   shadow-fading standard deviation, outage threshold.
//! - [`fading`]: correlated unit-variance fading along routes and 2D grids.
//! - [`rt_oracle`]: brute-force ray-traced LOS classifier used as ground
//!   truth for the shadow-projection path.
//! - [`campaign`]: seeded Monte-Carlo experiment harness and statistics.
//! - [`geojson`]: GeoJSON / CSV serialization of scenes and results.

pub mod campaign;
pub mod channel;
pub mod environment;
pub mod fading;
pub mod geojson;
pub mod geometry;
pub mod rt_oracle;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate projection: building height {building} m >= ABS height {abs} m")]
    DegenerateProjection { building: f64, abs: f64 },
    #[error("degenerate hull: fewer than 3 non-collinear points among {0}")]
    DegenerateHull(usize),
    #[error("invalid polygon {index}: {reason}")]
    InvalidPolygon { index: usize, reason: String },
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("invalid route: {0}")]
    InvalidRoute(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
