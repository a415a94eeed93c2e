//! LOS-aware large-scale A2G channel.
//!
//! Total loss decomposes as `total = reference + excess + fading` (all dB):
//! the reference term is free-space path loss at the ABS hover height, the
//! excess term depends only on the elevation angle and the LOS state, and the
//! fading term is spatially correlated shadow fading scaled by an
//! elevation-dependent standard deviation.
//!
//! Formulas operate on elevation angles in degrees; trigonometry converts
//! internally.

use crate::geometry::{AbsState, LosState, Point2};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Channel model parameters.
///
/// Defaults are the 2.5 GHz urban A2G parameterization: `rho`/`mu` select the
/// shadow-fading standard deviation `sigma(theta) = rho * (90 - theta)^mu`
/// per LOS state, and `decorr_distance` is the lag at which the fading
/// autocorrelation drops to `e^-1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub frequency_hz: f64,
    pub rho_los: f64,
    pub rho_nlos: f64,
    pub mu_los: f64,
    pub mu_nlos: f64,
    pub decorr_distance_m: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            frequency_hz: 2.5e9,
            rho_los: 0.0272,
            rho_nlos: 2.3197,
            mu_los: 0.7475,
            mu_nlos: 0.2361,
            decorr_distance_m: 11.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz > 0.0) {
            return Err(Error::InvalidParameters("frequency must be > 0".into()));
        }
        if self.rho_los < 0.0 || self.rho_nlos < 0.0 {
            return Err(Error::InvalidParameters("rho must be >= 0".into()));
        }
        if !(self.decorr_distance_m > 0.0) {
            return Err(Error::InvalidParameters("decorrelation distance must be > 0".into()));
        }
        Ok(())
    }
}

/// Geometry of one ABS-to-ground link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub horizontal_distance_m: f64,
    pub elevation_deg: f64,
    pub slant_distance_m: f64,
}

impl LinkGeometry {
    pub fn new(horizontal_distance_m: f64, abs_height_m: f64) -> Self {
        Self {
            horizontal_distance_m,
            elevation_deg: abs_height_m.atan2(horizontal_distance_m).to_degrees(),
            slant_distance_m: horizontal_distance_m.hypot(abs_height_m),
        }
    }
}

/// Per-sample loss terms, all in dB. `total = reference + excess + fading`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub reference_db: f64,
    pub excess_db: f64,
    pub fading_db: f64,
    pub total_db: f64,
}

/// Elevation angle in degrees seen from a ground point (UE height 0).
///
/// Returns 90 exactly when the UE is directly under the ABS.
pub fn elevation_angle(ue: Point2, abs: &AbsState) -> f64 {
    abs.height.atan2(ue.distance(&abs.position)).to_degrees()
}

/// Free-space path loss at the reference distance (the ABS hover height).
pub fn reference_path_loss(abs_height_m: f64, frequency_hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * abs_height_m * frequency_hz / SPEED_OF_LIGHT).log10()
}

/// Elevation-dependent excess path loss over the reference term.
///
/// LOS: `-20 log10(sin theta)`, which makes reference + excess equal FSPL at
/// the slant distance. NLOS: `16.16 - 12.0436 exp(-(90 - theta)/7.52)`,
/// ranging from ~16.2 dB at grazing elevation down to ~4.1 dB overhead,
/// floored at the LOS excess so that blockage never yields less loss than
/// free space at the same geometry. The floor binds below theta ~8.9 deg,
/// i.e. at low hover heights and long horizontal range.
pub fn excess_path_loss(theta_deg: f64, los: LosState) -> Result<f64> {
    if !(theta_deg > 0.0 && theta_deg <= 90.0) {
        return Err(Error::InvalidParameters(format!(
            "elevation angle must be in (0, 90], got {theta_deg}"
        )));
    }
    let los_excess = -20.0 * theta_deg.to_radians().sin().log10();
    Ok(match los {
        LosState::Los => los_excess,
        LosState::Nlos => {
            (16.16 - 12.0436 * (-(90.0 - theta_deg) / 7.52).exp()).max(los_excess)
        }
    })
}

/// Shadow-fading standard deviation `rho * (90 - theta)^mu`, in dB.
pub fn shadow_std(theta_deg: f64, los: LosState, params: &ChannelParams) -> f64 {
    let (rho, mu) = match los {
        LosState::Los => (params.rho_los, params.mu_los),
        LosState::Nlos => (params.rho_nlos, params.mu_nlos),
    };
    rho * (90.0 - theta_deg).max(0.0).powf(mu)
}

/// Total large-scale loss with its per-term breakdown.
pub fn total_loss(
    geom: &LinkGeometry,
    los: LosState,
    fading_db: f64,
    params: &ChannelParams,
    abs_height_m: f64,
) -> Result<LossBreakdown> {
    let reference_db = reference_path_loss(abs_height_m, params.frequency_hz);
    let excess_db = excess_path_loss(geom.elevation_deg, los)?;
    Ok(LossBreakdown {
        reference_db,
        excess_db,
        fading_db,
        total_db: reference_db + excess_db + fading_db,
    })
}

/// Maximum tolerable loss: a sample is in outage iff its loss strictly
/// exceeds this threshold.
pub fn outage_threshold(eirp_dbm: f64, sensitivity_dbm: f64) -> f64 {
    eirp_dbm - sensitivity_dbm
}
