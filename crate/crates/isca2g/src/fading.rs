//! Spatially correlated shadow-fading generation.
//!
//! All generators produce zero-mean, unit-variance Gaussian values whose
//! spatial autocorrelation follows `R(d) = exp(-d / d_decorr)`. Scaling by
//! the elevation- and state-dependent standard deviation happens afterwards,
//! so one underlying field stays continuous across LOS/NLOS transitions.
//!
//! Routes use the exact first-order Gauss-Markov recursion (the exponential
//! autocorrelation is Markov in 1D). 2D maps use single-pass local
//! conditioning on already-generated neighbor cells, validated against a
//! dense-covariance oracle.

use crate::channel::{shadow_std, ChannelParams};
use crate::geometry::{LosState, Point2};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Correlated fading samples along a route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingTrace {
    pub arclengths: Vec<f64>,
    pub unit_values: Vec<f64>,
    pub scaled_db: Vec<f64>,
}

/// A 2D grid of correlated unit-variance fading values, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingMap {
    pub origin: Point2,
    pub spacing: f64,
    pub width: usize,
    pub height: usize,
    pub unit_values: Vec<f64>,
}

impl FadingMap {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.unit_values[iy * self.width + ix]
    }

    /// Center coordinate of cell (ix, iy).
    pub fn cell_center(&self, ix: usize, iy: usize) -> Point2 {
        Point2::new(
            self.origin.x + (ix as f64 + 0.5) * self.spacing,
            self.origin.y + (iy as f64 + 0.5) * self.spacing,
        )
    }

    /// Value at the cell containing `p` (clamped to the grid).
    pub fn value_at_point(&self, p: Point2) -> f64 {
        let ix = (((p.x - self.origin.x) / self.spacing).floor() as i64)
            .clamp(0, self.width as i64 - 1) as usize;
        let iy = (((p.y - self.origin.y) / self.spacing).floor() as i64)
            .clamp(0, self.height as i64 - 1) as usize;
        self.at(ix, iy)
    }

    /// CSV grid: header comments with origin/spacing, then one row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# origin_x={} origin_y={} spacing={} width={} height={}\n",
            self.origin.x, self.origin.y, self.spacing, self.width, self.height
        ));
        for iy in 0..self.height {
            let row: Vec<String> =
                (0..self.width).map(|ix| format!("{:.6}", self.at(ix, iy))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// First-order Gauss-Markov process along a route.
///
/// `u_{k+1} = a u_k + sqrt(1 - a^2) w_k` with `a = exp(-dd/d_decorr)` is
/// exact for the exponential autocorrelation in 1D. Duplicate arc lengths
/// (`dd = 0`) repeat the previous value.
pub fn route_unit_process(
    arclengths: &[f64],
    d_decorr: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if !(d_decorr > 0.0) {
        return Err(Error::InvalidParameters("decorrelation distance must be > 0".into()));
    }
    let mut values = Vec::with_capacity(arclengths.len());
    let mut prev_s = f64::NAN;
    let mut prev_u = 0.0;
    for (k, &s) in arclengths.iter().enumerate() {
        if k == 0 {
            prev_u = rng.sample::<f64, _>(StandardNormal);
        } else {
            let dd = s - prev_s;
            if dd < 0.0 {
                return Err(Error::InvalidParameters(format!(
                    "arclengths must be non-decreasing (index {k})"
                )));
            }
            let a = (-dd / d_decorr).exp();
            let w: f64 = rng.sample(StandardNormal);
            prev_u = a * prev_u + (1.0 - a * a).sqrt() * w;
        }
        prev_s = s;
        values.push(prev_u);
    }
    Ok(values)
}

/// Dimensions of a fading map to generate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapSpec {
    pub origin: Point2,
    pub spacing: f64,
    pub width: usize,
    pub height: usize,
}

/// Single-pass correlated 2D field via local conditioning.
///
/// Cells are visited row-major; each new cell draws from the exact
/// conditional Gaussian given the already-generated neighbors within a small
/// window, with conditioning weights solved once per window shape and
/// cached. The window spans roughly one decorrelation distance.
pub fn map_unit_field(spec: &MapSpec, d_decorr: f64, rng: &mut impl Rng) -> Result<FadingMap> {
    if !(d_decorr > 0.0) {
        return Err(Error::InvalidParameters("decorrelation distance must be > 0".into()));
    }
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::InvalidParameters("map dimensions must be nonzero".into()));
    }
    if spec.spacing > d_decorr / 2.0 {
        return Err(Error::InvalidParameters(format!(
            "spacing {} m must be <= d_decorr/2 = {} m",
            spec.spacing,
            d_decorr / 2.0
        )));
    }
    let radius = ((d_decorr / spec.spacing).ceil() as i64).clamp(2, 4);
    let mut values = vec![0.0f64; spec.width * spec.height];
    let mut cache: HashMap<Vec<(i64, i64)>, (Vec<f64>, f64)> = HashMap::new();
    for iy in 0..spec.height as i64 {
        for ix in 0..spec.width as i64 {
            let mut offsets: Vec<(i64, i64)> = Vec::new();
            for dy in -radius..=0 {
                let jy = iy + dy;
                if jy < 0 {
                    continue;
                }
                let dx_range: Box<dyn Iterator<Item = i64>> =
                    if dy == 0 { Box::new(-radius..0) } else { Box::new(-radius..=radius) };
                for dx in dx_range {
                    let jx = ix + dx;
                    if jx < 0 || jx >= spec.width as i64 {
                        continue;
                    }
                    offsets.push((dx, dy));
                }
            }
            let w: f64 = rng.sample(StandardNormal);
            let value = if offsets.is_empty() {
                w
            } else {
                let (weights, sigma) = cache
                    .entry(offsets.clone())
                    .or_insert_with(|| conditioning_weights(&offsets, spec.spacing, d_decorr));
                let mut mean = 0.0;
                for (k, &(dx, dy)) in offsets.iter().enumerate() {
                    mean += weights[k] * values[((iy + dy) * spec.width as i64 + ix + dx) as usize];
                }
                mean + *sigma * w
            };
            values[(iy * spec.width as i64 + ix) as usize] = value;
        }
    }
    Ok(FadingMap {
        origin: spec.origin,
        spacing: spec.spacing,
        width: spec.width,
        height: spec.height,
        unit_values: values,
    })
}

/// Solves `C w = c` for the conditional mean weights and returns the
/// conditional standard deviation `sqrt(1 - c.w)`.
fn conditioning_weights(offsets: &[(i64, i64)], spacing: f64, d_decorr: f64) -> (Vec<f64>, f64) {
    let n = offsets.len();
    let cov = |a: (i64, i64), b: (i64, i64)| -> f64 {
        let d = spacing * (((a.0 - b.0).pow(2) + (a.1 - b.1).pow(2)) as f64).sqrt();
        (-d / d_decorr).exp()
    };
    let mut c_nn = DMatrix::zeros(n, n);
    let mut c_n0 = DVector::zeros(n);
    for i in 0..n {
        c_n0[i] = cov(offsets[i], (0, 0));
        for j in 0..n {
            c_nn[(i, j)] = cov(offsets[i], offsets[j]);
        }
    }
    // tiny ridge keeps near-duplicate neighbor rows factorable
    for i in 0..n {
        c_nn[(i, i)] += 1e-10;
    }
    let chol = c_nn.cholesky().expect("conditioning covariance not SPD");
    let weights = chol.solve(&c_n0);
    let var = (1.0 - weights.dot(&c_n0)).max(0.0);
    (weights.iter().copied().collect(), var.sqrt())
}

/// Draws one sample of the exact multivariate normal with covariance
/// `C_ij = exp(-|p_i - p_j| / d_decorr)` via Cholesky factorization.
///
/// This is the ground-truth generator the fast route/map generators are
/// validated against; it is limited to point sets small enough for a dense
/// factorization.
pub fn exact_covariance_oracle(
    points: &[Point2],
    d_decorr: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("no points".into()));
    }
    if points.len() > 2000 {
        return Err(Error::InvalidParameters(format!(
            "dense factorization limited to 2000 points, got {}",
            points.len()
        )));
    }
    if !(d_decorr > 0.0) {
        return Err(Error::InvalidParameters("decorrelation distance must be > 0".into()));
    }
    let n = points.len();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] = (-points[i].distance(&points[j]) / d_decorr).exp();
        }
    }
    let chol = match c.clone().cholesky() {
        Some(ch) => ch,
        None => {
            for i in 0..n {
                c[(i, i)] += 1e-10;
            }
            c.cholesky().ok_or_else(|| {
                Error::Numerical("covariance factorization failed even with jitter".into())
            })?
        }
    };
    let w = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    Ok((chol.l() * w).iter().copied().collect())
}

/// Scales unit fading values by the local shadow-fading standard deviation.
pub fn scale_fading(
    unit_values: &[f64],
    thetas_deg: &[f64],
    los_flags: &[LosState],
    params: &ChannelParams,
) -> Result<Vec<f64>> {
    if unit_values.len() != thetas_deg.len() || unit_values.len() != los_flags.len() {
        return Err(Error::LengthMismatch(format!(
            "unit {} / theta {} / flags {}",
            unit_values.len(),
            thetas_deg.len(),
            los_flags.len()
        )));
    }
    Ok(unit_values
        .iter()
        .zip(thetas_deg.iter().zip(los_flags.iter()))
        .map(|(&u, (&theta, &los))| shadow_std(theta, los, params) * u)
        .collect())
}
