//! Kinematic primitives: course wrapping, great-circle distance, rhumb-line
//! dead reckoning, and SOG/COG rate-of-change statistics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Trajectory;

pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Arc length of one degree of latitude on the spherical Earth.
pub const KM_PER_DEG: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
pub const KM_PER_NM: f64 = 1.852;
/// Dead reckoning is refused beyond this absolute latitude.
pub const MAX_DR_LAT: f64 = 89.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("dead reckoning too close to a pole (lat {lat})")]
    PoleProximity { lat: f64 },
    #[error("need at least 2 rate samples per channel, got {got}")]
    InsufficientSamples { got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

/// Wrap any finite angle into `[0, 360)`.
pub fn wrap_course(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    // rem_euclid rounds tiny negatives up to exactly 360.0
    if r >= 360.0 {
        0.0
    } else {
        r + 0.0
    }
}

/// Signed shortest turn from `from` to `to`, in `(-180, 180]`.
pub fn course_delta(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

fn wrap_lon(lon: f64) -> f64 {
    if (-180.0..=180.0).contains(&lon) {
        lon
    } else {
        (lon + 180.0).rem_euclid(360.0) - 180.0
    }
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_KM`].
///
/// Arguments are put in a canonical order first so that `d(p, q)` and
/// `d(q, p)` are bit-identical.
pub fn haversine_km(p: GeoPoint, q: GeoPoint) -> f64 {
    let (a, b) = match p.lat.total_cmp(&q.lat).then(p.lon.total_cmp(&q.lon)) {
        std::cmp::Ordering::Greater => (q, p),
        _ => (p, q),
    };
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Advance a position along a constant bearing for `dt` seconds.
///
/// Small-step rhumb approximation: the longitude scale uses the cosine of the
/// starting latitude.
pub fn dead_reckon(
    lat: f64,
    lon: f64,
    sog: f64,
    cog: f64,
    dt: f64,
) -> Result<GeoPoint, KinematicsError> {
    if lat.abs() > MAX_DR_LAT {
        return Err(KinematicsError::PoleProximity { lat });
    }
    let dist = sog * KM_PER_NM * dt / 3600.0;
    let bearing = cog.to_radians();
    let new_lat = lat + dist * bearing.cos() / KM_PER_DEG;
    let new_lon = lon + dist * bearing.sin() / (KM_PER_DEG * lat.to_radians().cos());
    if new_lat.abs() > MAX_DR_LAT {
        return Err(KinematicsError::PoleProximity { lat: new_lat });
    }
    Ok(GeoPoint::new(new_lat, wrap_lon(new_lon)))
}

/// Rhumb-approximation heading and distance (km) from `from` to `to`; the
/// exact inverse of one [`dead_reckon`] step.
pub fn heading_to(from: GeoPoint, to: GeoPoint) -> (f64, f64) {
    let north = (to.lat - from.lat) * KM_PER_DEG;
    let east = (to.lon - from.lon) * KM_PER_DEG * from.lat.to_radians().cos();
    (wrap_course(east.atan2(north).to_degrees()), north.hypot(east))
}

/// Knots needed to cover `km` in `dt` seconds.
pub fn knots_for(km: f64, dt: f64) -> f64 {
    km * 3600.0 / (KM_PER_NM * dt)
}

/// Finite-difference SOG and COG rates of one uniformly sampled trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    /// SOG rate, knots per second.
    pub a: Vec<f64>,
    /// COG rate from wrapped signed differences, degrees per second.
    pub omega: Vec<f64>,
    pub dt: f64,
}

impl RateSeries {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

pub fn rate_of_change(traj: &Trajectory) -> RateSeries {
    let dt = traj.dt as f64;
    let (a, omega) = traj
        .states
        .windows(2)
        .map(|p| {
            (
                (p[1].sog - p[0].sog) / dt,
                course_delta(p[0].cog, p[1].cog) / dt,
            )
        })
        .unzip();
    RateSeries { a, omega, dt }
}

/// Gaussian fit of both rate channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateDistribution {
    pub mu_a: f64,
    pub sigma_a: f64,
    pub mu_omega: f64,
    pub sigma_omega: f64,
}

/// Two-pass sample mean and standard deviation (n - 1 denominator).
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

impl RateDistribution {
    pub fn from_samples(a: &[f64], omega: &[f64]) -> Result<Self, KinematicsError> {
        let got = a.len().min(omega.len());
        if got < 2 {
            return Err(KinematicsError::InsufficientSamples { got });
        }
        let (mu_a, sigma_a) = mean_std(a);
        let (mu_omega, sigma_omega) = mean_std(omega);
        Ok(Self {
            mu_a,
            sigma_a,
            mu_omega,
            sigma_omega,
        })
    }

    /// Fit over the concatenation of many series.
    pub fn pooled<'a, I>(series: I) -> Result<Self, KinematicsError>
    where
        I: IntoIterator<Item = &'a RateSeries>,
    {
        let (mut a, mut omega) = (Vec::new(), Vec::new());
        for s in series {
            a.extend_from_slice(&s.a);
            omega.extend_from_slice(&s.omega);
        }
        Self::from_samples(&a, &omega)
    }
}

pub fn fit_rate_distribution(rates: &RateSeries) -> Result<RateDistribution, KinematicsError> {
    RateDistribution::from_samples(&rates.a, &rates.omega)
}
