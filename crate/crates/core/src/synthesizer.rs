//! Group augmentation: every focal window is embedded in a group of exactly
//! `k_vessels` co-temporal trajectories, real neighbors first and bounded
//! virtual neighbors for the remainder.

use std::borrow::Borrow;
use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Mmsi, Provenance, Trajectory, VesselState};
use crate::kinematics::{dead_reckon, haversine_km, wrap_course, GeoPoint, KinematicsError, KM_PER_DEG};
use crate::neighborhood::neighbors_within;
use crate::rng::StreamRng;

/// Synthetic vessels draw MMSIs from `[990000000, 999999999]`.
pub const SYNTHETIC_MMSI_MIN: Mmsi = 990_000_000;
pub const SYNTHETIC_MMSI_MAX: Mmsi = 999_999_999;
/// Per-step noise amplitude as a fraction of the per-trajectory jitter.
pub const STEP_NOISE_FRACTION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("invalid synthesis bounds: {0}")]
    InvalidBounds(String),
    #[error("k_vessels must be at least 1")]
    ZeroGroup,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisBounds {
    /// Maximum per-trajectory SOG offset, knots.
    pub sog_jitter: f64,
    /// Maximum per-trajectory COG offset, degrees.
    pub cog_jitter: f64,
    /// Maximum start displacement, km.
    pub pos_jitter_km: f64,
    pub seed: u64,
}

impl Default for SynthesisBounds {
    fn default() -> Self {
        Self {
            sog_jitter: 2.0,
            cog_jitter: 15.0,
            pos_jitter_km: 5.0,
            seed: 0,
        }
    }
}

impl SynthesisBounds {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !(ok(self.sog_jitter) && ok(self.cog_jitter) && ok(self.pos_jitter_km)) {
            return Err(SynthesisError::InvalidBounds(format!("{self:?}")));
        }
        if self.cog_jitter * (1.0 + STEP_NOISE_FRACTION) >= 180.0 {
            return Err(SynthesisError::InvalidBounds(
                "cog jitter must stay below a half turn".into(),
            ));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.sog_jitter == 0.0 && self.cog_jitter == 0.0 && self.pos_jitter_km == 0.0
    }
}

/// A focal window plus its companions; `members[0]` is the focal vessel and
/// all members share the focal's time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedGroup {
    pub members: Vec<Trajectory>,
}

impl AugmentedGroup {
    pub fn focal(&self) -> &Trajectory {
        &self.members[0]
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn w(&self) -> usize {
        self.focal().w()
    }

    pub fn provenance(&self) -> Vec<&Provenance> {
        self.members.iter().map(|m| &m.provenance).collect()
    }

    pub fn n_synthetic(&self) -> usize {
        self.members
            .iter()
            .filter(|m| m.provenance.is_synthetic())
            .count()
    }

    /// True when every member sits on exactly the focal's grid.
    pub fn is_aligned(&self) -> bool {
        let f = self.focal();
        self.members.iter().all(|m| {
            m.dt == f.dt
                && m.w() == f.w()
                && m.states.iter().zip(&f.states).all(|(a, b)| a.t == b.t)
        })
    }
}

/// Focal plus up to `k_vessels - 1` nearest real neighbors that cover the
/// whole focal window, trimmed to it.
pub fn augment_with_real_neighbors<P: Borrow<Trajectory>>(
    focal: &Trajectory,
    pool: &[P],
    radius_km: f64,
    k_vessels: usize,
) -> AugmentedGroup {
    let mut members = vec![focal.clone()];
    let mut seen: BTreeSet<Mmsi> = BTreeSet::from([focal.mmsi]);
    for nb in neighbors_within(focal, pool, radius_km, focal.w()) {
        if members.len() >= k_vessels {
            break;
        }
        let cand: &Trajectory = pool[nb.index].borrow();
        if cand.dt != focal.dt || seen.contains(&cand.mmsi) {
            continue;
        }
        if let Some(w) = cand.window(focal.start(), focal.w()) {
            seen.insert(w.mmsi);
            members.push(w);
        }
    }
    AugmentedGroup { members }
}

fn symmetric(rng: &mut StreamRng, half: f64) -> f64 {
    if half > 0.0 {
        rng.gen_range(-half..=half)
    } else {
        0.0
    }
}

/// Displace `p` by `km` along bearing `theta` (radians) with the same local
/// scaling as dead reckoning.
fn displace(lat: f64, lon: f64, km: f64, theta: f64) -> (f64, f64) {
    (
        lat + km * theta.cos() / KM_PER_DEG,
        lon + km * theta.sin() / (KM_PER_DEG * lat.to_radians().cos()),
    )
}

/// A companion trajectory: the focal's kinematics with one bounded offset per
/// channel plus small per-step noise, started from a displaced position and
/// dead-reckoned forward. All-zero bounds return the focal states unchanged.
pub fn synthesize_virtual_neighbor(
    focal: &Trajectory,
    bounds: &SynthesisBounds,
    rng: &mut StreamRng,
) -> Result<Trajectory, SynthesisError> {
    bounds.validate()?;
    let mmsi = rng.gen_range(SYNTHETIC_MMSI_MIN..=SYNTHETIC_MMSI_MAX);
    let provenance = Provenance::Synthetic {
        parent: focal.mmsi,
    };
    if bounds.is_zero() {
        return Ok(Trajectory {
            mmsi,
            provenance,
            ..focal.clone()
        });
    }

    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut r = bounds.pos_jitter_km * rng.gen::<f64>().sqrt();
    let f0 = &focal.states[0];
    let (mut lat, mut lon) = displace(f0.lat, f0.lon, r, theta);
    // the local projection can overshoot the great-circle bound by a hair
    while haversine_km(f0.position(), GeoPoint::new(lat, lon)) > bounds.pos_jitter_km {
        r *= 0.999;
        (lat, lon) = displace(f0.lat, f0.lon, r, theta);
    }

    let sog_offset = symmetric(rng, bounds.sog_jitter);
    let cog_offset = symmetric(rng, bounds.cog_jitter);
    let sog_noise = bounds.sog_jitter * STEP_NOISE_FRACTION;
    let cog_noise = bounds.cog_jitter * STEP_NOISE_FRACTION;

    let dt = focal.dt as f64;
    let mut states = Vec::with_capacity(focal.w());
    for (i, s) in focal.states.iter().enumerate() {
        let sog = (s.sog + sog_offset + symmetric(rng, sog_noise)).max(0.0);
        let cog = wrap_course(s.cog + cog_offset + symmetric(rng, cog_noise));
        if i > 0 {
            let p = dead_reckon(lat, lon, sog, cog, dt)?;
            (lat, lon) = (p.lat, p.lon);
        }
        states.push(VesselState {
            t: s.t,
            lat,
            lon,
            sog,
            cog,
        });
    }
    Ok(Trajectory {
        mmsi,
        vessel_type: focal.vessel_type,
        dt: focal.dt,
        states,
        provenance,
    })
}

/// Exactly `k_vessels` members: the focal, its nearest fully-covering real
/// neighbors from `pool`, then virtual neighbors.
pub fn ensure_density<P: Borrow<Trajectory>>(
    focal: &Trajectory,
    pool: &[P],
    k_vessels: usize,
    radius_km: f64,
    bounds: &SynthesisBounds,
    rng: &mut StreamRng,
) -> Result<AugmentedGroup, SynthesisError> {
    if k_vessels == 0 {
        return Err(SynthesisError::ZeroGroup);
    }
    let mut group = augment_with_real_neighbors(focal, pool, radius_km, k_vessels);
    let mut taken: BTreeSet<Mmsi> = group.members.iter().map(|m| m.mmsi).collect();
    while group.members.len() < k_vessels {
        let mut s = synthesize_virtual_neighbor(focal, bounds, rng)?;
        while !taken.insert(s.mmsi) {
            s.mmsi = rng.gen_range(SYNTHETIC_MMSI_MIN..=SYNTHETIC_MMSI_MAX);
        }
        group.members.push(s);
    }
    Ok(group)
}
