use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mask::AnomalyMask;
use super::InjectError;
use crate::ingest::{Trajectory, VesselState};
use crate::kinematics::{dead_reckon, wrap_course, KinematicsError, RateDistribution};
use crate::rng::StreamRng;

pub const DEFAULT_SOG_MAX: f64 = 40.0;
pub const DEFAULT_K_SIGMA: f64 = 3.5;
/// Below this many rate samples a trajectory borrows the pooled fit.
pub const MIN_FIT_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RateChannel {
    Sog,
    Cog,
}

/// The rate driven onto every masked step of one channel.
///
/// `rate = mu + deviation` with `deviation = sign * (k_sigma * sigma)`; the
/// SOG channel is in knots per second, COG in degrees per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppliedRate {
    pub channel: RateChannel,
    pub mu: f64,
    pub sigma: f64,
    pub k_sigma: f64,
    pub sign: i8,
    pub deviation: f64,
    pub rate: f64,
    /// σ came from the pooled corpus fit because the trajectory's own was 0.
    pub pooled_sigma: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub sog_max: f64,
    /// Always push rates upward instead of drawing a sign per block.
    pub one_sided: bool,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            sog_max: DEFAULT_SOG_MAX,
            one_sided: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub traj: Trajectory,
    pub applied: Vec<AppliedRate>,
    pub clamp_events: usize,
}

pub fn draw_sign(one_sided: bool, rng: &mut StreamRng) -> i8 {
    if one_sided || rng.gen_bool(0.5) {
        1
    } else {
        -1
    }
}

pub fn applied_rate(
    channel: RateChannel,
    dist: &RateDistribution,
    fallback: Option<&RateDistribution>,
    k_sigma: f64,
    sign: i8,
) -> Result<AppliedRate, InjectError> {
    if !(k_sigma > 3.0) {
        return Err(InjectError::InvalidSeverity(k_sigma));
    }
    let pick = |d: &RateDistribution| match channel {
        RateChannel::Sog => (d.mu_a, d.sigma_a),
        RateChannel::Cog => (d.mu_omega, d.sigma_omega),
    };
    let (mu, own) = pick(dist);
    let (sigma, pooled_sigma) = if own > 0.0 {
        (own, false)
    } else {
        match fallback.map(|f| pick(f).1) {
            Some(s) if s > 0.0 => (s, true),
            _ => return Err(InjectError::DegenerateSigma(channel)),
        }
    };
    let deviation = f64::from(sign) * (k_sigma * sigma);
    Ok(AppliedRate {
        channel,
        mu,
        sigma,
        k_sigma,
        sign,
        deviation,
        rate: mu + deviation,
        pooled_sigma,
    })
}

/// Recompute positions from `from` onward by dead reckoning each state's
/// SOG/COG from its predecessor's position.
pub(crate) fn reintegrate(states: &mut [VesselState], from: usize, dt: f64) -> Result<(), KinematicsError> {
    for i in from.max(1)..states.len() {
        let prev = states[i - 1];
        let p = dead_reckon(prev.lat, prev.lon, states[i].sog, states[i].cog, dt)?;
        states[i].lat = p.lat;
        states[i].lon = p.lon;
    }
    Ok(())
}

/// Drive the given rates over `block` and re-integrate positions. Returns the
/// number of SOG values clamped to `[0, sog_max]`.
pub(crate) fn apply_rates(
    traj: &mut Trajectory,
    block: Range<usize>,
    sog: Option<&AppliedRate>,
    cog: Option<&AppliedRate>,
    sog_max: f64,
) -> Result<usize, KinematicsError> {
    let dt = traj.dt as f64;
    let first = traj.states[0];
    let mut clamps = 0;
    for i in block.clone() {
        let prev = if i == 0 { first } else { traj.states[i - 1] };
        let st = &mut traj.states[i];
        if let Some(r) = sog {
            let raw = prev.sog + r.rate * dt;
            let v = raw.clamp(0.0, sog_max);
            if v != raw {
                clamps += 1;
            }
            st.sog = v;
        }
        if let Some(r) = cog {
            st.cog = wrap_course(prev.cog + r.rate * dt);
        }
    }
    reintegrate(&mut traj.states, block.start, dt)?;
    Ok(clamps)
}

/// Rate fit used for one member: its own when it has enough samples, the
/// pooled corpus fit otherwise.
pub fn member_distribution(
    traj: &Trajectory,
    pooled: Option<&RateDistribution>,
) -> Result<RateDistribution, InjectError> {
    let rates = crate::kinematics::rate_of_change(traj);
    if rates.len() >= MIN_FIT_SAMPLES {
        if let Ok(d) = crate::kinematics::fit_rate_distribution(&rates) {
            return Ok(d);
        }
    }
    pooled.copied().ok_or(InjectError::NoDistribution)
}

/// σ-scaled rate injection over the mask's block on its channel(s).
///
/// Masked step `i` takes `x_i = x_{i-1} + rate * dt` (for `i = 0` the clean
/// value stands in for `x_{-1}`); positions from the block start onward are
/// dead-reckoned again, so the segment after the block keeps its clean SOG
/// and COG but starts from the displaced position.
pub fn perturb_kinematics(
    traj: &Trajectory,
    mask: &AnomalyMask,
    dist: &RateDistribution,
    fallback: Option<&RateDistribution>,
    config: &PerturbConfig,
    rng: &mut StreamRng,
) -> Result<Perturbation, InjectError> {
    if mask.w() != traj.w() {
        return Err(InjectError::MaskLength {
            mask: mask.w(),
            traj: traj.w(),
        });
    }
    if mask.m == 0 {
        return Ok(Perturbation {
            traj: traj.clone(),
            applied: Vec::new(),
            clamp_events: 0,
        });
    }
    let k_sigma = mask.k_sigma.unwrap_or(f64::NAN);
    if !(k_sigma > 3.0) {
        return Err(InjectError::InvalidSeverity(k_sigma));
    }
    let sign = draw_sign(config.one_sided, rng);
    let sog = mask
        .channel
        .has_sog()
        .then(|| applied_rate(RateChannel::Sog, dist, fallback, k_sigma, sign))
        .transpose()?;
    let cog = mask
        .channel
        .has_cog()
        .then(|| applied_rate(RateChannel::Cog, dist, fallback, k_sigma, sign))
        .transpose()?;

    let mut out = traj.clone();
    let clamp_events = apply_rates(&mut out, mask.range(), sog.as_ref(), cog.as_ref(), config.sog_max)?;
    Ok(Perturbation {
        traj: out,
        applied: sog.into_iter().chain(cog).collect(),
        clamp_events,
    })
}
