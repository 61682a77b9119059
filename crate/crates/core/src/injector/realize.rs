use rand::Rng;

use super::mask::{sample_anomaly_block, AnomalyMask, Channel, RatioConfig};
use super::perturb::{
    applied_rate, apply_rates, draw_sign, member_distribution, perturb_kinematics, reintegrate, AppliedRate,
    PerturbConfig, RateChannel,
};
use super::scenario::{AnomalyType, Level, Scenario};
use super::InjectError;
use crate::ingest::Trajectory;
use crate::kinematics::{dead_reckon, heading_to, knots_for, GeoPoint, RateDistribution};
use crate::rng::StreamRng;
use crate::synthesizer::AugmentedGroup;

/// Settings shared by every realization in a run.
#[derive(Debug, Clone, Copy)]
pub struct InjectionContext<'a> {
    pub ratios: RatioConfig,
    /// Corpus-wide fit over clean trajectories.
    pub pooled: Option<&'a RateDistribution>,
    pub perturb: PerturbConfig,
    pub exclude_synthetic: bool,
}

/// What a realization changed, member by member.
#[derive(Debug, Clone, PartialEq)]
pub struct Edits {
    pub scenario: Option<Scenario>,
    pub masks: Vec<AnomalyMask>,
    pub applied: Vec<Vec<AppliedRate>>,
    /// Member pairs whose interaction is the anomaly.
    pub pairs: Vec<(usize, usize)>,
    pub clamp_events: usize,
}

impl Edits {
    pub fn none(group: &AugmentedGroup) -> Self {
        let k = group.k();
        Edits {
            scenario: None,
            masks: vec![AnomalyMask::clean(group.w()); k],
            applied: vec![Vec::new(); k],
            pairs: Vec::new(),
            clamp_events: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.masks.iter().all(|m| m.y_traj == 0)
    }
}

/// Members a scenario may edit, in group order.
pub fn resolve_targets(sc: &Scenario, group: &AugmentedGroup, exclude_synthetic: bool) -> Vec<usize> {
    group
        .members
        .iter()
        .enumerate()
        .filter(|(_, m)| !(exclude_synthetic && m.provenance.is_synthetic()))
        .filter(|(_, m)| sc.target.matches(m))
        .map(|(i, _)| i)
        .collect()
}

/// Members the scenario would edit, or why it cannot apply to this group.
pub fn select_targets(sc: &Scenario, group: &AugmentedGroup, exclude_synthetic: bool) -> Result<Vec<usize>, InjectError> {
    let mut c = resolve_targets(sc, group, exclude_synthetic);
    let need = match sc.anomaly_type {
        AnomalyType::Rendezvous => 2,
        _ => 1,
    };
    if c.len() < need {
        return Err(InjectError::UnresolvableTarget {
            id: sc.id.clone(),
            reason: format!("{} eligible member(s), {need} needed", c.len()),
        });
    }
    let take = match (sc.anomaly_type, sc.level) {
        (AnomalyType::Rendezvous, _) => 2,
        (_, Level::Graph) => sc.count.unwrap_or(c.len()),
        _ => sc.count.unwrap_or(1),
    };
    if take > c.len() {
        return Err(InjectError::UnresolvableTarget {
            id: sc.id.clone(),
            reason: format!("{take} member(s) requested, {} eligible", c.len()),
        });
    }
    c.truncate(take);
    Ok(c)
}

fn unresolvable(sc: &Scenario, reason: impl Into<String>) -> InjectError {
    InjectError::UnresolvableTarget {
        id: sc.id.clone(),
        reason: reason.into(),
    }
}

/// Apply a scenario to a copy of the group.
///
/// Single-vessel kinematic types draw one block per edited member; group
/// types and RENDEZVOUS share one block across the edited members.
pub fn realize_scenario(
    sc: &Scenario,
    group: &AugmentedGroup,
    ctx: &InjectionContext<'_>,
    rng: &mut StreamRng,
) -> Result<(AugmentedGroup, Edits), InjectError> {
    sc.validate().map_err(|e| unresolvable(sc, e.to_string()))?;
    ctx.ratios.validate()?;
    let targets = select_targets(sc, group, ctx.exclude_synthetic)?;
    let w = group.w();
    let mut out = group.clone();
    let mut edits = Edits::none(group);
    edits.scenario = Some(sc.clone());

    match sc.anomaly_type {
        t if t.kinematic_channel().is_some() => {
            let channel = t.kinematic_channel().unwrap();
            for &v in &targets {
                let (s, m, _) = sample_anomaly_block(w, ctx.ratios.r_node, rng);
                let mask = AnomalyMask::block(w, s, m, Some(sc.severity), channel);
                let dist = member_distribution(&group.members[v], ctx.pooled)?;
                let p = perturb_kinematics(&group.members[v], &mask, &dist, ctx.pooled, &ctx.perturb, rng)?;
                out.members[v] = p.traj;
                edits.masks[v] = mask;
                edits.applied[v] = p.applied;
                edits.clamp_events += p.clamp_events;
            }
        }
        AnomalyType::GroupDeviation => {
            let (s, m, _) = sample_anomaly_block(w, ctx.ratios.r_node, rng);
            let dist = match ctx.pooled {
                Some(d) => *d,
                None => member_distribution(group.focal(), None)?,
            };
            let sign = draw_sign(ctx.perturb.one_sided, rng);
            let rate = applied_rate(RateChannel::Cog, &dist, None, sc.severity, sign)?;
            for &v in &targets {
                let mask = AnomalyMask::block(w, s, m, Some(sc.severity), Channel::Cog);
                apply_rates(&mut out.members[v], mask.range(), None, Some(&rate), ctx.perturb.sog_max)?;
                edits.masks[v] = mask;
                edits.applied[v] = vec![rate];
            }
        }
        AnomalyType::Loitering => {
            let (s, m, _) = sample_anomaly_block(w, ctx.ratios.r_node, rng);
            for &v in &targets {
                let traj = &mut out.members[v];
                for st in &mut traj.states[s..s + m] {
                    st.sog = rng.gen_range(0.0..sc.severity);
                    st.cog = rng.gen_range(0.0..360.0);
                }
                let dt = traj.dt as f64;
                reintegrate(&mut traj.states, s, dt)?;
                edits.masks[v] = AnomalyMask::block(w, s, m, None, Channel::Both);
            }
        }
        AnomalyType::Rendezvous => {
            let (s, m, _) = sample_anomaly_block(w, ctx.ratios.r_node, rng);
            let (a, b) = (targets[0], targets[1]);
            converge(sc, &mut out.members, a, b, s, m, ctx.perturb.sog_max)?;
            for v in [a, b] {
                edits.masks[v] = AnomalyMask::block(w, s, m, None, Channel::Both);
            }
            edits.pairs.push((a, b));
        }
        _ => unreachable!("kinematic types handled above"),
    }
    Ok((out, edits))
}

/// Point `km` from `from` towards `to`.
fn toward(from: GeoPoint, to: GeoPoint, km: f64) -> Result<GeoPoint, InjectError> {
    let (cog, _) = heading_to(from, to);
    Ok(dead_reckon(from.lat, from.lon, knots_for(km, 1.0), cog, 1.0)?)
}

/// Steer members `a` and `b` to meeting points `severity` km apart over the
/// first half of the block, then hold them there at zero SOG.
fn converge(
    sc: &Scenario,
    members: &mut [Trajectory],
    a: usize,
    b: usize,
    s: usize,
    m: usize,
    sog_max: f64,
) -> Result<(), InjectError> {
    // node 0 has no predecessor to move from
    let first = s.max(1);
    let end = s + m;
    if first >= end {
        return Err(unresolvable(sc, "block leaves no step to move"));
    }
    let steps = end - first;
    let approach = steps.div_ceil(2);
    let pa = members[a].states[first - 1].position();
    let pb = members[b].states[first - 1].position();
    let mid = GeoPoint::new((pa.lat + pb.lat) / 2.0, (pa.lon + pb.lon) / 2.0);
    let half = sc.severity / 2.0;
    let goals = [(a, toward(mid, pa, half)?), (b, toward(mid, pb, half)?)];

    for (v, goal) in goals {
        let traj = &mut members[v];
        let dt = traj.dt as f64;
        for (j, i) in (first..end).enumerate() {
            let prev = traj.states[i - 1];
            let (cog, sog) = if j < approach {
                let (cog, km) = heading_to(prev.position(), goal);
                (cog, knots_for(km / (approach - j) as f64, dt))
            } else {
                (prev.cog, 0.0)
            };
            let p = dead_reckon(prev.lat, prev.lon, sog, cog, dt)?;
            (traj.states[i].lat, traj.states[i].lon) = (p.lat, p.lon);
            if sog > sog_max {
                return Err(unresolvable(
                    sc,
                    format!("meeting needs {sog:.1} kn, above the {sog_max} kn limit"),
                ));
            }
            traj.states[i].sog = sog;
            traj.states[i].cog = cog;
        }
        reintegrate(&mut traj.states, end, dt)?;
    }
    Ok(())
}
