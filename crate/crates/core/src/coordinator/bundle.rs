use serde::{Deserialize, Serialize};

use crate::ingest::{Mmsi, Provenance, Trajectory};
use crate::kinematics::rate_of_change;
use crate::synthesizer::AugmentedGroup;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AisSlot {
    pub mmsi: Mmsi,
    pub t: i64,
    pub lat: f64,
    pub lon: f64,
    pub sog: f64,
    pub cog: f64,
}

/// Rates over `(t - dt, t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedSlot {
    pub mmsi: Mmsi,
    pub t: i64,
    pub dsog_dt: f64,
    pub dcog_dt: f64,
}

/// Environmental context for one AIS row; missing values stay `null`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvValues {
    pub wind_bin: Option<u8>,
    pub wave_bin: Option<u8>,
    pub current_bin: Option<u8>,
    pub visibility: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSlot {
    pub mmsi: Mmsi,
    pub t: i64,
    #[serde(flatten)]
    pub values: EnvValues,
}

/// Join hook for environmental tables.
pub trait EnvSource: Send + Sync {
    fn lookup(&self, t: i64, lat: f64, lon: f64) -> EnvValues;
}

/// No environmental data: every field is null.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoEnv;

impl EnvSource for NoEnv {
    fn lookup(&self, _t: i64, _lat: f64, _lon: f64) -> EnvValues {
        EnvValues::default()
    }
}

/// Per-window input record: AIS rows, derived rates, environment and the
/// ids of the source trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionBundle {
    pub ais: Vec<AisSlot>,
    pub derived: Vec<DerivedSlot>,
    pub env: Vec<EnvSlot>,
    pub provenance: Vec<String>,
}

fn source_id(p: &Provenance) -> String {
    p.to_string()
}

pub fn build_perception_bundle(focal: &Trajectory, group: &AugmentedGroup) -> PerceptionBundle {
    build_perception_bundle_with(focal, group, &NoEnv)
}

/// Bundle over the focal window. Rows follow group order; the focal comes
/// first even if `group` was assembled around another vessel.
pub fn build_perception_bundle_with(focal: &Trajectory, group: &AugmentedGroup, env: &dyn EnvSource) -> PerceptionBundle {
    let mut members: Vec<&Trajectory> = vec![focal];
    members.extend(group.members.iter().filter(|m| m.mmsi != focal.mmsi));
    let mut b = PerceptionBundle {
        ais: Vec::new(),
        derived: Vec::new(),
        env: Vec::new(),
        provenance: Vec::new(),
    };
    for m in members {
        let states = m
            .states
            .iter()
            .filter(|s| focal.index_of(s.t).is_some());
        for s in states {
            b.ais.push(AisSlot {
                mmsi: m.mmsi,
                t: s.t,
                lat: s.lat,
                lon: s.lon,
                sog: s.sog,
                cog: s.cog,
            });
            b.env.push(EnvSlot {
                mmsi: m.mmsi,
                t: s.t,
                values: env.lookup(s.t, s.lat, s.lon),
            });
        }
        let rates = rate_of_change(m);
        for (i, pair) in m.states.windows(2).enumerate() {
            if focal.index_of(pair[1].t).is_some() && focal.index_of(pair[0].t).is_some() {
                b.derived.push(DerivedSlot {
                    mmsi: m.mmsi,
                    t: pair[1].t,
                    dsog_dt: rates.a[i],
                    dcog_dt: rates.omega[i],
                });
            }
        }
        b.provenance.push(source_id(&m.provenance));
    }
    b
}
