//! Co-temporal vessel neighborhoods: snapshots, radius queries and OPTICS
//! density clustering under great-circle distance.

mod optics;
mod xi;

use std::borrow::Borrow;

use serde::{Deserialize, Serialize};

use crate::ingest::{Mmsi, Trajectory};
use crate::kinematics::{haversine_km, GeoPoint};

pub use optics::{optics_order, ClusterAssignment, ClusterLabel};
pub use xi::extract_clusters;

pub const DEFAULT_MIN_SAMPLES: usize = 3;
pub const DEFAULT_MAX_EPS_KM: f64 = 25.0;
pub const DEFAULT_XI: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticsParams {
    pub min_samples: usize,
    pub max_eps_km: f64,
    pub xi: f64,
}

impl Default for OpticsParams {
    fn default() -> Self {
        Self {
            min_samples: DEFAULT_MIN_SAMPLES,
            max_eps_km: DEFAULT_MAX_EPS_KM,
            xi: DEFAULT_XI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPoint {
    pub mmsi: Mmsi,
    pub lat: f64,
    pub lon: f64,
}

impl SnapshotPoint {
    pub fn position(&self) -> GeoPoint {
        GeoPoint::new(self.lat, self.lon)
    }
}

/// Positions of every vessel with a state at one timestamp, ascending by
/// MMSI, MMSIs unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: i64,
    pub points: Vec<SnapshotPoint>,
}

impl Snapshot {
    pub fn new(t: i64, mut points: Vec<SnapshotPoint>) -> Self {
        // stable: the first entry for a repeated MMSI survives the dedup
        points.sort_by_key(|p| p.mmsi);
        points.dedup_by_key(|p| p.mmsi);
        Snapshot { t, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn snapshot_at(trajs: &[Trajectory], t: i64) -> Snapshot {
    let points = trajs
        .iter()
        .filter_map(|tr| {
            tr.state_at(t).map(|s| SnapshotPoint {
                mmsi: tr.mmsi,
                lat: s.lat,
                lon: s.lon,
            })
        })
        .collect();
    Snapshot::new(t, points)
}

/// OPTICS ordering followed by ξ extraction.
pub fn cluster_snapshot(snapshot: &Snapshot, params: &OpticsParams) -> ClusterAssignment {
    let mut a = optics_order(snapshot, params.min_samples, params.max_eps_km);
    a.labels = extract_clusters(&a, params.xi);
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Index into the queried pool.
    pub index: usize,
    pub mmsi: Mmsi,
    pub mean_km: f64,
    pub shared: usize,
}

/// Pool members (other than the focal vessel) sharing at least `overlap`
/// grid timestamps with `focal` and whose mean co-temporal distance is at
/// most `radius_km`, nearest first.
pub fn neighbors_within<P: Borrow<Trajectory>>(
    focal: &Trajectory,
    pool: &[P],
    radius_km: f64,
    overlap: usize,
) -> Vec<Neighbor> {
    let mut out: Vec<Neighbor> = pool
        .iter()
        .map(Borrow::borrow)
        .enumerate()
        .filter(|(_, c)| c.mmsi != focal.mmsi)
        .filter_map(|(index, c)| {
            let (shared, sum) = focal
                .states
                .iter()
                .filter_map(|s| c.state_at(s.t).map(|o| haversine_km(s.position(), o.position())))
                .fold((0usize, 0.0f64), |(n, acc), d| (n + 1, acc + d));
            if shared == 0 || shared < overlap {
                return None;
            }
            let mean_km = sum / shared as f64;
            (mean_km <= radius_km).then_some(Neighbor {
                index,
                mmsi: c.mmsi,
                mean_km,
                shared,
            })
        })
        .collect();
    out.sort_by(|a, b| {
        a.mean_km
            .total_cmp(&b.mean_km)
            .then(a.mmsi.cmp(&b.mmsi))
            .then(a.index.cmp(&b.index))
    });
    out
}
