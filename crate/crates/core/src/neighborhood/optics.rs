use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::Snapshot;
use crate::ingest::Mmsi;
use crate::kinematics::haversine_km;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterLabel {
    Cluster(u32),
    Noise,
}

impl ClusterLabel {
    pub fn id(self) -> Option<u32> {
        match self {
            ClusterLabel::Cluster(c) => Some(c),
            ClusterLabel::Noise => None,
        }
    }
}

/// OPTICS output for one snapshot. Per-point vectors are indexed like
/// `Snapshot::points`; `None` distances are UNDEFINED.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub mmsi: Vec<Mmsi>,
    pub min_samples: usize,
    pub max_eps_km: f64,
    /// Visit order as indices into the snapshot.
    pub ordering: Vec<usize>,
    pub reachability: Vec<Option<f64>>,
    pub core_distance: Vec<Option<f64>>,
    /// The point whose expansion last lowered this point's reachability.
    pub predecessor: Vec<Option<usize>>,
    pub labels: Vec<ClusterLabel>,
}

impl ClusterAssignment {
    pub fn label_of(&self, mmsi: Mmsi) -> Option<ClusterLabel> {
        self.mmsi
            .binary_search(&mmsi)
            .ok()
            .map(|i| self.labels[i])
    }

    pub fn reachability_of(&self, mmsi: Mmsi) -> Option<Option<f64>> {
        self.mmsi
            .binary_search(&mmsi)
            .ok()
            .map(|i| self.reachability[i])
    }

    /// MMSIs sharing a (non-noise) cluster with `mmsi`, excluding itself.
    pub fn cluster_mates(&self, mmsi: Mmsi) -> Vec<Mmsi> {
        match self.label_of(mmsi) {
            Some(ClusterLabel::Cluster(c)) => self
                .mmsi
                .iter()
                .zip(&self.labels)
                .filter(|&(&m, &l)| m != mmsi && l == ClusterLabel::Cluster(c))
                .map(|(&m, _)| m)
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn n_clusters(&self) -> usize {
        self.labels
            .iter()
            .filter_map(|l| l.id())
            .max()
            .map_or(0, |m| m as usize + 1)
    }
}

/// Total order on f64 for the seed queue.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// OPTICS ordering under haversine distance.
///
/// Core distance counts the point itself among its `min_samples` neighbors.
/// The next point expanded is always the unprocessed point with the smallest
/// reachability, ties broken by ascending MMSI; when no unprocessed point is
/// reachable, the smallest unprocessed MMSI starts a new component.
pub fn optics_order(snapshot: &Snapshot, min_samples: usize, max_eps_km: f64) -> ClusterAssignment {
    let pts = &snapshot.points;
    let n = pts.len();

    let neighbors: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            (0..n)
                .filter_map(|j| {
                    let d = haversine_km(pts[i].position(), pts[j].position());
                    (d <= max_eps_km).then_some((j, d))
                })
                .collect()
        })
        .collect();

    let core_distance: Vec<Option<f64>> = neighbors
        .iter()
        .map(|nb| {
            if min_samples == 0 || nb.len() < min_samples {
                return None;
            }
            let mut d: Vec<f64> = nb.iter().map(|&(_, d)| d).collect();
            d.sort_by(f64::total_cmp);
            Some(d[min_samples - 1])
        })
        .collect();

    let mut processed = vec![false; n];
    let mut reachability: Vec<Option<f64>> = vec![None; n];
    let mut predecessor: Vec<Option<usize>> = vec![None; n];
    let mut ordering = Vec::with_capacity(n);
    let mut seeds: BinaryHeap<Reverse<(Dist, usize)>> = BinaryHeap::new();

    for start in 0..n {
        if processed[start] {
            continue;
        }
        let mut next = Some(start);
        while let Some(p) = next {
            processed[p] = true;
            ordering.push(p);
            if let Some(core) = core_distance[p] {
                for &(o, d) in &neighbors[p] {
                    if processed[o] {
                        continue;
                    }
                    let r = core.max(d);
                    if reachability[o].is_none_or(|old| r < old) {
                        reachability[o] = Some(r);
                        predecessor[o] = Some(p);
                        seeds.push(Reverse((Dist(r), o)));
                    }
                }
            }
            next = None;
            while let Some(Reverse((Dist(r), q))) = seeds.pop() {
                // skip entries superseded by a later decrease
                if !processed[q] && reachability[q] == Some(r) {
                    next = Some(q);
                    break;
                }
            }
        }
    }

    ClusterAssignment {
        mmsi: pts.iter().map(|p| p.mmsi).collect(),
        min_samples,
        max_eps_km,
        ordering,
        reachability,
        core_distance,
        predecessor,
        labels: vec![ClusterLabel::Noise; n],
    }
}
