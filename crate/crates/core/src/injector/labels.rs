use serde::{Deserialize, Serialize};

use super::mask::AnomalyMask;
use super::perturb::AppliedRate;
use super::realize::Edits;
use super::scenario::{AnomalyType, Level};
use crate::graph::proximity_pairs;
use crate::synthesizer::AugmentedGroup;

/// Provenance for a group of positive labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rationale {
    pub scenario_id: String,
    #[serde(rename = "type")]
    pub anomaly_type: AnomalyType,
    pub level: Level,
    pub severity: f64,
    pub prompt_text: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub vessel: usize,
    pub mask: AnomalyMask,
    pub applied: Vec<AppliedRate>,
    /// Index into [`LabelSet::rationale`]; set iff the mask is positive.
    pub rationale: Option<usize>,
}

/// A positive edge label; edges not listed are normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeLabel {
    pub src: usize,
    pub dst: usize,
    pub rationale: usize,
}

/// Node, edge and graph labels of one group. Node `v * w + t` is vessel
/// `v` at time index `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    pub k: usize,
    pub w: usize,
    pub node: Vec<u8>,
    pub edges: Vec<EdgeLabel>,
    pub graph: u8,
    pub masks: Vec<MaskRecord>,
    pub rationale: Vec<Rationale>,
}

impl LabelSet {
    pub fn empty(k: usize, w: usize) -> Self {
        LabelSet {
            k,
            w,
            node: vec![0; k * w],
            edges: Vec::new(),
            graph: 0,
            masks: (0..k)
                .map(|vessel| MaskRecord {
                    vessel,
                    mask: AnomalyMask::clean(w),
                    applied: Vec::new(),
                    rationale: None,
                })
                .collect(),
            rationale: Vec::new(),
        }
    }

    pub fn positive_nodes(&self) -> usize {
        self.node.iter().filter(|&&z| z == 1).count()
    }

    pub fn anomalous_trajectories(&self) -> usize {
        self.masks.iter().filter(|m| m.mask.y_traj == 1).count()
    }

    /// Every structural invariant of a label set.
    pub fn verify(&self) -> Result<(), String> {
        let (k, w) = (self.k, self.w);
        if self.node.len() != k * w {
            return Err(format!("{} node labels for {k}x{w} nodes", self.node.len()));
        }
        if self.masks.len() != k {
            return Err(format!("{} masks for {k} vessels", self.masks.len()));
        }
        for (v, rec) in self.masks.iter().enumerate() {
            if rec.vessel != v {
                return Err(format!("mask {v} names vessel {}", rec.vessel));
            }
            if rec.mask.w() != w {
                return Err(format!("mask {v} has length {}", rec.mask.w()));
            }
            rec.mask.check().map_err(|e| format!("mask {v}: {e}"))?;
            if self.node[v * w..(v + 1) * w] != rec.mask.z[..] {
                return Err(format!("node labels of vessel {v} differ from its mask"));
            }
            match (rec.mask.y_traj, rec.rationale) {
                (1, Some(r)) if r < self.rationale.len() => {}
                (1, _) => return Err(format!("positive mask {v} has no rationale")),
                (0, None) if rec.applied.is_empty() => {}
                (0, _) => return Err(format!("clean mask {v} carries edits")),
                _ => unreachable!(),
            }
        }
        for pair in self.edges.windows(2) {
            if (pair[0].src, pair[0].dst) >= (pair[1].src, pair[1].dst) {
                return Err("edge labels not strictly ordered by (src, dst)".into());
            }
        }
        for e in &self.edges {
            if e.src >= k * w || e.dst >= k * w {
                return Err(format!("edge label {} -> {} outside {} nodes", e.src, e.dst, k * w));
            }
            if e.rationale >= self.rationale.len() {
                return Err(format!("edge label {} -> {} has no rationale", e.src, e.dst));
            }
        }
        let want = u8::from(self.anomalous_trajectories() > 0 || !self.edges.is_empty());
        if self.graph != want {
            return Err(format!("graph label {} but members/edges imply {want}", self.graph));
        }
        Ok(())
    }
}

/// Labels for an edited group.
///
/// Node labels are the union of the masks. An edge between two co-temporal
/// states of different vessels that are both node-anomalous and within
/// `proximity_km` is anomalous (in both directions); no proximity radius
/// means no inter-vessel edges and hence no edge labels.
pub fn generate_labels(group: &AugmentedGroup, edits: &Edits, proximity_km: Option<f64>) -> LabelSet {
    let (k, w) = (group.k(), group.w());
    let mut labels = LabelSet::empty(k, w);
    let Some(sc) = edits.scenario.as_ref().filter(|_| !edits.is_empty()) else {
        return labels;
    };
    let entry = |text: String| Rationale {
        scenario_id: sc.id.clone(),
        anomaly_type: sc.anomaly_type,
        level: sc.level,
        severity: sc.severity,
        prompt_text: sc.prompt_text.clone(),
        text,
    };

    for (v, mask) in edits.masks.iter().enumerate() {
        let rec = &mut labels.masks[v];
        rec.mask = mask.clone();
        if mask.y_traj == 0 {
            continue;
        }
        rec.applied = edits.applied[v].clone();
        rec.rationale = Some(labels.rationale.len());
        labels.node[v * w..(v + 1) * w].copy_from_slice(&mask.z);
        labels.rationale.push(entry(format!(
            "{} on vessel {} over time steps {}..{}: {}",
            sc.anomaly_type,
            group.members[v].mmsi,
            mask.s,
            mask.s + mask.m,
            sc.rationale
        )));
    }

    if let Some(radius) = proximity_km {
        let mut pair_rationale: Vec<((usize, usize), usize)> = Vec::new();
        for (t, a, b) in proximity_pairs(&group.members, radius) {
            if !(edits.masks[a].is_set(t) && edits.masks[b].is_set(t)) {
                continue;
            }
            let r = match pair_rationale.iter().find(|(p, _)| *p == (a, b)) {
                Some(&(_, r)) => r,
                None => {
                    let r = labels.rationale.len();
                    let why = if edits.pairs.contains(&(a, b)) || edits.pairs.contains(&(b, a)) {
                        "interacting pair"
                    } else {
                        "co-temporal anomalous states"
                    };
                    labels.rationale.push(entry(format!(
                        "{why}: vessels {} and {} within {radius} km: {}",
                        group.members[a].mmsi, group.members[b].mmsi, sc.rationale
                    )));
                    pair_rationale.push(((a, b), r));
                    r
                }
            };
            let (na, nb) = (a * w + t, b * w + t);
            labels.edges.push(EdgeLabel { src: na, dst: nb, rationale: r });
            labels.edges.push(EdgeLabel { src: nb, dst: na, rationale: r });
        }
        labels.edges.sort();
    }

    labels.graph = u8::from(labels.anomalous_trajectories() > 0 || !labels.edges.is_empty());
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::injector::mask::Channel;
    use crate::injector::scenario::{interpret_scenario, Scenario};
    use crate::ingest::{Provenance, Trajectory, VesselState, VesselType};

    fn parked(mmsi: u32, lat: f64, lon: f64, w: usize) -> Trajectory {
        let states = (0..w)
            .map(|i| VesselState {
                t: i as i64 * 600,
                lat,
                lon,
                sog: 0.0,
                cog: 0.0,
            })
            .collect();
        Trajectory::new(mmsi, VesselType::Cargo, 600, states, Provenance::real("p")).unwrap()
    }

    fn edits_with(group: &AugmentedGroup, sc: Scenario, masked: &[(usize, usize, usize)]) -> Edits {
        let mut e = Edits::none(group);
        e.scenario = Some(sc);
        for &(v, s, m) in masked {
            e.masks[v] = AnomalyMask::block(group.w(), s, m, None, Channel::Both);
        }
        e
    }

    #[test]
    fn no_edits_no_labels() {
        let g = AugmentedGroup {
            members: vec![parked(1, -25.0, 110.0, 5), parked(2, -25.0, 110.001, 5)],
        };
        let l = generate_labels(&g, &Edits::none(&g), Some(10.0));
        assert_eq!(l, LabelSet::empty(2, 5));
        assert_eq!(l.graph, 0);
        assert!(l.rationale.is_empty());
        l.verify().unwrap();
    }

    #[test]
    fn lone_anomalous_vessel_gets_no_edge_labels() {
        let g = AugmentedGroup {
            members: vec![parked(1, -25.0, 110.0, 5), parked(2, -25.0, 110.001, 5)],
        };
        let sc = interpret_scenario("type: LOITERING").unwrap();
        let l = generate_labels(&g, &edits_with(&g, sc, &[(0, 1, 2)]), Some(10.0));
        assert_eq!(l.node, vec![0, 1, 1, 0, 0, 0, 0, 0, 0, 0]);
        assert!(l.edges.is_empty());
        assert_eq!(l.graph, 1);
        assert_eq!(l.masks[0].rationale, Some(0));
        assert_eq!(l.rationale[0].scenario_id, "loitering");
        l.verify().unwrap();
    }

    #[test]
    fn co_anomalous_neighbors_label_their_edges() {
        let g = AugmentedGroup {
            members: vec![
                parked(1, -25.0, 110.0, 5),
                parked(2, -25.0, 110.001, 5),
                parked(3, -26.0, 110.0, 5),
            ],
        };
        let sc = interpret_scenario("type: LOITERING\nlevel: GRAPH\nprompt_text: idle").unwrap();
        // overlap at t = 2, 3 for vessels 0 and 1; vessel 2 is far away
        let l = generate_labels(&g, &edits_with(&g, sc, &[(0, 1, 3), (1, 2, 2), (2, 0, 5)]), Some(10.0));
        let pairs: Vec<(usize, usize)> = l.edges.iter().map(|e| (e.src, e.dst)).collect();
        assert_eq!(pairs, vec![(2, 7), (3, 8), (7, 2), (8, 3)]);
        assert!(l.rationale.iter().all(|r| r.prompt_text == "idle"));
        l.verify().unwrap();
        assert!(generate_labels(&g, &edits_with(&g, interpret_scenario("type: LOITERING").unwrap(), &[(0, 1, 3), (1, 2, 2)]), None)
            .edges
            .is_empty());
    }

    #[test]
    fn verify_rejects_orphans_and_mismatches() {
        let g = AugmentedGroup {
            members: vec![parked(1, -25.0, 110.0, 4), parked(2, -25.0, 110.001, 4)],
        };
        let sc = interpret_scenario("type: LOITERING").unwrap();
        let good = generate_labels(&g, &edits_with(&g, sc, &[(0, 1, 2), (1, 1, 2)]), Some(10.0));
        good.verify().unwrap();

        let mut bad = good.clone();
        bad.masks[0].rationale = None;
        assert!(bad.verify().is_err());
        let mut bad = good.clone();
        bad.node[7] = 1;
        assert!(bad.verify().is_err());
        let mut bad = good.clone();
        bad.graph = 0;
        assert!(bad.verify().is_err());
        let mut bad = good.clone();
        bad.edges[0].rationale = 99;
        assert!(bad.verify().is_err());
        let mut bad = good;
        bad.edges.reverse();
        assert!(bad.verify().is_err());
    }
}
