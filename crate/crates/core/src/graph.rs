//! Directed spatio-temporal graphs over augmented groups: one node per
//! (vessel, time index), forward TEMPORAL chains and bidirectional PROXIMITY
//! edges between nearby co-temporal vessels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Mmsi, Provenance, Trajectory, VesselType};
use crate::injector::LabelSet;
use crate::kinematics::{haversine_km, rate_of_change};
use crate::synthesizer::AugmentedGroup;

pub const DEFAULT_PROXIMITY_KM: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("incomplete coverage: {0}")]
    IncompleteCoverage(String),
    #[error("dangling label: {0}")]
    DanglingLabel(String),
    #[error("malformed graph: {0}")]
    Malformed(String),
}

/// One vessel state with its derived rates (0 at the first time index).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "NodeRow", into = "NodeRow")]
pub struct Node {
    pub vessel: usize,
    pub t: usize,
    pub lat: f64,
    pub lon: f64,
    pub sog: f64,
    pub cog: f64,
    pub dsog_dt: f64,
    pub dcog_dt: f64,
}

type NodeRow = (usize, usize, f64, f64, f64, f64, f64, f64);

impl From<NodeRow> for Node {
    fn from(r: NodeRow) -> Self {
        Node {
            vessel: r.0,
            t: r.1,
            lat: r.2,
            lon: r.3,
            sog: r.4,
            cog: r.5,
            dsog_dt: r.6,
            dcog_dt: r.7,
        }
    }
}

impl From<Node> for NodeRow {
    fn from(n: Node) -> Self {
        (n.vessel, n.t, n.lat, n.lon, n.sog, n.cog, n.dsog_dt, n.dcog_dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EdgeKind {
    Temporal,
    Proximity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "EdgeRow", into = "EdgeRow")]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

type EdgeRow = (usize, usize, EdgeKind);

impl From<EdgeRow> for Edge {
    fn from(r: EdgeRow) -> Self {
        Edge {
            src: r.0,
            dst: r.1,
            kind: r.2,
        }
    }
}

impl From<Edge> for EdgeRow {
    fn from(e: Edge) -> Self {
        (e.src, e.dst, e.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberMeta {
    pub mmsi: Mmsi,
    pub vessel_type: VesselType,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub window_start: i64,
    pub dt: i64,
    pub k_vessels: usize,
    pub w: usize,
    pub focal_mmsi: Mmsi,
    /// `None` when only TEMPORAL edges are built.
    pub proximity_km: Option<f64>,
    pub members: Vec<MemberMeta>,
    pub scenario_id: Option<String>,
    pub clamp_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalGraph {
    pub graph_id: String,
    pub meta: GraphMeta,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub labels: LabelSet,
}

impl TemporalGraph {
    pub fn node_index(&self, vessel: usize, t: usize) -> usize {
        vessel * self.meta.w + t
    }

    pub fn count(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.edge_position(src, dst).is_some()
    }

    fn edge_position(&self, src: usize, dst: usize) -> Option<usize> {
        self.edges
            .binary_search_by(|e| (e.src, e.dst).cmp(&(src, dst)))
            .ok()
    }

    /// Edge labels aligned with `edges`.
    pub fn edge_label_vector(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.edges.len()];
        for l in &self.labels.edges {
            if let Some(i) = self.edge_position(l.src, l.dst) {
                out[i] = 1;
            }
        }
        out
    }

    /// The member trajectories as stored in the node rows.
    pub fn member_trajectories(&self) -> Vec<Trajectory> {
        let w = self.meta.w;
        self.meta
            .members
            .iter()
            .enumerate()
            .map(|(v, m)| Trajectory {
                mmsi: m.mmsi,
                vessel_type: m.vessel_type,
                dt: self.meta.dt,
                states: self.nodes[v * w..(v + 1) * w]
                    .iter()
                    .map(|n| crate::ingest::VesselState {
                        t: self.meta.window_start + n.t as i64 * self.meta.dt,
                        lat: n.lat,
                        lon: n.lon,
                        sog: n.sog,
                        cog: n.cog,
                    })
                    .collect(),
                provenance: m.provenance.clone(),
            })
            .collect()
    }

    /// Node/edge identities, edge ordering and symmetry, and the label set.
    pub fn check_structure(&self) -> Result<(), GraphError> {
        let bad = |m: String| Err(GraphError::Malformed(m));
        let (k, w) = (self.meta.k_vessels, self.meta.w);
        if self.meta.members.len() != k {
            return bad(format!("{} members for k = {k}", self.meta.members.len()));
        }
        if self.nodes.len() != k * w {
            return bad(format!("{} nodes, expected {}", self.nodes.len(), k * w));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if (n.vessel, n.t) != (i / w, i % w) {
                return bad(format!("node {i} is ({}, {})", n.vessel, n.t));
            }
            if n.t == 0 && (n.dsog_dt != 0.0 || n.dcog_dt != 0.0) {
                return bad(format!("node {i} has nonzero rates at t = 0"));
            }
        }
        for pair in self.edges.windows(2) {
            if (pair[0].src, pair[0].dst) >= (pair[1].src, pair[1].dst) {
                return bad("edges not strictly ordered by (src, dst)".into());
            }
        }
        let mut temporal = 0;
        for e in &self.edges {
            if e.src >= k * w || e.dst >= k * w {
                return bad(format!("edge {} -> {} out of range", e.src, e.dst));
            }
            let (a, b) = (&self.nodes[e.src], &self.nodes[e.dst]);
            match e.kind {
                EdgeKind::Temporal => {
                    if a.vessel != b.vessel || b.t != a.t + 1 {
                        return bad(format!("temporal edge {} -> {}", e.src, e.dst));
                    }
                    temporal += 1;
                }
                EdgeKind::Proximity => {
                    if a.vessel == b.vessel || a.t != b.t {
                        return bad(format!("proximity edge {} -> {}", e.src, e.dst));
                    }
                    if self.meta.proximity_km.is_none() {
                        return bad("proximity edge in a temporal-only graph".into());
                    }
                    if !self.has_edge(e.dst, e.src) {
                        return bad(format!("proximity edge {} -> {} has no reverse", e.src, e.dst));
                    }
                }
            }
        }
        if temporal != k * w.saturating_sub(1) {
            return bad(format!("{temporal} temporal edges, expected {}", k * (w - 1)));
        }
        if self.labels.k != k || self.labels.w != w {
            return bad("label set dimensions differ from the graph".into());
        }
        self.labels.verify().map_err(GraphError::Malformed)?;
        for l in &self.labels.edges {
            if !self.has_edge(l.src, l.dst) {
                return bad(format!("edge label {} -> {} names no edge", l.src, l.dst));
            }
        }
        Ok(())
    }
}

/// Co-temporal member pairs `(t, a, b)` with `a < b` within `radius_km`,
/// ordered by time then members.
pub fn proximity_pairs(members: &[Trajectory], radius_km: f64) -> Vec<(usize, usize, usize)> {
    let w = members.first().map_or(0, Trajectory::w);
    let mut out = Vec::new();
    for t in 0..w {
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                let d = haversine_km(members[a].states[t].position(), members[b].states[t].position());
                if d <= radius_km {
                    out.push((t, a, b));
                }
            }
        }
    }
    out
}

pub fn graph_id(focal: Mmsi, start: i64) -> String {
    format!("{focal}-{start}")
}

/// Nodes in (vessel, time) row-major order, TEMPORAL chains, and PROXIMITY
/// edges in both directions when `proximity_km` is given. Labels start empty.
pub fn build_temporal_graph(
    group: &AugmentedGroup,
    window: (i64, usize),
    proximity_km: Option<f64>,
) -> Result<TemporalGraph, GraphError> {
    let (start, w) = window;
    if group.members.is_empty() {
        return Err(GraphError::IncompleteCoverage("empty group".into()));
    }
    let focal = group.focal();
    for m in &group.members {
        let covered = m.w() == w
            && m.dt == focal.dt
            && m.states.iter().enumerate().all(|(i, s)| s.t == start + i as i64 * focal.dt);
        if !covered {
            return Err(GraphError::IncompleteCoverage(format!(
                "vessel {} does not cover {w} samples from {start}",
                m.mmsi
            )));
        }
    }
    let k = group.k();
    let mut nodes = Vec::with_capacity(k * w);
    for (v, m) in group.members.iter().enumerate() {
        let rates = rate_of_change(m);
        for (t, s) in m.states.iter().enumerate() {
            let (dsog_dt, dcog_dt) = if t == 0 { (0.0, 0.0) } else { (rates.a[t - 1], rates.omega[t - 1]) };
            nodes.push(Node {
                vessel: v,
                t,
                lat: s.lat,
                lon: s.lon,
                sog: s.sog,
                cog: s.cog,
                dsog_dt,
                dcog_dt,
            });
        }
    }
    let mut edges = Vec::with_capacity(k * w.saturating_sub(1));
    for v in 0..k {
        for t in 0..w.saturating_sub(1) {
            edges.push(Edge {
                src: v * w + t,
                dst: v * w + t + 1,
                kind: EdgeKind::Temporal,
            });
        }
    }
    if let Some(r) = proximity_km {
        for (t, a, b) in proximity_pairs(&group.members, r) {
            let (na, nb) = (a * w + t, b * w + t);
            edges.push(Edge { src: na, dst: nb, kind: EdgeKind::Proximity });
            edges.push(Edge { src: nb, dst: na, kind: EdgeKind::Proximity });
        }
    }
    edges.sort();

    Ok(TemporalGraph {
        graph_id: graph_id(focal.mmsi, start),
        meta: GraphMeta {
            window_start: start,
            dt: focal.dt,
            k_vessels: k,
            w,
            focal_mmsi: focal.mmsi,
            proximity_km,
            members: group
                .members
                .iter()
                .map(|m| MemberMeta {
                    mmsi: m.mmsi,
                    vessel_type: m.vessel_type,
                    provenance: m.provenance.clone(),
                })
                .collect(),
            scenario_id: None,
            clamp_events: 0,
        },
        nodes,
        edges,
        labels: LabelSet::empty(k, w),
    })
}

/// Embed a label set, checking that every label names an existing node or
/// edge and that the set is internally consistent.
pub fn attach_labels(mut graph: TemporalGraph, labels: LabelSet) -> Result<TemporalGraph, GraphError> {
    let n = graph.nodes.len();
    if labels.k != graph.meta.k_vessels || labels.w != graph.meta.w || labels.node.len() != n {
        return Err(GraphError::DanglingLabel(format!(
            "{} node labels ({}x{}) for {n} nodes",
            labels.node.len(),
            labels.k,
            labels.w
        )));
    }
    for e in &labels.edges {
        if e.src >= n || e.dst >= n || !graph.has_edge(e.src, e.dst) {
            return Err(GraphError::DanglingLabel(format!("edge {} -> {}", e.src, e.dst)));
        }
    }
    labels.verify().map_err(GraphError::DanglingLabel)?;
    graph.labels = labels;
    Ok(graph)
}

/// One planned window: focal trajectory index and window start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowSpec {
    pub focal_mmsi: Mmsi,
    pub start: i64,
    pub traj_index: usize,
}

/// Every `(focal, start)` where the focal covers `w` samples from `start`,
/// starting at sample offsets `0, stride, 2 * stride, ...`, ordered by
/// (mmsi, start).
pub fn window_plan(trajs: &[Trajectory], w: usize, stride: usize) -> Vec<WindowSpec> {
    assert!(stride >= 1, "stride must be positive");
    let mut out = Vec::new();
    if w == 0 {
        return out;
    }
    for (traj_index, tr) in trajs.iter().enumerate() {
        let mut i = 0;
        while i + w <= tr.w() {
            out.push(WindowSpec {
                focal_mmsi: tr.mmsi,
                start: tr.states[i].t,
                traj_index,
            });
            i += stride;
        }
    }
    out.sort();
    out
}
