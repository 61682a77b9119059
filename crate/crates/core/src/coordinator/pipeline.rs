use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, info};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::bundle::{build_perception_bundle, PerceptionBundle};
use super::config::{DatasetParams, RunConfig};
use super::dataset::{
    emit_dataset, DatasetStats, FileDigest, BUNDLES_FILE, GRAPHS_FILE, INDEX_FILE, MANIFEST_FILE,
};
use super::PipelineError;
use crate::exec::Execution;
use crate::graph::{attach_labels, build_temporal_graph, window_plan, TemporalGraph};
use crate::ingest::{
    assemble_trajectories, read_ais, resample_trajectory, validate_region, AisRecord, IngestError, Trajectory,
};
use crate::injector::{
    generate_labels, parse_scenario_file, realize_scenario, select_exact, select_targets, selection_count,
    DslInterpreter, Edits, InjectError, InjectionContext, Scenario,
};
use crate::kinematics::{rate_of_change, RateDistribution};
use crate::neighborhood::{cluster_snapshot, snapshot_at, ClusterAssignment};
use crate::rng::{domain, stream};
use crate::synthesizer::{ensure_density, AugmentedGroup, SynthesisError};

pub const TOOL_NAME: &str = "aisgraph";

/// How the dataset was put together, recorded with every run.
pub const CONSTRUCTION_NOTES: [&str; 7] = [
    "window w = window_hours * 3600 / dt samples on the epoch-aligned grid {k * dt}",
    "grouping: focal plus its OPTICS cluster mates at the window start (all co-temporal vessels when the focal is noise), nearest by mean distance, then bounded virtual neighbors",
    "edges: TEMPORAL (v, t) -> (v, t + 1); PROXIMITY in both directions between co-temporal states within proximity_km",
    "edge labels: an edge joining two node-anomalous co-temporal states is anomalous",
    "RENDEZVOUS: the pair is steered to meeting points `severity` km apart over the first half of the block, then held at zero SOG",
    "after an injected block positions are re-integrated from the displaced state with clean SOG/COG; those nodes stay labeled normal",
    "rate fits (per trajectory, pooled when fewer than 8 rates or zero spread) always come from clean data",
];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IngestCounts {
    pub rows: usize,
    pub records: usize,
    pub rejected: BTreeMap<String, usize>,
    pub out_of_region: usize,
    pub tracks: usize,
    pub trajectories: usize,
    pub dropped_short: usize,
    pub snapshots: usize,
    pub windows: usize,
}

/// Everything produced in memory by one run.
#[derive(Debug, Clone)]
pub struct Generated {
    pub graphs: Vec<TemporalGraph>,
    /// The groups before injection, in graph order.
    pub clean_groups: Vec<AugmentedGroup>,
    pub edits: Vec<Edits>,
    pub bundles: Vec<PerceptionBundle>,
    pub pooled: Option<RateDistribution>,
    pub ingest: IngestCounts,
    pub counts: DatasetStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub w: usize,
    pub params: DatasetParams,
    pub inputs: Vec<FileDigest>,
    pub scenarios: Vec<Scenario>,
    pub construction: Vec<String>,
    pub pooled_distribution: Option<RateDistribution>,
    pub ingest: IngestCounts,
    pub counts: DatasetStats,
    pub outputs: Vec<FileDigest>,
}

fn config_hash(params: &DatasetParams, scenarios: &[Scenario]) -> String {
    #[derive(Serialize)]
    struct Hashed<'a> {
        params: &'a DatasetParams,
        scenarios: &'a [Scenario],
    }
    let bytes = serde_json::to_vec(&Hashed { params, scenarios }).expect("config serializes");
    hex::encode(Sha256::digest(bytes))
}

fn synthesis_error(e: SynthesisError) -> PipelineError {
    match e {
        SynthesisError::Kinematics(k) => PipelineError::Input(k.to_string()),
        other => PipelineError::Config(other.to_string()),
    }
}

fn inject_error(e: InjectError) -> PipelineError {
    match e {
        InjectError::UnresolvableTarget { .. } | InjectError::InvalidRatio(_) | InjectError::InvalidSeverity(_) => {
            PipelineError::Config(e.to_string())
        }
        InjectError::Kinematics(_) | InjectError::DegenerateSigma(_) | InjectError::NoDistribution => {
            PipelineError::Input(e.to_string())
        }
        InjectError::MaskLength { .. } => PipelineError::Internal(e.to_string()),
    }
}

/// Resampled trajectories, ordered by (mmsi, start).
fn prepare(params: &DatasetParams, records: &[AisRecord], exec: Execution, counts: &mut IngestCounts) -> Result<Vec<Trajectory>, PipelineError> {
    let in_region: Vec<AisRecord> = records
        .iter()
        .filter(|r| validate_region(r, &params.region))
        .copied()
        .collect();
    counts.records = records.len();
    counts.out_of_region = records.len() - in_region.len();
    let tracks = assemble_trajectories(&in_region, params.gap_threshold);
    counts.tracks = tracks.len();
    let mut trajs = Vec::with_capacity(tracks.len());
    for r in exec.map(&tracks, |t| resample_trajectory(t, params.dt)) {
        match r {
            Ok(t) => trajs.push(t),
            Err(IngestError::TooShort { .. }) => counts.dropped_short += 1,
            Err(e) => return Err(PipelineError::Input(e.to_string())),
        }
    }
    counts.trajectories = trajs.len();
    Ok(trajs)
}

/// Run every stage after ingest in memory.
pub fn generate(
    params: &DatasetParams,
    records: &[AisRecord],
    scenarios: &[Scenario],
    exec: Execution,
) -> Result<Generated, PipelineError> {
    params.validate()?;
    let w = params.w()?;
    let mut ingest = IngestCounts::default();
    let trajs = prepare(params, records, exec, &mut ingest)?;

    let rates: Vec<_> = trajs.iter().map(rate_of_change).collect();
    let pooled = RateDistribution::pooled(&rates).ok();
    info!("{} trajectories, pooled fit {pooled:?}", trajs.len());

    let mut windows = window_plan(&trajs, w, params.stride()?);
    if let Some(cap) = params.max_graphs {
        windows.truncate(cap);
    }
    ingest.windows = windows.len();

    let mut starts: Vec<i64> = windows.iter().map(|s| s.start).collect();
    starts.sort_unstable();
    starts.dedup();
    ingest.snapshots = starts.len();
    let clusters: Vec<ClusterAssignment> =
        exec.map(&starts, |&t| cluster_snapshot(&snapshot_at(&trajs, t), &params.optics));
    debug!("clustered {} snapshots", clusters.len());

    let mut bounds = params.bounds;
    bounds.seed = params.seed;
    let groups: Vec<AugmentedGroup> = exec.try_map(&windows, |ws| {
        let focal = trajs[ws.traj_index]
            .window(ws.start, w)
            .ok_or_else(|| PipelineError::Internal(format!("planned window {ws:?} is not covered")))?;
        let end = focal.end();
        let a = &clusters[starts.binary_search(&ws.start).expect("start was planned")];
        let mates = a.cluster_mates(focal.mmsi);
        let covers = |t: &&Trajectory| t.mmsi != focal.mmsi && t.start() <= ws.start && t.end() >= end;
        let pool: Vec<&Trajectory> = if mates.is_empty() {
            trajs.iter().filter(covers).collect()
        } else {
            trajs
                .iter()
                .filter(covers)
                .filter(|t| mates.binary_search(&t.mmsi).is_ok())
                .collect()
        };
        let mut rng = stream(params.seed, &[domain::SYNTHESIS, u64::from(focal.mmsi), ws.start as u64]);
        ensure_density(&focal, &pool, params.k_vessels, params.neighbor_radius_km, &bounds, &mut rng)
            .map_err(synthesis_error)
    })?;

    let plan: Vec<Scenario> = if scenarios.is_empty() {
        vec![Scenario::default_kinematic(params.k_sigma).map_err(|e| PipelineError::Config(e.to_string()))?]
    } else {
        scenarios.to_vec()
    };
    let exclude = params.exclude_synthetic_from_injection;
    let eligible: Vec<usize> = (0..groups.len())
        .filter(|&i| plan.iter().any(|sc| select_targets(sc, &groups[i], exclude).is_ok()))
        .collect();
    let need = selection_count(groups.len(), params.ratios.r_traj);
    if eligible.len() < need {
        return Err(PipelineError::Config(format!(
            "{need} anomalous graphs required but only {} of {} groups contain a target for the configured scenarios",
            eligible.len(),
            groups.len()
        )));
    }
    let selected = select_exact(&eligible, need, &mut stream(params.seed, &[domain::SELECTION]));
    let mut rank: Vec<Option<usize>> = vec![None; groups.len()];
    for (r, &i) in selected.iter().enumerate() {
        rank[i] = Some(r);
    }

    let ctx = InjectionContext {
        ratios: params.ratios,
        pooled: pooled.as_ref(),
        perturb: params.perturb,
        exclude_synthetic: exclude,
    };
    let proximity = params.proximity();
    let items: Vec<usize> = (0..groups.len()).collect();
    let built: Vec<(TemporalGraph, Edits)> = exec.try_map(&items, |&i| {
        let group = &groups[i];
        let ws = &windows[i];
        let (edited, edits) = match rank[i] {
            None => (group.clone(), Edits::none(group)),
            Some(r) => {
                let mut done = None;
                for o in 0..plan.len() {
                    let sc = &plan[(r + o) % plan.len()];
                    let mut rng = stream(params.seed, &[domain::INJECTION, i as u64, o as u64]);
                    match realize_scenario(sc, group, &ctx, &mut rng) {
                        Ok(x) => {
                            done = Some(x);
                            break;
                        }
                        Err(InjectError::UnresolvableTarget { .. }) => continue,
                        Err(e) => return Err(inject_error(e)),
                    }
                }
                done.ok_or_else(|| {
                    PipelineError::Config(format!(
                        "no configured scenario can be realized on group {}-{}",
                        ws.focal_mmsi, ws.start
                    ))
                })?
            }
        };
        let labels = generate_labels(&edited, &edits, proximity);
        let mut graph = build_temporal_graph(&edited, (ws.start, w), proximity)
            .map_err(|e| PipelineError::Internal(e.to_string()))?;
        if !edits.is_empty() {
            graph.meta.scenario_id = edits.scenario.as_ref().map(|s| s.id.clone());
        }
        graph.meta.clamp_events = edits.clamp_events;
        let graph = attach_labels(graph, labels).map_err(|e| PipelineError::Internal(e.to_string()))?;
        graph
            .check_structure()
            .map_err(|e| PipelineError::Internal(format!("{}: {e}", graph.graph_id)))?;
        if (rank[i].is_some()) != (graph.labels.graph == 1) {
            return Err(PipelineError::Internal(format!("{}: graph label disagrees with selection", graph.graph_id)));
        }
        Ok((graph, edits))
    })?;

    let bundles = if params.emit_bundles {
        exec.map(&groups, |g| build_perception_bundle(g.focal(), g))
    } else {
        Vec::new()
    };

    // tallied from the injection side, independently of the graph records
    let mut counts = DatasetStats {
        graphs: groups.len(),
        positive_graphs: need,
        ..Default::default()
    };
    for (group, (graph, edits)) in groups.iter().zip(&built) {
        counts.positive_node_labels += edits.masks.iter().map(|m| m.m).sum::<usize>();
        counts.anomalous_trajectories += edits.masks.iter().filter(|m| m.m > 0).count();
        counts.positive_edge_labels += graph.labels.edges.len();
        counts.members += group.k();
        counts.synthetic_members += group.n_synthetic();
        for m in &group.members {
            *counts.members_by_vessel_type.entry(m.vessel_type.to_string()).or_default() += 1;
        }
        if let Some(sc) = edits.scenario.as_ref().filter(|_| !edits.is_empty()) {
            *counts.positive_graphs_by_scenario.entry(sc.id.clone()).or_default() += 1;
        }
        counts.clamp_events += edits.clamp_events;
    }
    let counts = counts.finish();

    let (graphs, edits) = built.into_iter().unzip();
    Ok(Generated {
        graphs,
        clean_groups: groups,
        edits,
        bundles,
        pooled,
        ingest,
        counts,
    })
}

/// Scenarios from every file, in order. Ids must be unique across files.
pub fn load_scenarios(paths: &[PathBuf]) -> Result<(Vec<Scenario>, Vec<FileDigest>), PipelineError> {
    let mut all: Vec<Scenario> = Vec::new();
    let mut digests = Vec::new();
    for p in paths {
        let bytes = fs::read(p).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| PipelineError::Config(format!("{}: not UTF-8", p.display())))?;
        let list = parse_scenario_file(&text, &DslInterpreter)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?;
        for sc in list {
            if all.iter().any(|o| o.id == sc.id) {
                return Err(PipelineError::Config(format!("duplicate scenario id {:?}", sc.id)));
            }
            all.push(sc);
        }
        digests.push(FileDigest::of_bytes(p.display().to_string(), &bytes));
    }
    Ok((all, digests))
}

/// Removes what a failed run wrote.
struct Cleanup<'a> {
    dir: &'a Path,
    created_dir: bool,
    armed: bool,
}

impl Drop for Cleanup<'_> {
    fn drop(&mut self) {
        if !self.armed {
            return;
        }
        for f in [MANIFEST_FILE, GRAPHS_FILE, INDEX_FILE, BUNDLES_FILE] {
            let _ = fs::remove_file(self.dir.join(f));
        }
        if self.created_dir {
            let _ = fs::remove_dir(self.dir);
        }
    }
}

/// Validate, ingest, generate and emit. The manifest is written last.
pub fn run_pipeline(config: &RunConfig) -> Result<RunManifest, PipelineError> {
    let params = &config.params;
    params.validate()?;
    let w = params.w()?;
    let (scenarios, scenario_digests) = load_scenarios(&config.scenarios)?;

    let input = fs::read(&config.input)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", config.input.display())))?;
    let report = read_ais(input.as_slice(), params.delimiter as u8)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", config.input.display())))?;
    info!(
        "read {} rows, {} records, rejected {:?}",
        report.rows,
        report.records.len(),
        report.rejected
    );

    let mut generated = generate(params, &report.records, &scenarios, config.execution)?;
    generated.ingest.rows = report.rows;
    generated.ingest.rejected = report.rejected;

    let out = &config.output;
    let created_dir = !out.exists();
    fs::create_dir_all(out).map_err(|e| PipelineError::Io(format!("{}: {e}", out.display())))?;
    let mut guard = Cleanup {
        dir: out,
        created_dir,
        armed: true,
    };
    // a stale manifest must not vouch for a new, partial tree
    match fs::remove_file(out.join(MANIFEST_FILE)) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(PipelineError::Io(e.to_string())),
    }
    let _ = fs::remove_file(out.join(BUNDLES_FILE));

    let bundles = params.emit_bundles.then_some(generated.bundles.as_slice());
    let outputs = emit_dataset(&generated.graphs, bundles, out)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", out.display())))?;

    let mut inputs = vec![FileDigest::of_bytes(config.input.display().to_string(), &input)];
    inputs.extend(scenario_digests);
    let manifest = RunManifest {
        tool: TOOL_NAME.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(params, &scenarios),
        seed: params.seed,
        w,
        params: params.clone(),
        inputs,
        scenarios,
        construction: CONSTRUCTION_NOTES.iter().map(|s| s.to_string()).collect(),
        pooled_distribution: generated.pooled,
        ingest: generated.ingest.clone(),
        counts: generated.counts.clone(),
        outputs,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| PipelineError::Internal(e.to_string()))?;
    text.push('\n');
    fs::write(out.join(MANIFEST_FILE), text).map_err(|e| PipelineError::Io(e.to_string()))?;
    guard.armed = false;

    if let Some(path) = &config.stats {
        let mut s = serde_json::to_string_pretty(&manifest.counts).map_err(|e| PipelineError::Internal(e.to_string()))?;
        s.push('\n');
        fs::write(path, s).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    }
    info!(
        "wrote {} graphs ({} anomalous) to {}",
        manifest.counts.graphs,
        manifest.counts.positive_graphs,
        out.display()
    );
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, PipelineError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))
}
