//! On-disk layout of a run:
//!
//! * `graphs.jsonl`: one graph per line in canonical (focal MMSI, window
//!   start) order
//! * `index.jsonl`: one summary line per graph, same order
//! * `bundles.jsonl`: optional, one perception bundle per graph
//! * `manifest.json`: written last; its presence marks a complete run

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::bundle::PerceptionBundle;
use crate::graph::TemporalGraph;
use crate::ingest::Mmsi;

pub const GRAPHS_FILE: &str = "graphs.jsonl";
pub const INDEX_FILE: &str = "index.jsonl";
pub const BUNDLES_FILE: &str = "bundles.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("corrupt dataset {path}: line {line}: {msg}")]
    Corrupt { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileDigest {
    pub fn of_bytes(path: impl Into<String>, data: &[u8]) -> Self {
        FileDigest {
            path: path.into(),
            bytes: data.len() as u64,
            sha256: hex::encode(Sha256::digest(data)),
        }
    }

    pub fn of_file(path: &Path) -> io::Result<Self> {
        Ok(Self::of_bytes(path.display().to_string(), &fs::read(path)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub line: usize,
    pub graph_id: String,
    pub focal_mmsi: Mmsi,
    pub window_start: i64,
    pub k_vessels: usize,
    pub w: usize,
    pub graph_label: u8,
    pub scenario_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleRecord {
    pub graph_id: String,
    pub bundle: PerceptionBundle,
}

/// Label and membership counts of a dataset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub graphs: usize,
    pub positive_graphs: usize,
    /// Fraction of graphs labeled anomalous (0 for an empty dataset).
    pub r_traj: f64,
    pub positive_node_labels: usize,
    pub positive_edge_labels: usize,
    pub anomalous_trajectories: usize,
    pub members: usize,
    pub synthetic_members: usize,
    pub synthetic_fraction: f64,
    pub members_by_vessel_type: BTreeMap<String, usize>,
    pub positive_graphs_by_scenario: BTreeMap<String, usize>,
    pub clamp_events: usize,
}

impl DatasetStats {
    /// Fill the two ratios from the counts.
    pub fn finish(mut self) -> Self {
        self.r_traj = ratio(self.positive_graphs, self.graphs);
        self.synthetic_fraction = ratio(self.synthetic_members, self.members);
        self
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Counts recomputed from graph records alone.
pub fn stats_of(graphs: &[TemporalGraph]) -> DatasetStats {
    let mut s = DatasetStats::default();
    for g in graphs {
        s.graphs += 1;
        s.positive_graphs += usize::from(g.labels.graph);
        s.positive_node_labels += g.labels.node.iter().map(|&z| usize::from(z)).sum::<usize>();
        s.positive_edge_labels += g.labels.edges.len();
        s.anomalous_trajectories += g.labels.masks.iter().filter(|m| m.mask.y_traj == 1).count();
        for m in &g.meta.members {
            s.members += 1;
            s.synthetic_members += usize::from(m.provenance.is_synthetic());
            *s.members_by_vessel_type.entry(m.vessel_type.to_string()).or_default() += 1;
        }
        if g.labels.graph == 1 {
            let id = g.meta.scenario_id.clone().unwrap_or_default();
            *s.positive_graphs_by_scenario.entry(id).or_default() += 1;
        }
        s.clamp_events += g.meta.clamp_events;
    }
    s.finish()
}

struct HashingWriter {
    name: String,
    out: BufWriter<fs::File>,
    hash: Sha256,
    bytes: u64,
}

impl HashingWriter {
    fn create(dir: &Path, name: &str) -> io::Result<Self> {
        Ok(HashingWriter {
            name: name.to_string(),
            out: BufWriter::new(fs::File::create(dir.join(name))?),
            hash: Sha256::new(),
            bytes: 0,
        })
    }

    fn line<T: Serialize>(&mut self, value: &T) -> io::Result<()> {
        let mut buf = serde_json::to_vec(value).map_err(io::Error::other)?;
        buf.push(b'\n');
        self.hash.update(&buf);
        self.bytes += buf.len() as u64;
        self.out.write_all(&buf)
    }

    fn finish(mut self) -> io::Result<FileDigest> {
        self.out.flush()?;
        self.out.get_ref().sync_all()?;
        Ok(FileDigest {
            path: self.name,
            bytes: self.bytes,
            sha256: hex::encode(self.hash.finalize()),
        })
    }
}

/// Write graph records, the index and (when given) bundles into `dir`.
pub fn emit_dataset(
    graphs: &[TemporalGraph],
    bundles: Option<&[PerceptionBundle]>,
    dir: &Path,
) -> io::Result<Vec<FileDigest>> {
    let mut gw = HashingWriter::create(dir, GRAPHS_FILE)?;
    let mut iw = HashingWriter::create(dir, INDEX_FILE)?;
    for (line, g) in graphs.iter().enumerate() {
        gw.line(g)?;
        iw.line(&IndexEntry {
            line,
            graph_id: g.graph_id.clone(),
            focal_mmsi: g.meta.focal_mmsi,
            window_start: g.meta.window_start,
            k_vessels: g.meta.k_vessels,
            w: g.meta.w,
            graph_label: g.labels.graph,
            scenario_id: g.meta.scenario_id.clone(),
        })?;
    }
    let mut out = vec![gw.finish()?, iw.finish()?];
    if let Some(bundles) = bundles {
        let mut bw = HashingWriter::create(dir, BUNDLES_FILE)?;
        for (g, b) in graphs.iter().zip(bundles) {
            bw.line(&BundleRecord {
                graph_id: g.graph_id.clone(),
                bundle: b.clone(),
            })?;
        }
        out.push(bw.finish()?);
    }
    Ok(out)
}

/// Parse and structurally validate every graph record in `dir`.
pub fn read_dataset(dir: &Path) -> Result<Vec<TemporalGraph>, DatasetError> {
    let path = dir.join(GRAPHS_FILE);
    let file = fs::File::open(&path).map_err(io_err(&path))?;
    let corrupt = |line: usize, msg: String| DatasetError::Corrupt {
        path: path.clone(),
        line,
        msg,
    };
    let mut graphs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        let g: TemporalGraph = serde_json::from_str(&line).map_err(|e| corrupt(i + 1, e.to_string()))?;
        g.check_structure().map_err(|e| corrupt(i + 1, e.to_string()))?;
        graphs.push(g);
    }
    Ok(graphs)
}

pub fn read_index(dir: &Path) -> Result<Vec<IndexEntry>, DatasetError> {
    let path = dir.join(INDEX_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Corrupt {
                path: path.clone(),
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Counts of an emitted dataset, recomputed from its graph records.
pub fn compute_stats(dir: &Path) -> Result<DatasetStats, DatasetError> {
    let graphs = read_dataset(dir)?;
    let index = read_index(dir)?;
    let path = dir.join(INDEX_FILE);
    if index.len() != graphs.len() {
        return Err(DatasetError::Corrupt {
            path,
            line: index.len().min(graphs.len()) + 1,
            msg: format!("{} index entries for {} graphs", index.len(), graphs.len()),
        });
    }
    for (i, (e, g)) in index.iter().zip(&graphs).enumerate() {
        if e.graph_id != g.graph_id || e.graph_label != g.labels.graph || e.line != i {
            return Err(DatasetError::Corrupt {
                path,
                line: i + 1,
                msg: format!("index entry disagrees with graph {}", g.graph_id),
            });
        }
    }
    Ok(stats_of(&graphs))
}
