//! Orchestration: configuration, the end-to-end pipeline, dataset files and
//! the run manifest.

mod bundle;
mod config;
mod dataset;
mod pipeline;

use thiserror::Error;

pub use bundle::{
    build_perception_bundle, build_perception_bundle_with, AisSlot, DerivedSlot, EnvSlot, EnvSource, EnvValues,
    NoEnv, PerceptionBundle,
};
pub use config::{
    DatasetParams, RunConfig, DEFAULT_K_VESSELS, DEFAULT_NEIGHBOR_RADIUS_KM, DEFAULT_WINDOW_HOURS,
};
pub use dataset::{
    compute_stats, emit_dataset, read_dataset, read_index, stats_of, BundleRecord, DatasetError, DatasetStats,
    FileDigest, IndexEntry, BUNDLES_FILE, GRAPHS_FILE, INDEX_FILE, MANIFEST_FILE,
};
pub use pipeline::{
    generate, load_scenarios, read_manifest, run_pipeline, Generated, IngestCounts, RunManifest,
    CONSTRUCTION_NOTES, TOOL_NAME,
};

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("output error: {0}")]
    Io(String),
    #[error("internal invariant violation: {0}")]
    Internal(String),
}

impl PipelineError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Input(_) | PipelineError::Io(_) => 3,
            PipelineError::Internal(_) => 4,
        }
    }
}
