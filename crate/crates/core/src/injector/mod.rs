//! Anomaly injection: block masks, σ-scaled kinematic perturbation,
//! scenario documents and their realization, and label generation.

mod labels;
mod mask;
mod perturb;
mod realize;
mod scenario;

use thiserror::Error;

use crate::kinematics::KinematicsError;

pub use labels::{generate_labels, EdgeLabel, LabelSet, MaskRecord, Rationale};
pub use mask::{
    block_len, label_trajectory, sample_anomaly_block, select_anomalous_trajectories, select_exact, selection_count,
    AnomalyMask, Channel, RatioConfig,
};
pub use perturb::{
    applied_rate, draw_sign, member_distribution, perturb_kinematics, AppliedRate, PerturbConfig, Perturbation,
    RateChannel, DEFAULT_K_SIGMA, DEFAULT_SOG_MAX, MIN_FIT_SAMPLES,
};
pub use realize::{realize_scenario, resolve_targets, select_targets, Edits, InjectionContext};
pub use scenario::{
    interpret_scenario, parse_scenario_file, AnomalyType, DslInterpreter, Level, Scenario, ScenarioError,
    ScenarioInterpreter, TargetSelector, DEFAULT_LOITER_SOG, DEFAULT_RENDEZVOUS_KM, RENDEZVOUS_MAX_KM,
};

#[derive(Debug, Error)]
pub enum InjectError {
    #[error("severity {0} must exceed 3")]
    InvalidSeverity(f64),
    #[error("mask covers {mask} nodes but the trajectory has {traj}")]
    MaskLength { mask: usize, traj: usize },
    #[error("zero {0:?} rate spread and no usable pooled fallback")]
    DegenerateSigma(RateChannel),
    #[error("no rate distribution available")]
    NoDistribution,
    #[error("scenario {id}: {reason}")]
    UnresolvableTarget { id: String, reason: String },
    #[error("{0}")]
    InvalidRatio(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}
