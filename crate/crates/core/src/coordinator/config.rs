use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::exec::Execution;
use crate::graph::DEFAULT_PROXIMITY_KM;
use crate::ingest::{RegionBounds, DEFAULT_DT, DEFAULT_GAP_THRESHOLD};
use crate::injector::{PerturbConfig, RatioConfig, DEFAULT_K_SIGMA};
use crate::neighborhood::OpticsParams;
use crate::synthesizer::SynthesisBounds;

pub const DEFAULT_WINDOW_HOURS: f64 = 4.0;
pub const DEFAULT_K_VESSELS: usize = 4;
pub const DEFAULT_NEIGHBOR_RADIUS_KM: f64 = 10.0;

/// Everything that shapes the emitted bytes. Recorded verbatim in the
/// manifest and hashed into its config hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub seed: u64,
    pub dt: i64,
    pub gap_threshold: i64,
    pub window_hours: f64,
    /// Window advance in samples; `None` means non-overlapping windows.
    pub stride: Option<usize>,
    /// Keep only the first windows in canonical order.
    pub max_graphs: Option<usize>,
    pub k_vessels: usize,
    pub ratios: RatioConfig,
    pub k_sigma: f64,
    pub perturb: PerturbConfig,
    pub proximity_km: f64,
    pub temporal_edges_only: bool,
    pub neighbor_radius_km: f64,
    pub optics: OpticsParams,
    pub bounds: SynthesisBounds,
    pub exclude_synthetic_from_injection: bool,
    pub region: RegionBounds,
    pub delimiter: char,
    pub emit_bundles: bool,
}

impl Default for DatasetParams {
    fn default() -> Self {
        DatasetParams {
            seed: 0,
            dt: DEFAULT_DT,
            gap_threshold: DEFAULT_GAP_THRESHOLD,
            window_hours: DEFAULT_WINDOW_HOURS,
            stride: None,
            max_graphs: None,
            k_vessels: DEFAULT_K_VESSELS,
            ratios: RatioConfig::default(),
            k_sigma: DEFAULT_K_SIGMA,
            perturb: PerturbConfig::default(),
            proximity_km: DEFAULT_PROXIMITY_KM,
            temporal_edges_only: false,
            neighbor_radius_km: DEFAULT_NEIGHBOR_RADIUS_KM,
            optics: OpticsParams::default(),
            bounds: SynthesisBounds::default(),
            exclude_synthetic_from_injection: false,
            region: RegionBounds::omtad(),
            delimiter: ',',
            emit_bundles: false,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), PipelineError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(PipelineError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl DatasetParams {
    /// Window length in samples, `window_hours * 3600 / dt`, which must be a
    /// whole number of at least 2.
    pub fn w(&self) -> Result<usize, PipelineError> {
        if self.dt <= 0 {
            return Err(PipelineError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        positive("window hours", self.window_hours)?;
        let exact = self.window_hours * 3600.0 / self.dt as f64;
        let w = exact.round();
        if (exact - w).abs() > 1e-9 * exact.max(1.0) || w < 2.0 {
            return Err(PipelineError::Config(format!(
                "a {}-hour window is {exact} samples at dt = {}; need a whole number of at least 2",
                self.window_hours, self.dt
            )));
        }
        Ok(w as usize)
    }

    pub fn stride(&self) -> Result<usize, PipelineError> {
        match self.stride {
            Some(0) => Err(PipelineError::Config("stride must be at least 1".into())),
            Some(s) => Ok(s),
            None => self.w(),
        }
    }

    pub fn proximity(&self) -> Option<f64> {
        (!self.temporal_edges_only).then_some(self.proximity_km)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let cfg = |m: String| Err(PipelineError::Config(m));
        self.w()?;
        self.stride()?;
        if self.gap_threshold <= 0 {
            return cfg(format!("gap threshold must be positive, got {}", self.gap_threshold));
        }
        if self.k_vessels == 0 {
            return cfg("k_vessels must be at least 1".into());
        }
        self.ratios.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if !(self.k_sigma > 3.0 && self.k_sigma.is_finite()) {
            return cfg(format!("k_sigma must exceed 3, got {}", self.k_sigma));
        }
        positive("sog_max", self.perturb.sog_max)?;
        positive("proximity radius", self.proximity_km)?;
        positive("neighbor radius", self.neighbor_radius_km)?;
        if self.optics.min_samples < 2 {
            return cfg(format!("OPTICS min_samples must be at least 2, got {}", self.optics.min_samples));
        }
        if !(self.optics.max_eps_km > 0.0) {
            return cfg(format!("OPTICS max_eps must be positive, got {}", self.optics.max_eps_km));
        }
        if !(self.optics.xi > 0.0 && self.optics.xi < 1.0) {
            return cfg(format!("OPTICS xi must lie in (0, 1), got {}", self.optics.xi));
        }
        self.bounds.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        RegionBounds::new(self.region.lon_min, self.region.lon_max, self.region.lat_min, self.region.lat_max)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if !self.delimiter.is_ascii() {
            return cfg(format!("delimiter {:?} is not a single byte", self.delimiter));
        }
        Ok(())
    }
}

/// A full invocation: dataset parameters plus where to read and write.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub scenarios: Vec<PathBuf>,
    pub stats: Option<PathBuf>,
    pub execution: Execution,
    pub params: DatasetParams,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, output: impl Into<PathBuf>, params: DatasetParams) -> Self {
        RunConfig {
            input: input.into(),
            output: output.into(),
            scenarios: Vec::new(),
            stats: None,
            execution: Execution::default(),
            params,
        }
    }
}
