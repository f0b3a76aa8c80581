// SPDX-License-Identifier: Apache-2.0

//! TOML experiment configuration.
//!
//! Unknown keys are rejected. Every stochastic stage draws its seed from the
//! master `seed` through a named stream, so changing one stage's name never
//! perturbs another.

use std::path::{Path, PathBuf};

use chartbeam_core::channel::{ArrayConfig, CarrierConfig, Rect, SceneConfig};
use chartbeam_core::chart::ChartParams;
use chartbeam_core::codebook::Codebook;
use chartbeam_core::neural::{InputKind, NetworkDims, TrainConfig};
use chartbeam_core::seed;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

/// The shipped default configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Prefix of every output file name.
    pub dataset_id: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub scene: SceneSection,
    pub array: ArraySection,
    pub uplink: CarrierSection,
    pub downlink: CarrierSection,
    pub codebook: CodebookSection,
    pub chart: ChartSection,
    pub network: NetworkSection,
    pub train: TrainSection,
    pub evaluate: EvaluateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub bs_positions: Vec<[f64; 3]>,
    pub bs_orientations_deg: Vec<f64>,
    pub ue_area: [f64; 4],
    pub ue_height: f64,
    pub n_ue: usize,
    pub n_scatterers: usize,
    pub scatterer_area: [f64; 4],
    pub scatterer_height: f64,
    pub calibration_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub n_v: usize,
    pub n_h: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_spacing: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierSection {
    pub center_frequency: f64,
    pub bandwidth: f64,
    pub n_subcarriers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookSection {
    pub oversampling_v: usize,
    pub oversampling_h: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSection {
    pub n_neighbors: usize,
    pub target_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oos_neighbors: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub rff: RffSection,
    pub mlp: MlpSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RffSection {
    pub n_freq: usize,
    pub hidden: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSection {
    pub n_freq: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub neighborhood_fraction: f64,
    pub timing_repetitions: usize,
}

/// Learned backends; `nn1` needs no training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NetBackend {
    Rff,
    Mlp,
}

impl NetBackend {
    pub const ALL: [NetBackend; 2] = [NetBackend::Rff, NetBackend::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            NetBackend::Rff => "rff",
            NetBackend::Mlp => "mlp",
        }
    }

    pub fn input_kind(self) -> InputKind {
        match self {
            NetBackend::Rff => InputKind::Rff,
            NetBackend::Mlp => InputKind::Dense,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rff" => Ok(NetBackend::Rff),
            "mlp" => Ok(NetBackend::Mlp),
            _ => Err(PipelineError::Validation(format!("unknown backend {s:?}, expected rff or mlp"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    Classification,
    Regression,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Classification, Task::Regression];

    pub fn name(self) -> &'static str {
        match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "classification" => Ok(Task::Classification),
            "regression" => Ok(Task::Regression),
            _ => Err(PipelineError::Validation(format!(
                "unknown task {s:?}, expected classification or regression"
            ))),
        }
    }
}

impl Serialize for NetBackend {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl Serialize for Task {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

fn invalid(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Validation(e.to_string())
}

fn rect(r: [f64; 4]) -> Rect {
    Rect::new(r[0], r[1], r[2], r[3])
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG).expect("shipped default config parses")
    }
}

impl ExperimentConfig {
    /// Parse and validate. Errors carry the line and the offending key.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(invalid)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset_id.is_empty()
            || !self.dataset_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(invalid("dataset_id must be non-empty and use only [A-Za-z0-9_-]"));
        }
        self.scene_config().validate().map_err(invalid)?;
        let f = self.scene.calibration_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(invalid("scene.calibration_fraction must lie in (0, 1)"));
        }
        self.array_config().validate().map_err(invalid)?;
        self.uplink_carrier().validate().map_err(|e| invalid(format!("uplink: {e}")))?;
        self.downlink_carrier().validate().map_err(|e| invalid(format!("downlink: {e}")))?;
        if self.uplink.bandwidth != self.downlink.bandwidth || self.uplink.n_subcarriers != self.downlink.n_subcarriers {
            return Err(invalid("uplink and downlink must share bandwidth and n_subcarriers"));
        }
        self.codebook().map_err(invalid)?;
        self.chart_params().validate().map_err(invalid)?;
        for b in NetBackend::ALL {
            for t in Task::ALL {
                self.network_dims(b, t).validate().map_err(|e| invalid(format!("network.{}: {e}", b.name())))?;
            }
        }
        let s = self.network.rff.sigma;
        if !(s.is_finite() && s > 0.0) {
            return Err(invalid("network.rff.sigma must be positive"));
        }
        self.train_config(0).validate().map_err(|e| invalid(format!("train: {e}")))?;
        let nf = self.evaluate.neighborhood_fraction;
        if !(nf > 0.0 && nf < 0.5) {
            return Err(invalid("evaluate.neighborhood_fraction must lie in (0, 0.5)"));
        }
        let reps = self.evaluate.timing_repetitions;
        if reps != 0 && reps < 10 {
            return Err(invalid("evaluate.timing_repetitions must be 0 (off) or at least 10"));
        }
        Ok(())
    }

    pub fn n_bs(&self) -> usize {
        self.scene.bs_positions.len()
    }

    /// Scene with its RNG seed derived from the master seed.
    pub fn scene_config(&self) -> SceneConfig {
        let s = &self.scene;
        SceneConfig {
            bs_positions: s.bs_positions.clone(),
            bs_orientations: s.bs_orientations_deg.iter().map(|d| d.to_radians()).collect(),
            ue_area: rect(s.ue_area),
            ue_height: s.ue_height,
            n_ue: s.n_ue,
            n_scatterers: s.n_scatterers,
            scatterer_area: rect(s.scatterer_area),
            scatterer_height: s.scatterer_height,
            rng_seed: seed::derive(self.seed, "scene"),
        }
    }

    pub fn array_config(&self) -> ArrayConfig {
        ArrayConfig { n_v: self.array.n_v, n_h: self.array.n_h, element_spacing: self.array.element_spacing }
    }

    pub fn uplink_carrier(&self) -> CarrierConfig {
        CarrierConfig::new(self.uplink.center_frequency, self.uplink.bandwidth, self.uplink.n_subcarriers)
    }

    pub fn downlink_carrier(&self) -> CarrierConfig {
        CarrierConfig::new(self.downlink.center_frequency, self.downlink.bandwidth, self.downlink.n_subcarriers)
    }

    pub fn codebook(&self) -> chartbeam_core::Result<Codebook> {
        Codebook::new(self.array.n_v, self.array.n_h, self.codebook.oversampling_v, self.codebook.oversampling_h)
    }

    pub fn n_beams(&self) -> usize {
        self.codebook.oversampling_v * self.codebook.oversampling_h * self.array.n_v * self.array.n_h
    }

    pub fn chart_params(&self) -> ChartParams {
        let c = &self.chart;
        ChartParams {
            n_neighbors: c.n_neighbors,
            target_dim: c.target_dim,
            oos_neighbors: c.oos_neighbors.unwrap_or(3 * c.target_dim),
        }
    }

    pub fn network_dims(&self, backend: NetBackend, task: Task) -> NetworkDims {
        let (n_freq, hidden) = match backend {
            NetBackend::Rff => (self.network.rff.n_freq, self.network.rff.hidden),
            NetBackend::Mlp => (self.network.mlp.n_freq, self.network.mlp.hidden),
        };
        let n_out = match task {
            Task::Classification => self.n_beams(),
            Task::Regression => self.array.n_v * self.array.n_h,
        };
        NetworkDims { input_dim: self.chart.target_dim, n_freq, hidden, n_out }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let t = &self.train;
        let d = TrainConfig::default();
        TrainConfig {
            batch_size: t.batch_size,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            beta1: t.beta1.unwrap_or(d.beta1),
            beta2: t.beta2.unwrap_or(d.beta2),
            epsilon: t.epsilon.unwrap_or(d.epsilon),
            seed,
        }
    }

    /// Named seed for one stage of the pipeline.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        seed::derive(self.seed, stage)
    }

    /// Valid 1-based BS indices as a message fragment.
    pub fn bs_range(&self) -> String {
        format!("1..={}", self.n_bs())
    }

    pub fn check_bs(&self, bs: usize) -> Result<()> {
        if bs == 0 || bs > self.n_bs() {
            return Err(invalid(format!("bs index {bs} out of range, valid range is {}", self.bs_range())));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parses_and_round_trips() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.array_config().n_antennas(), 64);
        assert_eq!(cfg.n_beams(), 256);
        assert_eq!(cfg.network.rff.sigma, 1.0);
        assert_eq!(ExperimentConfig::from_toml_str(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn missing_field_is_named() {
        let text = DEFAULT_CONFIG.replace("n_ue = 2000\n", "");
        let msg = ExperimentConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(msg.contains("n_ue"), "{msg}");
    }

    #[test]
    fn unknown_field_and_bad_values_rejected() {
        let text = DEFAULT_CONFIG.replace("n_ue = 2000", "n_ue = 2000\nn_eu = 3");
        assert!(ExperimentConfig::from_toml_str(&text).unwrap_err().to_string().contains("n_eu"));
        let text = DEFAULT_CONFIG.replace("timing_repetitions = 0", "timing_repetitions = 3");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = DEFAULT_CONFIG.replace("oversampling_v = 2", "oversampling_v = 0");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = DEFAULT_CONFIG.replace("dataset_id = \"street\"", "dataset_id = \"a/b\"");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn bs_range_message() {
        let cfg = ExperimentConfig::default();
        assert!(cfg.check_bs(2).is_ok());
        let msg = cfg.check_bs(3).unwrap_err().to_string();
        assert!(msg.contains("1..=2"), "{msg}");
        assert!(cfg.check_bs(0).is_err());
    }

    #[test]
    fn stage_seeds_differ() {
        let cfg = ExperimentConfig::default();
        assert_ne!(cfg.stage_seed("scene"), cfg.stage_seed("train"));
        assert_eq!(cfg.scene_config().rng_seed, cfg.stage_seed("scene"));
    }
}
