//! Experiment configuration, read from JSON.
//!
//! Every section is optional and falls back to its defaults; unknown keys
//! anywhere are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anchors::AnchorConfig;
use crate::assignment::AssignerConfig;
use crate::error::{Error, Result};
use crate::losses::{ClsLoss, LossParams, QualityBranch};
use crate::simulator::SceneSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub cls_loss: ClsLoss,
    pub quality_branch: QualityBranch,
    /// Falls back to the loss-specific default (0.25 focal, 0.75 VFL).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub gamma: f64,
    pub beta: f64,
    pub smooth_l1_beta: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        let p = LossParams::default();
        Self {
            cls_loss: ClsLoss::Focal,
            quality_branch: QualityBranch::Centerness,
            alpha: None,
            gamma: p.gamma,
            beta: p.beta,
            smooth_l1_beta: p.smooth_l1_beta,
        }
    }
}

impl LossConfig {
    pub fn params(&self) -> LossParams {
        LossParams {
            alpha: self.alpha.unwrap_or(self.cls_loss.default_alpha()),
            gamma: self.gamma,
            beta: self.beta,
            smooth_l1_beta: self.smooth_l1_beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: u64,
    pub learning_rate: f64,
    /// Master seed; also seeds scene generation.
    pub seed: u64,
    pub num_scenes: usize,
    /// Trailing iterations averaged in summaries and comparisons.
    pub summary_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            learning_rate: 0.05,
            seed: 0,
            num_scenes: 20,
            summary_window: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Any of `csv`, `json`.
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub anchors: AnchorConfig,
    pub assigner: AssignerConfig,
    pub losses: LossConfig,
    pub scene: SceneSpec,
    pub train: TrainConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.anchors.validate()?;
        self.assigner.validate()?;
        self.losses.params().validate()?;
        self.scene.validate()?;
        let t = &self.train;
        if !(t.learning_rate >= 0.0 && t.learning_rate.is_finite()) {
            return Err(Error::config("train.learning_rate", "must be finite and non-negative"));
        }
        if t.num_scenes == 0 {
            return Err(Error::config("train.num_scenes", "must be at least 1"));
        }
        if t.summary_window == 0 {
            return Err(Error::config("train.summary_window", "must be at least 1"));
        }
        if let Some(f) = self
            .output
            .formats
            .iter()
            .find(|f| !matches!(f.as_str(), "csv" | "json"))
        {
            return Err(Error::config("output.formats", format!("unknown format `{f}`")));
        }
        Ok(())
    }

    /// Scene spec with the experiment seed applied.
    pub fn scene_spec(&self) -> SceneSpec {
        SceneSpec {
            seed: self.train.seed,
            ..self.scene.clone()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train.seed = seed;
        self
    }
}
