//! Run configuration: a flat TOML file with explicit types, validated
//! field by field. Unknown keys are rejected. Presets for the published
//! datasets ship with the crate.

use serde::{Deserialize, Serialize};

use crate::cells::CellConfig;
use crate::codec::StopRule;
use crate::curriculum::CurriculumState;
use crate::loss::{EmbNormScope, LossWeights};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config field `{field}`: {msg}")]
    Invalid { field: &'static str, msg: String },
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

fn invalid(field: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset name (`grid-medium`, `grid-small`, a TU dataset directory as
    /// `tu:<dir>:<name>`) or a path to edge-list files.
    pub dataset: String,
    /// Embedding size (even).
    pub m: usize,
    /// Patch side.
    pub l: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub lr: f32,
    pub batch: usize,
    pub grad_clip: f32,
    pub rpb: f32,
    #[serde(default = "defaults::mask_weight")]
    pub mask_weight: f32,
    #[serde(default = "defaults::emb_norm_weight")]
    pub emb_norm_weight: f32,
    #[serde(default = "defaults::size_exponent")]
    pub size_exponent: f64,
    #[serde(default)]
    pub vae: bool,
    #[serde(default = "defaults::kl_weight")]
    pub kl_weight: f32,
    #[serde(default = "defaults::patience")]
    pub patience: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::split_ratios")]
    pub split_ratios: [f64; 3],
    /// Permuted copies added per base graph.
    #[serde(default)]
    pub augmentation: usize,
    #[serde(default = "defaults::curriculum_start")]
    pub curriculum_start: f64,
    #[serde(default = "defaults::curriculum_threshold")]
    pub curriculum_threshold: f64,
    #[serde(default = "defaults::curriculum_step")]
    pub curriculum_step: f64,
    #[serde(default = "defaults::curriculum_min_size")]
    pub curriculum_min_size: usize,
    /// Free-decode antidiagonal cap; defaults to twice the largest block
    /// count seen in the training subset.
    #[serde(default)]
    pub max_blocks: Option<usize>,
    #[serde(default)]
    pub stop_rule: StopRule,
    #[serde(default)]
    pub emb_norm_scope: EmbNormScope,
    #[serde(default = "defaults::max_epochs")]
    pub max_epochs: usize,
    /// Optional convergence exit: stop once the epoch train loss drops below
    /// this value.
    #[serde(default)]
    pub stop_train_loss: Option<f64>,
}

mod defaults {
    pub fn mask_weight() -> f32 {
        0.5
    }
    pub fn emb_norm_weight() -> f32 {
        0.2
    }
    pub fn size_exponent() -> f64 {
        1.0
    }
    pub fn kl_weight() -> f32 {
        0.01
    }
    pub fn patience() -> usize {
        20
    }
    pub fn split_ratios() -> [f64; 3] {
        [0.7, 0.15, 0.15]
    }
    pub fn curriculum_start() -> f64 {
        0.25
    }
    pub fn curriculum_threshold() -> f64 {
        0.8
    }
    pub fn curriculum_step() -> f64 {
        0.25
    }
    pub fn curriculum_min_size() -> usize {
        2
    }
    pub fn max_epochs() -> usize {
        1000
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.m == 0 || !self.m.is_multiple_of(2) {
            return Err(invalid(
                "m",
                format!("{} is not a positive even number", self.m),
            ));
        }
        if self.l == 0 {
            return Err(invalid("l", "patch side must be >= 1"));
        }
        if self.encoder_hidden.contains(&0) {
            return Err(invalid("encoder_hidden", "hidden widths must be positive"));
        }
        if self.decoder_hidden.contains(&0) {
            return Err(invalid("decoder_hidden", "hidden widths must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid(
                "lr",
                format!("{} must be a positive finite number", self.lr),
            ));
        }
        if self.batch == 0 {
            return Err(invalid("batch", "batch size must be >= 1"));
        }
        if !(self.grad_clip > 0.0 && self.grad_clip.is_finite()) {
            return Err(invalid("grad_clip", "clipping value must be positive"));
        }
        if !(self.rpb > 0.0 && self.rpb < 1.0) {
            return Err(invalid(
                "rpb",
                format!("{} must lie strictly inside (0, 1)", self.rpb),
            ));
        }
        let weight_fields: [(&'static str, f32); 3] = [
            ("mask_weight", self.mask_weight),
            ("emb_norm_weight", self.emb_norm_weight),
            ("kl_weight", self.kl_weight),
        ];
        for (field, value) in weight_fields {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(invalid(
                    field,
                    format!("{value} must be a non-negative finite number"),
                ));
            }
        }
        if self.size_exponent < 0.0 {
            return Err(invalid("size_exponent", "exponent must be non-negative"));
        }
        if (self.split_ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "split_ratios",
                format!("{:?} do not sum to 1", self.split_ratios),
            ));
        }
        if !(self.curriculum_start > 0.0 && self.curriculum_start <= 1.0) {
            return Err(invalid("curriculum_start", "fraction must be in (0, 1]"));
        }
        if self.curriculum_step <= 0.0 {
            return Err(invalid("curriculum_step", "step must be positive"));
        }
        if self.curriculum_min_size == 0 {
            return Err(invalid(
                "curriculum_min_size",
                "smallest window is one vertex",
            ));
        }
        if self.max_blocks == Some(0) {
            return Err(invalid("max_blocks", "cap must be >= 1 when given"));
        }
        if self.max_epochs == 0 {
            return Err(invalid("max_epochs", "at least one epoch required"));
        }
        Ok(())
    }

    pub fn cell_config(&self) -> CellConfig {
        CellConfig {
            m: self.m,
            l: self.l,
            encoder_hidden: self.encoder_hidden.clone(),
            decoder_hidden: self.decoder_hidden.clone(),
            vae: self.vae,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            rpb: self.rpb,
            mask_weight: self.mask_weight,
            emb_norm_weight: self.emb_norm_weight,
            size_exponent: self.size_exponent,
            kl_weight: self.kl_weight,
        }
    }

    pub fn curriculum(&self) -> CurriculumState {
        CurriculumState::new(
            self.curriculum_start,
            self.curriculum_threshold,
            self.curriculum_step,
            self.curriculum_min_size,
        )
    }
}

pub const PRESET_NAMES: [&str; 9] = [
    "grid-medium",
    "imdb-binary",
    "imdb-multi",
    "collab",
    "reddit-binary",
    "reddit-multi-5k",
    "reddit-multi-12k",
    "desk",
    "desk-grid",
];

/// Returns the raw TOML of a named preset.
pub fn preset_toml(name: &str) -> Result<&'static str, ConfigError> {
    match name {
        "grid-medium" => Ok(include_str!("../presets/grid-medium.toml")),
        "imdb-binary" => Ok(include_str!("../presets/imdb-binary.toml")),
        "imdb-multi" => Ok(include_str!("../presets/imdb-multi.toml")),
        "collab" => Ok(include_str!("../presets/collab.toml")),
        "reddit-binary" => Ok(include_str!("../presets/reddit-binary.toml")),
        "reddit-multi-5k" => Ok(include_str!("../presets/reddit-multi-5k.toml")),
        "reddit-multi-12k" => Ok(include_str!("../presets/reddit-multi-12k.toml")),
        "desk" => Ok(include_str!("../presets/desk.toml")),
        "desk-grid" => Ok(include_str!("../presets/desk-grid.toml")),
        other => Err(ConfigError::UnknownPreset(other.to_string())),
    }
}

pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    RunConfig::from_toml(preset_toml(name)?)
}
