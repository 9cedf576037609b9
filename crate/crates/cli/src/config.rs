//! Run configuration: defaults, then the TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use causal_core::eval::EvalSettings;
use causal_core::rationale::{QuestionOptions, RationaleOptions};
use causal_core::{AblationMode, ClassifierInput, HashEncoder, PoolPolicy, TrainingConfig};
use serde::{Deserialize, Serialize};

/// Every key accepted in a config file, shown by `--help`.
pub const CONFIG_KEYS: &str = "\
Config file keys (TOML; unknown keys are rejected):
  seed = 0                     global seed; every stochastic stage derives its own stream
  dataset = \"PATH\"             dataset JSONL
  checkpoint = \"PATH\"          model checkpoint JSON
  out = \"PATH\"                 output directory (report, history, predictions)
  split = [0.8, 0.1, 0.1]      train/validation/test fractions
  eval_split = \"test\"          split scored by eval: train|validation|test|all
  encoder = \"hash\"             text encoder: hash|external (external is not bundled)
  encoder_dim = 64             hash encoder dimension
  encoder_seed = 0             hash encoder seed (defaults to seed)
  pool_policy = \"category\"     candidate pool: video|category|global
  temporal_filter = false      drop same-video candidates that start before the cause
  include_activities = false   add activity words to frame-matching candidates
  threshold = 0.5              causal decision threshold on the score
  deconjugate = false          strip the verb's trailing s in rationale questions
  [training]
  learning_rate = 1e-4
  epochs = 10
  early_stopping = true
  patience = 2
  top_m_objects = 10
  hidden_dim = 200
  classifier_input = \"averaged\"  averaged|event_repr
  ablation_mode = \"full\"         full|no_visual|no_lingual";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Hash,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSplit {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub early_stopping: bool,
    pub patience: usize,
    pub top_m_objects: usize,
    pub hidden_dim: usize,
    pub classifier_input: ClassifierInput,
    pub ablation_mode: AblationMode,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            early_stopping: t.early_stopping,
            patience: t.patience,
            top_m_objects: t.top_m_objects,
            hidden_dim: t.hidden_dim,
            classifier_input: t.classifier_input,
            ablation_mode: t.ablation_mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub split: [f64; 3],
    pub eval_split: EvalSplit,
    pub encoder: EncoderKind,
    pub encoder_dim: usize,
    pub encoder_seed: Option<u64>,
    pub pool_policy: PoolPolicy,
    pub temporal_filter: bool,
    pub include_activities: bool,
    pub threshold: f64,
    pub deconjugate: bool,
    pub training: TrainingSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: None,
            checkpoint: None,
            out: None,
            split: [0.8, 0.1, 0.1],
            eval_split: EvalSplit::Test,
            encoder: EncoderKind::Hash,
            encoder_dim: 64,
            encoder_seed: None,
            pool_policy: PoolPolicy::Category,
            temporal_filter: false,
            include_activities: false,
            threshold: 0.5,
            deconjugate: false,
            training: TrainingSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn training_config(&self) -> TrainingConfig {
        let t = &self.training;
        TrainingConfig {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            early_stopping: t.early_stopping,
            patience: t.patience,
            top_m_objects: t.top_m_objects,
            hidden_dim: t.hidden_dim,
            rng_seed: self.seed,
            classifier_input: t.classifier_input,
            ablation_mode: t.ablation_mode,
        }
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            pool_policy: self.pool_policy,
            temporal_filter: self.temporal_filter,
            top_m_objects: self.training.top_m_objects,
            include_activities: self.include_activities,
        }
    }

    pub fn rationale_options(&self) -> RationaleOptions {
        RationaleOptions {
            threshold: self.threshold,
            question: QuestionOptions {
                deconjugate: self.deconjugate,
            },
        }
    }

    pub fn encoder(&self) -> Result<HashEncoder> {
        match self.encoder {
            EncoderKind::Hash => Ok(HashEncoder::new(
                self.encoder_dim,
                self.encoder_seed.unwrap_or(self.seed),
            )?),
            EncoderKind::External => {
                bail!("no external encoder is bundled; set encoder = \"hash\"")
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.training_config().validate()?;
        if !(0.0..=1.0).contains(&self.threshold) {
            bail!("threshold must lie in [0, 1], got {}", self.threshold);
        }
        Ok(())
    }
}
