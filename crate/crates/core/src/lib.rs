//! Multimodal event-causality pipeline.
//!
//! Videos arrive as per-frame object detections plus captioned event spans.
//! The pipeline picks a canonical frame per event, fuses caption and object
//! vectors through cross-attention, scores ordered event pairs for causality,
//! ranks candidate effects with Recall@N, and produces short natural-language
//! rationales for pairs judged causal.

pub mod data;
pub mod detect;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod frames;
pub mod model;
pub mod rationale;
pub mod seed;
pub mod synth;
pub mod train;

pub use data::{
    split_dataset, Category, DatasetSplit, DetectedObject, EventAnnotation, EventPair,
    FrameObservation, VideoRecord,
};
pub use detect::{ActivityDetector, FixtureDetector, ObjectDetector};
pub use encoding::{HashEncoder, TextEncoder};
pub use error::{Error, Result};
pub use eval::{EvalReport, PoolPolicy, RankingQuery};
pub use model::{AblationMode, ClassifierInput, ModelParams};
pub use rationale::{RationaleGenerator, RationalePrompt, TemplateGenerator};
pub use train::{TrainHistory, TrainingConfig};
