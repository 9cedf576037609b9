//! Command-line driver: dataset building, frame selection, training,
//! evaluation, ablations, prediction and rationales.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Result;
use causal_core::{AblationMode, PoolPolicy};
use clap::{Args, Parser, Subcommand};

pub use config::{RunConfig, CONFIG_KEYS};

#[derive(Debug, Parser)]
#[command(name = "causal", version, about = "Event-causality scoring over video annotations", after_help = CONFIG_KEYS)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML config file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,
    /// Dataset JSONL
    #[arg(long, global = true, value_name = "PATH")]
    pub dataset: Option<PathBuf>,
    /// Model checkpoint JSON
    #[arg(long, global = true, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Output directory, or output file for dataset-writing commands
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "POLICY")]
    pub pool_policy: Option<PoolPolicy>,
    #[arg(long, global = true, value_name = "MODE")]
    pub ablation: Option<AblationMode>,
    /// Drop same-video candidates that start before the cause
    #[arg(long, global = true)]
    pub temporal_filter: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a raw dataset, annotate canonical frames and print a summary
    BuildDataset {
        /// Raw dataset JSONL
        raw: PathBuf,
    },
    /// Write the dataset with the canonical frame of every event
    SelectFrames,
    /// Train on the train split and write a checkpoint and history
    Train,
    /// Score the evaluation split and write Recall@N reports
    Eval {
        /// Rank with the gold annotations instead of a checkpoint
        #[arg(long)]
        oracle: bool,
    },
    /// Train and evaluate full, no_visual and no_lingual models
    Ablate,
    /// Score every forward event pair within each video
    Predict {
        #[arg(long)]
        oracle: bool,
    },
    /// Build explanation prompts and rationales for event pairs
    Rationalize {
        /// VIDEO/CAUSE/EFFECT; defaults to every gold relation
        #[arg(long = "pair", value_name = "VIDEO/CAUSE/EFFECT")]
        pairs: Vec<String>,
        #[arg(long)]
        oracle: bool,
    },
    /// Write a planted-causality synthetic dataset
    Synth {
        #[arg(long, default_value_t = 200)]
        videos: usize,
        #[arg(long, default_value_t = 5)]
        events: usize,
    },
}

/// Merges defaults, the config file and flags.
pub fn resolve_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(p) = &common.dataset {
        cfg.dataset = Some(p.clone());
    }
    if let Some(p) = &common.checkpoint {
        cfg.checkpoint = Some(p.clone());
    }
    if let Some(p) = &common.out {
        cfg.out = Some(p.clone());
    }
    if let Some(p) = common.pool_policy {
        cfg.pool_policy = p;
    }
    if let Some(m) = common.ablation {
        cfg.training.ablation_mode = m;
    }
    if common.temporal_filter {
        cfg.temporal_filter = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command and returns what it prints on success.
pub fn run(cli: &Cli) -> Result<String> {
    let cfg = resolve_config(&cli.common)?;
    match &cli.command {
        Command::BuildDataset { raw } => commands::build_dataset(&cfg, raw),
        Command::SelectFrames => commands::select_frames(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Eval { oracle } => commands::eval(&cfg, *oracle),
        Command::Ablate => commands::ablate(&cfg),
        Command::Predict { oracle } => commands::predict(&cfg, *oracle),
        Command::Rationalize { pairs, oracle } => commands::rationalize(&cfg, pairs, *oracle),
        Command::Synth { videos, events } => commands::synth(&cfg, *videos, *events),
    }
}
