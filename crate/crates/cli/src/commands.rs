use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use causal_core::data::{read_dataset, write_dataset, EventPair, VideoRecord};
use causal_core::eval::{
    evaluate, evaluate_model, run_ablation, AblationReport, OracleScorer, ReportConfig,
};
use causal_core::frames::{annotate_canonical_frames, canonical_frames};
use causal_core::model::{checkpoint_from_str, checkpoint_to_string, FusionScorer, PairScorer};
use causal_core::rationale::{rationalize as rationalize_pair, Rationale};
use causal_core::synth::{planted_dataset, PlantedConfig};
use causal_core::train::train_with;
use causal_core::{
    split_dataset, Category, DatasetSplit, FixtureDetector, HashEncoder, ModelParams,
    TemplateGenerator,
};
use serde::Serialize;

use crate::config::{EvalSplit, RunConfig};

const DETECTOR: FixtureDetector = FixtureDetector;

fn read_videos(path: &Path) -> Result<Vec<VideoRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_dataset(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn dataset_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.dataset
        .as_deref()
        .ok_or_else(|| anyhow!("no dataset given; pass --dataset or set dataset in the config"))
}

fn out_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.out
        .as_deref()
        .ok_or_else(|| anyhow!("no output path given; pass --out or set out in the config"))
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    let dir = out_path(cfg)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_videos(path: &Path, videos: &[VideoRecord]) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, videos)?;
    write_file(path, std::str::from_utf8(&buf)?)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn to_jsonl<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

fn annotate(cfg: &RunConfig, videos: &[VideoRecord]) -> Result<Vec<VideoRecord>> {
    let opts = cfg.eval_settings().frame_options();
    videos
        .iter()
        .map(|v| {
            annotate_canonical_frames(v, &DETECTOR, opts)
                .with_context(|| format!("video {}", v.video_id))
        })
        .collect()
}

fn summary(videos: &[VideoRecord]) -> String {
    let mut per: BTreeMap<Category, [usize; 3]> =
        Category::ALL.iter().map(|c| (*c, [0; 3])).collect();
    for v in videos {
        let row = per.get_mut(&v.category).expect("all categories present");
        row[0] += 1;
        row[1] += v.events.len();
        row[2] += v.causal_relations.len();
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>7} {:>7} {:>10}",
        "Category", "videos", "events", "relations"
    );
    let mut total = [0; 3];
    for (c, row) in &per {
        let _ = writeln!(
            out,
            "{:<14} {:>7} {:>7} {:>10}",
            c.name(),
            row[0],
            row[1],
            row[2]
        );
        for k in 0..3 {
            total[k] += row[k];
        }
    }
    let _ = writeln!(
        out,
        "{:<14} {:>7} {:>7} {:>10}",
        "Total", total[0], total[1], total[2]
    );
    out
}

pub fn build_dataset(cfg: &RunConfig, raw: &Path) -> Result<String> {
    let videos = annotate(cfg, &read_videos(raw)?)?;
    let out = out_path(cfg)?;
    write_videos(out, &videos)?;
    Ok(format!("wrote {}\n{}", out.display(), summary(&videos)))
}

pub fn select_frames(cfg: &RunConfig) -> Result<String> {
    let videos = annotate(cfg, &read_videos(dataset_path(cfg)?)?)?;
    let out = out_path(cfg)?;
    write_videos(out, &videos)?;
    let mut text = format!("wrote {}\n", out.display());
    for v in &videos {
        for e in &v.events {
            let _ = writeln!(
                text,
                "{} {} frame {}",
                v.video_id,
                e.event_id,
                e.canonical_frame.expect("annotated")
            );
        }
    }
    Ok(text)
}

fn load_split(cfg: &RunConfig) -> Result<DatasetSplit> {
    let videos = read_videos(dataset_path(cfg)?)?;
    Ok(split_dataset(&videos, cfg.split, cfg.seed)?)
}

fn checkpoint_path(cfg: &RunConfig) -> Result<PathBuf> {
    match (&cfg.checkpoint, &cfg.out) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(dir)) => Ok(dir.join("checkpoint.json")),
        (None, None) => bail!("no checkpoint path given; pass --checkpoint or --out"),
    }
}

pub fn train(cfg: &RunConfig) -> Result<String> {
    let split = load_split(cfg)?;
    let encoder = cfg.encoder()?;
    let (params, history) = train_with(
        &split,
        &encoder,
        &DETECTOR,
        cfg.eval_settings().frame_options(),
        &cfg.training_config(),
    )?;
    let ckpt = checkpoint_path(cfg)?;
    write_file(&ckpt, &checkpoint_to_string(&params, Some(&encoder))?)?;
    let mut text = format!("wrote {}\n", ckpt.display());
    if let Some(dir) = &cfg.out {
        let hist = dir.join("history.json");
        write_file(&hist, &to_json(&history)?)?;
        let _ = writeln!(text, "wrote {}", hist.display());
    }
    let _ = writeln!(
        text,
        "epochs run {}, best epoch {}, validation loss {:.6} -> {:.6}",
        history.stopped_epoch, history.best_epoch, history.initial_val_loss, history.best_val_loss
    );
    Ok(text)
}

struct Model {
    params: ModelParams,
    encoder: HashEncoder,
}

fn load_model(cfg: &RunConfig) -> Result<Model> {
    let path = cfg
        .checkpoint
        .as_deref()
        .ok_or_else(|| anyhow!("no checkpoint given; pass --checkpoint or use --oracle"))?;
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading checkpoint {}", path.display()))?;
    let (params, stored) = checkpoint_from_str(&text)
        .with_context(|| format!("loading checkpoint {}", path.display()))?;
    let encoder = match stored {
        Some(e) => e,
        None => cfg.encoder()?,
    };
    Ok(Model { params, encoder })
}

enum Scorer {
    Model(Box<Model>),
    Oracle(OracleScorer),
}

impl Scorer {
    fn new(cfg: &RunConfig, oracle: bool, videos: &[VideoRecord]) -> Result<Self> {
        Ok(if oracle {
            Scorer::Oracle(OracleScorer::new(videos))
        } else {
            Scorer::Model(Box::new(load_model(cfg)?))
        })
    }

    fn score(&self, cfg: &RunConfig, pair: &EventPair) -> Result<f64> {
        Ok(match self {
            Scorer::Oracle(o) => o.score_pair(pair)?,
            Scorer::Model(m) => FusionScorer {
                params: &m.params,
                encoder: &m.encoder,
                detector: &DETECTOR,
                top_m: cfg.training.top_m_objects,
            }
            .score_pair(pair)?,
        })
    }
}

pub fn eval(cfg: &RunConfig, oracle: bool) -> Result<String> {
    let split = load_split(cfg)?;
    let videos: Vec<VideoRecord> = match cfg.eval_split {
        EvalSplit::Train => split.train,
        EvalSplit::Validation => split.validation,
        EvalSplit::Test => split.test,
        EvalSplit::All => [split.train, split.validation, split.test].concat(),
    };
    let settings = cfg.eval_settings();
    let report = if oracle {
        let config = ReportConfig {
            model: "oracle".into(),
            ablation_mode: None,
            classifier_input: None,
            settings,
        };
        evaluate(&OracleScorer::new(&videos), config, &videos, &DETECTOR)?
    } else {
        let model = load_model(cfg)?;
        evaluate_model(&model.params, &model.encoder, &DETECTOR, &videos, &settings)?
    };
    let dir = out_dir(cfg)?;
    let text = report.to_text();
    write_file(&dir.join("report.json"), &report.to_json()?)?;
    write_file(&dir.join("report.txt"), &text)?;
    Ok(text)
}

pub fn ablate(cfg: &RunConfig) -> Result<String> {
    let split = load_split(cfg)?;
    let encoder = cfg.encoder()?;
    let settings = cfg.eval_settings();
    let config = cfg.training_config();
    let dir = out_dir(cfg)?;
    let mut reports = Vec::new();
    for mode in causal_core::AblationMode::ALL {
        let run = run_ablation(mode, &split, &encoder, &DETECTOR, &config, &settings)
            .with_context(|| format!("ablation {mode}"))?;
        write_file(
            &dir.join(format!("report_{mode}.json")),
            &run.report.to_json()?,
        )?;
        reports.push(run.report);
    }
    let [full, no_visual, no_lingual]: [_; 3] = reports.try_into().expect("three modes");
    let ablation = AblationReport::new(full, no_visual, no_lingual);
    let text = ablation.to_text();
    write_file(&dir.join("ablation.json"), &ablation.to_json()?)?;
    write_file(&dir.join("ablation.txt"), &text)?;
    Ok(text)
}

fn event_pair(
    video: &VideoRecord,
    frames: &[usize],
    cause: usize,
    effect: usize,
) -> Result<EventPair> {
    let frame = |i: usize| {
        video
            .frame(frames[i])
            .cloned()
            .ok_or_else(|| anyhow!("video {}: unknown frame {}", video.video_id, frames[i]))
    };
    let (c, e) = (&video.events[cause], &video.events[effect]);
    let (fc, fe) = (frame(cause)?, frame(effect)?);
    Ok(EventPair {
        cause_video: video.video_id.clone(),
        effect_video: video.video_id.clone(),
        temporal_ok: fc.timestamp_s <= fe.timestamp_s,
        label: Some(video.is_gold(&c.event_id, &e.event_id)),
        cause: c.clone(),
        effect: e.clone(),
        frame_cause: fc,
        frame_effect: fe,
    })
}

#[derive(Debug, Serialize)]
struct Prediction<'a> {
    video_id: &'a str,
    cause: &'a str,
    effect: &'a str,
    score: f64,
    label: &'static str,
    gold: bool,
    rationale: String,
}

pub fn predict(cfg: &RunConfig, oracle: bool) -> Result<String> {
    let videos = read_videos(dataset_path(cfg)?)?;
    let scorer = Scorer::new(cfg, oracle, &videos)?;
    let opts = cfg.rationale_options();
    let mut pairs = Vec::new();
    for v in &videos {
        let frames = canonical_frames(v, &DETECTOR, cfg.eval_settings().frame_options())?;
        for (i, c) in v.events.iter().enumerate() {
            for (j, e) in v.events.iter().enumerate() {
                if i != j && c.start_s <= e.start_s {
                    pairs.push(event_pair(v, &frames, i, j)?);
                }
            }
        }
    }
    let mut rows = Vec::with_capacity(pairs.len());
    let mut text = String::new();
    for p in &pairs {
        let score = scorer.score(cfg, p)?;
        let r = rationalize_pair(p, score, opts, &DETECTOR, &TemplateGenerator)?;
        let label = if r.is_causal { "Yes" } else { "No" };
        let _ = writeln!(
            text,
            "{} {} -> {}  score {score:.6}  {label}  {}",
            p.cause_video, p.cause.event_id, p.effect.event_id, r.explanation
        );
        rows.push(Prediction {
            video_id: &p.cause_video,
            cause: &p.cause.event_id,
            effect: &p.effect.event_id,
            score,
            label,
            gold: p.label == Some(true),
            rationale: r.explanation,
        });
    }
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("predictions.jsonl"), &to_jsonl(&rows)?)?;
    }
    Ok(text)
}

#[derive(Debug, Serialize)]
struct RationaleRow<'a> {
    video_id: &'a str,
    cause: &'a str,
    effect: &'a str,
    score: f64,
    #[serde(flatten)]
    rationale: Rationale,
}

fn parse_selector(s: &str) -> Result<(&str, &str, &str)> {
    let parts: Vec<&str> = s.split('/').collect();
    match parts.as_slice() {
        [v, c, e] if !v.is_empty() && !c.is_empty() && !e.is_empty() => Ok((v, c, e)),
        _ => bail!("pair selector {s:?} is not VIDEO/CAUSE/EFFECT"),
    }
}

pub fn rationalize(cfg: &RunConfig, selectors: &[String], oracle: bool) -> Result<String> {
    let videos = read_videos(dataset_path(cfg)?)?;
    let scorer = Scorer::new(cfg, oracle, &videos)?;
    let mut wanted: Vec<(String, String, String)> = Vec::new();
    if selectors.is_empty() {
        for v in &videos {
            for (c, e) in &v.causal_relations {
                wanted.push((v.video_id.clone(), c.clone(), e.clone()));
            }
        }
    } else {
        for s in selectors {
            let (v, c, e) = parse_selector(s)?;
            wanted.push((v.into(), c.into(), e.into()));
        }
    }
    let mut rows = Vec::new();
    let mut text = String::new();
    for (vid, cid, eid) in &wanted {
        let video = videos
            .iter()
            .find(|v| &v.video_id == vid)
            .ok_or_else(|| anyhow!("unknown video {vid}"))?;
        let index = |id: &str| {
            video
                .events
                .iter()
                .position(|e| e.event_id == id)
                .ok_or_else(|| anyhow!("video {vid}: unknown event {id}"))
        };
        let frames = canonical_frames(video, &DETECTOR, cfg.eval_settings().frame_options())?;
        let pair = event_pair(video, &frames, index(cid)?, index(eid)?)?;
        let score = scorer.score(cfg, &pair)?;
        let r = rationalize_pair(
            &pair,
            score,
            cfg.rationale_options(),
            &DETECTOR,
            &TemplateGenerator,
        )?;
        let _ = writeln!(
            text,
            "{vid} {cid} -> {eid}\n  Question: {}\n  Choices: {}\n  Output: {}",
            r.prompt.question,
            r.prompt.choices_line(),
            r.explanation
        );
        rows.push(RationaleRow {
            video_id: vid,
            cause: cid,
            effect: eid,
            score,
            rationale: r,
        });
    }
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("rationales.jsonl"), &to_jsonl(&rows)?)?;
    }
    Ok(text)
}

pub fn synth(cfg: &RunConfig, videos: usize, events: usize) -> Result<String> {
    if events < 5 {
        bail!("planted videos need at least 5 events, got {events}");
    }
    let data = planted_dataset(PlantedConfig {
        videos,
        events_per_video: events,
        seed: cfg.seed,
    });
    let out = out_path(cfg)?;
    write_videos(out, &data)?;
    Ok(format!("wrote {}\n{}", out.display(), summary(&data)))
}
