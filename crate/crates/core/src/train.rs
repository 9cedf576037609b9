//! Negative sampling, the pairwise cross-entropy loss and the SGD loop.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetSplit, EventPair, VideoRecord};
use crate::detect::{FixtureDetector, ObjectDetector};
use crate::encoding::TextEncoder;
use crate::error::{Error, Result};
use crate::frames::{canonical_frames, FrameSelectOptions};
use crate::model::{
    AblationMode, ClassifierInput, EventFeatures, ModelParams, PairFeatures, DEFAULT_HIDDEN_DIM,
};
use crate::seed::component_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub early_stopping: bool,
    pub patience: usize,
    pub top_m_objects: usize,
    pub hidden_dim: usize,
    pub rng_seed: u64,
    pub classifier_input: ClassifierInput,
    pub ablation_mode: AblationMode,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 10,
            early_stopping: true,
            patience: 2,
            top_m_objects: 10,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            rng_seed: 0,
            classifier_input: ClassifierInput::Averaged,
            ablation_mode: AblationMode::Full,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.top_m_objects == 0 {
            return Err(Error::Config("top_m_objects must be at least 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be at least 1".into()));
        }
        if self.early_stopping && self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub initial_val_loss: f64,
    /// Mean training loss of each completed epoch.
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// 0 when no epoch improved on the initial parameters.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_epoch: usize,
}

/// `-(ln pos + ln(1 - neg)) / 2`
pub fn pair_loss(pos_score: f64, neg_score: f64) -> f64 {
    -0.5 * (pos_score.ln() + (1.0 - neg_score).ln())
}

/// Same-video events that are neither the cause nor a gold effect of it.
fn eligible_negatives(video: &VideoRecord, cause_id: &str) -> Vec<usize> {
    video
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.event_id != cause_id && !video.is_gold(cause_id, &e.event_id))
        .map(|(i, _)| i)
        .collect()
}

/// (video index, event index) of a negative effect for `cause_id` in
/// `videos[video_idx]`, drawing from other videos when the own video has no
/// eligible event.
fn pick_negative<R: Rng>(
    videos: &[VideoRecord],
    video_idx: usize,
    cause_id: &str,
    rng: &mut R,
) -> Option<(usize, usize)> {
    let own = eligible_negatives(&videos[video_idx], cause_id);
    if !own.is_empty() {
        return Some((video_idx, own[rng.random_range(0..own.len())]));
    }
    let total: usize = videos
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != video_idx)
        .map(|(_, v)| v.events.len())
        .sum();
    if total == 0 {
        return None;
    }
    let mut k = rng.random_range(0..total);
    for (i, v) in videos.iter().enumerate() {
        if i == video_idx {
            continue;
        }
        if k < v.events.len() {
            return Some((i, k));
        }
        k -= v.events.len();
    }
    unreachable!("index within total")
}

fn negative_pair(
    positive: &EventPair,
    video: &VideoRecord,
    event_idx: usize,
    detector: &dyn ObjectDetector,
    opts: FrameSelectOptions,
) -> Result<EventPair> {
    let frames = canonical_frames(video, detector, opts)?;
    let effect = video.events[event_idx].clone();
    let frame_effect = video
        .frame(frames[event_idx])
        .cloned()
        .ok_or_else(|| Error::schema(&video.video_id, "events.canonical_frame", "unknown frame"))?;
    Ok(EventPair {
        cause_video: positive.cause_video.clone(),
        effect_video: video.video_id.clone(),
        cause: positive.cause.clone(),
        temporal_ok: positive.frame_cause.timestamp_s <= frame_effect.timestamp_s
            || positive.cause_video != video.video_id,
        frame_cause: positive.frame_cause.clone(),
        frame_effect,
        effect,
        label: Some(false),
    })
}

/// Pairs the positive's cause with a uniformly drawn same-video event that
/// is not one of its gold effects. Errors when no such event exists.
pub fn sample_negative<R: Rng>(
    positive: &EventPair,
    video: &VideoRecord,
    detector: &dyn ObjectDetector,
    opts: FrameSelectOptions,
    rng: &mut R,
) -> Result<EventPair> {
    let pool = eligible_negatives(video, &positive.cause.event_id);
    if pool.is_empty() {
        return Err(Error::Config(format!(
            "no eligible negative for cause {} in video {}",
            positive.cause.event_id, video.video_id
        )));
    }
    let idx = pool[rng.random_range(0..pool.len())];
    negative_pair(positive, video, idx, detector, opts)
}

/// `sample_negative`, falling back to an event drawn uniformly from the
/// other videos of the same split.
pub fn sample_negative_or_fallback<R: Rng>(
    positive: &EventPair,
    videos: &[VideoRecord],
    video_idx: usize,
    detector: &dyn ObjectDetector,
    opts: FrameSelectOptions,
    rng: &mut R,
) -> Result<EventPair> {
    let (v, e) = pick_negative(videos, video_idx, &positive.cause.event_id, rng)
        .ok_or_else(|| Error::Config("no negative candidates in split".into()))?;
    negative_pair(positive, &videos[v], e, detector, opts)
}

/// Encoded events of a split plus the positive pairs it trains on.
struct PreparedSplit<'a> {
    videos: &'a [VideoRecord],
    features: Vec<Vec<EventFeatures>>,
    /// (video, cause event, effect event)
    positives: Vec<(usize, usize, usize)>,
}

impl<'a> PreparedSplit<'a> {
    fn new(
        videos: &'a [VideoRecord],
        encoder: &dyn TextEncoder,
        detector: &dyn ObjectDetector,
        opts: FrameSelectOptions,
        m: usize,
    ) -> Result<Self> {
        let mut features = Vec::with_capacity(videos.len());
        let mut positives = Vec::new();
        for (vi, video) in videos.iter().enumerate() {
            let frames = canonical_frames(video, detector, opts)?;
            let mut feats = Vec::with_capacity(video.events.len());
            for (event, &fi) in video.events.iter().zip(&frames) {
                let frame = video.frame(fi).ok_or_else(|| {
                    Error::schema(
                        &video.video_id,
                        "events.canonical_frame",
                        format!("unknown frame {fi}"),
                    )
                })?;
                feats.push(EventFeatures::encode(encoder, detector, event, frame, m)?);
            }
            let pos = |id: &str| video.events.iter().position(|e| e.event_id == id);
            for (c, e) in &video.causal_relations {
                let (Some(ci), Some(ei)) = (pos(c), pos(e)) else {
                    return Err(Error::schema(
                        &video.video_id,
                        "causal_relations",
                        "unknown event",
                    ));
                };
                let ordered = video.frame(frames[ci]).map(|f| f.timestamp_s)
                    <= video.frame(frames[ei]).map(|f| f.timestamp_s);
                if ordered {
                    positives.push((vi, ci, ei));
                }
            }
            features.push(feats);
        }
        Ok(Self {
            videos,
            features,
            positives,
        })
    }

    fn pair(&self, (v, c): (usize, usize), (nv, ne): (usize, usize)) -> PairFeatures {
        PairFeatures {
            cause: self.features[v][c].clone(),
            effect: self.features[nv][ne].clone(),
        }
    }

    fn sample<R: Rng>(
        &self,
        positive: (usize, usize, usize),
        rng: &mut R,
    ) -> Result<(usize, usize)> {
        let (v, c, _) = positive;
        let cause_id = &self.videos[v].events[c].event_id;
        pick_negative(self.videos, v, cause_id, rng)
            .ok_or_else(|| Error::Config("no negative candidates in split".into()))
    }
}

fn mean_loss(
    params: &ModelParams,
    split: &PreparedSplit,
    negatives: &[(usize, usize)],
) -> Result<f64> {
    let mut total = 0.0;
    for (&(v, c, e), &neg) in split.positives.iter().zip(negatives) {
        total += params.pair_loss(&split.pair((v, c), (v, e)), &split.pair((v, c), neg))?;
    }
    Ok(total / split.positives.len() as f64)
}

pub fn train(
    split: &DatasetSplit,
    encoder: &dyn TextEncoder,
    config: &TrainingConfig,
) -> Result<(ModelParams, TrainHistory)> {
    train_with(
        split,
        encoder,
        &FixtureDetector,
        FrameSelectOptions::default(),
        config,
    )
}

/// Per-pair SGD over seeded shuffles of the training positives, one fresh
/// negative per positive per epoch. Validation negatives are drawn once.
/// Returns the parameters of the best validation epoch.
pub fn train_with(
    split: &DatasetSplit,
    encoder: &dyn TextEncoder,
    detector: &dyn ObjectDetector,
    opts: FrameSelectOptions,
    config: &TrainingConfig,
) -> Result<(ModelParams, TrainHistory)> {
    config.validate()?;
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(Error::Config(
            "train and validation splits must be nonempty".into(),
        ));
    }
    let m = config.top_m_objects;
    let train_set = PreparedSplit::new(&split.train, encoder, detector, opts, m)?;
    let val_set = PreparedSplit::new(&split.validation, encoder, detector, opts, m)?;
    if train_set.positives.is_empty() || val_set.positives.is_empty() {
        return Err(Error::Config(
            "train and validation splits need at least one positive pair".into(),
        ));
    }

    let seed = config.rng_seed;
    let mut params = ModelParams::random(encoder.dimension(), config.hidden_dim, seed)
        .with_ablation(config.ablation_mode)
        .with_classifier_input(config.classifier_input);
    let mut order_rng = component_rng(seed, "train-order");
    let mut neg_rng = component_rng(seed, "train-negatives");
    let mut val_rng = component_rng(seed, "val-negatives");

    let val_negatives = val_set
        .positives
        .iter()
        .map(|&p| val_set.sample(p, &mut val_rng))
        .collect::<Result<Vec<_>>>()?;

    let initial_val_loss = mean_loss(&params, &val_set, &val_negatives)?;
    let mut best = (0usize, initial_val_loss, params.clone());
    let mut history = TrainHistory {
        initial_val_loss,
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        best_val_loss: initial_val_loss,
        stopped_epoch: 0,
    };
    let mut stale = 0usize;
    let mut order: Vec<usize> = (0..train_set.positives.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut order_rng);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let (v, c, e) = train_set.positives[i];
            let neg = train_set.sample((v, c, e), &mut neg_rng)?;
            let (loss, grad) = params.pair_loss_and_grad(
                &train_set.pair((v, c), (v, e)),
                &train_set.pair((v, c), neg),
            )?;
            params.add_scaled(-config.learning_rate, &grad);
            epoch_loss += loss;
        }
        let val_loss = mean_loss(&params, &val_set, &val_negatives)?;
        history.train_loss.push(epoch_loss / order.len() as f64);
        history.val_loss.push(val_loss);
        history.stopped_epoch = epoch;

        if val_loss < best.1 {
            best = (epoch, val_loss, params.clone());
            stale = 0;
        } else {
            stale += 1;
            if config.early_stopping && stale >= config.patience {
                break;
            }
        }
    }
    history.best_epoch = best.0;
    history.best_val_loss = best.1;
    Ok((best.2, history))
}

/// Validation loss of `params` under the same fixed negatives `train_with`
/// draws for `config`.
pub fn validation_loss(
    params: &ModelParams,
    validation: &[VideoRecord],
    encoder: &dyn TextEncoder,
    detector: &dyn ObjectDetector,
    opts: FrameSelectOptions,
    config: &TrainingConfig,
) -> Result<f64> {
    let val_set = PreparedSplit::new(validation, encoder, detector, opts, config.top_m_objects)?;
    let mut val_rng = component_rng(config.rng_seed, "val-negatives");
    let negatives = val_set
        .positives
        .iter()
        .map(|&p| val_set.sample(p, &mut val_rng))
        .collect::<Result<Vec<_>>>()?;
    mean_loss(params, &val_set, &negatives)
}
