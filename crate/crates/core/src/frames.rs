//! Canonical frame selection by unigram BLEU between a frame's detected
//! object labels (candidate) and the event caption (reference).

use std::collections::HashMap;

use crate::data::{EventAnnotation, EventPair, FrameObservation, VideoRecord};
use crate::detect::ObjectDetector;
use crate::error::{Error, Result};

/// Brevity penalty, fixed at 1.
const BREVITY_PENALTY: f64 = 1.0;
/// Weight on the unigram log precision.
const UNIGRAM_WEIGHT: f64 = 1.0;

/// Lowercases, splits on whitespace and strips non-alphanumeric characters
/// from both ends of each token. Interior punctuation is kept.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BleuScore {
    pub value: f64,
    /// Clipped unigram precision.
    pub precision: f64,
    pub candidate_len: usize,
    pub reference_len: usize,
}

pub fn unigram_bleu<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> BleuScore {
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *ref_counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut cand_counts: HashMap<&str, usize> = HashMap::new();
    for t in candidate {
        *cand_counts.entry(t.as_ref()).or_default() += 1;
    }
    let matched: usize = cand_counts
        .iter()
        .map(|(tok, &n)| n.min(ref_counts.get(tok).copied().unwrap_or(0)))
        .sum();
    let precision = if candidate.is_empty() {
        0.0
    } else {
        matched as f64 / candidate.len() as f64
    };
    let value = if precision == 0.0 {
        0.0
    } else {
        BREVITY_PENALTY * (UNIGRAM_WEIGHT * precision.ln()).exp()
    };
    BleuScore {
        value,
        precision,
        candidate_len: candidate.len(),
        reference_len: reference.len(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameSelectOptions {
    /// Append the frame's activity labels to the candidate tokens.
    pub include_activities: bool,
}

fn candidate_tokens(
    frame: &FrameObservation,
    detector: &dyn ObjectDetector,
    opts: FrameSelectOptions,
) -> Vec<String> {
    let mut tokens: Vec<String> = detector
        .detect(frame)
        .iter()
        .flat_map(|o| tokenize(&o.label))
        .collect();
    if opts.include_activities {
        tokens.extend(frame.activities.iter().flat_map(|a| tokenize(a)));
    }
    tokens
}

pub fn in_span(event: &EventAnnotation, frame: &FrameObservation) -> bool {
    frame.timestamp_s >= event.start_s && frame.timestamp_s <= event.end_s
}

/// Earliest in-span frame achieving the highest BLEU score. If every score
/// is zero this is the first in-span frame.
pub fn select_canonical_frame(
    event: &EventAnnotation,
    frames: &[FrameObservation],
    detector: &dyn ObjectDetector,
    opts: FrameSelectOptions,
) -> Result<usize> {
    let reference = tokenize(&event.caption);
    let mut in_span_frames: Vec<&FrameObservation> =
        frames.iter().filter(|f| in_span(event, f)).collect();
    in_span_frames.sort_by_key(|f| f.frame_index);

    let mut best: Option<(usize, f64)> = None;
    for frame in in_span_frames {
        let score = unigram_bleu(&candidate_tokens(frame, detector, opts), &reference).value;
        match best {
            Some((_, s)) if score <= s => {}
            _ => best = Some((frame.frame_index, score)),
        }
    }
    best.map(|(idx, _)| idx)
        .ok_or_else(|| Error::NoFrameInSpan {
            event_id: event.event_id.clone(),
            start_s: event.start_s,
            end_s: event.end_s,
        })
}

/// Canonical frame per event, in event order. Annotated `canonical_frame`
/// values are used as given; the rest are selected.
pub fn canonical_frames(
    video: &VideoRecord,
    detector: &dyn ObjectDetector,
    opts: FrameSelectOptions,
) -> Result<Vec<usize>> {
    video
        .events
        .iter()
        .map(|e| match e.canonical_frame {
            Some(idx) => Ok(idx),
            None => select_canonical_frame(e, &video.frames, detector, opts),
        })
        .collect()
}

/// Recomputes and stores the canonical frame of every event.
pub fn annotate_canonical_frames(
    video: &VideoRecord,
    detector: &dyn ObjectDetector,
    opts: FrameSelectOptions,
) -> Result<VideoRecord> {
    let mut out = video.clone();
    for event in &mut out.events {
        event.canonical_frame = Some(select_canonical_frame(
            event,
            &video.frames,
            detector,
            opts,
        )?);
    }
    Ok(out)
}

/// One positive pair per gold relation. Pairs whose effect frame precedes
/// the cause frame carry `temporal_ok = false`.
pub fn build_frame_pairs(
    video: &VideoRecord,
    detector: &dyn ObjectDetector,
    opts: FrameSelectOptions,
) -> Result<Vec<EventPair>> {
    let frames = canonical_frames(video, detector, opts)?;
    let lookup = |event_id: &str| -> Result<(&EventAnnotation, &FrameObservation)> {
        let pos = video
            .events
            .iter()
            .position(|e| e.event_id == event_id)
            .ok_or_else(|| {
                Error::schema(
                    &video.video_id,
                    "causal_relations",
                    format!("unknown event {event_id}"),
                )
            })?;
        let frame = video.frame(frames[pos]).ok_or_else(|| {
            Error::schema(
                &video.video_id,
                "events.canonical_frame",
                format!("unknown frame {}", frames[pos]),
            )
        })?;
        Ok((&video.events[pos], frame))
    };
    video
        .causal_relations
        .iter()
        .map(|(c, e)| {
            let (cause, frame_cause) = lookup(c)?;
            let (effect, frame_effect) = lookup(e)?;
            Ok(EventPair {
                cause_video: video.video_id.clone(),
                effect_video: video.video_id.clone(),
                cause: cause.clone(),
                effect: effect.clone(),
                frame_cause: frame_cause.clone(),
                frame_effect: frame_effect.clone(),
                label: Some(true),
                temporal_ok: frame_cause.timestamp_s <= frame_effect.timestamp_s,
            })
        })
        .collect()
}
