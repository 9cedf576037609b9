//! Domain types and the line-delimited dataset format.
//!
//! One video per line, UTF-8 JSON, with a mandatory `schema: 1` field:
//!
//! ```text
//! {"schema":1,"video_id":"v1","category":"Sports",
//!  "frames":[{"frame_index":0,"timestamp_s":0.5,
//!             "objects":[{"label":"girl","confidence":0.9}],
//!             "activities":["girl throws frisbee"]}],
//!  "events":[{"event_id":"e1","caption":"...","clause":"...",
//!             "start_s":0.0,"end_s":2.0,"canonical_frame":0}],
//!  "causal_relations":[["e1","e2"]]}
//! ```

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::component_rng;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectedObject {
    pub label: String,
    pub confidence: f64,
}

impl DetectedObject {
    pub fn new(label: impl Into<String>, confidence: f64) -> Self {
        Self {
            label: label.into(),
            confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameObservation {
    pub frame_index: usize,
    pub timestamp_s: f64,
    pub objects: Vec<DetectedObject>,
    /// Activity labels, best first.
    #[serde(default)]
    pub activities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventAnnotation {
    pub event_id: String,
    pub caption: String,
    /// Short declarative phrase used when writing rationales.
    pub clause: String,
    pub start_s: f64,
    pub end_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_frame: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Sports,
    Socializing,
    Household,
    #[serde(rename = "Personal Care")]
    PersonalCare,
    Eating,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Sports,
        Category::Socializing,
        Category::Household,
        Category::PersonalCare,
        Category::Eating,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Sports => "Sports",
            Category::Socializing => "Socializing",
            Category::Household => "Household",
            Category::PersonalCare => "Personal Care",
            Category::Eating => "Eating",
        }
    }

    pub fn parse(name: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub category: Category,
    /// Sorted by `frame_index`.
    pub frames: Vec<FrameObservation>,
    pub events: Vec<EventAnnotation>,
    pub causal_relations: Vec<(String, String)>,
}

impl VideoRecord {
    pub fn event(&self, event_id: &str) -> Option<&EventAnnotation> {
        self.events.iter().find(|e| e.event_id == event_id)
    }

    pub fn frame(&self, frame_index: usize) -> Option<&FrameObservation> {
        self.frames.iter().find(|f| f.frame_index == frame_index)
    }

    pub fn is_gold(&self, cause: &str, effect: &str) -> bool {
        self.causal_relations
            .iter()
            .any(|(c, e)| c == cause && e == effect)
    }

    /// Serializes to one dataset line (no trailing newline).
    pub fn to_line(&self) -> Result<String> {
        let wire = WireRecord {
            schema: SCHEMA_VERSION,
            video_id: &self.video_id,
            category: self.category.name(),
            frames: &self.frames,
            events: &self.events,
            causal_relations: &self.causal_relations,
        };
        Ok(serde_json::to_string(&wire)?)
    }
}

/// An ordered (cause candidate, effect candidate) pair with canonical frames.
#[derive(Debug, Clone, PartialEq)]
pub struct EventPair {
    pub cause_video: String,
    pub effect_video: String,
    pub cause: EventAnnotation,
    pub effect: EventAnnotation,
    pub frame_cause: FrameObservation,
    pub frame_effect: FrameObservation,
    pub label: Option<bool>,
    /// False when the effect's canonical frame precedes the cause's.
    pub temporal_ok: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<VideoRecord>,
    pub validation: Vec<VideoRecord>,
    pub test: Vec<VideoRecord>,
}

#[derive(Serialize)]
struct WireRecord<'a> {
    schema: u32,
    video_id: &'a str,
    category: &'a str,
    frames: &'a [FrameObservation],
    events: &'a [EventAnnotation],
    causal_relations: &'a [(String, String)],
}

/// A dataset line as parsed, before invariants are checked.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRecord {
    pub schema: Option<u32>,
    pub video_id: String,
    pub category: String,
    pub frames: Vec<FrameObservation>,
    pub events: Vec<EventAnnotation>,
    pub causal_relations: Vec<(String, String)>,
}

impl RawRecord {
    pub fn from_line(line: &str, line_no: usize) -> Result<RawRecord> {
        serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })
    }
}

/// Checks every record invariant and returns the canonical form: object
/// labels lowercased and trimmed, frames sorted by index. Captions keep case.
pub fn validate_record(raw: RawRecord) -> Result<VideoRecord> {
    let id = raw.video_id.trim().to_string();
    if id.is_empty() {
        return Err(Error::schema("<unnamed>", "video_id", "empty video id"));
    }
    match raw.schema {
        Some(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(Error::schema(
                &id,
                "schema",
                format!("unsupported version {v}"),
            ))
        }
        None => return Err(Error::schema(&id, "schema", "missing schema version")),
    }
    let category = Category::parse(&raw.category).ok_or_else(|| {
        Error::schema(
            &id,
            "category",
            format!("unknown category {:?}", raw.category),
        )
    })?;

    let mut frames = raw.frames;
    frames.sort_by_key(|f| f.frame_index);
    for pair in frames.windows(2) {
        if pair[0].frame_index == pair[1].frame_index {
            return Err(Error::schema(
                &id,
                "frames.frame_index",
                format!("duplicate frame index {}", pair[0].frame_index),
            ));
        }
        if pair[1].timestamp_s < pair[0].timestamp_s {
            return Err(Error::schema(
                &id,
                "frames.timestamp_s",
                format!("timestamp decreases at frame {}", pair[1].frame_index),
            ));
        }
    }
    for frame in &mut frames {
        if !frame.timestamp_s.is_finite() || frame.timestamp_s < 0.0 {
            return Err(Error::schema(
                &id,
                "frames.timestamp_s",
                format!("invalid timestamp at frame {}", frame.frame_index),
            ));
        }
        for obj in &mut frame.objects {
            obj.label = obj.label.trim().to_lowercase();
            if obj.label.is_empty() {
                return Err(Error::schema(
                    &id,
                    "frames.objects.label",
                    format!("empty label at frame {}", frame.frame_index),
                ));
            }
            if !(0.0..=1.0).contains(&obj.confidence) {
                return Err(Error::schema(
                    &id,
                    "frames.objects.confidence",
                    format!("confidence {} outside [0,1]", obj.confidence),
                ));
            }
        }
    }

    let mut seen = HashSet::new();
    for event in &raw.events {
        if !seen.insert(event.event_id.as_str()) {
            return Err(Error::schema(
                &id,
                "events.event_id",
                format!("duplicate event id {}", event.event_id),
            ));
        }
        if event.event_id.is_empty() {
            return Err(Error::schema(&id, "events.event_id", "empty event id"));
        }
        if event.caption.trim().is_empty() {
            return Err(Error::schema(
                &id,
                "events.caption",
                format!("empty caption for event {}", event.event_id),
            ));
        }
        if !event.start_s.is_finite() || !event.end_s.is_finite() {
            return Err(Error::schema(
                &id,
                "events.start_s",
                format!("non-finite span for event {}", event.event_id),
            ));
        }
        if event.start_s >= event.end_s {
            return Err(Error::schema(
                &id,
                "events.end_s",
                format!("empty event span for event {}", event.event_id),
            ));
        }
        if let Some(idx) = event.canonical_frame {
            if !frames.iter().any(|f| f.frame_index == idx) {
                return Err(Error::schema(
                    &id,
                    "events.canonical_frame",
                    format!("unknown frame {idx} for event {}", event.event_id),
                ));
            }
        }
    }
    for (cause, effect) in &raw.causal_relations {
        for endpoint in [cause, effect] {
            if !seen.contains(endpoint.as_str()) {
                return Err(Error::schema(
                    &id,
                    "causal_relations",
                    format!("unknown event {endpoint}"),
                ));
            }
        }
        if cause == effect {
            return Err(Error::schema(
                &id,
                "causal_relations",
                format!("self relation on event {cause}"),
            ));
        }
    }

    Ok(VideoRecord {
        video_id: id,
        category,
        frames,
        events: raw.events,
        causal_relations: raw.causal_relations,
    })
}

pub fn parse_line(line: &str, line_no: usize) -> Result<VideoRecord> {
    let raw = RawRecord::from_line(line, line_no)?;
    validate_record(raw).map_err(|e| match e {
        Error::Schema { .. } => Error::Parse {
            line: line_no,
            message: e.to_string(),
        },
        other => other,
    })
}

/// Reads a whole dataset. Blank lines are skipped; line numbers are 1-based.
/// Duplicate video ids are rejected.
pub fn read_dataset<R: BufRead>(reader: R) -> Result<Vec<VideoRecord>> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_line(&line, i + 1)?;
        if !ids.insert(record.video_id.clone()) {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("duplicate video id {}", record.video_id),
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_dataset<W: Write>(mut writer: W, records: &[VideoRecord]) -> Result<()> {
    for r in records {
        writeln!(writer, "{}", r.to_line()?)?;
    }
    writer.flush()?;
    Ok(())
}

/// Shuffles with a seeded stream and cuts into train/validation/test.
/// Validation and test sizes are floors; the remainder goes to train.
pub fn split_dataset(
    records: &[VideoRecord],
    fractions: [f64; 3],
    rng_seed: u64,
) -> Result<DatasetSplit> {
    if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(Error::Split(format!(
            "fractions must be nonnegative: {fractions:?}"
        )));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Split(format!("fractions sum to {total}, not 1")));
    }
    let nonzero = fractions.iter().filter(|f| **f > 0.0).count();
    let n = records.len();
    if n < nonzero {
        return Err(Error::Split(format!(
            "{n} records cannot fill {nonzero} nonzero splits"
        )));
    }
    let mut ids = HashSet::new();
    for r in records {
        if !ids.insert(r.video_id.as_str()) {
            return Err(Error::Split(format!("duplicate video id {}", r.video_id)));
        }
    }

    // Guard against products like 0.29 * 100 = 28.999999999999996.
    let size = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
    let n_val = size(fractions[1]);
    let n_test = size(fractions[2]);
    let n_train = n - n_val - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = component_rng(rng_seed, "split");
    order.shuffle(&mut rng);
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    Ok(DatasetSplit {
        train: pick(&order[..n_train]),
        validation: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_line() -> String {
        r#"{"schema":1,"video_id":"v1","category":"Sports","frames":[{"frame_index":0,"timestamp_s":0.5,"objects":[{"label":"Girl","confidence":0.9},{"label":"frisbee","confidence":0.8}],"activities":["girl throws frisbee"]},{"frame_index":1,"timestamp_s":2.5,"objects":[{"label":"dog","confidence":0.7}],"activities":[]}],"events":[{"event_id":"a","caption":"The girl throws the frisbee.","clause":"the girl throws the frisbee","start_s":0.0,"end_s":2.0},{"event_id":"b","caption":"The dog jumps.","clause":"The dog jumps","start_s":2.0,"end_s":3.0}],"causal_relations":[["a","b"]]}"#.to_string()
    }

    fn mini(id: &str) -> VideoRecord {
        let mut r = parse_line(&fixture_line(), 1).unwrap();
        r.video_id = id.to_string();
        r
    }

    #[test]
    fn parses_and_normalizes_labels() {
        let r = parse_line(&fixture_line(), 1).unwrap();
        assert_eq!(r.frames[0].objects[0].label, "girl");
        assert_eq!(r.events[0].caption, "The girl throws the frisbee.");
        assert_eq!(r.category, Category::Sports);
    }

    #[test]
    fn round_trips_through_line() {
        let r = parse_line(&fixture_line(), 1).unwrap();
        let back = parse_line(&r.to_line().unwrap(), 1).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn rejects_unknown_event_in_relation() {
        let line = fixture_line().replace(r#"[["a","b"]]"#, r#"[["a","zz"]]"#);
        let err = parse_line(&line, 3).unwrap_err().to_string();
        assert!(err.contains("unknown event"), "{err}");
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("v1"), "{err}");
    }

    #[test]
    fn rejects_empty_span() {
        let line = fixture_line().replace(
            r#""start_s":2.0,"end_s":3.0"#,
            r#""start_s":3.0,"end_s":3.0"#,
        );
        let err = parse_line(&line, 1).unwrap_err().to_string();
        assert!(err.contains("empty event span"), "{err}");
    }

    #[test]
    fn rejects_category_outside_closed_set() {
        let line = fixture_line().replace("Sports", "Gardening");
        let err = parse_line(&line, 1).unwrap_err().to_string();
        assert!(err.contains("category"), "{err}");
    }

    #[test]
    fn schema_field_is_mandatory() {
        let line = fixture_line().replace(r#""schema":1,"#, "");
        assert!(parse_line(&line, 1)
            .unwrap_err()
            .to_string()
            .contains("schema"));
    }

    #[test]
    fn rejects_bad_confidence_and_duplicate_frames() {
        let line = fixture_line().replace("0.9", "1.5");
        assert!(parse_line(&line, 1)
            .unwrap_err()
            .to_string()
            .contains("confidence"));
        let line = fixture_line().replace(r#""frame_index":1"#, r#""frame_index":0"#);
        assert!(parse_line(&line, 1)
            .unwrap_err()
            .to_string()
            .contains("duplicate frame"));
    }

    #[test]
    fn personal_care_uses_spaced_name() {
        let line = fixture_line().replace("Sports", "Personal Care");
        let r = parse_line(&line, 1).unwrap();
        assert_eq!(r.category, Category::PersonalCare);
        assert!(r
            .to_line()
            .unwrap()
            .contains(r#""category":"Personal Care""#));
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let recs: Vec<_> = (0..10).map(|i| mini(&format!("v{i}"))).collect();
        let s = split_dataset(&recs, [0.8, 0.1, 0.1], 7).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (8, 1, 1));

        let recs: Vec<_> = (0..1000).map(|i| mini(&format!("v{i}"))).collect();
        let s = split_dataset(&recs, [0.8, 0.1, 0.1], 7).unwrap();
        assert_eq!(
            (s.train.len(), s.validation.len(), s.test.len()),
            (800, 100, 100)
        );

        let recs: Vec<_> = (0..7).map(|i| mini(&format!("v{i}"))).collect();
        let s = split_dataset(&recs, [0.5, 0.25, 0.25], 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (5, 1, 1));
    }

    #[test]
    fn split_is_deterministic_partition() {
        let recs: Vec<_> = (0..50).map(|i| mini(&format!("v{i}"))).collect();
        let a = split_dataset(&recs, [0.8, 0.1, 0.1], 11).unwrap();
        let b = split_dataset(&recs, [0.8, 0.1, 0.1], 11).unwrap();
        assert_eq!(a, b);
        let mut ids: Vec<_> = a
            .train
            .iter()
            .chain(&a.validation)
            .chain(&a.test)
            .map(|r| r.video_id.clone())
            .collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 50);
    }

    #[test]
    fn split_errors() {
        let recs = vec![mini("a"), mini("b")];
        assert!(split_dataset(&recs, [0.8, 0.1, 0.1], 0).is_err());
        assert!(split_dataset(&recs, [0.5, 0.1, 0.1], 0).is_err());
        assert!(split_dataset(&[mini("a"), mini("a"), mini("b")], [0.8, 0.1, 0.1], 0).is_err());
    }
}
