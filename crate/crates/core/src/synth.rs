//! Generator for planted-causality datasets.
//!
//! Each video has one causal relation. Cause and effect share a cue word in
//! their captions and a cue object in their canonical frames. Two decoys
//! carry only one of the two (the cue word in the caption, or the cue object
//! in the frame) and a fifth event carries neither, so each modality alone
//! leaves a tie that only the combination resolves. Roles are assigned to
//! time slots at random with the cause always before the effect.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::data::{Category, DetectedObject, EventAnnotation, FrameObservation, VideoRecord};
use crate::seed::component_rng;

const CUE_WORDS: [&str; 2] = ["splash", "spark"];
const CUE_OBJECTS: [&str; 2] = ["ball", "kite"];
const ACTORS: [&str; 5] = ["person", "man", "woman", "child", "dog"];
const VERBS: [&str; 10] = [
    "moves", "waits", "turns", "looks", "stands", "walks", "reaches", "holds", "steps", "leans",
];
const FILLER_WORDS: [&str; 8] = [
    "around", "calmly", "alone", "later", "first", "twice", "here", "still",
];
const FILLER_OBJECTS: [&str; 12] = [
    "chair", "table", "tree", "bag", "cup", "car", "door", "bench", "window", "sign", "plant",
    "box",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlantedConfig {
    pub videos: usize,
    /// At least 5; events beyond the five roles carry no cue.
    pub events_per_video: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            videos: 200,
            events_per_video: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Cause,
    Effect,
    WordDecoy,
    ObjectDecoy,
    Neutral,
}

impl Role {
    fn has_word(self) -> bool {
        matches!(self, Role::Cause | Role::Effect | Role::WordDecoy)
    }

    fn has_object(self) -> bool {
        matches!(self, Role::Cause | Role::Effect | Role::ObjectDecoy)
    }
}

fn confidence<R: Rng>(rng: &mut R) -> f64 {
    (rng.random_range(30..100) as f64) / 100.0
}

fn planted_event<R: Rng>(
    rng: &mut R,
    slot: usize,
    word: Option<&str>,
    object: Option<&str>,
    next_frame: &mut usize,
) -> (EventAnnotation, Vec<FrameObservation>) {
    let actor = *ACTORS.choose(rng).unwrap();
    let verb = *VERBS.choose(rng).unwrap();
    let word = word.unwrap_or_else(|| FILLER_WORDS.choose(rng).unwrap());
    let start = 2.0 * slot as f64;
    let event = EventAnnotation {
        event_id: format!("e{slot}"),
        caption: format!("The {actor} {word}."),
        clause: format!("the {actor} {verb}"),
        start_s: start,
        end_s: start + 1.8,
        canonical_frame: None,
    };
    let mut fillers: Vec<&str> = FILLER_OBJECTS.to_vec();
    fillers.shuffle(rng);
    let activity = format!("{actor} {verb}");
    // An establishing shot without the actor, then the matching frame.
    let wide = FrameObservation {
        frame_index: *next_frame,
        timestamp_s: start + 0.4,
        objects: fillers[..2]
            .iter()
            .map(|l| DetectedObject::new(*l, confidence(rng)))
            .collect(),
        activities: vec![format!("{} in view", fillers[0]), activity.clone()],
    };
    let mut objects = vec![
        DetectedObject::new(actor, confidence(rng)),
        DetectedObject::new(object.unwrap_or(fillers[4]), confidence(rng)),
    ];
    objects.shuffle(rng);
    let close = FrameObservation {
        frame_index: *next_frame + 1,
        timestamp_s: start + 1.2,
        objects,
        activities: vec![
            activity,
            format!("{actor} looks around"),
            format!("{actor} stands near {}", fillers[2]),
        ],
    };
    *next_frame += 2;
    (event, vec![wide, close])
}

pub fn planted_dataset(config: PlantedConfig) -> Vec<VideoRecord> {
    assert!(
        config.events_per_video >= 5,
        "planted videos need at least 5 events"
    );
    let mut rng = component_rng(config.seed, "planted-dataset");
    (0..config.videos)
        .map(|v| {
            let word = *CUE_WORDS.choose(&mut rng).unwrap();
            let object = *CUE_OBJECTS.choose(&mut rng).unwrap();
            let mut roles = vec![
                Role::Cause,
                Role::Effect,
                Role::WordDecoy,
                Role::ObjectDecoy,
            ];
            roles.resize(config.events_per_video, Role::Neutral);
            roles.shuffle(&mut rng);
            let c = roles.iter().position(|r| *r == Role::Cause).unwrap();
            let e = roles.iter().position(|r| *r == Role::Effect).unwrap();
            if e < c {
                roles.swap(c, e);
            }
            let (c, e) = (c.min(e), c.max(e));

            let mut frames = Vec::new();
            let mut events = Vec::new();
            let mut next_frame = 0;
            for (slot, role) in roles.iter().enumerate() {
                let (event, f) = planted_event(
                    &mut rng,
                    slot,
                    role.has_word().then_some(word),
                    role.has_object().then_some(object),
                    &mut next_frame,
                );
                events.push(event);
                frames.extend(f);
            }
            VideoRecord {
                video_id: format!("planted-{v:04}"),
                category: Category::ALL[v % Category::ALL.len()],
                frames,
                events,
                causal_relations: vec![(format!("e{c}"), format!("e{e}"))],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_line;
    use crate::detect::FixtureDetector;
    use crate::frames::canonical_frames;

    #[test]
    fn generated_records_validate_and_are_deterministic() {
        let cfg = PlantedConfig {
            videos: 12,
            events_per_video: 6,
            seed: 3,
        };
        let a = planted_dataset(cfg);
        assert_eq!(a, planted_dataset(cfg));
        assert_eq!(a.len(), 12);
        for r in &a {
            assert_eq!(r.events.len(), 6);
            assert_eq!(&parse_line(&r.to_line().unwrap(), 1).unwrap(), r);
        }
    }

    #[test]
    fn canonical_frame_contains_cue_object() {
        let v = &planted_dataset(PlantedConfig {
            videos: 1,
            ..Default::default()
        })[0];
        let frames = canonical_frames(v, &FixtureDetector, Default::default()).unwrap();
        for (i, f) in frames.iter().enumerate() {
            assert_eq!(*f, 2 * i + 1);
        }
    }
}
