//! Detector interfaces. Pretrained detectors plug in behind these traits;
//! the built-in fixture detector replays detections stored in the dataset.

use std::cmp::Ordering;

use crate::data::{DetectedObject, FrameObservation};

pub trait ObjectDetector: Send + Sync {
    /// All detections for a frame, highest confidence first.
    fn detect(&self, frame: &FrameObservation) -> Vec<DetectedObject>;
}

pub trait ActivityDetector: Send + Sync {
    /// At most `k` activity labels, best first.
    fn top_activities(&self, frame: &FrameObservation, k: usize) -> Vec<String>;
}

/// Replays the detections recorded on each frame of the dataset.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixtureDetector;

impl ObjectDetector for FixtureDetector {
    fn detect(&self, frame: &FrameObservation) -> Vec<DetectedObject> {
        frame.objects.clone()
    }
}

impl ActivityDetector for FixtureDetector {
    fn top_activities(&self, frame: &FrameObservation, k: usize) -> Vec<String> {
        frame.activities.iter().take(k).cloned().collect()
    }
}

/// Descending confidence, then ascending label.
pub fn detection_order(a: &DetectedObject, b: &DetectedObject) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| a.label.cmp(&b.label))
}

pub fn detect_objects_topm(
    detector: &dyn ObjectDetector,
    frame: &FrameObservation,
    m: usize,
) -> Vec<DetectedObject> {
    let mut objects = detector.detect(frame);
    objects.sort_by(detection_order);
    objects.truncate(m);
    objects
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(objects: Vec<DetectedObject>) -> FrameObservation {
        FrameObservation {
            frame_index: 0,
            timestamp_s: 0.0,
            objects,
            activities: vec!["a".into(), "b".into()],
        }
    }

    #[test]
    fn keeps_top_ten_of_twelve() {
        let objs: Vec<_> = (0..12)
            .map(|i| DetectedObject::new(format!("o{i:02}"), i as f64 / 12.0))
            .collect();
        let top = detect_objects_topm(&FixtureDetector, &frame(objs), 10);
        assert_eq!(top.len(), 10);
        assert_eq!(top[0].label, "o11");
        assert_eq!(top[9].label, "o02");
    }

    #[test]
    fn returns_all_when_fewer_than_m() {
        let objs = vec![
            DetectedObject::new("a", 0.1),
            DetectedObject::new("b", 0.4),
            DetectedObject::new("c", 0.3),
        ];
        let top = detect_objects_topm(&FixtureDetector, &frame(objs), 10);
        let labels: Vec<_> = top.iter().map(|o| o.label.as_str()).collect();
        assert_eq!(labels, ["b", "c", "a"]);
    }

    #[test]
    fn confidence_ties_break_by_label() {
        let objs = vec![
            DetectedObject::new("cat", 0.7),
            DetectedObject::new("ant", 0.7),
        ];
        let top = detect_objects_topm(&FixtureDetector, &frame(objs), 10);
        assert_eq!(top[0].label, "ant");
    }

    #[test]
    fn fixture_passthrough_and_activity_truncation() {
        let f = frame(vec![
            DetectedObject::new("z", 0.1),
            DetectedObject::new("y", 0.9),
        ]);
        assert_eq!(FixtureDetector.detect(&f), f.objects);
        assert_eq!(FixtureDetector.top_activities(&f, 1), vec!["a".to_string()]);
        assert_eq!(FixtureDetector.top_activities(&f, 5).len(), 2);
    }

    proptest! {
        #[test]
        fn topm_is_prefix_of_full_order(
            confs in proptest::collection::vec((0u8..5, 0u8..6), 0..20),
            m in 1usize..25,
        ) {
            let objs: Vec<_> = confs
                .iter()
                .map(|(l, c)| DetectedObject::new(format!("l{l}"), *c as f64 / 5.0))
                .collect();
            let f = frame(objs.clone());
            let mut full = objs;
            full.sort_by(detection_order);
            let top = detect_objects_topm(&FixtureDetector, &f, m);
            prop_assert_eq!(&top[..], &full[..m.min(full.len())]);
        }
    }
}
