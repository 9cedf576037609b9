//! Inputs shared by the criterion benchmarks in `benches/`.

use causal_core::data::EventPair;
use causal_core::frames::build_frame_pairs;
use causal_core::synth::{planted_dataset, PlantedConfig};
use causal_core::{FixtureDetector, VideoRecord};

pub fn planted(videos: usize) -> Vec<VideoRecord> {
    planted_dataset(PlantedConfig {
        videos,
        events_per_video: 5,
        seed: 0,
    })
}

/// Gold pairs of a planted dataset with canonical frames attached.
pub fn planted_pairs(videos: usize) -> Vec<EventPair> {
    planted(videos)
        .iter()
        .flat_map(|v| {
            build_frame_pairs(v, &FixtureDetector, Default::default())
                .expect("planted data is valid")
        })
        .collect()
}
