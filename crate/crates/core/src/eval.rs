//! Ranking evaluation: candidate pools, Recall@N per category, random-guess
//! baselines and the modality ablation harness.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{
    Category, DatasetSplit, EventAnnotation, EventPair, FrameObservation, VideoRecord,
};
use crate::detect::ObjectDetector;
use crate::encoding::TextEncoder;
use crate::error::{Error, Result};
use crate::frames::{canonical_frames, FrameSelectOptions};
use crate::model::{AblationMode, ClassifierInput, FusionScorer, ModelParams, PairScorer};
use crate::train::{train_with, TrainHistory, TrainingConfig};

pub const REPORT_SCHEMA: u32 = 1;
pub const RECALL_CUTOFFS: [usize; 3] = [1, 5, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolPolicy {
    /// Other events of the cause's own video.
    Video,
    /// All events of same-category videos.
    #[default]
    Category,
    /// All events.
    Global,
}

impl PoolPolicy {
    pub fn name(self) -> &'static str {
        match self {
            PoolPolicy::Video => "video",
            PoolPolicy::Category => "category",
            PoolPolicy::Global => "global",
        }
    }
}

impl fmt::Display for PoolPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PoolPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "video" => Ok(PoolPolicy::Video),
            "category" => Ok(PoolPolicy::Category),
            "global" => Ok(PoolPolicy::Global),
            _ => Err(Error::Config(format!("unknown pool policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub video_id: String,
    pub event: EventAnnotation,
    pub frame: FrameObservation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingQuery {
    pub video_id: String,
    pub category: Category,
    pub cause: EventAnnotation,
    pub cause_frame: FrameObservation,
    /// Sorted by (video_id, event_id).
    pub candidates: Vec<Candidate>,
    /// Indices into `candidates` of the cause's gold effects.
    pub gold: Vec<usize>,
}

impl RankingQuery {
    pub fn pair(&self, candidate: usize) -> EventPair {
        let c = &self.candidates[candidate];
        EventPair {
            cause_video: self.video_id.clone(),
            effect_video: c.video_id.clone(),
            cause: self.cause.clone(),
            effect: c.event.clone(),
            frame_cause: self.cause_frame.clone(),
            frame_effect: c.frame.clone(),
            label: Some(self.gold.contains(&candidate)),
            temporal_ok: c.video_id != self.video_id
                || self.cause_frame.timestamp_s <= c.frame.timestamp_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSettings {
    pub pool_policy: PoolPolicy,
    /// Keep only same-video candidates that start no earlier than the cause.
    pub temporal_filter: bool,
    pub top_m_objects: usize,
    pub include_activities: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            pool_policy: PoolPolicy::Category,
            temporal_filter: false,
            top_m_objects: 10,
            include_activities: false,
        }
    }
}

impl EvalSettings {
    pub fn frame_options(&self) -> FrameSelectOptions {
        FrameSelectOptions {
            include_activities: self.include_activities,
        }
    }
}

/// One query per gold relation; the candidate pool follows `policy` and
/// always holds every gold effect of the cause.
pub fn build_queries(
    videos: &[VideoRecord],
    detector: &dyn ObjectDetector,
    settings: &EvalSettings,
) -> Result<Vec<RankingQuery>> {
    let mut sorted: Vec<&VideoRecord> = videos.iter().collect();
    sorted.sort_by(|a, b| a.video_id.cmp(&b.video_id));

    let mut all: Vec<(usize, Candidate)> = Vec::new();
    for (vi, video) in sorted.iter().enumerate() {
        let frames = canonical_frames(video, detector, settings.frame_options())?;
        for (event, fi) in video.events.iter().zip(frames) {
            let frame = video.frame(fi).cloned().ok_or_else(|| {
                Error::schema(
                    &video.video_id,
                    "events.canonical_frame",
                    format!("unknown frame {fi}"),
                )
            })?;
            all.push((
                vi,
                Candidate {
                    video_id: video.video_id.clone(),
                    event: event.clone(),
                    frame,
                },
            ));
        }
    }
    all.sort_by(|a, b| {
        (a.1.video_id.as_str(), a.1.event.event_id.as_str())
            .cmp(&(b.1.video_id.as_str(), b.1.event.event_id.as_str()))
    });

    let mut queries = Vec::new();
    for (vi, video) in sorted.iter().enumerate() {
        for (cause_id, _) in &video.causal_relations {
            let (_, cause) = all
                .iter()
                .find(|(v, c)| *v == vi && &c.event.event_id == cause_id)
                .expect("relation endpoints validated");
            let mut candidates = Vec::new();
            let mut gold = Vec::new();
            for (cv, cand) in &all {
                let same_video = *cv == vi;
                if same_video && &cand.event.event_id == cause_id {
                    continue;
                }
                let is_gold = same_video && video.is_gold(cause_id, &cand.event.event_id);
                let in_pool = match settings.pool_policy {
                    PoolPolicy::Video => same_video,
                    PoolPolicy::Category => sorted[*cv].category == video.category,
                    PoolPolicy::Global => true,
                };
                let too_early = settings.temporal_filter
                    && same_video
                    && cand.event.start_s < cause.event.start_s;
                if is_gold || (in_pool && !too_early) {
                    if is_gold {
                        gold.push(candidates.len());
                    }
                    candidates.push(cand.clone());
                }
            }
            if candidates.len() < 2 {
                return Err(Error::Ranking(format!(
                    "pool for cause {cause_id} in video {} has fewer than 2 candidates",
                    video.video_id
                )));
            }
            queries.push(RankingQuery {
                video_id: video.video_id.clone(),
                category: video.category,
                cause: cause.event.clone(),
                cause_frame: cause.frame.clone(),
                candidates,
                gold,
            });
        }
    }
    Ok(queries)
}

/// Candidate indices by descending score; equal scores keep pool order.
pub fn rank_by_scores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

pub fn rank_candidates(scorer: &dyn PairScorer, query: &RankingQuery) -> Result<Vec<usize>> {
    let scores = (0..query.candidates.len())
        .map(|i| scorer.score_pair(&query.pair(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_by_scores(&scores))
}

pub fn is_hit(gold: &[usize], ranking: &[usize], n: usize) -> bool {
    ranking.iter().take(n).any(|i| gold.contains(i))
}

/// Percentage of queries with a gold candidate in the top `n`.
pub fn recall_at_n(queries: &[RankingQuery], rankings: &[Vec<usize>], n: usize) -> Result<f64> {
    let golds: Vec<&[usize]> = queries.iter().map(|q| q.gold.as_slice()).collect();
    recall_at_n_gold(&golds, rankings, n)
}

pub fn recall_at_n_gold(golds: &[&[usize]], rankings: &[Vec<usize>], n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::Ranking("N must be at least 1".into()));
    }
    if golds.len() != rankings.len() {
        return Err(Error::Ranking("rankings not aligned with queries".into()));
    }
    if golds.is_empty() {
        return Err(Error::Ranking("no queries".into()));
    }
    let hits = golds
        .iter()
        .zip(rankings)
        .filter(|(g, r)| is_hit(g, r, n))
        .count();
    Ok(100.0 * hits as f64 / golds.len() as f64)
}

/// Probability that a uniform shuffle of `pool` candidates puts at least
/// one of `gold` of them in the top `n`.
pub fn analytic_recall(pool: usize, gold: usize, n: usize) -> f64 {
    if gold == 0 {
        return 0.0;
    }
    let n = n.min(pool);
    if n + gold > pool {
        return 1.0;
    }
    // 1 - C(pool - gold, n) / C(pool, n)
    let miss: f64 = (0..n)
        .map(|i| (pool - gold - i) as f64 / (pool - i) as f64)
        .product();
    1.0 - miss
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomBaseline {
    pub analytic: f64,
    pub empirical: f64,
}

/// Random-guess Recall@N for single-gold queries with the given pool sizes,
/// in percent: exact expectation plus a Monte-Carlo estimate.
pub fn random_baseline<R: Rng>(
    pool_sizes: &[usize],
    n: usize,
    trials: usize,
    rng: &mut R,
) -> RandomBaseline {
    let q = pool_sizes.len().max(1) as f64;
    let analytic = 100.0
        * pool_sizes
            .iter()
            .map(|&k| analytic_recall(k, 1, n))
            .sum::<f64>()
        / q;
    let mut hits = 0usize;
    let mut ranking = Vec::new();
    for _ in 0..trials {
        for &k in pool_sizes {
            ranking.clear();
            ranking.extend(0..k);
            ranking.shuffle(rng);
            if is_hit(&[0], &ranking, n) {
                hits += 1;
            }
        }
    }
    let empirical = 100.0 * hits as f64 / (q * trials.max(1) as f64);
    RandomBaseline {
        analytic,
        empirical,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallRow {
    #[serde(rename = "R@1")]
    pub r1: f64,
    #[serde(rename = "R@5")]
    pub r5: f64,
    #[serde(rename = "R@10")]
    pub r10: f64,
    pub queries: usize,
}

/// One value per category plus Overall; absent categories had no queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryTable {
    #[serde(rename = "Sports")]
    pub sports: Option<RecallRow>,
    #[serde(rename = "Socializing")]
    pub socializing: Option<RecallRow>,
    #[serde(rename = "Household")]
    pub household: Option<RecallRow>,
    #[serde(rename = "Personal Care")]
    pub personal_care: Option<RecallRow>,
    #[serde(rename = "Eating")]
    pub eating: Option<RecallRow>,
    #[serde(rename = "Overall")]
    pub overall: Option<RecallRow>,
}

impl CategoryTable {
    pub fn get(&self, category: Category) -> Option<&RecallRow> {
        match category {
            Category::Sports => self.sports.as_ref(),
            Category::Socializing => self.socializing.as_ref(),
            Category::Household => self.household.as_ref(),
            Category::PersonalCare => self.personal_care.as_ref(),
            Category::Eating => self.eating.as_ref(),
        }
    }

    fn slot(&mut self, category: Category) -> &mut Option<RecallRow> {
        match category {
            Category::Sports => &mut self.sports,
            Category::Socializing => &mut self.socializing,
            Category::Household => &mut self.household,
            Category::PersonalCare => &mut self.personal_care,
            Category::Eating => &mut self.eating,
        }
    }

    /// Rows in display order, named.
    pub fn rows(&self) -> Vec<(&'static str, Option<&RecallRow>)> {
        let mut out: Vec<_> = Category::ALL
            .iter()
            .map(|c| (c.name(), self.get(*c)))
            .collect();
        out.push(("Overall", self.overall.as_ref()));
        out
    }

    /// Builds a table from per-query hit indicators for each cutoff.
    fn from_hits(per_query: &[(Category, [f64; 3])]) -> Self {
        let row = |items: &[&[f64; 3]]| -> Option<RecallRow> {
            if items.is_empty() {
                return None;
            }
            let n = items.len() as f64;
            let pct = |k: usize| 100.0 * items.iter().map(|h| h[k]).sum::<f64>() / n;
            Some(RecallRow {
                r1: pct(0),
                r5: pct(1),
                r10: pct(2),
                queries: items.len(),
            })
        };
        let mut table = CategoryTable {
            sports: None,
            socializing: None,
            household: None,
            personal_care: None,
            eating: None,
            overall: row(&per_query.iter().map(|(_, h)| h).collect::<Vec<_>>()),
        };
        for c in Category::ALL {
            let items: Vec<_> = per_query
                .iter()
                .filter(|(qc, _)| *qc == c)
                .map(|(_, h)| h)
                .collect();
            *table.slot(c) = row(&items);
        }
        table
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub model: String,
    pub ablation_mode: Option<AblationMode>,
    pub classifier_input: Option<ClassifierInput>,
    pub settings: EvalSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub config: ReportConfig,
    pub recall: CategoryTable,
    /// Exact random-guess expectation over the same pools.
    pub random_guess: CategoryTable,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Plain-text table: one block of R@1/R@5/R@10 lines per model row.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "model: {}  pool: {}  top-m: {}",
            self.config.model, self.config.settings.pool_policy, self.config.settings.top_m_objects
        );
        render_table(
            &mut out,
            &[
                ("Random guess", &self.random_guess),
                (self.config.model.as_str(), &self.recall),
            ],
        );
        out
    }
}

fn render_table(out: &mut String, blocks: &[(&str, &CategoryTable)]) {
    let header: Vec<&str> = Category::ALL
        .iter()
        .map(|c| c.name())
        .chain(["Overall"])
        .collect();
    let name_w = blocks
        .iter()
        .map(|(n, _)| n.len())
        .max()
        .unwrap_or(5)
        .max(5);
    let _ = write!(out, "{:<name_w$}  {:<6}", "Model", "Metric");
    for h in &header {
        let _ = write!(out, "  {h:>13}");
    }
    out.push('\n');
    for (name, table) in blocks {
        for (k, cut) in RECALL_CUTOFFS.iter().enumerate() {
            let label = if k == 0 { *name } else { "" };
            let _ = write!(out, "{label:<name_w$}  {:<6}", format!("R@{cut}"));
            for (_, row) in table.rows() {
                match row {
                    Some(r) => {
                        let v = [r.r1, r.r5, r.r10][k];
                        let _ = write!(out, "  {v:>13.2}");
                    }
                    None => {
                        let _ = write!(out, "  {:>13}", "-");
                    }
                }
            }
            out.push('\n');
        }
    }
}

/// Ranks every query with `scorer` and tabulates Recall@{1,5,10}.
pub fn evaluate(
    scorer: &dyn PairScorer,
    model: ReportConfig,
    videos: &[VideoRecord],
    detector: &dyn ObjectDetector,
) -> Result<EvalReport> {
    let queries = build_queries(videos, detector, &model.settings)?;
    if queries.is_empty() {
        return Err(Error::Ranking("no gold relations to evaluate".into()));
    }
    let mut hits = Vec::with_capacity(queries.len());
    let mut chance = Vec::with_capacity(queries.len());
    for q in &queries {
        let ranking = rank_candidates(scorer, q)?;
        let h = RECALL_CUTOFFS.map(|n| {
            if is_hit(&q.gold, &ranking, n) {
                1.0
            } else {
                0.0
            }
        });
        let c = RECALL_CUTOFFS.map(|n| analytic_recall(q.candidates.len(), q.gold.len(), n));
        hits.push((q.category, h));
        chance.push((q.category, c));
    }
    Ok(EvalReport {
        schema: REPORT_SCHEMA,
        config: model,
        recall: CategoryTable::from_hits(&hits),
        random_guess: CategoryTable::from_hits(&chance),
    })
}

pub fn evaluate_model(
    params: &ModelParams,
    encoder: &dyn TextEncoder,
    detector: &dyn ObjectDetector,
    videos: &[VideoRecord],
    settings: &EvalSettings,
) -> Result<EvalReport> {
    let scorer = FusionScorer {
        params,
        encoder,
        detector,
        top_m: settings.top_m_objects,
    };
    let config = ReportConfig {
        model: format!("fusion/{}", params.ablation_mode),
        ablation_mode: Some(params.ablation_mode),
        classifier_input: Some(params.classifier_input),
        settings: *settings,
    };
    evaluate(&scorer, config, videos, detector)
}

/// Scores gold relations 1 and everything else 0.
#[derive(Debug, Clone, Default)]
pub struct OracleScorer {
    gold: HashMap<(String, String), Vec<String>>,
}

impl OracleScorer {
    pub fn new(videos: &[VideoRecord]) -> Self {
        let mut gold: HashMap<(String, String), Vec<String>> = HashMap::new();
        for v in videos {
            for (c, e) in &v.causal_relations {
                gold.entry((v.video_id.clone(), c.clone()))
                    .or_default()
                    .push(e.clone());
            }
        }
        Self { gold }
    }
}

impl PairScorer for OracleScorer {
    fn score_pair(&self, pair: &EventPair) -> Result<f64> {
        let hit = pair.cause_video == pair.effect_video
            && self
                .gold
                .get(&(pair.cause_video.clone(), pair.cause.event_id.clone()))
                .is_some_and(|effects| effects.contains(&pair.effect.event_id));
        Ok(if hit { 1.0 } else { 0.0 })
    }
}

pub struct AblationRun {
    pub report: EvalReport,
    pub history: TrainHistory,
    pub params: ModelParams,
}

/// Trains with `mode` wired through the model and evaluates on the test
/// split; every other setting and seed is shared.
pub fn run_ablation(
    mode: AblationMode,
    split: &DatasetSplit,
    encoder: &dyn TextEncoder,
    detector: &dyn ObjectDetector,
    config: &TrainingConfig,
    settings: &EvalSettings,
) -> Result<AblationRun> {
    let config = TrainingConfig {
        ablation_mode: mode,
        ..config.clone()
    };
    let (params, history) =
        train_with(split, encoder, detector, settings.frame_options(), &config)?;
    let report = evaluate_model(&params, encoder, detector, &split.test, settings)?;
    Ok(AblationRun {
        report,
        history,
        params,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub full: EvalReport,
    pub no_visual: EvalReport,
    pub no_lingual: EvalReport,
    /// Overall R@N of each ablation minus the full model's.
    pub delta_vs_full: HashMap<AblationMode, [f64; 3]>,
}

impl AblationReport {
    pub fn new(full: EvalReport, no_visual: EvalReport, no_lingual: EvalReport) -> Self {
        let overall = |r: &EvalReport| r.recall.overall.map_or([0.0; 3], |o| [o.r1, o.r5, o.r10]);
        let base = overall(&full);
        let delta = |r: &EvalReport| {
            let o = overall(r);
            [o[0] - base[0], o[1] - base[1], o[2] - base[2]]
        };
        let mut delta_vs_full = HashMap::new();
        delta_vs_full.insert(AblationMode::Full, [0.0; 3]);
        delta_vs_full.insert(AblationMode::NoVisual, delta(&no_visual));
        delta_vs_full.insert(AblationMode::NoLingual, delta(&no_lingual));
        Self {
            full,
            no_visual,
            no_lingual,
            delta_vs_full,
        }
    }

    pub fn rows(&self) -> [(AblationMode, &EvalReport); 3] {
        [
            (AblationMode::Full, &self.full),
            (AblationMode::NoVisual, &self.no_visual),
            (AblationMode::NoLingual, &self.no_lingual),
        ]
    }

    pub fn to_json(&self) -> Result<String> {
        // HashMap order is not stable; write the deltas as an ordered list.
        #[derive(Serialize)]
        struct Ordered<'a> {
            full: &'a EvalReport,
            no_visual: &'a EvalReport,
            no_lingual: &'a EvalReport,
            delta_vs_full: Vec<(AblationMode, [f64; 3])>,
        }
        let ordered = Ordered {
            full: &self.full,
            no_visual: &self.no_visual,
            no_lingual: &self.no_lingual,
            delta_vs_full: AblationMode::ALL
                .iter()
                .map(|m| (*m, self.delta_vs_full[m]))
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&ordered)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let blocks: Vec<(&str, &CategoryTable)> =
            std::iter::once(("Random guess", &self.full.random_guess))
                .chain(self.rows().iter().map(|(m, r)| (m.name(), &r.recall)))
                .collect();
        render_table(&mut out, &blocks);
        out.push_str("\nOverall delta vs full (R@1, R@5, R@10)\n");
        for m in AblationMode::ALL {
            let d = self.delta_vs_full[&m];
            let _ = writeln!(
                out,
                "{:<10}  {:>+8.2}  {:>+8.2}  {:>+8.2}",
                m.name(),
                d[0],
                d[1],
                d[2]
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DetectedObject;
    use crate::detect::FixtureDetector;

    fn video(
        id: &str,
        category: Category,
        n_events: usize,
        relations: &[(usize, usize)],
    ) -> VideoRecord {
        VideoRecord {
            video_id: id.into(),
            category,
            frames: (0..n_events)
                .map(|i| FrameObservation {
                    frame_index: i,
                    timestamp_s: i as f64 + 0.5,
                    objects: vec![DetectedObject::new(format!("o{i}"), 0.5)],
                    activities: vec![],
                })
                .collect(),
            events: (0..n_events)
                .map(|i| EventAnnotation {
                    event_id: format!("e{i}"),
                    caption: format!("thing {i}"),
                    clause: format!("thing {i}"),
                    start_s: i as f64,
                    end_s: i as f64 + 1.0,
                    canonical_frame: None,
                })
                .collect(),
            causal_relations: relations
                .iter()
                .map(|(c, e)| (format!("e{c}"), format!("e{e}")))
                .collect(),
        }
    }

    fn settings(policy: PoolPolicy) -> EvalSettings {
        EvalSettings {
            pool_policy: policy,
            ..Default::default()
        }
    }

    #[test]
    fn video_policy_pool() {
        let v = video("v", Category::Sports, 4, &[(0, 1)]);
        let q = build_queries(&[v], &FixtureDetector, &settings(PoolPolicy::Video)).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q[0].candidates.len(), 3);
        assert_eq!(q[0].candidates[q[0].gold[0]].event.event_id, "e1");
    }

    #[test]
    fn category_and_global_pools() {
        let vids = vec![
            video("b", Category::Sports, 3, &[(0, 2)]),
            video("a", Category::Sports, 3, &[]),
            video("c", Category::Eating, 3, &[]),
        ];
        let q = build_queries(&vids, &FixtureDetector, &settings(PoolPolicy::Category)).unwrap();
        assert_eq!(q[0].candidates.len(), 5);
        assert_eq!(q[0].candidates[0].video_id, "a");
        let q = build_queries(&vids, &FixtureDetector, &settings(PoolPolicy::Global)).unwrap();
        assert_eq!(q[0].candidates.len(), 8);
        let golds: Vec<_> = q[0].gold.iter().map(|&g| &q[0].candidates[g]).collect();
        assert_eq!(golds.len(), 1);
        assert_eq!(
            (golds[0].video_id.as_str(), golds[0].event.event_id.as_str()),
            ("b", "e2")
        );
    }

    #[test]
    fn temporal_filter_drops_earlier_same_video_events() {
        let v = video("v", Category::Sports, 4, &[(2, 3)]);
        let s = EvalSettings {
            temporal_filter: true,
            ..settings(PoolPolicy::Video)
        };
        assert!(build_queries(&[v], &FixtureDetector, &s).is_err());
        let v2 = video("w", Category::Sports, 5, &[(1, 3)]);
        let q = build_queries(&[v2], &FixtureDetector, &s).unwrap();
        let ids: Vec<_> = q[0]
            .candidates
            .iter()
            .map(|c| c.event.event_id.as_str())
            .collect();
        assert_eq!(ids, ["e2", "e3", "e4"]);
    }

    #[test]
    fn tiny_pool_is_an_error() {
        let v = video("v", Category::Sports, 2, &[(0, 1)]);
        assert!(build_queries(&[v], &FixtureDetector, &settings(PoolPolicy::Video)).is_err());
    }

    #[test]
    fn sorting_and_ties() {
        assert_eq!(rank_by_scores(&[0.1, 0.9, 0.4]), vec![1, 2, 0]);
        assert_eq!(rank_by_scores(&[0.3, 0.3, 0.3]), vec![0, 1, 2]);
    }

    #[test]
    fn recall_hand_counts() {
        // Gold ranks 1, 6 and 11 in pools of 12.
        let golds: Vec<Vec<usize>> = vec![vec![0], vec![5], vec![10]];
        let rankings: Vec<Vec<usize>> = vec![(0..12).collect(); 3];
        let g: Vec<&[usize]> = golds.iter().map(|g| g.as_slice()).collect();
        let r = |n| recall_at_n_gold(&g, &rankings, n).unwrap();
        assert!((r(1) - 100.0 / 3.0).abs() < 1e-9);
        assert!((r(5) - 100.0 / 3.0).abs() < 1e-9);
        assert!((r(10) - 200.0 / 3.0).abs() < 1e-9);
        assert!(recall_at_n_gold(&g, &rankings, 0).is_err());
        // Rank 7 counts for R@10 but not R@5.
        assert!(!is_hit(&[6], &rankings[0], 5));
        assert!(is_hit(&[6], &rankings[0], 10));
    }

    #[test]
    fn analytic_recall_values() {
        assert!((analytic_recall(10, 1, 5) - 0.5).abs() < 1e-15);
        assert!((100.0 * analytic_recall(47, 1, 1) - 2.127_659_574_468_085).abs() < 1e-12);
        assert_eq!(analytic_recall(3, 1, 10), 1.0);
        // Two gold among four, top one: 1/2.
        assert!((analytic_recall(4, 2, 1) - 0.5).abs() < 1e-15);
        // Two gold among four, top two: 1 - C(2,2)/C(4,2) = 5/6.
        assert!((analytic_recall(4, 2, 2) - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn oracle_scores_perfectly() {
        let vids = vec![
            video("a", Category::Sports, 4, &[(0, 1)]),
            video("b", Category::Eating, 4, &[(1, 3), (0, 2)]),
        ];
        let cfg = ReportConfig {
            model: "oracle".into(),
            ablation_mode: None,
            classifier_input: None,
            settings: settings(PoolPolicy::Global),
        };
        let report = evaluate(&OracleScorer::new(&vids), cfg, &vids, &FixtureDetector).unwrap();
        for (name, row) in report.recall.rows() {
            match name {
                "Sports" | "Eating" | "Overall" => {
                    let r = row.unwrap();
                    assert_eq!((r.r1, r.r5, r.r10), (100.0, 100.0, 100.0));
                }
                _ => assert!(row.is_none(), "{name} should be absent"),
            }
        }
        assert_eq!(report.recall.overall.unwrap().queries, 3);
        let text = report.to_text();
        assert!(text.contains("Random guess") && text.contains("Personal Care"));
        assert!(report.to_json().unwrap().contains("\"R@10\""));
    }
}
