//! Explanation prompts and rationales for scored event pairs.
//!
//! A prompt holds a question built from the effect event, three activity
//! choices read off the cause frame, and the generation context
//! `"<q>, <c0>, <c1> or <c2>? commonsense says "`. Rationales come from a
//! pluggable generator; the default fills a fixed template.

use serde::Serialize;

use crate::data::{EventPair, FrameObservation};
use crate::detect::ActivityDetector;
use crate::error::{Error, Result};
use crate::model::classify;

pub const NEGATIVE_RATIONALE: &str = "No causal rationalization since events are not causal.";
pub const PADDING_CHOICE: &str = "none";
pub const NUM_CHOICES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RationalePrompt {
    pub question: String,
    pub choices: [String; NUM_CHOICES],
    pub answer: Option<String>,
    pub context: String,
}

impl RationalePrompt {
    pub fn new(question: String, choices: [String; NUM_CHOICES], answer: Option<String>) -> Self {
        let context = format!(
            "{question}, {}, {} or {}? commonsense says ",
            choices[0], choices[1], choices[2]
        );
        Self {
            question,
            choices,
            answer,
            context,
        }
    }

    /// Choices joined by ", ".
    pub fn choices_line(&self) -> String {
        self.choices.join(", ")
    }

    pub fn context_tokens(&self) -> Vec<String> {
        self.context
            .split_whitespace()
            .map(str::to_string)
            .collect()
    }
}

/// What a generator knows about the pair besides the prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEvidence<'a> {
    pub cause_clause: &'a str,
    pub effect_clause: &'a str,
    pub score: f64,
    pub is_causal: bool,
}

pub trait RationaleGenerator {
    fn generate(&self, prompt: &RationalePrompt, evidence: &PairEvidence<'_>) -> Result<String>;

    /// Natural-log probability of `next` after `context`. `None` when the
    /// generator has no likelihood model.
    fn token_logprob(&self, _context: &[String], _next: &str) -> Option<f64> {
        None
    }
}

/// Fills the causal template or returns the fixed negative sentence.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateGenerator;

impl RationaleGenerator for TemplateGenerator {
    fn generate(&self, _prompt: &RationalePrompt, evidence: &PairEvidence<'_>) -> Result<String> {
        template_explanation(
            evidence.cause_clause,
            evidence.effect_clause,
            evidence.is_causal,
        )
    }
}

fn strip_period(s: &str) -> &str {
    let s = s.trim();
    s.strip_suffix('.').unwrap_or(s).trim_end()
}

fn with_first_char(s: &str, upper: bool) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if upper => c.to_uppercase().chain(chars).collect(),
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

const DETERMINERS: [&str; 6] = ["the", "a", "an", "this", "that", "his"];

/// Drops a third-person "s" from the verb: the word after the subject, where
/// the subject is the first word after an optional determiner.
fn deconjugate(clause: &str) -> String {
    let mut words: Vec<String> = clause.split_whitespace().map(str::to_string).collect();
    let subject = usize::from(
        words
            .first()
            .is_some_and(|w| DETERMINERS.contains(&w.to_lowercase().as_str())),
    );
    let verb = subject + 1;
    if let Some(w) = words.get_mut(verb) {
        let lower = w.to_lowercase();
        let irregular = ["is", "was", "has", "does", "goes"].contains(&lower.as_str());
        if !irregular && w.len() > 2 && lower.ends_with('s') && !lower.ends_with("ss") {
            w.pop();
        }
    }
    words.join(" ")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QuestionOptions {
    /// Strip the verb's third-person "s" after "Why does".
    pub deconjugate: bool,
}

pub fn build_question(effect: &str, opts: QuestionOptions) -> Result<String> {
    let body = strip_period(effect);
    if body.is_empty() {
        return Err(Error::Rationale("empty clause".into()));
    }
    let mut body = with_first_char(body, false);
    if opts.deconjugate {
        body = deconjugate(&body);
    }
    Ok(format!("Why does {body}?"))
}

pub fn gather_choices(
    frame_cause: &FrameObservation,
    detector: &dyn ActivityDetector,
) -> [String; NUM_CHOICES] {
    let mut found = detector
        .top_activities(frame_cause, NUM_CHOICES)
        .into_iter();
    std::array::from_fn(|_| found.next().unwrap_or_else(|| PADDING_CHOICE.to_string()))
}

pub fn template_explanation(
    cause_clause: &str,
    effect_clause: &str,
    is_causal: bool,
) -> Result<String> {
    if !is_causal {
        return Ok(NEGATIVE_RATIONALE.to_string());
    }
    let (cause, effect) = (strip_period(cause_clause), strip_period(effect_clause));
    if cause.is_empty() || effect.is_empty() {
        return Err(Error::Rationale("empty clause".into()));
    }
    Ok(format!(
        "{} because {}.",
        with_first_char(effect, true),
        with_first_char(cause, false)
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub enum NllOutcome {
    Finite(f64),
    /// The generator gave zero probability to the token at `position`.
    Unreachable {
        position: usize,
        token: String,
    },
}

impl NllOutcome {
    pub fn value(&self) -> f64 {
        match self {
            NllOutcome::Finite(v) => *v,
            NllOutcome::Unreachable { .. } => f64::INFINITY,
        }
    }
}

/// Negative log-likelihood of `explanation` given `context` and, for each
/// position, up to `window` preceding explanation tokens (all of them when
/// `window` is `None`).
pub fn cage_nll(
    generator: &dyn RationaleGenerator,
    context: &[String],
    explanation: &[String],
    window: Option<usize>,
) -> Result<NllOutcome> {
    if explanation.is_empty() {
        return Err(Error::Rationale("empty explanation".into()));
    }
    let mut total = 0.0;
    let mut history = context.to_vec();
    for (i, token) in explanation.iter().enumerate() {
        history.truncate(context.len());
        let start = window.map_or(0, |k| i.saturating_sub(k));
        history.extend_from_slice(&explanation[start..i]);
        let lp = generator
            .token_logprob(&history, token)
            .ok_or_else(|| Error::Rationale("generator exposes no token likelihoods".into()))?;
        if lp == f64::NEG_INFINITY {
            return Ok(NllOutcome::Unreachable {
                position: i,
                token: token.clone(),
            });
        }
        total -= lp;
    }
    Ok(NllOutcome::Finite(total))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RationaleOptions {
    pub threshold: f64,
    pub question: QuestionOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rationale {
    pub prompt: RationalePrompt,
    pub is_causal: bool,
    pub explanation: String,
}

/// Builds the prompt from the effect caption and the cause frame's
/// activities, then asks `generator` for the explanation.
pub fn rationalize(
    pair: &EventPair,
    score: f64,
    opts: RationaleOptions,
    activities: &dyn ActivityDetector,
    generator: &dyn RationaleGenerator,
) -> Result<Rationale> {
    let question = build_question(&pair.effect.caption, opts.question)?;
    let choices = gather_choices(&pair.frame_cause, activities);
    let prompt = RationalePrompt::new(question, choices, None);
    let is_causal = classify(score, opts.threshold);
    let evidence = PairEvidence {
        cause_clause: &pair.cause.clause,
        effect_clause: &pair.effect.clause,
        score,
        is_causal,
    };
    let explanation = generator.generate(&prompt, &evidence)?;
    Ok(Rationale {
        prompt,
        is_causal,
        explanation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::EventAnnotation;
    use crate::detect::FixtureDetector;
    use std::collections::HashMap;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn questions() {
        let q = build_question(
            "The dog jumps to catch the frisbee.",
            QuestionOptions::default(),
        )
        .unwrap();
        assert_eq!(q, "Why does the dog jumps to catch the frisbee?");
        let q = build_question("the rims are shiny", QuestionOptions::default()).unwrap();
        assert_eq!(q, "Why does the rims are shiny?");
        assert!(build_question("", QuestionOptions::default()).is_err());
        assert!(build_question(" . ", QuestionOptions::default()).is_err());
    }

    #[test]
    fn deconjugation_heuristic() {
        let opts = QuestionOptions { deconjugate: true };
        assert_eq!(
            build_question("The dog jumps to catch the frisbee.", opts).unwrap(),
            "Why does the dog jump to catch the frisbee?"
        );
        assert_eq!(
            build_question("girl throws frisbee", opts).unwrap(),
            "Why does girl throw frisbee?"
        );
        assert_eq!(
            build_question("the rims are shiny", opts).unwrap(),
            "Why does the rims are shiny?"
        );
        assert_eq!(
            build_question("the man is talking", opts).unwrap(),
            "Why does the man is talking?"
        );
    }

    #[test]
    fn templates() {
        assert_eq!(
            template_explanation("the girl throws the frisbee", "The dog jumps", true).unwrap(),
            "The dog jumps because the girl throws the frisbee."
        );
        assert_eq!(
            template_explanation("tire shine was applied", "The rims are shiny", true).unwrap(),
            "The rims are shiny because tire shine was applied."
        );
        assert_eq!(
            template_explanation("", "", false).unwrap(),
            NEGATIVE_RATIONALE
        );
        assert!(template_explanation("", "x", true).is_err());
        let s = template_explanation("Cause happened.", "effect happened.", true).unwrap();
        assert_eq!(s, "Effect happened because cause happened.");
        assert_eq!(s.matches(" because ").count(), 1);
        assert!(s.ends_with('.') && !s.ends_with(".."));
    }

    #[test]
    fn choices_pad_with_none() {
        let f = FrameObservation {
            frame_index: 0,
            timestamp_s: 0.0,
            objects: vec![],
            activities: vec!["girl throws frisbee".into()],
        };
        assert_eq!(
            gather_choices(&f, &FixtureDetector),
            ["girl throws frisbee", "none", "none"]
        );
        assert_eq!(
            gather_choices(&f, &FixtureDetector),
            gather_choices(&f, &FixtureDetector)
        );
    }

    #[test]
    fn context_format() {
        let p = RationalePrompt::new(
            "Why does x?".into(),
            ["a".into(), "b".into(), "c".into()],
            None,
        );
        assert_eq!(p.context, "Why does x?, a, b or c? commonsense says ");
    }

    struct Uniform(usize);
    impl RationaleGenerator for Uniform {
        fn generate(&self, _: &RationalePrompt, _: &PairEvidence<'_>) -> Result<String> {
            Ok(String::new())
        }
        fn token_logprob(&self, _: &[String], _: &str) -> Option<f64> {
            Some(-(self.0 as f64).ln())
        }
    }

    /// Puts all mass on the next token of a fixed target sequence.
    struct Scripted {
        context_len: usize,
        target: Vec<String>,
    }
    impl RationaleGenerator for Scripted {
        fn generate(&self, _: &RationalePrompt, _: &PairEvidence<'_>) -> Result<String> {
            Ok(self.target.join(" "))
        }
        fn token_logprob(&self, context: &[String], next: &str) -> Option<f64> {
            let pos = context.len() - self.context_len;
            Some(if self.target.get(pos).map(String::as_str) == Some(next) {
                0.0
            } else {
                f64::NEG_INFINITY
            })
        }
    }

    /// P(next | last token) from a table; unseen pairs get zero mass.
    struct Bigram(HashMap<(&'static str, &'static str), f64>);
    impl RationaleGenerator for Bigram {
        fn generate(&self, _: &RationalePrompt, _: &PairEvidence<'_>) -> Result<String> {
            Ok(String::new())
        }
        fn token_logprob(&self, context: &[String], next: &str) -> Option<f64> {
            let last = context.last().map(String::as_str).unwrap_or("");
            Some(
                self.0
                    .iter()
                    .find(|((a, b), _)| *a == last && *b == next)
                    .map_or(f64::NEG_INFINITY, |(_, p)| p.ln()),
            )
        }
    }

    #[test]
    fn nll_closed_forms() {
        let ctx = toks("why does x ? commonsense says");
        let expl = toks("x because y .");
        let nll = cage_nll(&Uniform(50), &ctx, &expl, None).unwrap().value();
        assert!((nll - 4.0 * 50f64.ln()).abs() < 1e-9);

        let scripted = Scripted {
            context_len: ctx.len(),
            target: expl.clone(),
        };
        assert_eq!(
            cage_nll(&scripted, &ctx, &expl, None).unwrap(),
            NllOutcome::Finite(0.0)
        );
        let wrong = toks("x because z .");
        let out = cage_nll(&scripted, &ctx, &wrong, None).unwrap();
        assert_eq!(
            out,
            NllOutcome::Unreachable {
                position: 2,
                token: "z".into()
            }
        );
        assert_eq!(out.value(), f64::INFINITY);
        assert!(cage_nll(&TemplateGenerator, &ctx, &expl, None).is_err());
        assert!(cage_nll(&Uniform(3), &ctx, &[], None).is_err());
    }

    #[test]
    fn bigram_fixture_hand_sum() {
        // P(a|says)=0.5, P(b|a)=0.25, P(c|b)=0.8.
        let table = HashMap::from([(("says", "a"), 0.5), (("a", "b"), 0.25), (("b", "c"), 0.8)]);
        let nll = cage_nll(
            &Bigram(table),
            &toks("commonsense says"),
            &toks("a b c"),
            None,
        )
        .unwrap()
        .value();
        // -(ln 0.5 + ln 0.25 + ln 0.8) = ln 2 + ln 4 + ln 1.25 = ln 10
        assert!((nll - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn nll_is_additive_over_segments() {
        let table = HashMap::from([
            (("says", "a"), 0.5),
            (("a", "b"), 0.25),
            (("b", "c"), 0.8),
            (("c", "a"), 0.3),
        ]);
        let g = Bigram(table);
        let ctx = toks("commonsense says");
        let whole = cage_nll(&g, &ctx, &toks("a b c a"), None).unwrap().value();
        let head = cage_nll(&g, &ctx, &toks("a b"), None).unwrap().value();
        let mut ctx2 = ctx.clone();
        ctx2.extend(toks("a b"));
        let tail = cage_nll(&g, &ctx2, &toks("c a"), None).unwrap().value();
        assert!((whole - (head + tail)).abs() < 1e-12);
    }

    #[test]
    fn window_limits_history() {
        struct CountsHistory;
        impl RationaleGenerator for CountsHistory {
            fn generate(&self, _: &RationalePrompt, _: &PairEvidence<'_>) -> Result<String> {
                Ok(String::new())
            }
            fn token_logprob(&self, context: &[String], _next: &str) -> Option<f64> {
                Some(-(context.len() as f64))
            }
        }
        let ctx = toks("c1 c2");
        let expl = toks("a b c d");
        // Full prefix: contexts of length 2,3,4,5.
        assert_eq!(
            cage_nll(&CountsHistory, &ctx, &expl, None).unwrap().value(),
            14.0
        );
        // Window 1: 2,3,3,3.
        assert_eq!(
            cage_nll(&CountsHistory, &ctx, &expl, Some(1))
                .unwrap()
                .value(),
            11.0
        );
    }

    fn event(id: &str, caption: &str, clause: &str) -> EventAnnotation {
        EventAnnotation {
            event_id: id.into(),
            caption: caption.into(),
            clause: clause.into(),
            start_s: 0.0,
            end_s: 1.0,
            canonical_frame: None,
        }
    }

    #[test]
    fn rationalize_gates_on_threshold_and_delegates() {
        let frame = FrameObservation {
            frame_index: 0,
            timestamp_s: 0.0,
            objects: vec![],
            activities: vec!["a man is talking".into()],
        };
        let pair = EventPair {
            cause_video: "v".into(),
            effect_video: "v".into(),
            cause: event("e1", "A man is talking.", "a man is talking"),
            effect: event("e2", "A man plays the violin.", "A man plays the violin"),
            frame_cause: frame.clone(),
            frame_effect: frame,
            label: None,
            temporal_ok: true,
        };
        let opts = RationaleOptions {
            threshold: 0.5,
            ..Default::default()
        };
        let r = rationalize(&pair, 0.1, opts, &FixtureDetector, &TemplateGenerator).unwrap();
        assert_eq!(r.explanation, NEGATIVE_RATIONALE);
        assert!(!r.is_causal);
        assert_eq!(r.prompt.question, "Why does a man plays the violin?");

        let scripted = Scripted {
            context_len: 0,
            target: toks("custom text"),
        };
        let r2 = rationalize(&pair, 0.1, opts, &FixtureDetector, &scripted).unwrap();
        assert_eq!(r2.prompt, r.prompt);
        assert_eq!(r2.explanation, "custom text");
    }
}
