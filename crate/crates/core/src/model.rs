//! Cross-attention fusion and the pairwise causality classifier.
//!
//! For each event the averaged caption vector attends over the frame's
//! object vectors (scorer `nn_a`) to give a context vector. The context
//! vector in turn attends over the caption tokens (scorer `nn_b`) to give an
//! event vector. The classifier `nn_c` reads
//! `[lingual(e1), lingual(e2), context(e1), context(e2)]` where `lingual` is
//! either the averaged caption vector or the event vector.
//!
//! Forward passes keep their intermediates so a single backward pass yields
//! exact gradients for all three networks.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EventAnnotation, EventPair, FrameObservation};
use crate::detect::{detect_objects_topm, FixtureDetector, ObjectDetector};
use crate::encoding::{encode_event, encode_objects, HashEncoder, TextEncoder};
use crate::error::{Error, Result};
use crate::seed::component_rng;

pub const DEFAULT_HIDDEN_DIM: usize = 200;
pub const CHECKPOINT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    #[default]
    Full,
    NoVisual,
    NoLingual,
}

impl AblationMode {
    pub const ALL: [AblationMode; 3] = [
        AblationMode::Full,
        AblationMode::NoVisual,
        AblationMode::NoLingual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationMode::Full => "full",
            AblationMode::NoVisual => "no_visual",
            AblationMode::NoLingual => "no_lingual",
        }
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AblationMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation mode {s:?}")))
    }
}

/// What the classifier reads on the lingual side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierInput {
    /// The averaged caption vector.
    #[default]
    Averaged,
    /// The context-conditioned event vector.
    EventRepr,
}

impl FromStr for ClassifierInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "averaged" => Ok(ClassifierInput::Averaged),
            "event_repr" => Ok(ClassifierInput::EventRepr),
            _ => Err(Error::Config(format!("unknown classifier input {s:?}"))),
        }
    }
}

/// Two-layer perceptron with a rectifier hidden layer and a scalar output.
/// `w1` is `hidden_dim x input_dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl FeedForward {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            w1: vec![0.0; hidden_dim * input_dim],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; hidden_dim],
            b2: 0.0,
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn random<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(input_dim, hidden_dim);
        let a1 = 1.0 / (input_dim as f64).sqrt();
        for w in &mut layer.w1 {
            *w = rng.random_range(-a1..=a1);
        }
        let a2 = 1.0 / (hidden_dim as f64).sqrt();
        for w in &mut layer.w2 {
            *w = rng.random_range(-a2..=a2);
        }
        layer
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.forward_cached(x).0
    }

    /// Returns the output and the hidden pre-activations.
    fn forward_cached(&self, x: &[f64]) -> (f64, Vec<f64>) {
        debug_assert_eq!(x.len(), self.input_dim);
        let mut pre = self.b1.clone();
        for (h, z) in pre.iter_mut().enumerate() {
            let row = &self.w1[h * self.input_dim..(h + 1) * self.input_dim];
            *z += row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
        }
        let out = self.b2
            + pre
                .iter()
                .zip(&self.w2)
                .map(|(z, w)| z.max(0.0) * w)
                .sum::<f64>();
        (out, pre)
    }

    /// Accumulates parameter gradients into `grad` and returns `d out / d x`.
    fn backward(&self, x: &[f64], pre: &[f64], dout: f64, grad: &mut FeedForward) -> Vec<f64> {
        grad.b2 += dout;
        let mut dx = vec![0.0; self.input_dim];
        for (h, &z) in pre.iter().enumerate().take(self.hidden_dim) {
            grad.w2[h] += dout * z.max(0.0);
            if z <= 0.0 {
                continue;
            }
            let dz = dout * self.w2[h];
            grad.b1[h] += dz;
            let row = h * self.input_dim;
            for i in 0..self.input_dim {
                grad.w1[row + i] += dz * x[i];
                dx[i] += dz * self.w1[row + i];
            }
        }
        dx
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.push(self.b2);
    }

    /// Inverse of `flatten_into`; returns the number of values consumed.
    pub fn load_flat(&mut self, src: &[f64]) -> usize {
        let mut at = 0;
        for dst in [&mut self.w1, &mut self.b1, &mut self.w2] {
            let n = dst.len();
            dst.copy_from_slice(&src[at..at + n]);
            at += n;
        }
        self.b2 = src[at];
        at + 1
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &FeedForward) {
        for (a, b) in self.w1.iter_mut().zip(&other.w1) {
            *a += alpha * b;
        }
        for (a, b) in self.b1.iter_mut().zip(&other.b1) {
            *a += alpha * b;
        }
        for (a, b) in self.w2.iter_mut().zip(&other.w2) {
            *a += alpha * b;
        }
        self.b2 += alpha * other.b2;
    }

    pub fn is_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .all(|w| w.is_finite())
            && self.b2.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder_dim: usize,
    pub hidden_dim: usize,
    pub ablation_mode: AblationMode,
    pub classifier_input: ClassifierInput,
    /// Object-attention scorer over `[caption mean, object]`.
    pub nn_a: FeedForward,
    /// Token-attention scorer over `[context, token]`.
    pub nn_b: FeedForward,
    /// Causality classifier over four concatenated `d`-vectors.
    pub nn_c: FeedForward,
}

/// Gradients share the parameter layout.
pub type Gradients = ModelParams;

impl ModelParams {
    pub fn zeros(encoder_dim: usize, hidden_dim: usize) -> Self {
        Self {
            encoder_dim,
            hidden_dim,
            ablation_mode: AblationMode::Full,
            classifier_input: ClassifierInput::Averaged,
            nn_a: FeedForward::zeros(2 * encoder_dim, hidden_dim),
            nn_b: FeedForward::zeros(2 * encoder_dim, hidden_dim),
            nn_c: FeedForward::zeros(4 * encoder_dim, hidden_dim),
        }
    }

    pub fn random(encoder_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut rng = component_rng(seed, "model-init");
        Self {
            encoder_dim,
            hidden_dim,
            ablation_mode: AblationMode::Full,
            classifier_input: ClassifierInput::Averaged,
            nn_a: FeedForward::random(2 * encoder_dim, hidden_dim, &mut rng),
            nn_b: FeedForward::random(2 * encoder_dim, hidden_dim, &mut rng),
            nn_c: FeedForward::random(4 * encoder_dim, hidden_dim, &mut rng),
        }
    }

    pub fn with_ablation(mut self, mode: AblationMode) -> Self {
        self.ablation_mode = mode;
        self
    }

    pub fn with_classifier_input(mut self, input: ClassifierInput) -> Self {
        self.classifier_input = input;
        self
    }

    /// The same configuration with every weight set to zero.
    pub fn zeroed_like(&self) -> Self {
        Self {
            ablation_mode: self.ablation_mode,
            classifier_input: self.classifier_input,
            ..Self::zeros(self.encoder_dim, self.hidden_dim)
        }
    }

    pub fn param_count(&self) -> usize {
        self.nn_a.param_count() + self.nn_b.param_count() + self.nn_c.param_count()
    }

    /// All weights as one vector: `nn_a`, `nn_b`, `nn_c`, each as
    /// `w1, b1, w2, b2`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.nn_a.flatten_into(&mut out);
        self.nn_b.flatten_into(&mut out);
        self.nn_c.flatten_into(&mut out);
        out
    }

    pub fn load_flat(&mut self, src: &[f64]) {
        assert_eq!(src.len(), self.param_count());
        let mut at = self.nn_a.load_flat(src);
        at += self.nn_b.load_flat(&src[at..]);
        self.nn_c.load_flat(&src[at..]);
    }

    pub fn add_scaled(&mut self, alpha: f64, grad: &Gradients) {
        self.nn_a.add_scaled(alpha, &grad.nn_a);
        self.nn_b.add_scaled(alpha, &grad.nn_b);
        self.nn_c.add_scaled(alpha, &grad.nn_c);
    }

    fn check_consistent(&self) -> Result<()> {
        let d = self.encoder_dim;
        let shapes = [
            (&self.nn_a, 2 * d),
            (&self.nn_b, 2 * d),
            (&self.nn_c, 4 * d),
        ];
        for (layer, input) in shapes {
            if layer.input_dim != input
                || layer.hidden_dim != self.hidden_dim
                || layer.w1.len() != input * self.hidden_dim
                || layer.b1.len() != self.hidden_dim
                || layer.w2.len() != self.hidden_dim
            {
                return Err(Error::Checkpoint(
                    "layer shapes inconsistent with encoder_dim".into(),
                ));
            }
            if !layer.is_finite() {
                return Err(Error::Checkpoint("non-finite weight".into()));
            }
        }
        Ok(())
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Logistic function, kept strictly inside (0, 1).
pub fn sigmoid(x: f64) -> f64 {
    let p = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn concat(parts: &[&[f64]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        out.extend_from_slice(p);
    }
    out
}

fn check_dim(v: &[f64], d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::Dimension {
            expected: d,
            actual: v.len(),
        });
    }
    Ok(())
}

struct AttentionTrace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    weights: Vec<f64>,
    output: Vec<f64>,
}

fn attend(scorer: &FeedForward, query: &[f64], items: &[Vec<f64>]) -> Result<AttentionTrace> {
    if items.is_empty() {
        return Err(Error::EmptyAttention);
    }
    let d = query.len();
    let mut inputs = Vec::with_capacity(items.len());
    let mut pre = Vec::with_capacity(items.len());
    let mut logits = Vec::with_capacity(items.len());
    for item in items {
        check_dim(item, d)?;
        let x = concat(&[query, item]);
        let (s, z) = scorer.forward_cached(&x);
        logits.push(s);
        pre.push(z);
        inputs.push(x);
    }
    let weights = softmax(&logits);
    let mut output = vec![0.0; d];
    for (a, item) in weights.iter().zip(items) {
        for (o, v) in output.iter_mut().zip(item) {
            *o += a * v;
        }
    }
    Ok(AttentionTrace {
        inputs,
        pre,
        weights,
        output,
    })
}

/// Backpropagates `d loss / d output` into the scorer; returns the
/// gradient with respect to the query.
fn attend_backward(
    scorer: &FeedForward,
    trace: &AttentionTrace,
    items: &[Vec<f64>],
    dout: &[f64],
    grad: &mut FeedForward,
) -> Vec<f64> {
    let d = dout.len();
    let da: Vec<f64> = items
        .iter()
        .map(|v| v.iter().zip(dout).map(|(x, g)| x * g).sum())
        .collect();
    let mean_da: f64 = trace.weights.iter().zip(&da).map(|(a, g)| a * g).sum();
    let mut dquery = vec![0.0; d];
    for (i, (w, g)) in trace.weights.iter().zip(&da).enumerate() {
        let ds = w * (g - mean_da);
        let dx = scorer.backward(&trace.inputs[i], &trace.pre[i], ds, grad);
        for (q, g) in dquery.iter_mut().zip(&dx[..d]) {
            *q += g;
        }
    }
    dquery
}

pub fn attention_weights(
    scorer: &FeedForward,
    query: &[f64],
    items: &[Vec<f64>],
) -> Result<Vec<f64>> {
    Ok(attend(scorer, query, items)?.weights)
}

/// Object attention output, or the zero vector when there are no objects or
/// the visual modality is ablated.
pub fn context_representation(
    params: &ModelParams,
    caption_mean: &[f64],
    objects: &[Vec<f64>],
) -> Result<Vec<f64>> {
    check_dim(caption_mean, params.encoder_dim)?;
    if objects.is_empty() || params.ablation_mode == AblationMode::NoVisual {
        return Ok(vec![0.0; params.encoder_dim]);
    }
    Ok(attend(&params.nn_a, caption_mean, objects)?.output)
}

pub fn event_representation(
    params: &ModelParams,
    context: &[f64],
    tokens: &[Vec<f64>],
) -> Result<Vec<f64>> {
    check_dim(context, params.encoder_dim)?;
    if tokens.is_empty() {
        return Err(Error::EmptyTokens);
    }
    Ok(attend(&params.nn_b, context, tokens)?.output)
}

pub fn causality_logit(
    params: &ModelParams,
    w1: &[f64],
    w2: &[f64],
    o1: &[f64],
    o2: &[f64],
) -> Result<f64> {
    for v in [w1, w2, o1, o2] {
        check_dim(v, params.encoder_dim)?;
    }
    Ok(params.nn_c.forward(&concat(&[w1, w2, o1, o2])))
}

pub fn causality_score(
    params: &ModelParams,
    w1: &[f64],
    w2: &[f64],
    o1: &[f64],
    o2: &[f64],
) -> Result<f64> {
    Ok(sigmoid(causality_logit(params, w1, w2, o1, o2)?))
}

/// Ties go to the causal side.
pub fn classify(score: f64, threshold: f64) -> bool {
    score >= threshold
}

/// Encoded inputs for one side of a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFeatures {
    pub tokens: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Top-m object vectors of the canonical frame, best first.
    pub objects: Vec<Vec<f64>>,
}

impl EventFeatures {
    pub fn encode(
        encoder: &dyn TextEncoder,
        detector: &dyn ObjectDetector,
        event: &EventAnnotation,
        frame: &FrameObservation,
        m: usize,
    ) -> Result<Self> {
        let caption = encode_event(encoder, &event.caption)?;
        let objects = encode_objects(encoder, &detect_objects_topm(detector, frame, m));
        Ok(Self {
            tokens: caption.tokens,
            mean: caption.mean,
            objects,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatures {
    pub cause: EventFeatures,
    pub effect: EventFeatures,
}

impl PairFeatures {
    pub fn encode(
        encoder: &dyn TextEncoder,
        detector: &dyn ObjectDetector,
        pair: &EventPair,
        m: usize,
    ) -> Result<Self> {
        Ok(Self {
            cause: EventFeatures::encode(encoder, detector, &pair.cause, &pair.frame_cause, m)?,
            effect: EventFeatures::encode(encoder, detector, &pair.effect, &pair.frame_effect, m)?,
        })
    }
}

struct SideTrace {
    tokens: Vec<Vec<f64>>,
    objects: Vec<Vec<f64>>,
    context: Option<AttentionTrace>,
    event: Option<AttentionTrace>,
    lingual: Vec<f64>,
    visual: Vec<f64>,
}

struct PairTrace {
    cause: SideTrace,
    effect: SideTrace,
    input: Vec<f64>,
    pre: Vec<f64>,
    logit: f64,
}

impl ModelParams {
    fn forward_side(&self, f: &EventFeatures) -> Result<SideTrace> {
        let d = self.encoder_dim;
        check_dim(&f.mean, d)?;
        let (mean, tokens) = if self.ablation_mode == AblationMode::NoLingual {
            (vec![0.0; d], vec![vec![0.0; d]])
        } else {
            (f.mean.clone(), f.tokens.clone())
        };
        let objects = if self.ablation_mode == AblationMode::NoVisual {
            Vec::new()
        } else {
            f.objects.clone()
        };
        let context = if objects.is_empty() {
            None
        } else {
            Some(attend(&self.nn_a, &mean, &objects)?)
        };
        let visual = context
            .as_ref()
            .map_or_else(|| vec![0.0; d], |t| t.output.clone());
        let (event, lingual) = match self.classifier_input {
            ClassifierInput::Averaged => (None, mean),
            ClassifierInput::EventRepr => {
                if tokens.is_empty() {
                    return Err(Error::EmptyTokens);
                }
                let t = attend(&self.nn_b, &visual, &tokens)?;
                let out = t.output.clone();
                (Some(t), out)
            }
        };
        Ok(SideTrace {
            tokens,
            objects,
            context,
            event,
            lingual,
            visual,
        })
    }

    fn forward_pair(&self, pair: &PairFeatures) -> Result<PairTrace> {
        let cause = self.forward_side(&pair.cause)?;
        let effect = self.forward_side(&pair.effect)?;
        let input = concat(&[
            &cause.lingual,
            &effect.lingual,
            &cause.visual,
            &effect.visual,
        ]);
        let (logit, pre) = self.nn_c.forward_cached(&input);
        Ok(PairTrace {
            cause,
            effect,
            input,
            pre,
            logit,
        })
    }

    fn backward_side(
        &self,
        side: &SideTrace,
        dlingual: &[f64],
        dvisual: &[f64],
        grad: &mut Gradients,
    ) {
        let mut dvisual = dvisual.to_vec();
        if let Some(t) = &side.event {
            let dq = attend_backward(&self.nn_b, t, &side.tokens, dlingual, &mut grad.nn_b);
            for (a, b) in dvisual.iter_mut().zip(dq) {
                *a += b;
            }
        }
        if let Some(t) = &side.context {
            // The caption mean is a constant of the frozen encoder.
            attend_backward(&self.nn_a, t, &side.objects, &dvisual, &mut grad.nn_a);
        }
    }

    fn backward_pair(&self, trace: &PairTrace, dlogit: f64, grad: &mut Gradients) {
        let d = self.encoder_dim;
        let dx = self
            .nn_c
            .backward(&trace.input, &trace.pre, dlogit, &mut grad.nn_c);
        self.backward_side(&trace.cause, &dx[..d], &dx[2 * d..3 * d], grad);
        self.backward_side(&trace.effect, &dx[d..2 * d], &dx[3 * d..], grad);
    }

    pub fn pair_logit(&self, pair: &PairFeatures) -> Result<f64> {
        Ok(self.forward_pair(pair)?.logit)
    }

    pub fn pair_score(&self, pair: &PairFeatures) -> Result<f64> {
        Ok(sigmoid(self.pair_logit(pair)?))
    }

    /// Logit and its gradient with respect to every parameter.
    pub fn logit_and_grad(&self, pair: &PairFeatures) -> Result<(f64, Gradients)> {
        let trace = self.forward_pair(pair)?;
        let mut grad = self.zeroed_like();
        self.backward_pair(&trace, 1.0, &mut grad);
        Ok((trace.logit, grad))
    }

    /// Cross-entropy over one positive and one negative pair, averaged, with
    /// its gradient.
    pub fn pair_loss_and_grad(
        &self,
        positive: &PairFeatures,
        negative: &PairFeatures,
    ) -> Result<(f64, Gradients)> {
        let pos = self.forward_pair(positive)?;
        let neg = self.forward_pair(negative)?;
        let loss = logit_pair_loss(pos.logit, neg.logit);
        let mut grad = self.zeroed_like();
        self.backward_pair(&pos, -0.5 * sigmoid_exact(-pos.logit), &mut grad);
        self.backward_pair(&neg, 0.5 * sigmoid_exact(neg.logit), &mut grad);
        Ok((loss, grad))
    }

    pub fn pair_loss(&self, positive: &PairFeatures, negative: &PairFeatures) -> Result<f64> {
        Ok(logit_pair_loss(
            self.pair_logit(positive)?,
            self.pair_logit(negative)?,
        ))
    }
}

fn sigmoid_exact(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-(ln sigmoid(pos) + ln(1 - sigmoid(neg))) / 2`, computed from logits.
pub fn logit_pair_loss(pos_logit: f64, neg_logit: f64) -> f64 {
    0.5 * (softplus(-pos_logit) + softplus(neg_logit))
}

/// Anything that can score an ordered event pair in `[0, 1]`.
pub trait PairScorer {
    fn score_pair(&self, pair: &EventPair) -> Result<f64>;
}

pub struct FusionScorer<'a> {
    pub params: &'a ModelParams,
    pub encoder: &'a dyn TextEncoder,
    pub detector: &'a dyn ObjectDetector,
    pub top_m: usize,
}

impl PairScorer for FusionScorer<'_> {
    fn score_pair(&self, pair: &EventPair) -> Result<f64> {
        let features = PairFeatures::encode(self.encoder, self.detector, pair, self.top_m)?;
        self.params.pair_score(&features)
    }
}

/// Scores a pair with the stored detections of its frames.
pub fn score_pair(
    params: &ModelParams,
    encoder: &dyn TextEncoder,
    pair: &EventPair,
    m: usize,
) -> Result<f64> {
    FusionScorer {
        params,
        encoder,
        detector: &FixtureDetector,
        top_m: m,
    }
    .score_pair(pair)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrayFile {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    w1: ArrayFile,
    b1: ArrayFile,
    w2: ArrayFile,
    b2: ArrayFile,
}

impl LayerFile {
    fn from_layer(l: &FeedForward) -> Self {
        let arr = |shape: Vec<usize>, data: &[f64]| ArrayFile {
            shape,
            data: data.to_vec(),
        };
        Self {
            w1: arr(vec![l.hidden_dim, l.input_dim], &l.w1),
            b1: arr(vec![l.hidden_dim], &l.b1),
            w2: arr(vec![1, l.hidden_dim], &l.w2),
            b2: arr(vec![1], &[l.b2]),
        }
    }

    fn into_layer(self, name: &str) -> Result<FeedForward> {
        let bad =
            |what: &str| Error::Checkpoint(format!("{name}.{what}: shape does not match data"));
        for (what, a) in [
            ("w1", &self.w1),
            ("b1", &self.b1),
            ("w2", &self.w2),
            ("b2", &self.b2),
        ] {
            if a.shape.iter().product::<usize>() != a.data.len() {
                return Err(bad(what));
            }
        }
        let [hidden_dim, input_dim] = self.w1.shape[..] else {
            return Err(bad("w1"));
        };
        if self.b1.shape != [hidden_dim] {
            return Err(bad("b1"));
        }
        if self.w2.shape != [1, hidden_dim] {
            return Err(bad("w2"));
        }
        if self.b2.shape != [1] {
            return Err(bad("b2"));
        }
        Ok(FeedForward {
            input_dim,
            hidden_dim,
            w1: self.w1.data,
            b1: self.b1.data,
            w2: self.w2.data,
            b2: self.b2.data[0],
        })
    }
}

/// On-disk checkpoint. JSON with shortest round-trip float formatting, so a
/// reload reproduces every weight bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    schema: u32,
    encoder_dim: usize,
    hidden_dim: usize,
    ablation_mode: AblationMode,
    classifier_input: ClassifierInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    encoder: Option<HashEncoder>,
    nn_a: LayerFile,
    nn_b: LayerFile,
    nn_c: LayerFile,
}

pub fn checkpoint_to_string(params: &ModelParams, encoder: Option<&HashEncoder>) -> Result<String> {
    let file = CheckpointFile {
        schema: CHECKPOINT_SCHEMA,
        encoder_dim: params.encoder_dim,
        hidden_dim: params.hidden_dim,
        ablation_mode: params.ablation_mode,
        classifier_input: params.classifier_input,
        encoder: encoder.copied(),
        nn_a: LayerFile::from_layer(&params.nn_a),
        nn_b: LayerFile::from_layer(&params.nn_b),
        nn_c: LayerFile::from_layer(&params.nn_c),
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}

pub fn checkpoint_from_str(text: &str) -> Result<(ModelParams, Option<HashEncoder>)> {
    let file: CheckpointFile = serde_json::from_str(text)?;
    if file.schema != CHECKPOINT_SCHEMA {
        return Err(Error::Checkpoint(format!(
            "unsupported schema {}",
            file.schema
        )));
    }
    let params = ModelParams {
        encoder_dim: file.encoder_dim,
        hidden_dim: file.hidden_dim,
        ablation_mode: file.ablation_mode,
        classifier_input: file.classifier_input,
        nn_a: file.nn_a.into_layer("nn_a")?,
        nn_b: file.nn_b.into_layer("nn_b")?,
        nn_c: file.nn_c.into_layer("nn_c")?,
    };
    params.check_consistent()?;
    if let Some(enc) = &file.encoder {
        if enc.dim != params.encoder_dim {
            return Err(Error::Checkpoint(
                "encoder dimension differs from model".into(),
            ));
        }
    }
    Ok((params, file.encoder))
}
