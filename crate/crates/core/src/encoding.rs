//! Text encoders and caption/object vectorization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DetectedObject;
use crate::error::{Error, Result};
use crate::frames::tokenize;
use crate::seed::hash64;

pub const DEFAULT_ENCODER_DIM: usize = 64;

pub trait TextEncoder: Send + Sync {
    fn dimension(&self) -> usize;

    /// One vector per token, in order.
    fn encode_tokens(&self, tokens: &[String]) -> Vec<Vec<f64>>;
}

/// Deterministic stand-in for a pretrained encoder: each token maps to a
/// unit-norm Gaussian vector drawn from a stream keyed by the token and seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashEncoder {
    pub dim: usize,
    pub seed: u64,
}

impl HashEncoder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("encoder dimension must be positive".into()));
        }
        Ok(Self { dim, seed })
    }

    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(hash64(token.as_bytes(), self.seed));
        let mut v: Vec<f64> = (0..self.dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        v
    }
}

impl Default for HashEncoder {
    fn default() -> Self {
        Self {
            dim: DEFAULT_ENCODER_DIM,
            seed: 0,
        }
    }
}

impl TextEncoder for HashEncoder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn encode_tokens(&self, tokens: &[String]) -> Vec<Vec<f64>> {
        tokens.iter().map(|t| self.token_vector(t)).collect()
    }
}

pub fn average_embedding(vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = vectors.first().ok_or(Error::EmptyTokens)?;
    let dim = first.len();
    let mut mean = vec![0.0; dim];
    for v in vectors {
        if v.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: v.len(),
            });
        }
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    let n = vectors.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    Ok(mean)
}

/// Token vectors of a caption and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedCaption {
    pub tokens: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

pub fn encode_event(encoder: &dyn TextEncoder, caption: &str) -> Result<EncodedCaption> {
    let tokens = encoder.encode_tokens(&tokenize(caption));
    let mean = average_embedding(&tokens)?;
    Ok(EncodedCaption { tokens, mean })
}

/// One vector per object; multi-word labels are averaged over their tokens.
pub fn encode_objects(encoder: &dyn TextEncoder, objects: &[DetectedObject]) -> Vec<Vec<f64>> {
    objects
        .iter()
        .map(|o| {
            let mut tokens = tokenize(&o.label);
            if tokens.is_empty() {
                tokens.push(o.label.clone());
            }
            let vectors = encoder.encode_tokens(&tokens);
            average_embedding(&vectors).expect("label has at least one token")
        })
        .collect()
}
