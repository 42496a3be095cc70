//! Contrastive and denoising objectives on precomputed embeddings and token
//! lists: the temperature-scaled triplet loss, its in-batch extension, token
//! corruption, and token-level reconstruction cross-entropy.

use std::collections::HashMap;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::TokenizedSentence;
use crate::vecmath::{cosine, VecError};

pub const DEFAULT_TAU: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContrastiveError {
    #[error(transparent)]
    Vec(#[from] VecError),
    #[error("temperature must be positive and finite, got {0}")]
    NonPositiveTau(f64),
    #[error("cannot corrupt an empty sentence")]
    EmptyInput,
    #[error("corruption ratio must lie in (0, 1), got {0}")]
    InvalidRatio(f64),
    #[error("token {0:?} is not in the vocabulary")]
    VocabMiss(String),
    #[error("{tokens} tokens but {distributions} distributions")]
    LengthMismatch { tokens: usize, distributions: usize },
    #[error("position {0} is not a probability distribution")]
    NotADistribution(usize),
    #[error("batch is empty or its parts differ in length")]
    BatchShape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletBatch {
    pub h: Vec<f64>,
    pub h_plus: Vec<f64>,
    pub h_minus: Vec<f64>,
    pub tau: f64,
}

fn check_tau(tau: f64) -> Result<(), ContrastiveError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(ContrastiveError::NonPositiveTau(tau));
    }
    Ok(())
}

/// `-log(e^{s⁺/τ} / (e^{s⁺/τ} + e^{s⁻/τ}))` from the two similarities.
pub fn simcse_loss_from_sims(sim_pos: f64, sim_neg: f64, tau: f64) -> Result<f64, ContrastiveError> {
    check_tau(tau)?;
    // softplus(s⁻/τ - s⁺/τ), split at zero so neither branch cancels
    let margin = sim_neg / tau - sim_pos / tau;
    let loss = if margin <= 0.0 {
        margin.exp().ln_1p()
    } else {
        margin + (-margin).exp().ln_1p()
    };
    Ok(loss)
}

pub fn simcse_loss(batch: &TripletBatch) -> Result<f64, ContrastiveError> {
    check_tau(batch.tau)?;
    let pos = cosine(&batch.h, &batch.h_plus)?;
    let neg = cosine(&batch.h, &batch.h_minus)?;
    simcse_loss_from_sims(pos, neg, batch.tau)
}

/// In-batch variant: anchor `i` is scored against every positive in the batch
/// and, when given, every hard negative; its own positive is the target.
/// Returns the mean over anchors. This goes beyond the plain two-term triplet
/// form.
pub fn simcse_in_batch_loss(
    anchors: &[Vec<f64>],
    positives: &[Vec<f64>],
    negatives: Option<&[Vec<f64>]>,
    tau: f64,
) -> Result<f64, ContrastiveError> {
    check_tau(tau)?;
    let n = anchors.len();
    if n == 0 || positives.len() != n || negatives.is_some_and(|neg| neg.len() != n) {
        return Err(ContrastiveError::BatchShape);
    }
    let mut total = 0.0;
    for (i, h) in anchors.iter().enumerate() {
        let mut logits = Vec::with_capacity(2 * n);
        for p in positives {
            logits.push(cosine(h, p)? / tau);
        }
        for neg in negatives.unwrap_or(&[]) {
            logits.push(cosine(h, neg)? / tau);
        }
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        total += lse - logits[i];
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionMode {
    Delete,
    Mask,
}

impl FromStr for CorruptionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "delete" => Ok(Self::Delete),
            "mask" => Ok(Self::Mask),
            other => Err(format!("unknown corruption mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionConfig {
    pub mode: CorruptionMode,
    pub ratio: f64,
    pub mask_token: String,
    pub seed: u64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            mode: CorruptionMode::Delete,
            ratio: 0.6,
            mask_token: "[MASK]".into(),
            seed: 0,
        }
    }
}

/// Deletes or masks `⌈ratio·n⌉` tokens at seeded random positions. Deletion
/// always leaves at least one token and preserves the order of the rest.
pub fn corrupt(
    tokens: &TokenizedSentence,
    cfg: &CorruptionConfig,
) -> Result<TokenizedSentence, ContrastiveError> {
    if !(cfg.ratio > 0.0 && cfg.ratio < 1.0) {
        return Err(ContrastiveError::InvalidRatio(cfg.ratio));
    }
    let n = tokens.len();
    if n == 0 {
        return Err(ContrastiveError::EmptyInput);
    }
    let mut count = ((cfg.ratio * n as f64).ceil() as usize).min(n);
    if cfg.mode == CorruptionMode::Delete {
        count = count.min(n - 1);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut hit = vec![false; n];
    for i in sample(&mut rng, n, count) {
        hit[i] = true;
    }
    let out = tokens
        .tokens
        .iter()
        .zip(&hit)
        .filter_map(|(t, &h)| match (cfg.mode, h) {
            (_, false) => Some(t.clone()),
            (CorruptionMode::Delete, true) => None,
            (CorruptionMode::Mask, true) => Some(cfg.mask_token.clone()),
        })
        .collect();
    Ok(TokenizedSentence::from_tokens(out))
}

/// Token ↔ index mapping for predicted distributions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::default();
        for t in terms {
            let t = t.into();
            if !vocab.index.contains_key(&t) {
                vocab.index.insert(t.clone(), vocab.terms.len());
                vocab.terms.push(t);
            }
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }
}

const DISTRIBUTION_TOLERANCE: f64 = 1e-6;

/// Mean over positions of `-ln p(original token)`. Zero probabilities are
/// floored at the smallest positive `f64`, keeping the loss finite.
pub fn reconstruction_loss(
    original: &TokenizedSentence,
    predicted: &[Vec<f64>],
    vocab: &Vocabulary,
) -> Result<f64, ContrastiveError> {
    if original.len() != predicted.len() {
        return Err(ContrastiveError::LengthMismatch {
            tokens: original.len(),
            distributions: predicted.len(),
        });
    }
    if original.is_empty() {
        return Err(ContrastiveError::EmptyInput);
    }
    let mut total = 0.0;
    for (pos, (token, dist)) in original.tokens.iter().zip(predicted).enumerate() {
        let id = vocab
            .id(token)
            .ok_or_else(|| ContrastiveError::VocabMiss(token.clone()))?;
        let valid = dist.len() == vocab.len()
            && dist.iter().all(|p| (0.0..=1.0).contains(p))
            && (dist.iter().sum::<f64>() - 1.0).abs() <= DISTRIBUTION_TOLERANCE;
        if !valid {
            return Err(ContrastiveError::NotADistribution(pos));
        }
        total -= dist[id].max(f64::MIN_POSITIVE).ln();
    }
    Ok(total / original.len() as f64)
}
