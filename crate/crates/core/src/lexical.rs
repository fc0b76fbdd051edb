//! Lexical comparison between documents, used to filter near-duplicates.
//!
//! The default comparator is single-reference sentence BLEU: the geometric
//! mean of clipped n-gram precisions for orders `1..=max_ngram`, times the
//! brevity penalty `min(1, exp(1 - r/c))`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

/// Numerator used in place of a zero match count under `AddEpsilon`.
pub const SMOOTHING_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    #[default]
    None,
    AddEpsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tokenizer {
    #[default]
    WhitespaceLower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexicalParams {
    pub max_ngram: usize,
    pub smoothing: Smoothing,
    pub tokenizer: Tokenizer,
}

impl Default for LexicalParams {
    fn default() -> Self {
        Self {
            max_ngram: 4,
            smoothing: Smoothing::None,
            tokenizer: Tokenizer::WhitespaceLower,
        }
    }
}

impl LexicalParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_ngram == 0 {
            return Err(Error::Validation("max_ngram must be at least 1".into()));
        }
        Ok(())
    }
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || ('\u{2010}'..='\u{2027}').contains(&c)
        || ('\u{2030}'..='\u{205E}').contains(&c)
        || ('\u{3001}'..='\u{3003}').contains(&c)
        || ('\u{FF01}'..='\u{FF0F}').contains(&c)
        || matches!(c, '¡' | '¿' | '«' | '»' | '·' | '§' | '¶')
}

/// Lowercases, splits on Unicode whitespace and trims punctuation from both
/// ends of every token. Empty tokens are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(is_punctuation).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Tokens plus n-gram counts per order, so a document is tokenized once no
/// matter how often it is compared.
#[derive(Debug, Clone)]
pub struct NgramProfile {
    len: usize,
    counts: Vec<HashMap<String, usize>>,
}

impl NgramProfile {
    pub fn new(tokens: &[String], max_ngram: usize) -> Self {
        let counts = (1..=max_ngram)
            .map(|n| {
                let mut m = HashMap::new();
                for w in tokens.windows(n) {
                    *m.entry(w.join("\u{1f}")).or_insert(0) += 1;
                }
                m
            })
            .collect();
        Self {
            len: tokens.len(),
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Pluggable document-to-document lexical similarity in `[0, 1]`.
pub trait LexicalComparator: Sync {
    type Prepared: Send + Sync;

    fn prepare(&self, text: &str) -> Self::Prepared;

    /// Similarity of `candidate` to `reference`; not assumed symmetric.
    fn compare(&self, candidate: &Self::Prepared, reference: &Self::Prepared) -> Result<f64>;

    /// Whether a prepared document carries no comparable content.
    fn is_blank(&self, prepared: &Self::Prepared) -> bool;

    fn describe(&self) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Bleu {
    pub params: LexicalParams,
}

impl Bleu {
    pub fn new(params: LexicalParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

impl LexicalComparator for Bleu {
    type Prepared = NgramProfile;

    fn prepare(&self, text: &str) -> NgramProfile {
        match self.params.tokenizer {
            Tokenizer::WhitespaceLower => NgramProfile::new(&tokenize(text), self.params.max_ngram),
        }
    }

    fn compare(&self, candidate: &NgramProfile, reference: &NgramProfile) -> Result<f64> {
        bleu_profiles(candidate, reference, &self.params)
    }

    fn is_blank(&self, prepared: &NgramProfile) -> bool {
        prepared.is_empty()
    }

    fn describe(&self) -> String {
        let smoothing = match self.params.smoothing {
            Smoothing::None => "none",
            Smoothing::AddEpsilon => "add_epsilon",
        };
        format!("bleu(max_ngram={},smoothing={smoothing})", self.params.max_ngram)
    }
}

pub fn bleu_profiles(candidate: &NgramProfile, reference: &NgramProfile, params: &LexicalParams) -> Result<f64> {
    params.validate()?;
    if candidate.is_empty() || reference.is_empty() {
        return Err(Error::Domain("BLEU needs at least one token on each side".into()));
    }
    if candidate.counts.len() < params.max_ngram || reference.counts.len() < params.max_ngram {
        return Err(Error::Domain("profile built with a smaller max_ngram".into()));
    }
    let mut log_sum = 0.0;
    for order in 0..params.max_ngram {
        let cand = &candidate.counts[order];
        let refs = &reference.counts[order];
        let total = candidate.len.saturating_sub(order);
        let matched: usize = cand
            .iter()
            .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
            .sum();
        let precision = match params.smoothing {
            Smoothing::None => {
                if matched == 0 {
                    return Ok(0.0);
                }
                matched as f64 / total as f64
            }
            Smoothing::AddEpsilon => {
                let num = if matched == 0 { SMOOTHING_EPSILON } else { matched as f64 };
                num / total.max(1) as f64
            }
        };
        log_sum += precision.ln();
    }
    let geo = (log_sum / params.max_ngram as f64).exp();
    let (c, r) = (candidate.len as f64, reference.len as f64);
    let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    Ok((bp * geo).clamp(0.0, 1.0))
}

pub fn bleu(candidate: &Document, reference: &Document, params: &LexicalParams) -> Result<f64> {
    bleu_text(&candidate.text, &reference.text, params)
}

pub fn bleu_text(candidate: &str, reference: &str, params: &LexicalParams) -> Result<f64> {
    let scorer = Bleu::new(*params)?;
    scorer.compare(&scorer.prepare(candidate), &scorer.prepare(reference))
}

/// `bleu(a, b) > beta`, strictly.
pub fn exceeds_threshold(a: &Document, b: &Document, beta: f64, params: &LexicalParams) -> Result<bool> {
    check_beta(beta)?;
    Ok(bleu(a, b, params)? > beta)
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Validation(format!("beta {beta} outside [0, 1]")));
    }
    Ok(())
}
