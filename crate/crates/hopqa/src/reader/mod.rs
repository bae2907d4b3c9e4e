//! Multi-task reading: answer-span extraction, answer-type classification,
//! and supporting-fact prediction over question + sub-questions + context.

mod input;
mod lexical;
mod multitask;

pub use input::{build_reader_input, ReaderInput, SentenceSpan};
pub use lexical::LexicalReader;
pub use multitask::{train_reader, ReaderShape, ReaderTrainConfig, ReaderTrainExample, TinyReader};

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::{AnswerType, Paragraph};
use crate::decomposer::SubQuestionSet;
use crate::error::{Error, Result};
use crate::registry::StrategyRegistry;

/// Clamp used inside log terms of the reader losses.
pub const PROB_EPS: f64 = 1e-7;

/// Per-component losses attached to predictions made at train time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReaderLosses {
    pub answer_type: f64,
    pub span_start: f64,
    pub span_end: f64,
    pub supporting: f64,
    pub total: f64,
}

/// One reader prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderPrediction {
    pub answer_text: String,
    pub answer_type: AnswerType,
    /// Token span, inclusive ends; present only for span-type answers.
    pub span: Option<(usize, usize)>,
    pub supporting_facts: BTreeSet<(String, usize)>,
    /// Per-sentence relevance probabilities, aligned with the input's
    /// sentence spans.
    pub sentence_scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub losses: Option<ReaderLosses>,
}

impl ReaderPrediction {
    pub fn validate(&self) -> Result<()> {
        match self.answer_type {
            AnswerType::Positive if self.answer_text != "yes" => {
                return Err(Error::data("positive prediction must answer exactly \"yes\""));
            }
            AnswerType::Negative if self.answer_text != "no" => {
                return Err(Error::data("negative prediction must answer exactly \"no\""));
            }
            AnswerType::Span => {
                let Some((start, end)) = self.span else {
                    return Err(Error::data("span prediction is missing its span"));
                };
                if start > end {
                    return Err(Error::data("span start must not exceed span end"));
                }
            }
            _ => {}
        }
        if self.answer_type != AnswerType::Span && self.span.is_some() {
            return Err(Error::data("non-span prediction carries a span"));
        }
        Ok(())
    }
}

/// Multi-task loss weights; defaults give every component equal weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub answer_type: f64,
    pub span: f64,
    pub supporting: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { answer_type: 1.0, span: 1.0, supporting: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.answer_type < 0.0 || self.span < 0.0 || self.supporting < 0.0 {
            return Err(Error::config("loss weights must be non-negative"));
        }
        Ok(())
    }
}

/// Weighted multi-task total:
/// `w_type * l_type + w_span * (l_start + l_end) + w_sup * l_sup`.
pub fn reading_loss(
    l_type: f64,
    l_start: f64,
    l_end: f64,
    l_sup: f64,
    weights: &LossWeights,
) -> f64 {
    weights.answer_type * l_type + weights.span * (l_start + l_end) + weights.supporting * l_sup
}

/// Cross-entropy of a three-way answer-type distribution against a one-hot
/// gold class. The distribution must sum to 1 within 1e-6.
pub fn answer_type_loss(predicted_probs: &[f64; 3], gold: AnswerType) -> Result<f64> {
    let sum: f64 = predicted_probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::data(format!("answer-type probabilities sum to {sum}, expected 1")));
    }
    if predicted_probs.iter().any(|&p| p < 0.0) {
        return Err(Error::data("answer-type probabilities must be non-negative"));
    }
    let p = predicted_probs[gold.index()].clamp(PROB_EPS, 1.0);
    Ok(-p.ln())
}

/// Best answer span by `start_logits[s] + end_logits[e]` over pairs with
/// both positions inside the context mask, `s <= e`, and
/// `e - s < max_answer_len`. Ties resolve to the smallest start, then the
/// smallest end. Returns inclusive (start, end).
pub fn extract_best_span(
    start_logits: &[f64],
    end_logits: &[f64],
    context_mask: &[u8],
    max_answer_len: usize,
) -> Result<(usize, usize)> {
    if start_logits.len() != end_logits.len() || start_logits.len() != context_mask.len() {
        return Err(Error::data("span extraction inputs must have equal lengths"));
    }
    let n = start_logits.len();
    let mut best: Option<(usize, usize, f64)> = None;
    for s in 0..n {
        if context_mask[s] == 0 {
            continue;
        }
        let e_max = n.min(s + max_answer_len);
        for e in s..e_max {
            if context_mask[e] == 0 {
                continue;
            }
            let score = start_logits[s] + end_logits[e];
            if best.map_or(true, |(_, _, b)| score > b) {
                best = Some((s, e, score));
            }
        }
    }
    best.map(|(s, e, _)| (s, e)).ok_or_else(|| Error::data("no valid answer span candidates"))
}

/// Sentences at or above `threshold`; when fewer than two pass, the top two
/// by score (ties broken by position) are returned instead.
pub fn select_supporting_facts(
    sentence_scores: &[f64],
    spans: &[SentenceSpan],
    titles: &[String],
    threshold: f64,
) -> Result<BTreeSet<(String, usize)>> {
    if sentence_scores.len() != spans.len() {
        return Err(Error::data(format!(
            "select_supporting_facts: {} scores for {} spans",
            sentence_scores.len(),
            spans.len()
        )));
    }
    let mut chosen: Vec<usize> =
        (0..spans.len()).filter(|&i| sentence_scores[i] >= threshold).collect();
    if chosen.len() < 2 {
        let mut order: Vec<usize> = (0..spans.len()).collect();
        order.sort_by(|&a, &b| sentence_scores[b].total_cmp(&sentence_scores[a]).then(a.cmp(&b)));
        chosen = order.into_iter().take(2).collect();
    }
    Ok(chosen
        .into_iter()
        .map(|i| {
            let span = &spans[i];
            (titles[span.paragraph_index].clone(), span.sentence_index)
        })
        .collect())
}

/// A reading strategy.
pub trait Reader: Send + Sync {
    fn name(&self) -> &str;

    fn predict(
        &self,
        question: &str,
        subquestions: &SubQuestionSet,
        paragraphs: &[Paragraph],
    ) -> Result<ReaderPrediction>;
}

/// Runtime configuration for building a reader from the registry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReaderConfig {
    pub checkpoint: Option<PathBuf>,
    pub max_positions: usize,
    pub max_answer_len: usize,
    pub sup_threshold: f64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub position_dim: usize,
    pub seed: u64,
}

impl Default for ReaderConfig {
    fn default() -> Self {
        ReaderConfig {
            checkpoint: None,
            max_positions: 1024,
            max_answer_len: 30,
            sup_threshold: 0.5,
            embed_dim: 32,
            hidden_dim: 64,
            position_dim: 16,
            seed: 13,
        }
    }
}

/// Registry of built-in reading strategies.
pub fn reader_registry() -> StrategyRegistry<ReaderConfig, dyn Reader> {
    let mut registry = StrategyRegistry::new("reader");
    registry.register("tiny-multitask", |cfg: &ReaderConfig| {
        let model = match &cfg.checkpoint {
            Some(dir) => TinyReader::load(dir)?,
            None => TinyReader::new(
                crate::text::Vocab::build([]),
                ReaderShape {
                    embed_dim: cfg.embed_dim,
                    hidden_dim: cfg.hidden_dim,
                    position_dim: cfg.position_dim,
                    max_positions: cfg.max_positions,
                    max_answer_len: cfg.max_answer_len,
                    sup_threshold: cfg.sup_threshold,
                },
                cfg.seed,
            ),
        };
        Ok(Box::new(model) as Box<dyn Reader>)
    });
    registry.register("lexical-overlap", |cfg: &ReaderConfig| {
        Ok(Box::new(LexicalReader::new(cfg.max_positions, cfg.max_answer_len, cfg.sup_threshold))
            as Box<dyn Reader>)
    });
    registry
}
