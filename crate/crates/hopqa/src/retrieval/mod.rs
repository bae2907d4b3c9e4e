//! Paragraph retrieval: scoring strategies, ranking, and the retrieval
//! training loss.
//!
//! Scorers assign each paragraph a relevance probability conditioned on the
//! question alone and on every (question, sub-question) pair; per-paragraph
//! aggregation takes the maximum over those conditions.

mod cross_encoder;
mod encode;
mod lexical;

pub use cross_encoder::{train_spr, SprTrainConfig, TinyCrossEncoder};
pub use encode::{encode_pair, EncodedBatch, EncodedRow, RowProvenance, ScoringInput};
pub use lexical::LexicalOverlapScorer;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::Paragraph;
use crate::error::{Error, Result};
use crate::registry::StrategyRegistry;

/// Probability clamp inside logs; keeps the loss finite on saturated scores.
pub const PROB_EPS: f64 = 1e-7;

/// Relevance score for one (paragraph, condition) pair. The condition is
/// the bare question when `subquestion_index` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParagraphScore {
    pub paragraph_index: usize,
    pub subquestion_index: Option<usize>,
    /// Relevance probability: the softmax of `logits` at the relevant slot.
    pub score: f64,
    /// (irrelevant, relevant) logits.
    pub logits: (f64, f64),
}

impl ParagraphScore {
    pub fn from_logits(
        paragraph_index: usize,
        subquestion_index: Option<usize>,
        logits: (f64, f64),
    ) -> Self {
        let max = logits.0.max(logits.1);
        let e0 = (logits.0 - max).exp();
        let e1 = (logits.1 - max).exp();
        ParagraphScore { paragraph_index, subquestion_index, score: e1 / (e0 + e1), logits }
    }
}

/// A scoring strategy. Implementations must emit one score per
/// (question-only, paragraph) pair followed by one per (sub-question,
/// paragraph) pair, paragraphs in order within each block.
pub trait ParagraphScorer: Send + Sync {
    fn name(&self) -> &str;

    fn score_paragraphs(
        &self,
        question: &str,
        subquestions: &[String],
        paragraphs: &[Paragraph],
    ) -> Result<Vec<ParagraphScore>>;
}

/// Runtime configuration for building a scorer from the registry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScorerConfig {
    /// Checkpoint directory for trained scorers.
    pub checkpoint: Option<PathBuf>,
    pub max_len: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub seed: u64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig { checkpoint: None, max_len: 384, embed_dim: 32, hidden_dim: 64, seed: 13 }
    }
}

/// Registry of built-in scoring strategies.
pub fn scorer_registry() -> StrategyRegistry<ScorerConfig, dyn ParagraphScorer> {
    let mut registry = StrategyRegistry::new("paragraph-scorer");
    registry.register("tiny-cross-encoder", |cfg: &ScorerConfig| {
        let model = match &cfg.checkpoint {
            Some(dir) => TinyCrossEncoder::load(dir)?,
            None => TinyCrossEncoder::new(
                crate::text::Vocab::build([]),
                cfg.embed_dim,
                cfg.hidden_dim,
                cfg.max_len,
                cfg.seed,
            ),
        };
        Ok(Box::new(model) as Box<dyn ParagraphScorer>)
    });
    registry.register("lexical-overlap", |_cfg: &ScorerConfig| {
        Ok(Box::new(LexicalOverlapScorer) as Box<dyn ParagraphScorer>)
    });
    registry
}

/// Summed binary cross-entropy over scored items:
/// `-sum(l * ln(S) + (1 - l) * ln(1 - S))`, probabilities clamped by
/// [`PROB_EPS`]. Additive over disjoint batches and permutation-invariant.
pub fn spr_loss(scores: &[ParagraphScore], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::data(format!(
            "spr_loss: {} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (score, &label) in scores.iter().zip(labels) {
        let s = score.score.clamp(PROB_EPS, 1.0 - PROB_EPS);
        total -= if label == 1 { s.ln() } else { (1.0 - s).ln() };
    }
    Ok(total)
}

/// Result of top-k paragraph selection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedParagraphs {
    /// Paragraph indices, best first.
    pub indices: Vec<usize>,
    /// True when fewer than `k` paragraphs existed and all were returned.
    pub k_capped: bool,
}

/// Aggregates scores per paragraph by maximum and returns the `k` best
/// paragraph indices in descending aggregate order, ties broken by lower
/// index. Asking for more paragraphs than exist returns all of them,
/// flagged.
pub fn select_paragraphs(scores: &[ParagraphScore], k: usize) -> Result<SelectedParagraphs> {
    if k == 0 {
        return Err(Error::config("select_paragraphs requires k >= 1"));
    }
    let n = match scores.iter().map(|s| s.paragraph_index).max() {
        Some(max_idx) => max_idx + 1,
        None => return Ok(SelectedParagraphs { indices: vec![], k_capped: true }),
    };
    let mut aggregate = vec![f64::NEG_INFINITY; n];
    for s in scores {
        aggregate[s.paragraph_index] = aggregate[s.paragraph_index].max(s.score);
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| aggregate[i].is_finite()).collect();
    order.sort_by(|&a, &b| aggregate[b].total_cmp(&aggregate[a]).then(a.cmp(&b)));
    let k_capped = k > order.len();
    if k_capped {
        log::warn!("requested top-{k} of {} scored paragraphs; returning all", order.len());
    }
    order.truncate(k);
    Ok(SelectedParagraphs { indices: order, k_capped })
}

/// Corpus retrieval metrics in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub em: f64,
    pub f1: f64,
    pub examples: usize,
}

/// EM is exact set equality between selected and gold-positive paragraph
/// indices; F1 is the mean per-example set-overlap F1.
pub fn evaluate_retrieval(selected: &[Vec<usize>], gold: &[Vec<u8>]) -> Result<RetrievalReport> {
    if selected.len() != gold.len() {
        return Err(Error::data(format!(
            "evaluate_retrieval: {} selections vs {} label lists",
            selected.len(),
            gold.len()
        )));
    }
    let mut ems: Vec<f64> = Vec::with_capacity(selected.len());
    let mut f1s: Vec<f64> = Vec::with_capacity(selected.len());
    for (sel, labels) in selected.iter().zip(gold) {
        let sel_set: std::collections::BTreeSet<usize> = sel.iter().copied().collect();
        let gold_set: std::collections::BTreeSet<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == 1)
            .map(|(i, _)| i)
            .collect();
        ems.push(if sel_set == gold_set { 1.0 } else { 0.0 });
        let overlap = sel_set.intersection(&gold_set).count() as f64;
        let f1 = if sel_set.is_empty() && gold_set.is_empty() {
            1.0
        } else if overlap == 0.0 {
            0.0
        } else {
            let p = overlap / sel_set.len() as f64;
            let r = overlap / gold_set.len() as f64;
            2.0 * p * r / (p + r)
        };
        f1s.push(f1);
    }
    ems.sort_by(|a, b| a.total_cmp(b));
    f1s.sort_by(|a, b| a.total_cmp(b));
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(RetrievalReport { em: mean(&ems) * 100.0, f1: mean(&f1s) * 100.0, examples: selected.len() })
}
