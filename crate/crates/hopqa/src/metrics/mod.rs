//! Evaluation mathematics: answer and supporting-fact EM/F1, joint metrics,
//! generation-quality scores, and the reasoning-chain table.
//!
//! Everything here is pure and deterministic. Scores are kept in `[0, 1]`
//! internally; scaling by 100 happens only at report assembly.

mod bleu;
mod chain;
mod report;
mod rouge;

pub use bleu::bleu_corpus;
pub use chain::{reasoning_chain_table, ChainTable, ChainTriple, CHAIN_ROW_LABELS};
pub use report::{aggregate_report, EvalReport, ExampleScores, MeanScores, QdQuality};
pub use rouge::{rouge_l, rouge_l_prf, rouge_n, rouge_n_prf};

use std::collections::BTreeSet;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// EM plus token- or set-overlap precision/recall/F1, all in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnswerScore {
    pub em: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

impl AnswerScore {
    pub fn perfect() -> Self {
        AnswerScore { em: 1.0, f1: 1.0, precision: 1.0, recall: 1.0 }
    }

    pub fn zero() -> Self {
        AnswerScore { em: 0.0, f1: 0.0, precision: 0.0, recall: 0.0 }
    }
}

/// Canonicalizes an answer string: lowercase, strip punctuation, drop the
/// articles "a"/"an"/"the", collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let stripped: String = lowered
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    stripped
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn token_counts(tokens: &[&str]) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for t in tokens {
        *counts.entry(t.to_string()).or_insert(0) += 1;
    }
    counts
}

fn prf(num_same: usize, pred_len: usize, gold_len: usize) -> (f64, f64, f64) {
    if pred_len == 0 && gold_len == 0 {
        return (1.0, 1.0, 1.0);
    }
    if num_same == 0 || pred_len == 0 || gold_len == 0 {
        return (0.0, 0.0, 0.0);
    }
    let p = num_same as f64 / pred_len as f64;
    let r = num_same as f64 / gold_len as f64;
    (p, r, 2.0 * p * r / (p + r))
}

/// Answer-level EM and token-multiset F1 over normalized tokens.
///
/// Yes/no answers participate as single tokens; two empty answers count as
/// a perfect match.
pub fn answer_score(pred: &str, gold: &str) -> AnswerScore {
    let pred_norm = normalize_answer(pred);
    let gold_norm = normalize_answer(gold);
    let em = if pred_norm == gold_norm { 1.0 } else { 0.0 };
    let pred_tokens: Vec<&str> = pred_norm.split_whitespace().collect();
    let gold_tokens: Vec<&str> = gold_norm.split_whitespace().collect();
    let pred_counts = token_counts(&pred_tokens);
    let gold_counts = token_counts(&gold_tokens);
    let num_same: usize = pred_counts
        .iter()
        .map(|(tok, &c)| c.min(gold_counts.get(tok).copied().unwrap_or(0)))
        .sum();
    let (precision, recall, f1) = prf(num_same, pred_tokens.len(), gold_tokens.len());
    AnswerScore { em, f1, precision, recall }
}

/// Supporting-fact EM and set-overlap F1 over exact `(title, sentence)` pairs.
pub fn sp_score(pred: &BTreeSet<(String, usize)>, gold: &BTreeSet<(String, usize)>) -> AnswerScore {
    let em = if pred == gold { 1.0 } else { 0.0 };
    let num_same = pred.intersection(gold).count();
    let (precision, recall, f1) = prf(num_same, pred.len(), gold.len());
    AnswerScore { em, f1, precision, recall }
}

/// Combined answer + supporting-fact metric: products of precisions and
/// recalls, with F1 recomputed from the products.
pub fn joint_score(ans: &AnswerScore, sp: &AnswerScore) -> AnswerScore {
    let precision = ans.precision * sp.precision;
    let recall = ans.recall * sp.recall;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    AnswerScore { em: ans.em * sp.em, f1, precision, recall }
}
