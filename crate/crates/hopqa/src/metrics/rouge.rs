//! ROUGE-N and ROUGE-L on whitespace tokens of lowercased strings.

use std::collections::HashMap;

fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|s| s.to_string())
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

fn f1_from(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// ROUGE-N precision/recall/F1 in `[0, 1]`. Clipped n-gram multiset overlap.
///
/// When neither side has any n-gram (both shorter than `n`) the pair is
/// scored as a vacuous match so that identical strings always reach 1.
pub fn rouge_n_prf(pred: &str, gold: &str, n: usize) -> (f64, f64, f64) {
    assert!(n >= 1, "n-gram order must be >= 1");
    let pred_toks = tokens(pred);
    let gold_toks = tokens(gold);
    let pred_grams = ngram_counts(&pred_toks, n);
    let gold_grams = ngram_counts(&gold_toks, n);
    let pred_total: usize = pred_grams.values().sum();
    let gold_total: usize = gold_grams.values().sum();
    if pred_total == 0 && gold_total == 0 {
        return (1.0, 1.0, 1.0);
    }
    if pred_total == 0 || gold_total == 0 {
        return (0.0, 0.0, 0.0);
    }
    let matches: usize = pred_grams
        .iter()
        .map(|(gram, &c)| c.min(gold_grams.get(gram).copied().unwrap_or(0)))
        .sum();
    let p = matches as f64 / pred_total as f64;
    let r = matches as f64 / gold_total as f64;
    (p, r, f1_from(p, r))
}

/// ROUGE-N F1 scaled to `[0, 100]`.
pub fn rouge_n(pred: &str, gold: &str, n: usize) -> f64 {
    rouge_n_prf(pred, gold, n).2 * 100.0
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            cur[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L precision/recall/F1 in `[0, 1]` from longest-common-subsequence
/// length.
pub fn rouge_l_prf(pred: &str, gold: &str) -> (f64, f64, f64) {
    let pred_toks = tokens(pred);
    let gold_toks = tokens(gold);
    if pred_toks.is_empty() && gold_toks.is_empty() {
        return (1.0, 1.0, 1.0);
    }
    if pred_toks.is_empty() || gold_toks.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let lcs = lcs_len(&pred_toks, &gold_toks) as f64;
    let p = lcs / pred_toks.len() as f64;
    let r = lcs / gold_toks.len() as f64;
    (p, r, f1_from(p, r))
}

/// ROUGE-L F1 scaled to `[0, 100]`.
pub fn rouge_l(pred: &str, gold: &str) -> f64 {
    rouge_l_prf(pred, gold).2 * 100.0
}
