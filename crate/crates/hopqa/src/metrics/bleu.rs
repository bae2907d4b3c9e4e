//! Corpus-level BLEU with uniform 4-gram weights and brevity penalty.

use std::collections::HashMap;

const MAX_ORDER: usize = 4;

fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|s| s.to_string())
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<Vec<String>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU over (prediction, reference) pairs, scaled to `[0, 100]`.
///
/// Clipped n-gram matches and totals are summed over the whole corpus before
/// the geometric mean is taken. Orders with no predicted n-grams anywhere in
/// the corpus are excluded from the mean, so identical short strings still
/// score 100. No other smoothing is applied: a zero match count at an
/// included order yields 0.
pub fn bleu_corpus(pairs: &[(&str, &str)]) -> f64 {
    let mut matches = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let mut pred_len = 0usize;
    let mut gold_len = 0usize;

    for (pred, gold) in pairs {
        let pred_toks = tokens(pred);
        let gold_toks = tokens(gold);
        pred_len += pred_toks.len();
        gold_len += gold_toks.len();
        for n in 1..=MAX_ORDER {
            let pred_grams = ngram_counts(&pred_toks, n);
            let gold_grams = ngram_counts(&gold_toks, n);
            for (gram, &c) in &pred_grams {
                totals[n - 1] += c;
                matches[n - 1] += c.min(gold_grams.get(gram).copied().unwrap_or(0));
            }
        }
    }

    if totals[0] == 0 {
        // no predicted tokens at all: vacuously perfect only if the
        // references are empty too
        return if gold_len == 0 { 100.0 } else { 0.0 };
    }

    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for n in 0..MAX_ORDER {
        if totals[n] == 0 {
            continue;
        }
        if matches[n] == 0 {
            return 0.0;
        }
        log_sum += (matches[n] as f64 / totals[n] as f64).ln();
        orders += 1;
    }
    let geo_mean = (log_sum / orders as f64).exp();
    let brevity = if pred_len < gold_len {
        (1.0 - gold_len as f64 / pred_len as f64).exp()
    } else {
        1.0
    };
    geo_mean * brevity * 100.0
}
