//! Reasoning-chain statistics: correctness patterns over the final answer
//! and the two sub-question answers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-example correctness flags for (question, sub-question 1,
/// sub-question 2), judged by exact match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainTriple {
    pub q_correct: bool,
    pub sub1_correct: bool,
    pub sub2_correct: bool,
}

/// Fixed row order of the categorical table: `c` = correct, `w` = wrong,
/// positions (question, sub1, sub2).
pub const CHAIN_ROW_LABELS: [&str; 8] = ["ccc", "ccw", "cwc", "cww", "wcc", "wcw", "wwc", "www"];

/// Percentage of examples falling in each correctness category, in
/// [`CHAIN_ROW_LABELS`] order. Rows sum to 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTable {
    pub percentages: [f64; 8],
    pub total: usize,
}

impl ChainTable {
    pub fn rows(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        CHAIN_ROW_LABELS.iter().copied().zip(self.percentages.iter().copied())
    }

    /// Share of examples with a fully correct chain (the `ccc` row).
    pub fn right_chain(&self) -> f64 {
        self.percentages[0]
    }

    /// Share of examples with a correct final answer reached through at
    /// least one wrong sub-answer (`cwc` + `cww` rows plus `ccw`).
    pub fn correct_answer_wrong_chain(&self) -> f64 {
        self.percentages[1] + self.percentages[2] + self.percentages[3]
    }
}

fn category(triple: &ChainTriple) -> usize {
    (usize::from(!triple.q_correct) << 2)
        | (usize::from(!triple.sub1_correct) << 1)
        | usize::from(!triple.sub2_correct)
}

/// Builds the 8-row categorical percentage table from per-example triples.
pub fn reasoning_chain_table(triples: &[ChainTriple]) -> Result<ChainTable> {
    if triples.is_empty() {
        return Err(Error::data("reasoning-chain table requires at least one triple"));
    }
    let mut counts = [0usize; 8];
    for t in triples {
        counts[category(t)] += 1;
    }
    let total = triples.len() as f64;
    let mut percentages = [0.0; 8];
    for (slot, &count) in percentages.iter_mut().zip(counts.iter()) {
        *slot = count as f64 / total * 100.0;
    }
    Ok(ChainTable { percentages, total: triples.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triple(q: bool, s1: bool, s2: bool) -> ChainTriple {
        ChainTriple { q_correct: q, sub1_correct: s1, sub2_correct: s2 }
    }

    #[test]
    fn all_correct_fills_first_row() {
        let table = reasoning_chain_table(&[triple(true, true, true); 4]).unwrap();
        assert_eq!(table.percentages[0], 100.0);
        assert!(table.percentages[1..].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn uniform_categories_each_get_twelve_point_five() {
        let mut triples = Vec::new();
        for q in [true, false] {
            for s1 in [true, false] {
                for s2 in [true, false] {
                    triples.push(triple(q, s1, s2));
                }
            }
        }
        let table = reasoning_chain_table(&triples).unwrap();
        for p in table.percentages {
            assert!((p - 12.5).abs() < 1e-12);
        }
    }

    #[test]
    fn row_order_matches_labels() {
        // one example in ccw: correct final answer, correct sub1, wrong sub2
        let table = reasoning_chain_table(&[triple(true, true, false)]).unwrap();
        assert_eq!(table.percentages[1], 100.0);
        assert_eq!(CHAIN_ROW_LABELS[1], "ccw");
        // wwc lands at index 6
        let table = reasoning_chain_table(&[triple(false, false, true)]).unwrap();
        assert_eq!(table.percentages[6], 100.0);
        assert_eq!(CHAIN_ROW_LABELS[6], "wwc");
    }

    #[test]
    fn rows_sum_to_100() {
        let triples = vec![
            triple(true, false, true),
            triple(false, true, true),
            triple(true, true, true),
        ];
        let table = reasoning_chain_table(&triples).unwrap();
        let sum: f64 = table.percentages.iter().sum();
        assert!((sum - 100.0).abs() < 0.1);
    }

    #[test]
    fn empty_input_is_a_data_error() {
        assert!(reasoning_chain_table(&[]).is_err());
    }
}
