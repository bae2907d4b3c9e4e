//! Training-free baseline scorer: token-overlap fraction between the query
//! and the paragraph.

use std::collections::BTreeSet;

use super::{ParagraphScore, ParagraphScorer, PROB_EPS};
use crate::corpus::Paragraph;
use crate::error::{Error, Result};
use crate::text::tokenize;

pub struct LexicalOverlapScorer;

fn token_set(text: &str) -> BTreeSet<String> {
    tokenize(&text.to_lowercase()).into_iter().filter(|t| t.len() > 1).collect()
}

fn overlap_score(query: &BTreeSet<String>, paragraph: &Paragraph) -> f64 {
    if query.is_empty() {
        return 0.5;
    }
    let para_tokens = token_set(&format!("{} {}", paragraph.title, paragraph.text()));
    let shared = query.intersection(&para_tokens).count();
    shared as f64 / query.len() as f64
}

impl ParagraphScorer for LexicalOverlapScorer {
    fn name(&self) -> &str {
        "lexical-overlap"
    }

    fn score_paragraphs(
        &self,
        question: &str,
        subquestions: &[String],
        paragraphs: &[Paragraph],
    ) -> Result<Vec<ParagraphScore>> {
        if paragraphs.is_empty() {
            return Err(Error::data("score_paragraphs: no paragraphs"));
        }
        let mut out = Vec::new();
        let mut push_block = |sub_idx: Option<usize>, query_text: String| {
            let query = token_set(&query_text);
            for (pi, para) in paragraphs.iter().enumerate() {
                let s = overlap_score(&query, para).clamp(PROB_EPS, 1.0 - PROB_EPS);
                // logits chosen so the softmax at the relevant slot equals s
                out.push(ParagraphScore {
                    paragraph_index: pi,
                    subquestion_index: sub_idx,
                    score: s,
                    logits: ((1.0 - s).ln(), s.ln()),
                });
            }
        };
        push_block(None, question.to_string());
        for (si, sub) in subquestions.iter().enumerate() {
            push_block(Some(si), format!("{question} {sub}"));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlapping_paragraph_outscores_disjoint_one() {
        let paragraphs = vec![
            Paragraph::new("golf", vec!["the record holder won many tournaments".into()]),
            Paragraph::new("cooking", vec!["simmer gently with garlic".into()]),
        ];
        let scores = LexicalOverlapScorer
            .score_paragraphs("who holds the tournament record?", &[], &paragraphs)
            .unwrap();
        assert!(scores[0].score > scores[1].score);
    }

    #[test]
    fn score_equals_softmax_of_logits() {
        let paragraphs = vec![Paragraph::new("t", vec!["record holder".into()])];
        let scores =
            LexicalOverlapScorer.score_paragraphs("record?", &[], &paragraphs).unwrap();
        let (l0, l1) = scores[0].logits;
        let softmax_rel = l1.exp() / (l0.exp() + l1.exp());
        assert!((softmax_rel - scores[0].score).abs() < 1e-9);
    }

    #[test]
    fn subquestions_add_score_blocks() {
        let paragraphs = vec![Paragraph::new("t", vec!["body".into()])];
        let scores = LexicalOverlapScorer
            .score_paragraphs("q?", &["s1?".into(), "s2?".into()], &paragraphs)
            .unwrap();
        assert_eq!(scores.len(), 3);
    }
}
