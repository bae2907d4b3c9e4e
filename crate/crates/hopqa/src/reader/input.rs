//! Reader input assembly.
//!
//! Layout: `[CLS] Q [SEP] subq_1 [SEP] ... subq_k [SEP]` followed by one
//! block per paragraph (`title sent_1 sent_2 ... [SEP]`). Sentence token
//! ranges are recorded during assembly; truncation drops trailing
//! sub-questions and context sentences whole, never the question.

use serde::{Deserialize, Serialize};

use crate::corpus::Paragraph;
use crate::decomposer::SubQuestionSet;
use crate::error::{Error, Result};
use crate::text::{Vocab, CLS, SEP};

/// Token range of one context sentence, end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub paragraph_index: usize,
    pub sentence_index: usize,
    pub token_start: usize,
    pub token_end: usize,
}

/// One encoded reader sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderInput {
    pub token_ids: Vec<u32>,
    pub sentence_spans: Vec<SentenceSpan>,
    /// Token count of the question segment (excluding control tokens).
    pub question_length: usize,
    pub max_positions: usize,
    /// Titles aligned with `SentenceSpan::paragraph_index`.
    pub paragraph_titles: Vec<String>,
}

impl ReaderInput {
    /// Binary mask over tokens: 1 exactly on sentence tokens, where answer
    /// spans may live.
    pub fn context_mask(&self) -> Vec<u8> {
        let mut mask = vec![0u8; self.token_ids.len()];
        for span in &self.sentence_spans {
            for slot in &mut mask[span.token_start..span.token_end] {
                *slot = 1;
            }
        }
        mask
    }

    pub fn title_of(&self, span: &SentenceSpan) -> &str {
        &self.paragraph_titles[span.paragraph_index]
    }

    fn check(&self) -> Result<()> {
        let n = self.token_ids.len();
        if n > self.max_positions {
            return Err(Error::data("reader input exceeds max positions"));
        }
        let mut last_end = 0usize;
        for span in &self.sentence_spans {
            if span.token_start < last_end || span.token_end > n || span.token_start >= span.token_end
            {
                return Err(Error::data("reader sentence spans must be disjoint and in bounds"));
            }
            last_end = span.token_end;
        }
        Ok(())
    }
}

/// Assembles the reader sequence for one example. An empty sub-question set
/// degenerates to `[CLS] Q [SEP] context`, the no-decomposition ablation.
pub fn build_reader_input(
    question: &str,
    subquestions: &SubQuestionSet,
    paragraphs: &[Paragraph],
    vocab: &Vocab,
    max_positions: usize,
) -> Result<ReaderInput> {
    if paragraphs.is_empty() {
        return Err(Error::data("build_reader_input: no paragraphs"));
    }
    let cls = vocab.id(CLS);
    let sep = vocab.id(SEP);

    let question_tokens = vocab.encode(question);
    let mut token_ids = Vec::with_capacity(max_positions.min(4096));
    token_ids.push(cls);
    token_ids.extend(&question_tokens);
    token_ids.push(sep);
    if token_ids.len() > max_positions {
        return Err(Error::data(format!(
            "question alone needs {} tokens, budget is {max_positions}",
            token_ids.len()
        )));
    }

    for sub in subquestions.iter() {
        let sub_tokens = vocab.encode(sub);
        if token_ids.len() + sub_tokens.len() + 1 > max_positions {
            log::debug!("dropping trailing sub-questions to fit the position budget");
            break;
        }
        token_ids.extend(&sub_tokens);
        token_ids.push(sep);
    }

    let mut sentence_spans = Vec::new();
    let mut paragraph_titles = Vec::new();
    'context: for (pi, para) in paragraphs.iter().enumerate() {
        paragraph_titles.push(para.title.clone());
        let title_tokens = vocab.encode(&para.title);
        let first_sentence = vocab.encode(&para.sentences[0]);
        // a paragraph enters only if its title, first sentence, and closing
        // separator all fit
        if token_ids.len() + title_tokens.len() + first_sentence.len() + 1 > max_positions {
            break 'context;
        }
        token_ids.extend(&title_tokens);
        for (si, sentence) in para.sentences.iter().enumerate() {
            let sent_tokens = vocab.encode(sentence);
            if token_ids.len() + sent_tokens.len() + 1 > max_positions {
                token_ids.push(sep);
                break 'context;
            }
            sentence_spans.push(SentenceSpan {
                paragraph_index: pi,
                sentence_index: si,
                token_start: token_ids.len(),
                token_end: token_ids.len() + sent_tokens.len(),
            });
            token_ids.extend(&sent_tokens);
        }
        token_ids.push(sep);
    }

    let input = ReaderInput {
        token_ids,
        sentence_spans,
        question_length: question_tokens.len(),
        max_positions,
        paragraph_titles,
    };
    input.check()?;
    Ok(input)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_paragraphs() -> Vec<Paragraph> {
        vec![
            Paragraph::new(
                "Alpha",
                vec!["first alpha sentence".into(), "second alpha sentence".into(), "third one".into()],
            ),
            Paragraph::new(
                "Beta",
                vec!["first beta sentence".into(), "second beta sentence".into(), "third beta".into()],
            ),
        ]
    }

    fn vocab_for(paragraphs: &[Paragraph], extra: &[&str]) -> Vocab {
        let mut texts: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
        for p in paragraphs {
            texts.push(p.title.clone());
            texts.push(p.text());
        }
        Vocab::build(texts.iter().map(|s| s.as_str()))
    }

    #[test]
    fn spans_cover_every_sentence_past_the_question() {
        let paragraphs = fixture_paragraphs();
        let vocab = vocab_for(&paragraphs, &["what links alpha and beta?", "q1?", "q2?"]);
        let subqs = SubQuestionSet::new(vec!["q1?".into(), "q2?".into()]).unwrap();
        let input =
            build_reader_input("what links alpha and beta?", &subqs, &paragraphs, &vocab, 256)
                .unwrap();
        assert_eq!(input.sentence_spans.len(), 6);
        let question_region = 1 + input.question_length + 1;
        for span in &input.sentence_spans {
            assert!(span.token_start > question_region);
        }
        let mask = input.context_mask();
        assert_eq!(mask[0], 0);
        assert!(mask.iter().any(|&m| m == 1));
    }

    #[test]
    fn empty_subquestions_is_the_ablation_layout() {
        let paragraphs = fixture_paragraphs();
        let vocab = vocab_for(&paragraphs, &["question?"]);
        let with = build_reader_input(
            "question?",
            &SubQuestionSet::new(vec!["sub one?".into()]).unwrap(),
            &paragraphs,
            &vocab,
            256,
        )
        .unwrap();
        let without =
            build_reader_input("question?", &SubQuestionSet::empty(), &paragraphs, &vocab, 256)
                .unwrap();
        assert!(without.token_ids.len() < with.token_ids.len());
        assert_eq!(without.sentence_spans.len(), 6);
    }

    #[test]
    fn over_budget_context_drops_trailing_sentences_only() {
        let paragraphs = fixture_paragraphs();
        let vocab = vocab_for(&paragraphs, &["q?"]);
        let full = build_reader_input("q?", &SubQuestionSet::empty(), &paragraphs, &vocab, 256)
            .unwrap();
        // budget that fits the first paragraph but not all of the second
        let tight_budget = full.sentence_spans[4].token_end; // cuts inside Beta
        let tight =
            build_reader_input("q?", &SubQuestionSet::empty(), &paragraphs, &vocab, tight_budget)
                .unwrap();
        assert!(tight.sentence_spans.len() < full.sentence_spans.len());
        assert!(!tight.sentence_spans.is_empty());
        // surviving spans are unchanged
        for (a, b) in tight.sentence_spans.iter().zip(&full.sentence_spans) {
            assert_eq!(a, b);
        }
        assert!(tight.token_ids.len() <= tight_budget);
    }

    #[test]
    fn oversized_question_is_an_input_error() {
        let paragraphs = fixture_paragraphs();
        let vocab = vocab_for(&paragraphs, &["a b c d e f g h i j"]);
        let err =
            build_reader_input("a b c d e f g h i j", &SubQuestionSet::empty(), &paragraphs, &vocab, 8);
        assert!(err.is_err());
    }
}
