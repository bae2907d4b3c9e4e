//! Sequence encoding for paragraph scoring.

use serde::{Deserialize, Serialize};

use crate::corpus::Paragraph;
use crate::text::{Vocab, CLS, SEP};

/// One (question, optional sub-question, paragraph) triple to score.
#[derive(Debug, Clone, Copy)]
pub struct ScoringInput<'a> {
    pub question: &'a str,
    pub subquestion: Option<&'a str>,
    pub paragraph: &'a Paragraph,
}

/// Origin of one encoded row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowProvenance {
    pub example_id: String,
    pub paragraph_index: usize,
    pub subquestion_index: Option<usize>,
}

/// A single encoded sequence, unpadded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedRow {
    pub token_ids: Vec<u32>,
    pub provenance: RowProvenance,
}

/// A padded batch of encoded rows with its attention mask.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBatch {
    pub token_ids: Vec<Vec<u32>>,
    pub attention_mask: Vec<Vec<u8>>,
    pub provenance: Vec<RowProvenance>,
}

impl EncodedBatch {
    pub fn from_rows(rows: Vec<EncodedRow>, pad_id: u32) -> Self {
        let width = rows.iter().map(|r| r.token_ids.len()).max().unwrap_or(0);
        let mut token_ids = Vec::with_capacity(rows.len());
        let mut attention_mask = Vec::with_capacity(rows.len());
        let mut provenance = Vec::with_capacity(rows.len());
        for row in rows {
            let mut ids = row.token_ids;
            let mut mask = vec![1u8; ids.len()];
            ids.resize(width, pad_id);
            mask.resize(width, 0);
            token_ids.push(ids);
            attention_mask.push(mask);
            provenance.push(row.provenance);
        }
        EncodedBatch { token_ids, attention_mask, provenance }
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Unpadded token ids of row `i`.
    pub fn row_tokens(&self, i: usize) -> Vec<usize> {
        self.token_ids[i]
            .iter()
            .zip(&self.attention_mask[i])
            .filter(|(_, &m)| m == 1)
            .map(|(&id, _)| id as usize)
            .collect()
    }
}

/// Encodes one scoring triple as
/// `[CLS] question [SEP] (sub-question [SEP])? paragraph [SEP]`,
/// truncating the paragraph first, then the sub-question, and the question
/// tail only as a last resort so the row always fits `max_len`.
pub fn encode_pair(
    input: &ScoringInput<'_>,
    vocab: &Vocab,
    max_len: usize,
    provenance: RowProvenance,
) -> EncodedRow {
    debug_assert!(max_len >= 16, "scoring rows need a budget of at least 16 tokens");
    let cls = vocab.id(CLS);
    let sep = vocab.id(SEP);

    let mut question = vocab.encode(input.question);
    let mut subquestion = input.subquestion.map(|s| vocab.encode(s));
    let para_text = format!("{} : {}", input.paragraph.title, input.paragraph.text());
    let mut paragraph = vocab.encode(&para_text);

    let fixed = 2 + if subquestion.is_some() { 2 } else { 1 };
    let budget = max_len.saturating_sub(fixed);
    let q_len = question.len();
    let sub_len = subquestion.as_ref().map_or(0, |s| s.len());
    if q_len + sub_len + paragraph.len() > budget {
        let para_keep = budget.saturating_sub(q_len + sub_len);
        paragraph.truncate(para_keep);
    }
    if let Some(sub) = subquestion.as_mut() {
        if q_len + sub.len() + paragraph.len() > budget {
            sub.truncate(budget.saturating_sub(q_len));
        }
    }
    if question.len() + subquestion.as_ref().map_or(0, |s| s.len()) + paragraph.len() > budget {
        question.truncate(budget);
    }

    let mut token_ids = Vec::with_capacity(max_len);
    token_ids.push(cls);
    token_ids.extend(&question);
    token_ids.push(sep);
    if let Some(sub) = &subquestion {
        token_ids.extend(sub);
        token_ids.push(sep);
    }
    token_ids.extend(&paragraph);
    token_ids.push(sep);
    EncodedRow { token_ids, provenance }
}
