//! Dataset ingestion, validation, serialization, and label derivation.
//!
//! All supported input formats are unified into [`MultiHopExample`] at load
//! time; format-specific fields survive in the `extra` bag so nothing is
//! lost on round-trip.

mod formats;
mod predictions;

pub use formats::{load_multihop_dataset, DatasetFormat};
pub use predictions::{load_predictions, serialize_predictions, PredictionFile};

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::normalize_answer;

/// Three-way answer class. The discriminants match the answer-type head's
/// output indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerType {
    Negative = 0,
    Positive = 1,
    Span = 2,
}

impl AnswerType {
    /// Classifies an answer string: "yes" is positive, "no" is negative,
    /// anything else is a span.
    pub fn classify(answer: &str) -> Self {
        match normalize_answer(answer).as_str() {
            "yes" => AnswerType::Positive,
            "no" => AnswerType::Negative,
            _ => AnswerType::Span,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        match idx {
            0 => Some(AnswerType::Negative),
            1 => Some(AnswerType::Positive),
            2 => Some(AnswerType::Span),
            _ => None,
        }
    }
}

/// One titled context paragraph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub title: String,
    pub sentences: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevance_label: Option<u8>,
}

impl Paragraph {
    pub fn new(title: impl Into<String>, sentences: Vec<String>) -> Self {
        Paragraph { title: title.into(), sentences, relevance_label: None }
    }

    pub fn text(&self) -> String {
        self.sentences.join(" ")
    }
}

/// One question-answering instance in the unified data model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiHopExample {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub answer_type: AnswerType,
    pub context: Vec<Paragraph>,
    pub supporting_facts: BTreeSet<(String, usize)>,
    pub hop_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_subquestions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_intermediate_answers: Option<Vec<String>>,
    /// Format-specific fields preserved from the source record.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl MultiHopExample {
    /// Checks every type invariant; `label` names the record in errors.
    pub fn validate(&self, label: &str) -> Result<()> {
        if !(2..=4).contains(&self.hop_count) {
            return Err(Error::data(format!(
                "example {label}: hop_count {} outside {{2,3,4}}",
                self.hop_count
            )));
        }
        for (pi, para) in self.context.iter().enumerate() {
            if para.sentences.is_empty() {
                return Err(Error::data(format!(
                    "example {label}: paragraph {pi} (\"{}\") has no sentences",
                    para.title
                )));
            }
            if let Some(l) = para.relevance_label {
                if l > 1 {
                    return Err(Error::data(format!(
                        "example {label}: paragraph {pi} relevance_label {l} not binary"
                    )));
                }
            }
        }
        for (title, sent_idx) in &self.supporting_facts {
            let Some(para) = self.context.iter().find(|p| &p.title == title) else {
                return Err(Error::data(format!(
                    "example {label}: supporting-fact title \"{title}\" matches no context title"
                )));
            };
            if *sent_idx >= para.sentences.len() {
                return Err(Error::data(format!(
                    "example {label}: supporting-fact sentence index {sent_idx} out of range \
                     for \"{title}\" ({} sentences)",
                    para.sentences.len()
                )));
            }
        }
        let expected = AnswerType::classify(&self.answer);
        if expected != self.answer_type {
            return Err(Error::data(format!(
                "example {label}: answer_type {:?} inconsistent with answer \"{}\"",
                self.answer_type, self.answer
            )));
        }
        Ok(())
    }

    /// Titles cited by at least one supporting fact.
    pub fn supporting_titles(&self) -> BTreeSet<&str> {
        self.supporting_facts.iter().map(|(t, _)| t.as_str()).collect()
    }
}

/// One decomposition-training instance: a multi-hop question with its gold
/// sub-questions and the evidence paragraphs they were written against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionExample {
    pub question: String,
    pub evidence_paragraphs: Vec<Paragraph>,
    pub subquestions: Vec<String>,
    pub hop_count: usize,
}

impl DecompositionExample {
    pub fn validate(&self, label: &str) -> Result<()> {
        if self.subquestions.is_empty() {
            return Err(Error::data(format!("decomposition {label}: no sub-questions")));
        }
        if self.hop_count != 0 && self.subquestions.len() != self.hop_count {
            return Err(Error::data(format!(
                "decomposition {label}: {} sub-questions but hop_count {}",
                self.subquestions.len(),
                self.hop_count
            )));
        }
        Ok(())
    }
}

/// Binary relevance label per context paragraph: 1 iff the paragraph title
/// is cited by any supporting fact.
pub fn derive_paragraph_labels(example: &MultiHopExample) -> Vec<u8> {
    let titles = example.supporting_titles();
    example
        .context
        .iter()
        .map(|p| u8::from(titles.contains(p.title.as_str())))
        .collect()
}

/// Seeded-shuffle prefix split. Train gets `floor(ratio * n)` examples; the
/// rest go to test. Deterministic for a fixed seed.
pub fn split_pokemqa(
    examples: &[DecompositionExample],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<DecompositionExample>, Vec<DecompositionExample>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut indices: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let train_len = (ratio * examples.len() as f64).floor() as usize;
    let train = indices[..train_len].iter().map(|&i| examples[i].clone()).collect();
    let test = indices[train_len..].iter().map(|&i| examples[i].clone()).collect();
    Ok((train, test))
}

/// Writes unified examples as line-delimited JSON.
pub fn save_examples(examples: &[MultiHopExample], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = BufWriter::new(file);
    for ex in examples {
        serde_json::to_writer(&mut writer, ex)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads unified examples back from line-delimited JSON, re-validating
/// every record.
pub fn load_examples(path: &Path) -> Result<Vec<MultiHopExample>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: MultiHopExample = serde_json::from_str(&line)
            .map_err(|e| Error::data(format!("examples line {}: {e}", i + 1)))?;
        ex.validate(&format!("{} (line {})", ex.id, i + 1))?;
        out.push(ex);
    }
    Ok(out)
}

/// Loads decomposition-training data from line-delimited JSON records
/// `{question, evidence_paragraphs?, subquestions, hop_count?}`.
pub fn load_decomposition_dataset(path: &Path) -> Result<Vec<DecompositionExample>> {
    #[derive(Deserialize)]
    struct Record {
        question: String,
        #[serde(default)]
        evidence_paragraphs: Vec<Paragraph>,
        subquestions: Vec<String>,
        #[serde(default)]
        hop_count: usize,
    }

    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::data(format!("decomposition line {}: {e}", i + 1)))?;
        let ex = DecompositionExample {
            question: rec.question,
            evidence_paragraphs: rec.evidence_paragraphs,
            subquestions: rec.subquestions,
            hop_count: if rec.hop_count == 0 { 0 } else { rec.hop_count },
        };
        ex.validate(&format!("line {}", i + 1))?;
        out.push(ex);
    }
    Ok(out)
}

/// Turns a multi-hop example with gold sub-questions into a decomposition
/// example over its supporting-fact paragraphs.
pub fn decomposition_from_example(example: &MultiHopExample) -> Option<DecompositionExample> {
    let subquestions = example.gold_subquestions.clone()?;
    if subquestions.is_empty() {
        return None;
    }
    let titles = example.supporting_titles();
    let evidence: Vec<Paragraph> = example
        .context
        .iter()
        .filter(|p| titles.contains(p.title.as_str()))
        .cloned()
        .collect();
    Some(DecompositionExample {
        question: example.question.clone(),
        hop_count: subquestions.len(),
        subquestions,
        evidence_paragraphs: evidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example_with(
        titles_and_sents: &[(&str, &[&str])],
        sp: &[(&str, usize)],
        answer: &str,
    ) -> MultiHopExample {
        MultiHopExample {
            id: "ex0".into(),
            question: "who did what?".into(),
            answer: answer.into(),
            answer_type: AnswerType::classify(answer),
            context: titles_and_sents
                .iter()
                .map(|(t, s)| Paragraph::new(*t, s.iter().map(|x| x.to_string()).collect()))
                .collect(),
            supporting_facts: sp.iter().map(|(t, i)| (t.to_string(), *i)).collect(),
            hop_count: 2,
            gold_subquestions: None,
            gold_intermediate_answers: None,
            extra: BTreeMap::new(),
        }
    }

    #[test]
    fn answer_type_classification() {
        assert_eq!(AnswerType::classify("yes"), AnswerType::Positive);
        assert_eq!(AnswerType::classify("No."), AnswerType::Negative);
        assert_eq!(AnswerType::classify("230"), AnswerType::Span);
    }

    #[test]
    fn validate_rejects_unknown_supporting_title() {
        let ex = example_with(&[("A", &["s0"])], &[("B", 0)], "x");
        let err = ex.validate("ex0").unwrap_err().to_string();
        assert!(err.contains("\"B\""), "error should name the title: {err}");
    }

    #[test]
    fn validate_rejects_out_of_range_sentence_index() {
        let ex = example_with(&[("A", &["s0"])], &[("A", 3)], "x");
        assert!(ex.validate("ex0").is_err());
    }

    #[test]
    fn labels_follow_supporting_titles() {
        let ex = example_with(
            &[("P0", &["s"]), ("P1", &["s"]), ("P2", &["s"]), ("P3", &["s"])],
            &[("P1", 0), ("P3", 0)],
            "x",
        );
        assert_eq!(derive_paragraph_labels(&ex), vec![0, 1, 0, 1]);
    }

    #[test]
    fn duplicate_fact_sentences_label_once() {
        let ex = example_with(&[("P0", &["s", "t"]), ("P1", &["s"])], &[("P0", 0), ("P0", 1)], "x");
        assert_eq!(derive_paragraph_labels(&ex), vec![1, 0]);
        assert_eq!(derive_paragraph_labels(&ex).len(), ex.context.len());
    }

    fn decomp(n: usize) -> Vec<DecompositionExample> {
        (0..n)
            .map(|i| DecompositionExample {
                question: format!("q{i}?"),
                evidence_paragraphs: vec![],
                subquestions: vec![format!("s{i}a?"), format!("s{i}b?")],
                hop_count: 2,
            })
            .collect()
    }

    #[test]
    fn split_sizes_are_floor_ceil() {
        let (train, test) = split_pokemqa(&decomp(3000), 0.8, 13).unwrap();
        assert_eq!((train.len(), test.len()), (2400, 600));
        let (train, test) = split_pokemqa(&decomp(5), 0.8, 13).unwrap();
        assert_eq!((train.len(), test.len()), (4, 1));
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let data = decomp(10);
        let (a_train, a_test) = split_pokemqa(&data, 0.8, 7).unwrap();
        let (b_train, b_test) = split_pokemqa(&data, 0.8, 7).unwrap();
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);

        let mut all: Vec<&str> = a_train
            .iter()
            .chain(a_test.iter())
            .map(|e| e.question.as_str())
            .collect();
        all.sort();
        let mut expected: Vec<String> = data.iter().map(|e| e.question.clone()).collect();
        expected.sort();
        assert_eq!(all, expected.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_bad_ratio() {
        assert!(split_pokemqa(&decomp(4), 0.0, 1).is_err());
        assert!(split_pokemqa(&decomp(4), 1.0, 1).is_err());
    }

    #[test]
    fn examples_round_trip_through_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("examples.jsonl");
        let examples = vec![example_with(&[("A", &["s0", "s1"])], &[("A", 1)], "yes")];
        save_examples(&examples, &path).unwrap();
        let loaded = load_examples(&path).unwrap();
        assert_eq!(loaded, examples);
    }
}
