//! Parsers for the supported dataset formats.
//!
//! Every format is mapped into [`MultiHopExample`]; fields the unified model
//! has no slot for are preserved verbatim in `extra`.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use super::{AnswerType, MultiHopExample, Paragraph};
use crate::error::{Error, Result};

/// Supported input formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// JSON array of records with `_id`, `question`, `answer`,
    /// `context` = [[title, [sentence, ...]], ...] and
    /// `supporting_facts` = [[title, sentence_index], ...].
    HotpotQa,
    /// Same record shape as HotpotQA, with extra fields (`type`,
    /// `evidences`) kept in the extra bag.
    TwoWiki,
    /// JSON-lines records with `paragraphs` and `question_decomposition`.
    Musique,
    /// HotpotQA records augmented with human-verified `sub_questions` and
    /// `sub_answers`.
    Hvsqa,
}

impl DatasetFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetFormat::HotpotQa => "hotpotqa",
            DatasetFormat::TwoWiki => "2wiki",
            DatasetFormat::Musique => "musique",
            DatasetFormat::Hvsqa => "hvsqa",
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hotpotqa" => Ok(DatasetFormat::HotpotQa),
            "2wiki" => Ok(DatasetFormat::TwoWiki),
            "musique" => Ok(DatasetFormat::Musique),
            "hvsqa" => Ok(DatasetFormat::Hvsqa),
            other => Err(Error::config(format!(
                "unknown dataset format `{other}` (expected hotpotqa, 2wiki, musique, or hvsqa)"
            ))),
        }
    }
}

/// Loads and validates a dataset file, preserving record order.
pub fn load_multihop_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<MultiHopExample>> {
    let examples = match format {
        DatasetFormat::HotpotQa | DatasetFormat::TwoWiki => load_hotpot_style(path, false)?,
        DatasetFormat::Hvsqa => load_hotpot_style(path, true)?,
        DatasetFormat::Musique => load_musique(path)?,
    };
    for (i, ex) in examples.iter().enumerate() {
        ex.validate(&format!("{} (index {i})", ex.id))?;
    }
    Ok(examples)
}

#[derive(Deserialize)]
struct HotpotRecord {
    #[serde(rename = "_id")]
    id: String,
    question: String,
    answer: String,
    context: Vec<(String, Vec<String>)>,
    supporting_facts: Vec<(String, usize)>,
    #[serde(default)]
    sub_questions: Option<Vec<String>>,
    #[serde(default)]
    sub_answers: Option<Vec<String>>,
    #[serde(flatten)]
    extra: BTreeMap<String, serde_json::Value>,
}

fn load_hotpot_style(path: &Path, expect_subquestions: bool) -> Result<Vec<MultiHopExample>> {
    let file = std::fs::File::open(path)?;
    let records: Vec<HotpotRecord> = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::with_capacity(records.len());
    for (i, rec) in records.into_iter().enumerate() {
        if expect_subquestions && rec.sub_questions.as_deref().unwrap_or_default().is_empty() {
            return Err(Error::data(format!(
                "example {} (index {i}): field sub_questions missing or empty",
                rec.id
            )));
        }
        let hop_count = match &rec.sub_questions {
            Some(subs) => subs.len().max(2),
            None => 2,
        };
        out.push(MultiHopExample {
            id: rec.id,
            question: rec.question,
            answer_type: AnswerType::classify(&rec.answer),
            answer: rec.answer,
            context: rec
                .context
                .into_iter()
                .map(|(title, sentences)| Paragraph::new(title, sentences))
                .collect(),
            supporting_facts: rec.supporting_facts.into_iter().collect(),
            hop_count,
            gold_subquestions: rec.sub_questions,
            gold_intermediate_answers: rec.sub_answers,
            extra: rec.extra,
        });
    }
    Ok(out)
}

#[derive(Deserialize)]
struct MusiqueParagraph {
    title: String,
    paragraph_text: String,
    #[serde(default)]
    is_supporting: bool,
}

#[derive(Deserialize)]
struct MusiqueDecompositionStep {
    question: String,
    #[serde(default)]
    answer: String,
}

#[derive(Deserialize)]
struct MusiqueRecord {
    id: String,
    question: String,
    answer: String,
    paragraphs: Vec<MusiqueParagraph>,
    #[serde(default)]
    question_decomposition: Vec<MusiqueDecompositionStep>,
    #[serde(default)]
    answerable: Option<bool>,
    #[serde(flatten)]
    extra: BTreeMap<String, serde_json::Value>,
}

/// Hop count from ids like `2hop__123_456`, falling back to the
/// decomposition length.
fn musique_hop_count(id: &str, decomposition_len: usize) -> usize {
    id.split_once("hop")
        .and_then(|(prefix, _)| prefix.parse::<usize>().ok())
        .unwrap_or(decomposition_len)
}

fn load_musique(path: &Path) -> Result<Vec<MultiHopExample>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: MusiqueRecord = serde_json::from_str(&line)
            .map_err(|e| Error::data(format!("example index {i}: {e}")))?;
        if rec.answerable == Some(false) {
            return Err(Error::data(format!(
                "example {} (index {i}): field answerable is false; only the answerable \
                 subset is supported",
                rec.id
            )));
        }
        let hop_count = musique_hop_count(&rec.id, rec.question_decomposition.len());
        // Paragraphs arrive unsegmented; each becomes a single-sentence
        // paragraph so supporting facts index sentence 0.
        let supporting_facts = rec
            .paragraphs
            .iter()
            .filter(|p| p.is_supporting)
            .map(|p| (p.title.clone(), 0))
            .collect();
        let context = rec
            .paragraphs
            .into_iter()
            .map(|p| Paragraph {
                title: p.title,
                sentences: vec![p.paragraph_text],
                relevance_label: Some(u8::from(p.is_supporting)),
            })
            .collect();
        let (gold_subquestions, gold_intermediate_answers) =
            if rec.question_decomposition.is_empty() {
                (None, None)
            } else {
                let qs = rec.question_decomposition.iter().map(|s| s.question.clone()).collect();
                let answers =
                    rec.question_decomposition.iter().map(|s| s.answer.clone()).collect();
                (Some(qs), Some(answers))
            };
        out.push(MultiHopExample {
            id: rec.id,
            question: rec.question,
            answer_type: AnswerType::classify(&rec.answer),
            answer: rec.answer,
            context,
            supporting_facts,
            hop_count,
            gold_subquestions,
            gold_intermediate_answers,
            extra: rec.extra,
        });
    }
    Ok(out)
}
