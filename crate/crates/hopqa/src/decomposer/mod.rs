//! Generative question decomposition: produce independent, self-contained
//! sub-questions for a multi-hop question from its evidence paragraphs.

mod seq2seq;

pub use seq2seq::{train_decomposer, QdTrainReport, TinySeq2Seq};

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{DecompositionExample, Paragraph};
use crate::error::{Error, Result};
use crate::metrics::{answer_score, bleu_corpus, rouge_l, rouge_n, QdQuality};
use crate::registry::StrategyRegistry;
use crate::text::{detokenize, tokenize, CTX_SEP, SUBQ_SEP};

/// The literal pattern of a dependent-decomposition slot; generated
/// sub-questions must never contain one.
pub const PLACEHOLDER_PATTERN: &str = "[Answer of Sub Q";

/// An ordered set of independent, self-contained sub-questions. Entries are
/// trimmed, end with `?`, and contain no placeholder slots; the empty set
/// is the ablation (no-decomposition) value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubQuestionSet {
    subquestions: Vec<String>,
}

impl SubQuestionSet {
    /// Validates and wraps sub-question strings.
    pub fn new(items: Vec<String>) -> Result<Self> {
        let mut cleaned = Vec::with_capacity(items.len());
        for (i, raw) in items.into_iter().enumerate() {
            let trimmed = raw.trim().to_string();
            if trimmed.is_empty() {
                return Err(Error::data(format!("sub-question {i} is empty")));
            }
            if !trimmed.ends_with('?') {
                return Err(Error::data(format!(
                    "sub-question {i} does not end with '?': \"{trimmed}\""
                )));
            }
            if trimmed.contains(PLACEHOLDER_PATTERN) {
                return Err(Error::data(format!(
                    "sub-question {i} contains a dependent placeholder: \"{trimmed}\""
                )));
            }
            cleaned.push(trimmed);
        }
        Ok(SubQuestionSet { subquestions: cleaned })
    }

    /// Normalizing constructor: trims entries and appends a missing `?`.
    /// Entries that are empty or contain placeholders are still rejected.
    pub fn normalized(items: Vec<String>) -> Result<Self> {
        let fixed = items
            .into_iter()
            .map(|s| {
                let t = s.trim().to_string();
                if t.is_empty() || t.ends_with('?') {
                    t
                } else {
                    format!("{t}?")
                }
            })
            .collect();
        SubQuestionSet::new(fixed)
    }

    pub fn empty() -> Self {
        SubQuestionSet::default()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.subquestions
    }

    pub fn len(&self) -> usize {
        self.subquestions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subquestions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &String> {
        self.subquestions.iter()
    }

    /// Single-string form: entries joined by one space.
    pub fn serialized(&self) -> String {
        self.subquestions.join(" ")
    }

    /// Target-side form: entries joined by the reserved separator token.
    pub fn joined_with_separator(&self) -> String {
        self.subquestions.join(&format!(" {SUBQ_SEP} "))
    }
}

/// Splits raw generator output on the separator token, trims whitespace,
/// drops empty segments, and keeps only segments satisfying the
/// sub-question invariants. Zero surviving segments is an error.
pub fn parse_subquestion_output(raw: &str) -> Result<SubQuestionSet> {
    let mut kept = Vec::new();
    let mut dropped = 0usize;
    for segment in raw.split(SUBQ_SEP) {
        let trimmed = segment.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.ends_with('?') && !trimmed.contains(PLACEHOLDER_PATTERN) {
            kept.push(trimmed.to_string());
        } else {
            dropped += 1;
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyDecomposition);
    }
    if dropped > 0 {
        log::debug!("parse_subquestion_output dropped {dropped} invalid segment(s)");
    }
    SubQuestionSet::new(kept)
}

/// Generator hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub model_identifier: String,
    /// Source budget in tokens.
    pub max_input_length: usize,
    /// Generation budget in tokens.
    pub max_output_length: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub position_dim: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            model_identifier: "tiny-seq2seq".into(),
            max_input_length: 512,
            max_output_length: 64,
            batch_size: 32,
            learning_rate: 5e-5,
            epochs: 1,
            embed_dim: 32,
            hidden_dim: 64,
            position_dim: 16,
            seed: 13,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_input_length == 0
            || self.max_output_length == 0
            || self.batch_size == 0
            || self.embed_dim == 0
            || self.hidden_dim == 0
            || self.position_dim == 0
        {
            return Err(Error::config("generator lengths and dimensions must be positive"));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::config("generator learning rate must be positive"));
        }
        Ok(())
    }
}

/// One source/target pair for generator fine-tuning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QdTrainingPair {
    pub source_text: String,
    pub target_text: String,
}

/// Renders the generator source: question first, then each evidence
/// paragraph behind a context separator, so truncation eats evidence
/// before the question.
pub fn render_source(question: &str, paragraphs: &[Paragraph]) -> String {
    let mut source = question.trim().to_string();
    for para in paragraphs {
        source.push_str(&format!(" {CTX_SEP} {} : {}", para.title, para.text()));
    }
    source
}

/// Builds the training pair for one decomposition example: the source is
/// question + evidence truncated to `max_input_length` tokens, the target
/// joins the gold sub-questions with the separator token.
pub fn build_qd_training_pair(
    example: &DecompositionExample,
    config: &GeneratorConfig,
) -> Result<QdTrainingPair> {
    if example.subquestions.is_empty() {
        return Err(Error::data(format!(
            "decomposition example \"{}\" has no gold sub-questions",
            example.question
        )));
    }
    if example.evidence_paragraphs.is_empty() {
        return Err(Error::data(format!(
            "decomposition example \"{}\" has no evidence paragraphs",
            example.question
        )));
    }
    let mut tokens = tokenize(&render_source(&example.question, &example.evidence_paragraphs));
    tokens.truncate(config.max_input_length);
    let target = SubQuestionSet::normalized(example.subquestions.clone())?;
    Ok(QdTrainingPair {
        source_text: detokenize(&tokens),
        target_text: target.joined_with_separator(),
    })
}

/// What a decomposer sees for one example.
#[derive(Debug, Clone, Copy)]
pub struct DecompositionRequest<'a> {
    pub id: &'a str,
    pub question: &'a str,
    pub paragraphs: &'a [Paragraph],
    pub gold_subquestions: Option<&'a [String]>,
}

/// A decomposition strategy.
pub trait Decomposer: Send + Sync {
    fn name(&self) -> &str;

    fn generate(&self, request: &DecompositionRequest<'_>) -> Result<SubQuestionSet>;
}

/// Echoes the original question as the sole sub-question.
pub struct PassthroughDecomposer;

impl Decomposer for PassthroughDecomposer {
    fn name(&self) -> &str {
        "passthrough"
    }

    fn generate(&self, request: &DecompositionRequest<'_>) -> Result<SubQuestionSet> {
        SubQuestionSet::normalized(vec![request.question.to_string()])
    }
}

/// Replays gold sub-questions; errors when the example carries none.
pub struct GoldDecomposer;

impl Decomposer for GoldDecomposer {
    fn name(&self) -> &str {
        "gold"
    }

    fn generate(&self, request: &DecompositionRequest<'_>) -> Result<SubQuestionSet> {
        match request.gold_subquestions {
            Some(gold) if !gold.is_empty() => SubQuestionSet::normalized(gold.to_vec()),
            _ => Err(Error::data(format!(
                "example {} has no gold sub-questions for the gold decomposer",
                request.id
            ))),
        }
    }
}

/// Runtime configuration for building a decomposer from the registry.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DecomposerConfig {
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub generator: GeneratorConfig,
}

/// Registry of built-in decomposition strategies.
pub fn decomposer_registry() -> StrategyRegistry<DecomposerConfig, dyn Decomposer> {
    let mut registry = StrategyRegistry::new("decomposer");
    registry.register("tiny-seq2seq", |cfg: &DecomposerConfig| {
        let model = match &cfg.checkpoint {
            Some(dir) => TinySeq2Seq::load(dir)?,
            None => TinySeq2Seq::new(crate::text::Vocab::build([]), cfg.generator.clone())?,
        };
        Ok(Box::new(model) as Box<dyn Decomposer>)
    });
    registry
        .register("passthrough", |_cfg| Ok(Box::new(PassthroughDecomposer) as Box<dyn Decomposer>));
    registry.register("gold", |_cfg| Ok(Box::new(GoldDecomposer) as Box<dyn Decomposer>));
    registry
}

/// Runs a decomposer and applies the standard fallback: on an unparseable
/// generation the original question becomes the sole sub-question and the
/// example is marked.
pub fn decompose_with_fallback(
    decomposer: &dyn Decomposer,
    request: &DecompositionRequest<'_>,
) -> (SubQuestionSet, bool) {
    match decomposer.generate(request) {
        Ok(set) => (set, false),
        Err(err) => {
            log::warn!(
                "decomposition failed for {} ({err}); falling back to the question",
                request.id
            );
            let fallback = SubQuestionSet::normalized(vec![request.question.to_string()])
                .unwrap_or_else(|_| SubQuestionSet::empty());
            (fallback, true)
        }
    }
}

/// Corpus-level decomposition quality: token F1, ROUGE-1, ROUGE-L (means)
/// and corpus BLEU, all on the serialized sub-question strings.
pub fn evaluate_decompositions(
    predicted: &[SubQuestionSet],
    gold: &[SubQuestionSet],
) -> Result<QdQuality> {
    if predicted.len() != gold.len() {
        return Err(Error::data(format!(
            "evaluate_decompositions: {} predictions vs {} references",
            predicted.len(),
            gold.len()
        )));
    }
    let pred_strings: Vec<String> = predicted.iter().map(|s| s.serialized()).collect();
    let gold_strings: Vec<String> = gold.iter().map(|s| s.serialized()).collect();
    let mut f: Vec<f64> = Vec::new();
    let mut r1: Vec<f64> = Vec::new();
    let mut rl: Vec<f64> = Vec::new();
    for (p, g) in pred_strings.iter().zip(&gold_strings) {
        f.push(answer_score(p, g).f1 * 100.0);
        r1.push(rouge_n(p, g, 1));
        rl.push(rouge_l(p, g));
    }
    let mean = |v: &mut Vec<f64>| {
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(|a, b| a.total_cmp(b));
        v.iter().sum::<f64>() / v.len() as f64
    };
    let pairs: Vec<(&str, &str)> = pred_strings
        .iter()
        .map(|p| p.as_str())
        .zip(gold_strings.iter().map(|g| g.as_str()))
        .collect();
    Ok(QdQuality {
        f_measure: mean(&mut f),
        rouge1: mean(&mut r1),
        rouge_l: mean(&mut rl),
        bleu: bleu_corpus(&pairs),
        count: predicted.len(),
    })
}

/// Line-delimited persistence record for generated sub-question sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubQuestionRecord {
    pub id: String,
    pub question: String,
    pub subquestions: Vec<String>,
    #[serde(default)]
    pub fallback: bool,
}

pub fn save_subquestion_records(records: &[SubQuestionRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut writer, rec)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn load_subquestion_records(path: &Path) -> Result<Vec<SubQuestionRecord>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SubQuestionRecord = serde_json::from_str(&line)
            .map_err(|e| Error::data(format!("sub-question record line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> DecompositionExample {
        DecompositionExample {
            question: "The record holder has won how many tournaments worldwide?".into(),
            evidence_paragraphs: vec![
                Paragraph::new(
                    "Argentine PGA Championship",
                    vec!["Roberto De Vicenzo holds the record.".into()],
                ),
                Paragraph::new(
                    "Roberto De Vicenzo",
                    vec!["He won 230 tournaments worldwide.".into()],
                ),
            ],
            subquestions: vec![
                "Who is the record holder for the championship?".into(),
                "How many tournaments did Roberto De Vicenzo win?".into(),
            ],
            hop_count: 2,
        }
    }

    #[test]
    fn parse_splits_and_trims() {
        let set = parse_subquestion_output("Q1? <subq> Q2?").unwrap();
        assert_eq!(set.as_slice(), &["Q1?".to_string(), "Q2?".to_string()][..]);
    }

    #[test]
    fn parse_rejects_blank_output() {
        assert!(matches!(parse_subquestion_output("  <subq>  "), Err(Error::EmptyDecomposition)));
    }

    #[test]
    fn parse_preserves_duplicates() {
        let set = parse_subquestion_output("Q1?<subq>Q1?").unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.as_slice()[0], set.as_slice()[1]);
    }

    #[test]
    fn parse_drops_placeholder_segments() {
        let raw = "Who holds the record? <subq> How many did [Answer of Sub Q1] win?";
        let set = parse_subquestion_output(raw).unwrap();
        assert_eq!(set.len(), 1);
        assert!(!set.serialized().contains(PLACEHOLDER_PATTERN));
    }

    #[test]
    fn training_pair_layout_and_round_trip() {
        let config = GeneratorConfig::default();
        let pair = build_qd_training_pair(&example(), &config).unwrap();
        assert!(pair.source_text.starts_with("The record holder"));
        assert!(pair.source_text.contains(CTX_SEP));
        // parsing the target reproduces the gold list exactly
        let parsed = parse_subquestion_output(&pair.target_text).unwrap();
        assert_eq!(parsed.as_slice(), &example().subquestions[..]);
    }

    #[test]
    fn training_pair_truncates_to_budget() {
        let mut ex = example();
        ex.evidence_paragraphs[0].sentences =
            vec![(0..600).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")];
        let config = GeneratorConfig { max_input_length: 32, ..Default::default() };
        let pair = build_qd_training_pair(&ex, &config).unwrap();
        assert_eq!(tokenize(&pair.source_text).len(), 32);
    }

    #[test]
    fn training_pair_requires_evidence_and_gold() {
        let config = GeneratorConfig::default();
        let mut no_para = example();
        no_para.evidence_paragraphs.clear();
        assert!(build_qd_training_pair(&no_para, &config).is_err());
        let mut no_gold = example();
        no_gold.subquestions.clear();
        assert!(build_qd_training_pair(&no_gold, &config).is_err());
    }

    #[test]
    fn identical_decompositions_score_100() {
        let sets = vec![SubQuestionSet::new(vec!["Who won?".into(), "How many?".into()]).unwrap()];
        let q = evaluate_decompositions(&sets, &sets).unwrap();
        assert_eq!(q.f_measure, 100.0);
        assert_eq!(q.rouge1, 100.0);
        assert_eq!(q.rouge_l, 100.0);
        assert!((q.bleu - 100.0).abs() < 1e-9);
    }

    #[test]
    fn disjoint_decompositions_score_0() {
        let pred = vec![SubQuestionSet::new(vec!["alpha beta gamma?".into()]).unwrap()];
        let gold = vec![SubQuestionSet::new(vec!["delta epsilon zeta?".into()]).unwrap()];
        let q = evaluate_decompositions(&pred, &gold).unwrap();
        assert_eq!(q.f_measure, 0.0);
        assert_eq!(q.rouge1, 0.0);
        assert_eq!(q.rouge_l, 0.0);
        assert_eq!(q.bleu, 0.0);
    }

    #[test]
    fn evaluation_rejects_length_mismatch() {
        let one = vec![SubQuestionSet::new(vec!["a?".into()]).unwrap()];
        assert!(evaluate_decompositions(&one, &[]).is_err());
    }

    #[test]
    fn passthrough_and_gold_strategies() {
        let paragraphs = vec![Paragraph::new("T", vec!["body".into()])];
        let gold = vec!["Who won the cup?".to_string(), "Where was it held?".to_string()];
        let request = DecompositionRequest {
            id: "e1",
            question: "Which city hosted the cup final won by whom",
            paragraphs: &paragraphs,
            gold_subquestions: Some(&gold),
        };
        let pass = PassthroughDecomposer.generate(&request).unwrap();
        assert_eq!(pass.len(), 1);
        assert!(pass.as_slice()[0].ends_with('?'));
        let g = GoldDecomposer.generate(&request).unwrap();
        assert_eq!(g.as_slice(), &gold[..]);
        let no_gold = DecompositionRequest { gold_subquestions: None, ..request };
        assert!(GoldDecomposer.generate(&no_gold).is_err());
    }

    #[test]
    fn registry_knows_builtins() {
        let registry = decomposer_registry();
        assert!(registry.contains("tiny-seq2seq"));
        assert!(registry.contains("passthrough"));
        assert!(registry.contains("gold"));
        let built = registry.build("passthrough", &DecomposerConfig::default()).unwrap();
        assert_eq!(built.name(), "passthrough");
    }

    #[test]
    fn records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("subq.jsonl");
        let records = vec![SubQuestionRecord {
            id: "a".into(),
            question: "q?".into(),
            subquestions: vec!["s1?".into(), "s2?".into()],
            fallback: false,
        }];
        save_subquestion_records(&records, &path).unwrap();
        assert_eq!(load_subquestion_records(&path).unwrap(), records);
    }
}
