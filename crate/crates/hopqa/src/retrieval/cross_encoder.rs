//! Trainable cross-encoder scorer: embedding mean-pool, one hidden layer,
//! and a two-logit relevance head.
//!
//! The relevance head is zero-initialized, so a freshly built scorer emits
//! probability 0.5 for every paragraph until trained.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encode::{encode_pair, EncodedBatch, EncodedRow, RowProvenance, ScoringInput};
use super::{ParagraphScore, ParagraphScorer};
use crate::corpus::Paragraph;
use crate::error::{Error, Result};
use crate::nn::{softmax_rows, Adam, Matrix, ParamId, ParamStore, Tape};
use crate::text::{Vocab, PAD};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EncoderShape {
    embed_dim: usize,
    hidden_dim: usize,
    max_len: usize,
}

pub struct TinyCrossEncoder {
    vocab: Vocab,
    store: ParamStore,
    shape: EncoderShape,
    emb: ParamId,
    w1: ParamId,
    b1: ParamId,
    head_w: ParamId,
    head_b: ParamId,
}

impl TinyCrossEncoder {
    pub fn new(vocab: Vocab, embed_dim: usize, hidden_dim: usize, max_len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let scale = 0.1;
        let emb = store.uniform("emb", vocab.len(), embed_dim, scale, &mut rng);
        let w1 = store.uniform("w1", embed_dim, hidden_dim, scale, &mut rng);
        let b1 = store.zeros("b1", 1, hidden_dim);
        let head_w = store.zeros("head_w", hidden_dim, 2);
        let head_b = store.zeros("head_b", 1, 2);
        TinyCrossEncoder {
            vocab,
            store,
            shape: EncoderShape { embed_dim, hidden_dim, max_len },
            emb,
            w1,
            b1,
            head_w,
            head_b,
        }
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn max_len(&self) -> usize {
        self.shape.max_len
    }

    /// Builds the encoded batch for one example's scoring grid:
    /// question-only rows first, then one block per sub-question.
    pub fn encode_example(
        &self,
        example_id: &str,
        question: &str,
        subquestions: &[String],
        paragraphs: &[Paragraph],
    ) -> EncodedBatch {
        let mut rows: Vec<EncodedRow> = Vec::new();
        let mut push = |sub: Option<(usize, &str)>| {
            for (pi, para) in paragraphs.iter().enumerate() {
                let input = ScoringInput {
                    question,
                    subquestion: sub.map(|(_, s)| s),
                    paragraph: para,
                };
                let provenance = RowProvenance {
                    example_id: example_id.to_string(),
                    paragraph_index: pi,
                    subquestion_index: sub.map(|(i, _)| i),
                };
                rows.push(encode_pair(&input, &self.vocab, self.shape.max_len, provenance));
            }
        };
        push(None);
        for (si, sub) in subquestions.iter().enumerate() {
            push(Some((si, sub)));
        }
        EncodedBatch::from_rows(rows, self.vocab.id(PAD))
    }

    fn logits_var(&self, tape: &mut Tape<'_>, batch: &EncodedBatch) -> crate::nn::Var {
        let mut all_tokens = Vec::new();
        let mut segments = Vec::new();
        for i in 0..batch.len() {
            let tokens = batch.row_tokens(i);
            let start = all_tokens.len();
            all_tokens.extend(tokens);
            segments.push((start, all_tokens.len()));
        }
        let x = tape.gather(self.emb, &all_tokens);
        let pooled = tape.mean_rows(x, &segments);
        let w1 = tape.param(self.w1);
        let b1 = tape.param(self.b1);
        let pre = tape.matmul(pooled, w1);
        let pre = tape.add_row(pre, b1);
        let h = tape.tanh(pre);
        let head_w = tape.param(self.head_w);
        let head_b = tape.param(self.head_b);
        let logits = tape.matmul(h, head_w);
        tape.add_row(logits, head_b)
    }

    /// Forward pass without gradients: `(n, 2)` logits for a batch.
    pub fn forward_logits(&self, batch: &EncodedBatch) -> Matrix {
        let tape_store = &self.store;
        let mut tape = Tape::new(tape_store);
        let logits = self.logits_var(&mut tape, batch);
        tape.value(logits).clone()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let config = serde_json::to_string_pretty(&self.shape)?;
        std::fs::write(dir.join("config.json"), config)?;
        self.vocab.save(&dir.join("vocab.json"))?;
        self.store.save(&dir.join("weights.json"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let config = std::fs::read_to_string(dir.join("config.json"))?;
        let shape: EncoderShape = serde_json::from_str(&config)?;
        let vocab = Vocab::load(&dir.join("vocab.json"))?;
        let store = ParamStore::load(&dir.join("weights.json"))?;
        let lookup = |name: &str| {
            store
                .id_by_name(name)
                .ok_or_else(|| Error::data(format!("scorer checkpoint missing parameter {name}")))
        };
        Ok(TinyCrossEncoder {
            emb: lookup("emb")?,
            w1: lookup("w1")?,
            b1: lookup("b1")?,
            head_w: lookup("head_w")?,
            head_b: lookup("head_b")?,
            vocab,
            store,
            shape,
        })
    }
}

impl ParagraphScorer for TinyCrossEncoder {
    fn name(&self) -> &str {
        "tiny-cross-encoder"
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
        let batch = self.encode_example("", question, subquestions, paragraphs);
        let logits = self.forward_logits(&batch);
        Ok(batch
            .provenance
            .iter()
            .enumerate()
            .map(|(i, prov)| {
                ParagraphScore::from_logits(
                    prov.paragraph_index,
                    prov.subquestion_index,
                    (logits[[i, 0]], logits[[i, 1]]),
                )
            })
            .collect())
    }
}

/// One retrieval training instance: per-paragraph binary labels plus the
/// sub-questions conditioning the scorer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SprExample {
    pub id: String,
    pub question: String,
    pub subquestions: Vec<String>,
    pub paragraphs: Vec<Paragraph>,
    pub labels: Vec<u8>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SprTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for SprTrainConfig {
    fn default() -> Self {
        SprTrainConfig { epochs: 2, batch_size: 8, learning_rate: 5e-3 }
    }
}

/// Per-step losses from one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub losses: Vec<f64>,
    pub steps: usize,
    pub skipped_batches: usize,
}

/// Optimizes relevance classification over every (question | sub-question,
/// paragraph) combination with the summed binary cross-entropy objective.
/// Batches without a single positive label are skipped with a warning.
pub fn train_spr(
    model: &mut TinyCrossEncoder,
    examples: &[SprExample],
    config: &SprTrainConfig,
) -> Result<TrainReport> {
    if examples.is_empty() {
        return Err(Error::config("train_spr: empty training set"));
    }
    for ex in examples {
        if ex.labels.len() != ex.paragraphs.len() {
            return Err(Error::data(format!(
                "example {}: {} labels for {} paragraphs",
                ex.id,
                ex.labels.len(),
                ex.paragraphs.len()
            )));
        }
    }
    let mut adam = Adam::new(config.learning_rate);
    let mut losses = Vec::new();
    let mut skipped = 0usize;
    let batch_size = config.batch_size.max(1);
    for _epoch in 0..config.epochs {
        for chunk in examples.chunks(batch_size) {
            let mut rows = Vec::new();
            let mut labels: Vec<usize> = Vec::new();
            for ex in chunk {
                let batch =
                    model.encode_example(&ex.id, &ex.question, &ex.subquestions, &ex.paragraphs);
                for (i, prov) in batch.provenance.iter().enumerate() {
                    rows.push(EncodedRow {
                        token_ids: batch.token_ids[i]
                            .iter()
                            .zip(&batch.attention_mask[i])
                            .filter(|(_, &m)| m == 1)
                            .map(|(&t, _)| t)
                            .collect(),
                        provenance: prov.clone(),
                    });
                    labels.push(ex.labels[prov.paragraph_index] as usize);
                }
            }
            if !labels.contains(&1) {
                log::warn!("skipping batch with no positive paragraph labels");
                skipped += 1;
                continue;
            }
            let batch = EncodedBatch::from_rows(rows, model.vocab.id(PAD));
            let grads;
            let loss_value;
            {
                let mut tape = Tape::new(&model.store);
                let logits = model.logits_var(&mut tape, &batch);
                let loss = tape.softmax_ce_sum(logits, &labels);
                loss_value = tape.scalar(loss);
                grads = tape.backward(loss);
            }
            adam.step(&mut model.store, &grads);
            log::debug!("spr step {}: loss {loss_value:.6}", losses.len());
            losses.push(loss_value);
        }
    }
    Ok(TrainReport { steps: losses.len(), losses, skipped_batches: skipped })
}

/// Relevance probabilities from a logits matrix, relevant column.
pub fn relevant_probs(logits: &Matrix) -> Vec<f64> {
    let probs = softmax_rows(logits);
    (0..probs.nrows()).map(|i| probs[[i, 1]]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::windowed_means;

    fn marker_fixture() -> (Vocab, Vec<SprExample>) {
        // positives contain a marker token the negatives never carry
        let mut texts = vec![String::from("what links alpha and beta?")];
        let mut examples = Vec::new();
        for i in 0..8 {
            let mut paragraphs = Vec::new();
            let mut labels = Vec::new();
            for p in 0..4 {
                let positive = p == i % 4;
                let body = if positive {
                    format!("evidence marker item{i} fact{p}")
                } else {
                    format!("filler noise item{i} fact{p}")
                };
                texts.push(body.clone());
                paragraphs.push(Paragraph::new(format!("t{i}p{p}"), vec![body]));
                labels.push(u8::from(positive));
            }
            examples.push(SprExample {
                id: format!("ex{i}"),
                question: "what links alpha and beta?".into(),
                subquestions: vec![],
                paragraphs,
                labels,
            });
        }
        let vocab = Vocab::build(texts.iter().map(|s| s.as_str()));
        (vocab, examples)
    }

    #[test]
    fn untrained_scorer_emits_half_probabilities() {
        let (vocab, examples) = marker_fixture();
        let model = TinyCrossEncoder::new(vocab, 16, 32, 64, 13);
        let ex = &examples[0];
        let scores = model
            .score_paragraphs(&ex.question, &ex.subquestions, &ex.paragraphs)
            .unwrap();
        assert_eq!(scores.len(), 4);
        for s in scores {
            assert!((s.score - 0.5).abs() < 1e-12, "zero head must give 0.5, got {}", s.score);
        }
    }

    #[test]
    fn score_cardinality_counts_question_only_block() {
        let (vocab, _) = marker_fixture();
        let model = TinyCrossEncoder::new(vocab, 8, 16, 64, 13);
        let paragraphs: Vec<Paragraph> =
            (0..10).map(|i| Paragraph::new(format!("t{i}"), vec!["body".into()])).collect();
        let subqs = vec!["one?".to_string(), "two?".to_string()];
        let scores = model.score_paragraphs("q?", &subqs, &paragraphs).unwrap();
        assert_eq!(scores.len(), 30);
        assert_eq!(scores.iter().filter(|s| s.subquestion_index.is_none()).count(), 10);
    }

    #[test]
    fn overfit_separable_fixture_ranks_positives_first() {
        let (vocab, examples) = marker_fixture();
        let mut model = TinyCrossEncoder::new(vocab, 16, 32, 64, 13);
        let config = SprTrainConfig { epochs: 50, batch_size: 8, learning_rate: 5e-3 };
        let report = train_spr(&mut model, &examples, &config).unwrap();
        assert_eq!(report.steps, 50);
        let (head, tail) = windowed_means(&report.losses, 10);
        assert!(tail < head * 0.5, "loss should halve: head {head}, tail {tail}");

        for ex in &examples {
            let scores = model
                .score_paragraphs(&ex.question, &ex.subquestions, &ex.paragraphs)
                .unwrap();
            let positive = ex.labels.iter().position(|&l| l == 1).unwrap();
            let pos_score = scores.iter().find(|s| s.paragraph_index == positive).unwrap().score;
            for s in &scores {
                if s.paragraph_index != positive {
                    assert!(
                        pos_score > s.score,
                        "positive {pos_score} should outscore negative {}",
                        s.score
                    );
                }
            }
        }
    }

    #[test]
    fn zero_epochs_leaves_scores_unchanged() {
        let (vocab, examples) = marker_fixture();
        let mut model = TinyCrossEncoder::new(vocab, 16, 32, 64, 13);
        let ex = &examples[0];
        let before = model
            .score_paragraphs(&ex.question, &ex.subquestions, &ex.paragraphs)
            .unwrap();
        let config = SprTrainConfig { epochs: 0, ..Default::default() };
        let report = train_spr(&mut model, &examples, &config).unwrap();
        assert_eq!(report.steps, 0);
        let after = model
            .score_paragraphs(&ex.question, &ex.subquestions, &ex.paragraphs)
            .unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn fixed_seed_reruns_reproduce_loss_trajectory() {
        let (vocab, examples) = marker_fixture();
        let config = SprTrainConfig { epochs: 10, batch_size: 8, learning_rate: 5e-3 };
        let mut first = TinyCrossEncoder::new(vocab.clone(), 16, 32, 64, 21);
        let report_a = train_spr(&mut first, &examples, &config).unwrap();
        let mut second = TinyCrossEncoder::new(vocab, 16, 32, 64, 21);
        let report_b = train_spr(&mut second, &examples, &config).unwrap();
        assert_eq!(report_a.losses, report_b.losses);
    }

    #[test]
    fn all_negative_batches_are_skipped() {
        let (vocab, mut examples) = marker_fixture();
        for ex in &mut examples {
            ex.labels = vec![0; ex.labels.len()];
        }
        let mut model = TinyCrossEncoder::new(vocab, 16, 32, 64, 13);
        let config = SprTrainConfig { epochs: 1, batch_size: 8, learning_rate: 5e-3 };
        let report = train_spr(&mut model, &examples, &config).unwrap();
        assert_eq!(report.steps, 0);
        assert_eq!(report.skipped_batches, 1);
    }

    #[test]
    fn checkpoint_round_trip_preserves_scores() {
        let (vocab, examples) = marker_fixture();
        let mut model = TinyCrossEncoder::new(vocab, 16, 32, 64, 13);
        let config = SprTrainConfig { epochs: 5, batch_size: 8, learning_rate: 5e-3 };
        train_spr(&mut model, &examples, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("scorer");
        model.save(&ckpt).unwrap();
        let loaded = TinyCrossEncoder::load(&ckpt).unwrap();
        let ex = &examples[3];
        let a = model.score_paragraphs(&ex.question, &ex.subquestions, &ex.paragraphs).unwrap();
        let b = loaded.score_paragraphs(&ex.question, &ex.subquestions, &ex.paragraphs).unwrap();
        assert_eq!(a, b);
    }
}
