//! Trainable sequence-to-sequence generator.
//!
//! The encoder mean-pools source embeddings into a context vector; the
//! decoder is a position-conditioned feed-forward language model over
//! (context, previous token, position). Decoding is greedy, so identical
//! inputs always produce identical output.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    parse_subquestion_output, render_source, Decomposer, DecompositionRequest, GeneratorConfig,
    QdTrainingPair, SubQuestionSet,
};
use crate::corpus::Paragraph;
use crate::error::{Error, Result};
use crate::nn::{Adam, Matrix, ParamId, ParamStore, Tape, Var};
use crate::text::{Vocab, BOS, EOS};

pub struct TinySeq2Seq {
    vocab: Vocab,
    config: GeneratorConfig,
    store: ParamStore,
    emb: ParamId,
    enc_w: ParamId,
    enc_b: ParamId,
    pos: ParamId,
    dec_w1: ParamId,
    dec_b1: ParamId,
    dec_w2: ParamId,
    dec_b2: ParamId,
}

impl TinySeq2Seq {
    pub fn new(vocab: Vocab, config: GeneratorConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let scale = 0.1;
        let d = config.embed_dim;
        let h = config.hidden_dim;
        let p = config.position_dim;
        let emb = store.uniform("emb", vocab.len(), d, scale, &mut rng);
        let enc_w = store.uniform("enc_w", d, d, scale, &mut rng);
        let enc_b = store.zeros("enc_b", 1, d);
        let pos = store.uniform("pos", config.max_output_length, p, scale, &mut rng);
        let dec_w1 = store.uniform("dec_w1", d + d + p, h, scale, &mut rng);
        let dec_b1 = store.zeros("dec_b1", 1, h);
        let dec_w2 = store.uniform("dec_w2", h, vocab.len(), scale, &mut rng);
        let dec_b2 = store.zeros("dec_b2", 1, vocab.len());
        Ok(TinySeq2Seq {
            vocab,
            config,
            store,
            emb,
            enc_w,
            enc_b,
            pos,
            dec_w1,
            dec_b1,
            dec_w2,
            dec_b2,
        })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    fn source_ids(&self, source_text: &str) -> Vec<usize> {
        let mut ids: Vec<usize> =
            self.vocab.encode(source_text).into_iter().map(|t| t as usize).collect();
        ids.truncate(self.config.max_input_length);
        if ids.is_empty() {
            ids.push(self.vocab.id(BOS) as usize);
        }
        ids
    }

    /// Context vectors for a batch of sources: one row per source.
    fn encode_sources(&self, tape: &mut Tape<'_>, sources: &[Vec<usize>]) -> Var {
        let mut all_tokens = Vec::new();
        let mut segments = Vec::new();
        for ids in sources {
            let start = all_tokens.len();
            all_tokens.extend_from_slice(ids);
            segments.push((start, all_tokens.len()));
        }
        let x = tape.gather(self.emb, &all_tokens);
        let pooled = tape.mean_rows(x, &segments);
        let enc_w = tape.param(self.enc_w);
        let enc_b = tape.param(self.enc_b);
        let pre = tape.matmul(pooled, enc_w);
        let pre = tape.add_row(pre, enc_b);
        tape.tanh(pre)
    }

    /// Decoder logits for explicit (source row, previous token, position)
    /// triples.
    fn decode_steps(
        &self,
        tape: &mut Tape<'_>,
        ctx: Var,
        ctx_rows: &[usize],
        prev_tokens: &[usize],
        positions: &[usize],
    ) -> Var {
        let ctx_expanded = tape.select_rows(ctx, ctx_rows);
        let prev = tape.gather(self.emb, prev_tokens);
        let pos = tape.gather(self.pos, positions);
        let x = tape.concat_cols(&[ctx_expanded, prev, pos]);
        let w1 = tape.param(self.dec_w1);
        let b1 = tape.param(self.dec_b1);
        let pre = tape.matmul(x, w1);
        let pre = tape.add_row(pre, b1);
        let h = tape.tanh(pre);
        let w2 = tape.param(self.dec_w2);
        let b2 = tape.param(self.dec_b2);
        let logits = tape.matmul(h, w2);
        tape.add_row(logits, b2)
    }

    fn greedy_argmax(row: ndarray::ArrayView1<'_, f64>) -> usize {
        let mut best = 0usize;
        let mut best_val = f64::NEG_INFINITY;
        for (i, &v) in row.iter().enumerate() {
            if v > best_val {
                best_val = v;
                best = i;
            }
        }
        best
    }

    /// Greedy decoding of up to `max_output_length` tokens.
    pub fn generate_ids(&self, source_text: &str) -> Vec<u32> {
        let source = self.source_ids(source_text);
        let bos = self.vocab.id(BOS) as usize;
        let eos = self.vocab.id(EOS) as usize;
        let mut prev = bos;
        let mut out = Vec::new();
        for t in 0..self.config.max_output_length {
            let mut tape = Tape::new(&self.store);
            let ctx = self.encode_sources(&mut tape, std::slice::from_ref(&source));
            let logits = self.decode_steps(&mut tape, ctx, &[0], &[prev], &[t]);
            let next = Self::greedy_argmax(tape.value(logits).row(0));
            if next == eos {
                break;
            }
            out.push(next as u32);
            prev = next;
        }
        out
    }

    /// Decodes generated ids to text and parses them into sub-questions.
    pub fn generate_subquestions(
        &self,
        question: &str,
        paragraphs: &[Paragraph],
    ) -> Result<SubQuestionSet> {
        if question.trim().is_empty() {
            return Err(Error::data("generate_subquestions: empty question"));
        }
        let source = render_source(question, paragraphs);
        let ids = self.generate_ids(&source);
        let raw = self.vocab.decode(&ids);
        parse_subquestion_output(&raw)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&self.config)?)?;
        self.vocab.save(&dir.join("vocab.json"))?;
        self.store.save(&dir.join("weights.json"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let config: GeneratorConfig =
            serde_json::from_str(&std::fs::read_to_string(dir.join("config.json"))?)?;
        let vocab = Vocab::load(&dir.join("vocab.json"))?;
        let store = ParamStore::load(&dir.join("weights.json"))?;
        let lookup = |name: &str| {
            store.id_by_name(name).ok_or_else(|| {
                Error::data(format!("generator checkpoint missing parameter {name}"))
            })
        };
        Ok(TinySeq2Seq {
            emb: lookup("emb")?,
            enc_w: lookup("enc_w")?,
            enc_b: lookup("enc_b")?,
            pos: lookup("pos")?,
            dec_w1: lookup("dec_w1")?,
            dec_b1: lookup("dec_b1")?,
            dec_w2: lookup("dec_w2")?,
            dec_b2: lookup("dec_b2")?,
            vocab,
            config,
            store,
        })
    }
}

impl Decomposer for TinySeq2Seq {
    fn name(&self) -> &str {
        "tiny-seq2seq"
    }

    fn generate(&self, request: &DecompositionRequest<'_>) -> Result<SubQuestionSet> {
        self.generate_subquestions(request.question, request.paragraphs)
    }
}

/// Per-step mean-token cross-entropy losses from one training run.
#[derive(Debug, Clone)]
pub struct QdTrainReport {
    pub losses: Vec<f64>,
    pub steps: usize,
}

/// Teacher-forced fine-tuning on source/target pairs. With `epochs = 0`
/// the model is returned untouched.
pub fn train_decomposer(
    model: &mut TinySeq2Seq,
    pairs: &[QdTrainingPair],
    config: &GeneratorConfig,
) -> Result<QdTrainReport> {
    if pairs.is_empty() {
        return Err(Error::config("train_decomposer: empty training pairs"));
    }
    config.validate()?;
    let bos = model.vocab.id(BOS) as usize;
    let eos = model.vocab.id(EOS) as usize;

    struct Prepared {
        source: Vec<usize>,
        prev: Vec<usize>,
        targets: Vec<usize>,
        positions: Vec<usize>,
    }
    let prepared: Vec<Prepared> = pairs
        .iter()
        .map(|pair| {
            let source = model.source_ids(&pair.source_text);
            let mut target: Vec<usize> =
                model.vocab.encode(&pair.target_text).into_iter().map(|t| t as usize).collect();
            target.truncate(config.max_output_length.saturating_sub(1));
            target.push(eos);
            let mut prev = Vec::with_capacity(target.len());
            prev.push(bos);
            prev.extend_from_slice(&target[..target.len() - 1]);
            let positions: Vec<usize> = (0..target.len()).collect();
            Prepared { source, prev, targets: target, positions }
        })
        .collect();

    let mut adam = Adam::new(config.learning_rate);
    let mut losses = Vec::new();
    let batch_size = config.batch_size.max(1);
    for _epoch in 0..config.epochs {
        for chunk in prepared.chunks(batch_size) {
            let sources: Vec<Vec<usize>> = chunk.iter().map(|p| p.source.clone()).collect();
            let mut ctx_rows = Vec::new();
            let mut prev_tokens = Vec::new();
            let mut positions = Vec::new();
            let mut targets = Vec::new();
            for (row, item) in chunk.iter().enumerate() {
                for step in 0..item.targets.len() {
                    ctx_rows.push(row);
                    prev_tokens.push(item.prev[step]);
                    positions.push(item.positions[step]);
                    targets.push(item.targets[step]);
                }
            }
            let grads;
            let loss_value;
            {
                let mut tape = Tape::new(&model.store);
                let ctx = model.encode_sources(&mut tape, &sources);
                let logits =
                    model.decode_steps(&mut tape, ctx, &ctx_rows, &prev_tokens, &positions);
                let ce = tape.softmax_ce_sum(logits, &targets);
                let loss = tape.scale(ce, 1.0 / targets.len() as f64);
                loss_value = tape.scalar(loss);
                grads = tape.backward(loss);
            }
            adam.step(&mut model.store, &grads);
            log::debug!("qd step {}: loss {loss_value:.6}", losses.len());
            losses.push(loss_value);
        }
    }
    Ok(QdTrainReport { steps: losses.len(), losses })
}
