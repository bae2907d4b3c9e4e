//! Word-level tokenization and vocabulary.
//!
//! All neural components in this crate share this tokenizer: plain word
//! tokens plus a fixed set of reserved control tokens. Reserved tokens are
//! recognized only when they stand alone between whitespace, so ordinary
//! text cannot smuggle one in mid-word.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const BOS: &str = "[BOS]";
pub const EOS: &str = "[EOS]";
/// Separator between serialized sub-questions in decomposer targets.
pub const SUBQ_SEP: &str = "<subq>";
/// Separator between the question and each evidence paragraph in decomposer
/// sources.
pub const CTX_SEP: &str = "<ctx>";

const RESERVED: [&str; 8] = [PAD, UNK, CLS, SEP, BOS, EOS, SUBQ_SEP, CTX_SEP];

/// Splits text into word tokens: alphanumeric runs (apostrophes included)
/// and single punctuation characters. Whitespace-delimited chunks that
/// exactly match a reserved token survive as-is.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if RESERVED.contains(&chunk) {
            out.push(chunk.to_string());
            continue;
        }
        let mut word = String::new();
        for ch in chunk.chars() {
            if ch.is_alphanumeric() || ch == '\'' {
                word.push(ch);
            } else {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(ch.to_string());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

/// Joins tokens back into text. Closing punctuation attaches to the
/// preceding token so `["Q1", "?"]` renders as `"Q1?"`.
pub fn detokenize(tokens: &[String]) -> String {
    let mut out = String::new();
    for tok in tokens {
        let attach = tok.len() == 1
            && matches!(tok.chars().next(), Some('?' | '!' | '.' | ',' | ';' | ':' | ')' | '%'));
        if !out.is_empty() && !attach {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

/// Token-to-id mapping with the reserved tokens at fixed low ids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Builds a vocabulary from an iterator of texts. Reserved tokens come
    /// first; word tokens follow in first-seen order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut vocab = Vocab {
            tokens: RESERVED.iter().map(|s| s.to_string()).collect(),
            index: HashMap::new(),
        };
        vocab.rebuild_index();
        for text in texts {
            for tok in tokenize(text) {
                vocab.intern(&tok);
            }
        }
        vocab
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index
            .get(token)
            .copied()
            .unwrap_or_else(|| self.index[UNK])
    }

    pub fn token(&self, id: u32) -> &str {
        self.tokens
            .get(id as usize)
            .map(|s| s.as_str())
            .unwrap_or(UNK)
    }

    /// Encodes text to ids, mapping unknown words to `[UNK]`.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        tokenize(text).iter().map(|t| self.id(t)).collect()
    }

    /// Decodes ids back to text, skipping control tokens that carry no
    /// surface form ([PAD]/[CLS]/[SEP]/[BOS]/[EOS]).
    pub fn decode(&self, ids: &[u32]) -> String {
        let skip = [PAD, CLS, SEP, BOS, EOS];
        let tokens: Vec<String> = ids
            .iter()
            .map(|&id| self.token(id).to_string())
            .filter(|t| !skip.contains(&t.as_str()))
            .collect();
        detokenize(&tokens)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), &self.tokens)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let tokens: Vec<String> = serde_json::from_reader(std::io::BufReader::new(file))?;
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(Error::data(format!(
                "vocabulary at {} lacks the reserved token prefix",
                path.display()
            )));
        }
        let mut vocab = Vocab {
            tokens,
            index: HashMap::new(),
        };
        vocab.rebuild_index();
        Ok(vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_splits_words_and_punctuation() {
        assert_eq!(tokenize("Who won? (230)"), vec!["Who", "won", "?", "(", "230", ")"]);
    }

    #[test]
    fn reserved_tokens_survive_when_standalone() {
        assert_eq!(tokenize("a <subq> b"), vec!["a", "<subq>", "b"]);
        // glued to a word, the literal decomposes like any other punctuation
        assert_eq!(tokenize("a<subq>"), vec!["a", "<", "subq", ">"]);
    }

    #[test]
    fn detokenize_attaches_closing_punctuation() {
        let toks: Vec<String> = ["Q1", "?", "<subq>", "Q2", "?"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(detokenize(&toks), "Q1? <subq> Q2?");
    }

    #[test]
    fn vocab_round_trips_known_text() {
        let vocab = Vocab::build(["who won the cup?"]);
        let ids = vocab.encode("who won the cup?");
        assert_eq!(vocab.decode(&ids), "who won the cup?");
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let vocab = Vocab::build(["alpha"]);
        let ids = vocab.encode("omega");
        assert_eq!(vocab.token(ids[0]), UNK);
    }

    #[test]
    fn vocab_save_load_preserves_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.json");
        let vocab = Vocab::build(["every good boy does fine"]);
        vocab.save(&path).unwrap();
        let loaded = Vocab::load(&path).unwrap();
        assert_eq!(loaded.len(), vocab.len());
        assert_eq!(loaded.id("boy"), vocab.id("boy"));
    }
}
