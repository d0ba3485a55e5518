use super::{Article, Comment, CorpusError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
const PAD: &str = "<pad>";
const UNK: &str = "<unk>";

/// Token ↔ id mapping. Ids are dense; 0 and 1 are reserved for padding and
/// unknown tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    min_freq: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    min_freq: usize,
    tokens: Vec<String>,
}

impl Vocab {
    /// Builds from an ordered token list (reserved entries excluded).
    pub fn from_tokens(tokens: Vec<String>, min_freq: usize) -> Self {
        let mut id_to_token = vec![PAD.to_string(), UNK.to_string()];
        id_to_token.extend(tokens);
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            token_to_id,
            id_to_token,
            min_freq,
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 2
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.get(token).is_some_and(|&id| id > UNK_ID)
    }

    pub fn id(&self, token: &str) -> usize {
        match self.token_to_id.get(token) {
            Some(&id) if id > UNK_ID => id,
            _ => UNK_ID,
        }
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// Non-reserved tokens in id order.
    pub fn tokens(&self) -> &[String] {
        &self.id_to_token[2..]
    }

    /// SHA-256 over the id-ordered token list; model checkpoints pin it.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.id_to_token {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&VocabFile {
            min_freq: self.min_freq,
            tokens: self.tokens().to_vec(),
        })
        .expect("vocab serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        let f: VocabFile = serde_json::from_str(text)?;
        Ok(Self::from_tokens(f.tokens, f.min_freq))
    }
}

/// Every token seen at least `min_freq` times gets an id, ordered by
/// descending frequency with ties broken lexicographically.
pub fn build_vocab(articles: &[Article], comments: &[Comment], min_freq: usize) -> Result<Vocab> {
    if min_freq == 0 {
        return Err(CorpusError::BadMinFreq);
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let tokens = articles
        .iter()
        .flat_map(|a| a.all_tokens())
        .chain(comments.iter().flat_map(|c| c.tokens.iter()));
    for t in tokens {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    if counts.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, n)| n >= min_freq).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(Vocab::from_tokens(
        kept.into_iter().map(|(t, _)| t.to_string()).collect(),
        min_freq,
    ))
}
