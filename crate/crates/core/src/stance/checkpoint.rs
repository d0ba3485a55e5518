use super::{CommentModel, StanceError, StanceModel};
use crate::corpus::Vocab;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint<M> {
    format_version: u32,
    kind: String,
    vocab_hash: String,
    model: M,
}

fn save<M: Serialize>(
    path: &Path,
    kind: &str,
    vocab_hash: &str,
    model: &M,
) -> Result<(), StanceError> {
    let ck = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        kind: kind.into(),
        vocab_hash: vocab_hash.into(),
        model,
    };
    fs::write(path, serde_json::to_string(&ck)?)?;
    Ok(())
}

fn load<M: DeserializeOwned>(path: &Path, kind: &str, vocab: &Vocab) -> Result<M, StanceError> {
    let ck: Checkpoint<M> = serde_json::from_str(&fs::read_to_string(path)?)?;
    if ck.format_version != CHECKPOINT_VERSION {
        return Err(StanceError::Version(ck.format_version));
    }
    if ck.kind != kind {
        return Err(StanceError::Shape(format!(
            "checkpoint holds a {} model, expected {kind}",
            ck.kind
        )));
    }
    let expected = vocab.hash();
    if ck.vocab_hash != expected {
        return Err(StanceError::VocabMismatch {
            expected,
            found: ck.vocab_hash,
        });
    }
    Ok(ck.model)
}

pub fn save_model(path: impl AsRef<Path>, model: &StanceModel) -> Result<(), StanceError> {
    save(path.as_ref(), "stance", &model.vocab_hash, model)
}

/// Loads a stance checkpoint, refusing it unless it was trained on `vocab`.
pub fn load_model(path: impl AsRef<Path>, vocab: &Vocab) -> Result<StanceModel, StanceError> {
    let m: StanceModel = load(path.as_ref(), "stance", vocab)?;
    if m.vocab_hash != vocab.hash()
        || m.params.embedding.rows != vocab.len()
        || !m.params.is_finite()
    {
        return Err(StanceError::Shape(
            "checkpoint tensors do not match the vocabulary".into(),
        ));
    }
    Ok(m)
}

pub fn save_comment_model(path: impl AsRef<Path>, model: &CommentModel) -> Result<(), StanceError> {
    save(path.as_ref(), "comment", &model.vocab_hash, model)
}

pub fn load_comment_model(
    path: impl AsRef<Path>,
    vocab: &Vocab,
) -> Result<CommentModel, StanceError> {
    let m: CommentModel = load(path.as_ref(), "comment", vocab)?;
    if m.embedding.rows != vocab.len() || !m.is_finite() {
        return Err(StanceError::Shape(
            "checkpoint tensors do not match the vocabulary".into(),
        ));
    }
    Ok(m)
}
