//! Durable session and opinion logs. Every append is synced before the
//! call returns, so an acknowledged request survives a crash.

use crate::GatewayError;
use hearhere_core::corpus::{Comment, Origin};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Append-only JSON-lines file replayed into memory on open.
#[derive(Debug)]
pub struct JsonlStore<T> {
    file: File,
    items: Vec<T>,
}

impl<T: Serialize + DeserializeOwned> JsonlStore<T> {
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        let mut items = Vec::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let item = serde_json::from_str(&line).map_err(|e| {
                    GatewayError::Corrupt(format!("{} line {}: {e}", path.display(), i + 1))
                })?;
                items.push(item);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file, items })
    }

    pub fn append(&mut self, item: T) -> Result<&T, GatewayError> {
        let mut line = serde_json::to_string(&item)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        self.items.push(item);
        Ok(self.items.last().expect("just pushed"))
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }
}

/// An anonymous study session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    /// Milliseconds since the Unix epoch.
    pub created: u64,
}

/// A user opinion as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserOpinion {
    pub id: String,
    pub topic: String,
    pub session: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example_id: Option<String>,
}

impl UserOpinion {
    pub fn to_comment(&self) -> Result<Comment, GatewayError> {
        Ok(Comment::new(
            &self.id,
            &self.topic,
            &self.text,
            Origin::User,
            Some(self.session.clone()),
        )?)
    }
}
