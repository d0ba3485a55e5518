use super::{FeedError, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadKind {
    ThumbnailView,
    ArticleOpen,
    ScrollComplete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadEvent {
    pub session_id: String,
    pub article_id: String,
    pub topic_id: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub kind: ReadKind,
}

/// Append-only read log. With a backing file every event is written as one
/// JSON line and synced to disk before [`ReadLog::record`] returns.
#[derive(Debug)]
pub struct ReadLog {
    path: Option<PathBuf>,
    file: Option<File>,
    events: Vec<ReadEvent>,
    last_seen: HashMap<String, u64>,
}

impl ReadLog {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            file: None,
            events: Vec::new(),
            last_seen: HashMap::new(),
        }
    }

    /// Opens (creating if needed) a JSON-lines log and replays its events.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let events = if path.exists() {
            read_events(&path)?
        } else {
            Vec::new()
        };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut last_seen = HashMap::new();
        for e in &events {
            last_seen.insert(e.session_id.clone(), e.timestamp);
        }
        Ok(Self {
            path: Some(path),
            file: Some(file),
            events,
            last_seen,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Appends `event` after checking that `article_exists` accepts its
    /// article and that the session's timestamps do not go backwards.
    pub fn record(
        &mut self,
        event: ReadEvent,
        article_exists: impl Fn(&str) -> bool,
    ) -> Result<()> {
        if !article_exists(&event.article_id) {
            return Err(FeedError::UnknownArticle(event.article_id));
        }
        if let Some(&previous) = self.last_seen.get(&event.session_id) {
            if event.timestamp < previous {
                return Err(FeedError::OutOfOrder {
                    session: event.session_id,
                    timestamp: event.timestamp,
                    previous,
                });
            }
        }
        if let Some(file) = &mut self.file {
            let mut line = serde_json::to_string(&event)?;
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.sync_data()?;
        }
        self.last_seen
            .insert(event.session_id.clone(), event.timestamp);
        self.events.push(event);
        Ok(())
    }

    pub fn events(&self) -> &[ReadEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Parses a JSON-lines read log; blank lines are skipped.
pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<ReadEvent>> {
    let reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(
            serde_json::from_str(&line).map_err(|source| FeedError::Corrupt {
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(events)
}
