//! News-viewer backend: ratio-bar composition, extremeness sorting, the
//! durable read log and consumption analytics over it.

mod log;
mod report;

pub use log::*;
pub use report::*;

use crate::corpus::{Article, BundleEntry, Slot, TopicBundle};
use crate::stance::{extremeness, Polarity};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeedError {
    #[error("ratio level {0} is outside 1..=5")]
    InvalidLevel(u8),
    #[error("unknown article {0:?}")]
    UnknownArticle(String),
    #[error("article {0:?} has no prediction attached")]
    MissingPrediction(String),
    #[error("bundle for {topic} holds {have} {polarity} articles, level needs {need}")]
    Shortfall {
        topic: String,
        polarity: Polarity,
        have: usize,
        need: usize,
    },
    #[error(
        "event for session {session} at {timestamp} precedes its previous event at {previous}"
    )]
    OutOfOrder {
        session: String,
        timestamp: u64,
        previous: u64,
    },
    #[error("read log line {line}: {source}")]
    Corrupt {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FeedError>;

/// Articles per feed page.
pub const FEED_SIZE: usize = 10;

/// `(conservative, liberal)` counts for levels 1 to 5.
pub const RATIO_TABLE: [(usize, usize); 5] = [(10, 0), (7, 3), (5, 5), (3, 7), (0, 10)];

/// Position of the ratio-bar slider, 1 (all conservative) to 5 (all liberal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct RatioLevel(u8);

impl RatioLevel {
    pub fn new(level: u8) -> Result<Self> {
        if (1..=5).contains(&level) {
            Ok(Self(level))
        } else {
            Err(FeedError::InvalidLevel(level))
        }
    }

    pub fn all() -> [RatioLevel; 5] {
        [1, 2, 3, 4, 5].map(RatioLevel)
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// `(conservative, liberal)` article counts.
    pub fn composition(self) -> (usize, usize) {
        RATIO_TABLE[usize::from(self.0) - 1]
    }

    pub fn count(self, polarity: Polarity) -> usize {
        let (con, lib) = self.composition();
        match polarity {
            Polarity::Conservative => con,
            Polarity::Liberal => lib,
        }
    }
}

impl TryFrom<u8> for RatioLevel {
    type Error = FeedError;
    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RatioLevel> for u8 {
    fn from(l: RatioLevel) -> u8 {
        l.0
    }
}

impl fmt::Display for RatioLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Feed preference within one polarity: high slot first, then more extreme,
/// then id.
pub fn feed_order(a: &BundleEntry, b: &BundleEntry) -> Ordering {
    let rank = |s: Slot| match s {
        Slot::High => 0,
        Slot::Moderate => 1,
    };
    rank(a.slot)
        .cmp(&rank(b.slot))
        .then_with(|| b.extremeness.total_cmp(&a.extremeness))
        .then_with(|| a.article_id.cmp(&b.article_id))
}

/// The ten article ids shown at `level`: the conservative picks followed by
/// the liberal picks, each in [`feed_order`].
pub fn apply_ratio(bundle: &TopicBundle, level: RatioLevel) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(FEED_SIZE);
    for polarity in [Polarity::Conservative, Polarity::Liberal] {
        let need = level.count(polarity);
        let mut pool: Vec<&BundleEntry> = bundle.stance_entries(polarity).collect();
        if pool.len() < need {
            return Err(FeedError::Shortfall {
                topic: bundle.topic_id.clone(),
                polarity,
                have: pool.len(),
                need,
            });
        }
        pool.sort_by(|a, b| feed_order(a, b));
        out.extend(pool.into_iter().take(need).map(|e| e.article_id.clone()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    Asc,
    Desc,
}

/// Stable sort by an extremeness key; equal keys keep their input order in
/// both directions.
pub fn sort_extremeness<T: Clone>(
    items: &[T],
    order: SortOrder,
    key: impl Fn(&T) -> f64,
) -> Vec<T> {
    let mut out = items.to_vec();
    match order {
        SortOrder::Asc => out.sort_by(|a, b| key(a).total_cmp(&key(b))),
        SortOrder::Desc => out.sort_by(|a, b| key(b).total_cmp(&key(a))),
    }
    out
}

/// [`sort_extremeness`] over articles, keyed by their attached prediction.
pub fn sort_articles(articles: &[Article], order: SortOrder) -> Result<Vec<Article>> {
    if let Some(a) = articles.iter().find(|a| a.prediction.is_none()) {
        return Err(FeedError::MissingPrediction(a.id.clone()));
    }
    Ok(sort_extremeness(articles, order, |a| {
        extremeness(a.prediction.as_ref().expect("checked above"))
    }))
}
