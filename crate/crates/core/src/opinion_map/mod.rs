//! Two-dimensional opinion maps: exact t-SNE over pooled comment vectors,
//! colored by where each comment came from.

mod tsne;

pub use tsne::*;

use crate::corpus::{Comment, Origin, Vocab};
use crate::stance::{CommentModel, StanceError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("need at least 3 points, got {0}")]
    TooFew(usize),
    #[error("invalid t-SNE configuration: {0}")]
    BadConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("t-SNE produced non-finite positions at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("comment {0} is not a community comment")]
    NotCommunity(String),
    #[error("comment {0} is not a user comment")]
    NotUser(String),
    #[error(transparent)]
    Stance(#[from] StanceError),
}

pub type Result<T> = std::result::Result<T, MapError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointColor {
    Red,
    Blue,
    Yellow,
}

impl PointColor {
    pub fn of(origin: Origin) -> Self {
        match origin {
            Origin::ConservativeCommunity => PointColor::Red,
            Origin::LiberalCommunity => PointColor::Blue,
            Origin::User => PointColor::Yellow,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub color: PointColor,
    /// Hover text: the comment itself.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionMap {
    pub topic: String,
    pub points: Vec<MapPoint>,
}

impl OpinionMap {
    pub fn count(&self, color: PointColor) -> usize {
        self.points.iter().filter(|p| p.color == color).count()
    }
}

/// Perplexity actually used for `n` points: the configured value, capped at
/// `(n - 1) / 3` and floored at 1.
pub fn effective_perplexity(configured: f64, n: usize) -> f64 {
    configured.min(n.saturating_sub(1) as f64 / 3.0).max(1.0)
}

/// Embeds community and user comments with the comment model and lays them
/// out jointly in one seeded t-SNE run. Community points come first.
pub fn build_map(
    topic_id: &str,
    community: &[Comment],
    user: &[Comment],
    model: &CommentModel,
    vocab: &Vocab,
    config: &TsneConfig,
) -> Result<OpinionMap> {
    if let Some(c) = community.iter().find(|c| c.origin == Origin::User) {
        return Err(MapError::NotCommunity(c.id.clone()));
    }
    if let Some(c) = user.iter().find(|c| c.origin != Origin::User) {
        return Err(MapError::NotUser(c.id.clone()));
    }
    let all: Vec<&Comment> = community.iter().chain(user).collect();
    if all.len() < 3 {
        return Err(MapError::TooFew(all.len()));
    }
    let x = all
        .iter()
        .map(|c| model.embed_comment(vocab, c))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let cfg = TsneConfig {
        perplexity: effective_perplexity(config.perplexity, all.len()),
        ..config.clone()
    };
    let run = tsne(&x, &cfg)?;
    let points = all
        .iter()
        .zip(&run.y)
        .map(|(c, p)| MapPoint {
            id: c.id.clone(),
            x: p[0],
            y: p[1],
            color: PointColor::of(c.origin),
            text: c.text.clone(),
        })
        .collect();
    Ok(OpinionMap {
        topic: topic_id.to_string(),
        points,
    })
}
