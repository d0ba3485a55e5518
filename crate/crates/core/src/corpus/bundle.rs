//! Per-topic article bundles for the news viewer and the example-comment
//! sampling pipeline for the opinion composer.

use super::{Article, Comment, CorpusError, Origin, Result};
use crate::rng::seeded;
use crate::stance::{binary_stance, extremeness, Polarity};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Extremeness the moderate slot is centred on.
pub const MODERATE_REFERENCE: f64 = 0.80;
const PER_STANCE: usize = 10;
const PER_SLOT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    High,
    Moderate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleEntry {
    pub article_id: String,
    pub polarity: Polarity,
    pub slot: Slot,
    pub extremeness: f64,
}

/// Twenty articles for one topic: ten per polarity, each split five
/// high-extreme and five moderate-extreme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicBundle {
    pub topic_id: String,
    pub entries: Vec<BundleEntry>,
}

impl TopicBundle {
    /// Validates the 10/10 and 5/5 composition.
    pub fn new(topic_id: impl Into<String>, entries: Vec<BundleEntry>) -> Result<Self> {
        let topic_id = topic_id.into();
        for polarity in [Polarity::Conservative, Polarity::Liberal] {
            for slot in [Slot::High, Slot::Moderate] {
                let n = entries
                    .iter()
                    .filter(|e| e.polarity == polarity && e.slot == slot)
                    .count();
                if n != PER_SLOT {
                    return Err(CorpusError::Invalid {
                        id: topic_id,
                        message: format!(
                            "bundle has {n} {polarity} {slot:?} entries, expected {PER_SLOT}"
                        ),
                    });
                }
            }
        }
        let mut ids: Vec<&str> = entries.iter().map(|e| e.article_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != entries.len() {
            return Err(CorpusError::Invalid {
                id: topic_id,
                message: "bundle repeats an article".into(),
            });
        }
        Ok(Self { topic_id, entries })
    }

    pub fn stance_entries(&self, polarity: Polarity) -> impl Iterator<Item = &BundleEntry> {
        self.entries.iter().filter(move |e| e.polarity == polarity)
    }

    pub fn get(&self, article_id: &str) -> Option<&BundleEntry> {
        self.entries.iter().find(|e| e.article_id == article_id)
    }
}

fn by_extremeness_desc(a: &BundleEntry, b: &BundleEntry) -> Ordering {
    b.extremeness
        .total_cmp(&a.extremeness)
        .then_with(|| a.article_id.cmp(&b.article_id))
}

/// Selects the bundle for `topic_id` from predicted articles.
///
/// Per polarity: the five most extreme articles fill the high slot; of the
/// rest, the five whose extremeness is closest to [`MODERATE_REFERENCE`]
/// fill the moderate slot (ties: more extreme first, then id).
pub fn prepare_topic_bundle(topic_id: &str, articles: &[Article]) -> Result<TopicBundle> {
    let mut pools: [Vec<BundleEntry>; 2] = [Vec::new(), Vec::new()];
    for a in articles.iter().filter(|a| a.topic_id == topic_id) {
        let Some(pred) = &a.prediction else { continue };
        let (polarity, _) = binary_stance(pred);
        let idx = if polarity == Polarity::Conservative {
            0
        } else {
            1
        };
        pools[idx].push(BundleEntry {
            article_id: a.id.clone(),
            polarity,
            slot: Slot::High,
            extremeness: extremeness(pred),
        });
    }
    let shortfalls: Vec<String> = [Polarity::Conservative, Polarity::Liberal]
        .iter()
        .zip(&pools)
        .filter(|(_, pool)| pool.len() < PER_STANCE)
        .map(|(p, pool)| format!("{p}, need {} more", PER_STANCE - pool.len()))
        .collect();
    if !shortfalls.is_empty() {
        return Err(CorpusError::InsufficientArticles {
            topic: topic_id.to_string(),
            shortfall: shortfalls.join("; "),
        });
    }
    let mut entries = Vec::with_capacity(2 * PER_STANCE);
    for mut pool in pools {
        pool.sort_by(by_extremeness_desc);
        let rest = pool.split_off(PER_SLOT);
        entries.extend(pool);
        let mut rest = rest;
        rest.sort_by(|a, b| {
            let da = (a.extremeness - MODERATE_REFERENCE).abs();
            let db = (b.extremeness - MODERATE_REFERENCE).abs();
            da.total_cmp(&db).then_with(|| by_extremeness_desc(a, b))
        });
        entries.extend(rest.into_iter().take(PER_SLOT).map(|mut e| {
            e.slot = Slot::Moderate;
            e
        }));
    }
    TopicBundle::new(topic_id, entries)
}

/// Sizes of the collect → sample → select funnel, per polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamplePipeline {
    pub collect: usize,
    pub sample: usize,
    pub select: usize,
}

impl Default for ExamplePipeline {
    fn default() -> Self {
        Self {
            collect: 500,
            sample: 50,
            select: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceExamples {
    pub polarity: Polarity,
    pub collected: Vec<String>,
    pub sampled: Vec<String>,
    pub selected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleSelection {
    pub topic_id: String,
    /// Conservative first, then liberal.
    pub per_stance: Vec<StanceExamples>,
}

impl ExampleSelection {
    /// Selected ids, conservative block first.
    pub fn ids(&self) -> Vec<String> {
        self.per_stance
            .iter()
            .flat_map(|s| s.selected.iter().cloned())
            .collect()
    }
}

/// Example comments for the composer: per polarity, collect a seeded pool,
/// draw a seeded sample, and keep the comments the classifier is most
/// confident belong to their community.
pub fn sample_example_comments(
    comments: &[Comment],
    topic_id: &str,
    seed: u64,
    pipeline: ExamplePipeline,
    confidence: impl Fn(&Comment) -> f64,
) -> Result<ExampleSelection> {
    if pipeline.select > pipeline.sample
        || pipeline.sample > pipeline.collect
        || pipeline.select == 0
    {
        return Err(CorpusError::BadSpec(format!(
            "inconsistent example pipeline {pipeline:?}"
        )));
    }
    let mut rng = seeded(seed);
    let mut per_stance = Vec::with_capacity(2);
    let mut shortfalls = Vec::new();
    let pools: Vec<(Polarity, Vec<&Comment>)> = [Polarity::Conservative, Polarity::Liberal]
        .into_iter()
        .map(|p| {
            let origin = Origin::community(p);
            (
                p,
                comments
                    .iter()
                    .filter(|c| c.topic_id == topic_id && c.origin == origin)
                    .collect(),
            )
        })
        .collect();
    for (p, pool) in &pools {
        if pool.len() < pipeline.collect {
            shortfalls.push(format!("{p}, need {} more", pipeline.collect - pool.len()));
        }
    }
    if !shortfalls.is_empty() {
        return Err(CorpusError::InsufficientComments {
            topic: topic_id.to_string(),
            shortfall: shortfalls.join("; "),
        });
    }
    for (polarity, pool) in pools {
        let collected = pick_in_order(&pool, pipeline.collect, &mut rng);
        let sampled = pick_in_order(&collected, pipeline.sample, &mut rng);
        let mut scored: Vec<(f64, &Comment)> =
            sampled.iter().map(|c| (confidence(c), *c)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
        per_stance.push(StanceExamples {
            polarity,
            collected: collected.iter().map(|c| c.id.clone()).collect(),
            sampled: sampled.iter().map(|c| c.id.clone()).collect(),
            selected: scored
                .into_iter()
                .take(pipeline.select)
                .map(|(_, c)| c.id.clone())
                .collect(),
        });
    }
    Ok(ExampleSelection {
        topic_id: topic_id.to_string(),
        per_stance,
    })
}

fn pick_in_order<'a>(
    pool: &[&'a Comment],
    k: usize,
    rng: &mut crate::rng::DetRng,
) -> Vec<&'a Comment> {
    let mut idx = sample(rng, pool.len(), k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i]).collect()
}
