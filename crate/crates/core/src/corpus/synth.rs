//! Deterministic synthetic corpus used for every training and acceptance
//! fixture. Each article carries class-indicative tokens drawn from its
//! gold class lexicon (or, with probability `noise`, from another class).

use super::{canonical_topics, tokenize, Article, Comment, CorpusError, Origin, Result};
use crate::rng::{seeded, DetRng};
use crate::stance::{Polarity, StanceLabel};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthEntity {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_topics: usize,
    pub articles_per_topic_per_stance: usize,
    pub comments_per_topic_per_stance: usize,
    /// One lexicon per five-way class, left to right.
    #[serde(default = "default_lexicons")]
    pub lexicons: Vec<Vec<String>>,
    pub noise: f64,
    pub seed: u64,
    #[serde(default = "default_sentences")]
    pub sentences_per_article: usize,
    #[serde(default = "default_sentence_len")]
    pub sentence_len: usize,
    #[serde(default = "default_entities")]
    pub entities: Vec<SynthEntity>,
    /// Probability that an article mentions a knowledge-graph entity.
    #[serde(default = "default_entity_rate")]
    pub entity_rate: f64,
    #[serde(default = "default_relation_words")]
    pub relation_words: Vec<String>,
}

fn default_sentences() -> usize {
    4
}
fn default_sentence_len() -> usize {
    8
}
fn default_entity_rate() -> f64 {
    0.6
}

fn words(ws: &[&str]) -> Vec<String> {
    ws.iter().map(|w| w.to_string()).collect()
}

pub fn default_lexicons() -> Vec<Vec<String>> {
    vec![
        words(&[
            "solidarity",
            "equality",
            "workers",
            "grassroots",
            "progressive",
            "welfare",
            "redistribution",
            "reform",
        ]),
        words(&[
            "inclusion",
            "fairness",
            "community",
            "dialogue",
            "empowerment",
            "accountability",
            "transparency",
            "diversity",
        ]),
        words(&[
            "bipartisan",
            "pragmatic",
            "compromise",
            "balanced",
            "moderate",
            "consensus",
            "nonpartisan",
            "measured",
        ]),
        words(&[
            "growth",
            "efficiency",
            "enterprise",
            "prudence",
            "stability",
            "competitiveness",
            "deregulation",
            "investment",
        ]),
        words(&[
            "patriotic",
            "sovereignty",
            "tradition",
            "security",
            "lawandorder",
            "taxpayers",
            "freedom",
            "defense",
        ]),
    ]
}

pub fn default_entities() -> Vec<SynthEntity> {
    crate::kgraph::default_lexicon()
        .entities
        .into_iter()
        .map(|e| SynthEntity { name: e.name })
        .collect()
}

pub fn default_relation_words() -> Vec<String> {
    crate::kgraph::default_lexicon()
        .rules
        .into_iter()
        .flat_map(|r| r.triggers)
        .collect()
}

const FILLER: [&str; 30] = [
    "the",
    "a",
    "government",
    "said",
    "on",
    "today",
    "report",
    "officials",
    "meeting",
    "plan",
    "city",
    "week",
    "public",
    "statement",
    "issue",
    "policy",
    "national",
    "members",
    "after",
    "before",
    "with",
    "about",
    "new",
    "announced",
    "local",
    "media",
    "people",
    "year",
    "council",
    "debate",
];
const STOPWORDS: [&str; 4] = ["of", "the", "a", "to"];

impl CorpusSpec {
    pub fn new(
        n_topics: usize,
        articles_per_topic_per_stance: usize,
        comments_per_topic_per_stance: usize,
        noise: f64,
        seed: u64,
    ) -> Self {
        Self {
            n_topics,
            articles_per_topic_per_stance,
            comments_per_topic_per_stance,
            lexicons: default_lexicons(),
            noise,
            seed,
            sentences_per_article: default_sentences(),
            sentence_len: default_sentence_len(),
            entities: default_entities(),
            entity_rate: default_entity_rate(),
            relation_words: default_relation_words(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CorpusError::BadSpec(m.to_string()));
        if self.lexicons.len() != 5 {
            return bad("exactly five class lexicons are required");
        }
        if self.lexicons.iter().any(|l| l.is_empty()) {
            return bad("class lexicons must be non-empty");
        }
        let mut seen = HashSet::new();
        for lex in &self.lexicons {
            for w in lex {
                if tokenize(w) != [w.clone()] {
                    return bad(&format!(
                        "lexicon entry {w:?} is not a single lowercase token"
                    ));
                }
                if !seen.insert(w.as_str()) {
                    return bad(&format!(
                        "lexicons are not pairwise disjoint: {w:?} repeats"
                    ));
                }
            }
        }
        if !(0.0..0.5).contains(&self.noise) {
            return bad("noise rate must lie in [0, 0.5)");
        }
        if self.n_topics == 0 || self.articles_per_topic_per_stance == 0 {
            return bad("need at least one topic and one article per stance");
        }
        if self.sentences_per_article == 0 || self.sentence_len == 0 {
            return bad("articles need at least one non-empty sentence");
        }
        if !(0.0..=1.0).contains(&self.entity_rate) {
            return bad("entity rate must lie in [0, 1]");
        }
        if self.comments_per_topic_per_stance > 0
            && (self.entities.len() < 2 || self.relation_words.is_empty())
        {
            return bad("comments need at least two entities and one relation word");
        }
        Ok(())
    }

    /// Topic ids used by the generator: canonical ones first, then `topic-7`, ...
    pub fn topic_ids(&self) -> Vec<String> {
        let canon = canonical_topics();
        (0..self.n_topics)
            .map(|i| {
                canon
                    .get(i)
                    .map(|t| t.id.clone())
                    .unwrap_or_else(|| format!("topic-{}", i + 1))
            })
            .collect()
    }
}

struct Generator<'a> {
    spec: &'a CorpusSpec,
    rng: DetRng,
}

impl Generator<'_> {
    fn indicative(&mut self, class: usize) -> String {
        let class = if self.spec.noise > 0.0 && self.rng.random::<f64>() < self.spec.noise {
            let other = self.rng.random_range(0..4);
            if other >= class {
                other + 1
            } else {
                other
            }
        } else {
            class
        };
        self.spec.lexicons[class]
            .choose(&mut self.rng)
            .expect("non-empty lexicon")
            .clone()
    }

    /// Indicative token for a binary side: drawn from the side's two classes.
    fn side_indicative(&mut self, side: Polarity) -> String {
        let flip = self.spec.noise > 0.0 && self.rng.random::<f64>() < self.spec.noise;
        let side = if flip { side.opposite() } else { side };
        let classes = match side {
            Polarity::Liberal => [0, 1],
            Polarity::Conservative => [3, 4],
        };
        let class = *classes.choose(&mut self.rng).unwrap();
        self.spec.lexicons[class]
            .choose(&mut self.rng)
            .unwrap()
            .clone()
    }

    fn filler(&mut self) -> String {
        FILLER.choose(&mut self.rng).unwrap().to_string()
    }
}

fn topic_words(title: &str) -> Vec<String> {
    tokenize(title)
        .into_iter()
        .filter(|t| t.chars().all(char::is_alphanumeric) && !STOPWORDS.contains(&t.as_str()))
        .collect()
}

/// Generates labelled articles and community comments.
///
/// Per topic there are `2 · articles_per_topic_per_stance` articles whose
/// five-way labels cycle left → right over the global article index, and
/// `comments_per_topic_per_stance` comments per community.
pub fn synth_corpus(spec: &CorpusSpec) -> Result<(Vec<Article>, Vec<Comment>)> {
    spec.validate()?;
    let mut g = Generator {
        spec,
        rng: seeded(spec.seed),
    };
    let catalog = canonical_topics();
    let mut articles = Vec::new();
    let mut comments = Vec::new();
    let mut global = 0usize;
    for (t, topic_id) in spec.topic_ids().into_iter().enumerate() {
        let title_source = catalog
            .get(t)
            .map(|c| c.title.clone())
            .unwrap_or_else(|| topic_id.clone());
        let tw = topic_words(&title_source);
        for j in 0..2 * spec.articles_per_topic_per_stance {
            let label = StanceLabel::ALL[global % 5];
            global += 1;
            let class = label.index();
            let title = [
                tw.choose(&mut g.rng).unwrap().clone(),
                g.indicative(class),
                g.filler(),
                g.indicative(class),
                tw.choose(&mut g.rng).unwrap().clone(),
            ];
            let mut sentences: Vec<Vec<String>> = (0..spec.sentences_per_article)
                .map(|_| {
                    (0..spec.sentence_len)
                        .map(|pos| {
                            if pos == 0 || g.rng.random::<f64>() < 0.35 {
                                g.indicative(class)
                            } else {
                                g.filler()
                            }
                        })
                        .collect()
                })
                .collect();
            if !spec.entities.is_empty() && g.rng.random::<f64>() < spec.entity_rate {
                let name = spec.entities.choose(&mut g.rng).unwrap().name.clone();
                let s = g.rng.random_range(0..sentences.len());
                let pos = g.rng.random_range(0..=sentences[s].len());
                sentences[s].insert(pos, name);
            }
            articles.push(Article::new(
                format!("{topic_id}-a{j:03}"),
                topic_id.clone(),
                title.join(" "),
                sentences.iter().map(|s| s.join(" ")).collect(),
                format!("{}-wire", label.as_str().replace('_', "")),
                Some(label),
            )?);
        }
        for side in [Polarity::Conservative, Polarity::Liberal] {
            let tag = if side == Polarity::Conservative {
                'c'
            } else {
                'l'
            };
            for j in 0..spec.comments_per_topic_per_stance {
                let a = g.rng.random_range(0..spec.entities.len());
                let mut b = g.rng.random_range(0..spec.entities.len() - 1);
                if b >= a {
                    b += 1;
                }
                let rel = spec.relation_words.choose(&mut g.rng).unwrap().clone();
                let mut toks = vec![
                    tw.choose(&mut g.rng).unwrap().clone(),
                    g.side_indicative(side),
                ];
                toks.push(spec.entities[a].name.clone());
                toks.push(rel);
                toks.push(spec.entities[b].name.clone());
                for _ in 0..3 {
                    toks.push(if g.rng.random::<f64>() < 0.5 {
                        g.side_indicative(side)
                    } else {
                        g.filler()
                    });
                }
                toks.push(g.side_indicative(side));
                comments.push(Comment::new(
                    format!("{topic_id}-{tag}{j:04}"),
                    topic_id.clone(),
                    toks.join(" "),
                    Origin::community(side),
                    None,
                )?);
            }
        }
    }
    Ok((articles, comments))
}
