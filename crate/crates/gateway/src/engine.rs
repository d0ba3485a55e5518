//! Immutable read side of the server: predicted articles, topic bundles,
//! community comments, composer examples and the comment model.

use crate::config::ServerConfig;
use crate::GatewayError;
use hearhere_core::corpus::{
    load_corpus, prepare_topic_bundle, sample_example_comments, topic_catalog, Article, Comment,
    ExamplePipeline, Topic, TopicBundle, Vocab,
};
use hearhere_core::feed::{apply_ratio, sort_extremeness, RatioLevel, SortOrder};
use hearhere_core::kgraph::{load_embedding, load_graph};
use hearhere_core::opinion_map::{build_map, OpinionMap, TsneConfig};
use hearhere_core::stance::{
    band, binary_stance, extremeness, load_comment_model, load_model, predict_stance, Band,
    CampKnowledge, CommentModel, KnowledgeBase, Polarity, StanceDistribution,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const SNIPPET_CHARS: usize = 160;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicEntry {
    #[serde(flatten)]
    pub topic: Topic,
    /// Whether the corpus holds a full bundle for this topic.
    pub available: bool,
}

/// One feed card.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleSummary {
    pub id: String,
    pub title: String,
    pub snippet: String,
    pub stance: Polarity,
    pub extremeness: f64,
    pub band: Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleDetail {
    pub id: String,
    pub topic: String,
    pub title: String,
    pub sentences: Vec<String>,
    pub source: String,
    pub stance: Polarity,
    pub extremeness: f64,
    pub band: Band,
    pub distribution: StanceDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feed {
    pub topic: String,
    pub ratio: RatioLevel,
    pub order: SortOrder,
    pub articles: Vec<ArticleSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleComment {
    pub id: String,
    pub text: String,
    pub stance: Polarity,
}

/// Everything the engine needs, already loaded. Articles must carry
/// predictions.
pub struct EngineParts {
    pub articles: Vec<Article>,
    pub comments: Vec<Comment>,
    pub vocab: Vocab,
    pub comment_model: CommentModel,
    pub tsne: TsneConfig,
    pub examples: ExamplePipeline,
    pub seed: u64,
    pub max_comments_per_topic: usize,
}

pub struct Engine {
    topics: Vec<TopicEntry>,
    articles: BTreeMap<String, Article>,
    bundles: BTreeMap<String, TopicBundle>,
    community: BTreeMap<String, Vec<Comment>>,
    examples: BTreeMap<String, Vec<ExampleComment>>,
    article_stances: BTreeMap<String, Polarity>,
    vocab: Vocab,
    comment_model: CommentModel,
    tsne: TsneConfig,
    max_comments_per_topic: usize,
}

impl Engine {
    /// Loads inputs named by `config`, predicts every article with the
    /// stance model and builds the engine.
    pub fn load(config: &ServerConfig) -> Result<Self, GatewayError> {
        config.check_inputs()?;
        let (mut articles, comments) = load_corpus(&config.corpus)?;
        let vocab = Vocab::from_json(&std::fs::read_to_string(&config.vocab)?)?;
        let stance_model = load_model(&config.stance_model, &vocab)?;
        let comment_model = load_comment_model(&config.comment_model, &vocab)?;
        let knowledge = match &config.knowledge {
            None => None,
            Some(k) => Some(KnowledgeBase {
                lib: CampKnowledge::new(
                    load_graph(&k.lib_graph)?,
                    load_embedding(&k.lib_embedding)?,
                ),
                con: CampKnowledge::new(
                    load_graph(&k.con_graph)?,
                    load_embedding(&k.con_embedding)?,
                ),
            }),
        };
        for a in &mut articles {
            a.prediction = Some(predict_stance(
                &stance_model,
                &vocab,
                a,
                knowledge.as_ref(),
            )?);
        }
        Self::new(EngineParts {
            articles,
            comments,
            vocab,
            comment_model,
            tsne: config.tsne.clone(),
            examples: config.examples,
            seed: config.seed,
            max_comments_per_topic: config.max_comments_per_topic,
        })
    }

    pub fn new(parts: EngineParts) -> Result<Self, GatewayError> {
        if parts.max_comments_per_topic == 0 {
            return Err(GatewayError::Config(
                "max_comments_per_topic must be positive".into(),
            ));
        }
        if let Some(a) = parts.articles.iter().find(|a| a.prediction.is_none()) {
            return Err(GatewayError::Config(format!(
                "article {} has no prediction",
                a.id
            )));
        }
        let catalog = topic_catalog(parts.articles.iter().map(|a| a.topic_id.as_str()));
        let mut bundles = BTreeMap::new();
        let mut community: BTreeMap<String, Vec<Comment>> = BTreeMap::new();
        let mut examples = BTreeMap::new();
        let mut topics = Vec::with_capacity(catalog.len());
        for topic in catalog {
            let has_articles = parts.articles.iter().any(|a| a.topic_id == topic.id);
            let has_comments = parts.comments.iter().any(|c| c.topic_id == topic.id);
            if has_articles {
                bundles.insert(
                    topic.id.clone(),
                    prepare_topic_bundle(&topic.id, &parts.articles)?,
                );
            }
            if has_comments {
                let model = &parts.comment_model;
                let vocab = &parts.vocab;
                let selection = sample_example_comments(
                    &parts.comments,
                    &topic.id,
                    parts.seed,
                    parts.examples,
                    |c| {
                        c.origin
                            .polarity()
                            .map(|p| model.confidence(vocab, c, p).unwrap_or(0.0))
                            .unwrap_or(0.0)
                    },
                )?;
                let by_id: BTreeMap<&str, &Comment> =
                    parts.comments.iter().map(|c| (c.id.as_str(), c)).collect();
                let list: Vec<ExampleComment> = selection
                    .per_stance
                    .iter()
                    .flat_map(|s| s.selected.iter().map(move |id| (s.polarity, id)))
                    .map(|(stance, id)| ExampleComment {
                        id: id.clone(),
                        text: by_id[id.as_str()].text.clone(),
                        stance,
                    })
                    .collect();
                examples.insert(topic.id.clone(), list);
                let pool: Vec<Comment> = parts
                    .comments
                    .iter()
                    .filter(|c| c.topic_id == topic.id && c.origin.polarity().is_some())
                    .take(parts.max_comments_per_topic)
                    .cloned()
                    .collect();
                community.insert(topic.id.clone(), pool);
            }
            let available = has_articles && has_comments;
            topics.push(TopicEntry { topic, available });
        }
        let article_stances = parts
            .articles
            .iter()
            .map(|a| {
                (
                    a.id.clone(),
                    binary_stance(a.prediction.as_ref().expect("checked above")).0,
                )
            })
            .collect();
        Ok(Self {
            topics,
            articles: parts
                .articles
                .into_iter()
                .map(|a| (a.id.clone(), a))
                .collect(),
            bundles,
            community,
            examples,
            article_stances,
            vocab: parts.vocab,
            comment_model: parts.comment_model,
            tsne: parts.tsne,
            max_comments_per_topic: parts.max_comments_per_topic,
        })
    }

    pub fn topics(&self) -> &[TopicEntry] {
        &self.topics
    }

    pub fn is_available(&self, topic: &str) -> bool {
        self.topics
            .iter()
            .any(|t| t.topic.id == topic && t.available)
    }

    pub fn article(&self, id: &str) -> Option<&Article> {
        self.articles.get(id)
    }

    pub fn bundle(&self, topic: &str) -> Option<&TopicBundle> {
        self.bundles.get(topic)
    }

    /// Binary stance of every predicted article.
    pub fn article_stances(&self) -> &BTreeMap<String, Polarity> {
        &self.article_stances
    }

    pub fn examples(&self, topic: &str) -> Option<&[ExampleComment]> {
        self.examples.get(topic).map(Vec::as_slice)
    }

    pub fn example(&self, topic: &str, id: &str) -> Option<&ExampleComment> {
        self.examples.get(topic)?.iter().find(|e| e.id == id)
    }

    pub fn max_comments_per_topic(&self) -> usize {
        self.max_comments_per_topic
    }

    /// The ratio-bar composition of `topic` sorted by extremeness.
    pub fn feed(
        &self,
        topic: &str,
        ratio: RatioLevel,
        order: SortOrder,
    ) -> Result<Option<Feed>, GatewayError> {
        let Some(bundle) = self.bundles.get(topic) else {
            return Ok(None);
        };
        let ids = apply_ratio(bundle, ratio)?;
        let picked: Vec<&Article> = ids.iter().map(|id| &self.articles[id]).collect();
        let sorted = sort_extremeness(&picked, order, |a| {
            extremeness(a.prediction.as_ref().expect("predicted"))
        });
        let articles = sorted.into_iter().map(|a| self.summary(a)).collect();
        Ok(Some(Feed {
            topic: topic.to_string(),
            ratio,
            order,
            articles,
        }))
    }

    fn summary(&self, a: &Article) -> ArticleSummary {
        let pred = a.prediction.as_ref().expect("predicted");
        ArticleSummary {
            id: a.id.clone(),
            title: a.title.clone(),
            snippet: a.snippet(SNIPPET_CHARS),
            stance: binary_stance(pred).0,
            extremeness: extremeness(pred),
            band: band(pred),
        }
    }

    pub fn detail(&self, id: &str) -> Option<ArticleDetail> {
        let a = self.articles.get(id)?;
        let pred = a.prediction.as_ref().expect("predicted");
        Some(ArticleDetail {
            id: a.id.clone(),
            topic: a.topic_id.clone(),
            title: a.title.clone(),
            sentences: a.sentences.clone(),
            source: a.source.clone(),
            stance: binary_stance(pred).0,
            extremeness: extremeness(pred),
            band: band(pred),
            distribution: *pred,
        })
    }

    /// Lays out the topic's community comments together with `user`.
    pub fn map(&self, topic: &str, user: &[Comment]) -> Result<OpinionMap, GatewayError> {
        let community = self.community.get(topic).map(Vec::as_slice).unwrap_or(&[]);
        Ok(build_map(
            topic,
            community,
            user,
            &self.comment_model,
            &self.vocab,
            &self.tsne,
        )?)
    }
}
