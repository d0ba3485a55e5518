//! Articles, comments and everything needed to turn raw corpus files into
//! model-ready datasets.

mod bundle;
mod io;
mod split;
mod synth;
mod vocab;

pub use bundle::{
    prepare_topic_bundle, sample_example_comments, BundleEntry, ExamplePipeline, ExampleSelection,
    Slot, TopicBundle, MODERATE_REFERENCE,
};
pub use io::{load_corpus, parse_corpus, render_corpus, save_corpus};
pub use split::split_dataset;
pub use synth::{synth_corpus, CorpusSpec, SynthEntity};
pub use vocab::{build_vocab, Vocab, PAD_ID, UNK_ID};

use crate::stance::{Polarity, StanceDistribution, StanceLabel};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate id {id:?} (line {line})")]
    DuplicateId { id: String, line: usize },
    #[error("invalid record {id:?}: {message}")]
    Invalid { id: String, message: String },
    #[error("corpus contains no tokens")]
    EmptyCorpus,
    #[error("min_freq must be at least 1")]
    BadMinFreq,
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    BadTrainFraction(f64),
    #[error("need at least 2 items to split, got {0}")]
    TooFewItems(usize),
    #[error("insufficient articles for topic {topic}: {shortfall}")]
    InsufficientArticles { topic: String, shortfall: String },
    #[error("insufficient comments for topic {topic}: {shortfall}")]
    InsufficientComments { topic: String, shortfall: String },
    #[error("invalid corpus spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// Lowercases and splits on whitespace; every punctuation or symbol character
/// becomes its own token. No stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push(ch.to_lowercase().collect());
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// A news article. Text fields keep the original wording for display; the
/// token fields are what the models see.
#[derive(Debug, Clone, PartialEq)]
pub struct Article {
    pub id: String,
    pub topic_id: String,
    pub title: String,
    pub sentences: Vec<String>,
    pub title_tokens: Vec<String>,
    pub sentence_tokens: Vec<Vec<String>>,
    pub source: String,
    pub gold_stance: Option<StanceLabel>,
    pub prediction: Option<StanceDistribution>,
}

impl Article {
    pub fn new(
        id: impl Into<String>,
        topic_id: impl Into<String>,
        title: impl Into<String>,
        sentences: Vec<String>,
        source: impl Into<String>,
        gold_stance: Option<StanceLabel>,
    ) -> Result<Self> {
        let id = id.into();
        let title = title.into();
        let title_tokens = tokenize(&title);
        if title_tokens.is_empty() {
            return Err(CorpusError::Invalid {
                id,
                message: "empty title".into(),
            });
        }
        let sentence_tokens: Vec<Vec<String>> = sentences
            .iter()
            .map(|s| tokenize(s))
            .filter(|t| !t.is_empty())
            .collect();
        if sentence_tokens.is_empty() {
            return Err(CorpusError::Invalid {
                id,
                message: "article has no non-empty sentence".into(),
            });
        }
        Ok(Self {
            id,
            topic_id: topic_id.into(),
            title,
            sentences,
            title_tokens,
            sentence_tokens,
            source: source.into(),
            gold_stance,
            prediction: None,
        })
    }

    /// Title followed by every sentence, in reading order.
    pub fn all_tokens(&self) -> impl Iterator<Item = &String> {
        self.title_tokens
            .iter()
            .chain(self.sentence_tokens.iter().flatten())
    }

    /// Short body preview for feed cards.
    pub fn snippet(&self, max_chars: usize) -> String {
        let body = self.sentences.join(" ");
        if body.chars().count() <= max_chars {
            body
        } else {
            let mut s: String = body.chars().take(max_chars).collect();
            s.push('…');
            s
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    ConservativeCommunity,
    LiberalCommunity,
    User,
}

impl Origin {
    pub fn community(polarity: Polarity) -> Self {
        match polarity {
            Polarity::Conservative => Origin::ConservativeCommunity,
            Polarity::Liberal => Origin::LiberalCommunity,
        }
    }

    /// Camp of a community comment; `None` for user comments.
    pub fn polarity(self) -> Option<Polarity> {
        match self {
            Origin::ConservativeCommunity => Some(Polarity::Conservative),
            Origin::LiberalCommunity => Some(Polarity::Liberal),
            Origin::User => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comment {
    pub id: String,
    pub topic_id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub origin: Origin,
    pub author_session: Option<String>,
}

impl Comment {
    pub fn new(
        id: impl Into<String>,
        topic_id: impl Into<String>,
        text: impl Into<String>,
        origin: Origin,
        author_session: Option<String>,
    ) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        let tokens = tokenize(&text);
        if tokens.is_empty() {
            return Err(CorpusError::Invalid {
                id,
                message: "empty comment".into(),
            });
        }
        if (origin == Origin::User) != author_session.is_some() {
            return Err(CorpusError::Invalid {
                id,
                message: "user comments carry an author session and community comments do not"
                    .into(),
            });
        }
        Ok(Self {
            id,
            topic_id: topic_id.into(),
            text,
            tokens,
            origin,
            author_session,
        })
    }
}

/// One entry of the topic catalog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub id: String,
    pub title: String,
    pub policy_dimension: String,
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.title, self.id)
    }
}

const CANONICAL_TOPICS: [(&str, &str, &str); 6] = [
    (
        "labor-strike",
        "Illegal strike of confederation of unions",
        "Labor policy",
    ),
    ("minimum-wage", "Minimum wage increase", "Labor policy"),
    (
        "justice-minister-impeachment",
        "Impeachment of the Minister of Justice",
        "Political corruption",
    ),
    (
        "first-lady-plagiarism",
        "Thesis plagiarism of the first lady",
        "Political corruption",
    ),
    ("disability-rights", "Right of the disabled", "Human rights"),
    ("us-military-alliance", "U.S. military alliance", "Military"),
];

/// The six canonical news themes, in catalog order.
pub fn canonical_topics() -> Vec<Topic> {
    CANONICAL_TOPICS
        .iter()
        .map(|(id, title, dim)| Topic {
            id: (*id).to_string(),
            title: (*title).to_string(),
            policy_dimension: (*dim).to_string(),
        })
        .collect()
}

/// Canonical topics followed by any extra topic ids seen in the corpus, in
/// first-appearance order.
pub fn topic_catalog<'a>(topic_ids: impl IntoIterator<Item = &'a str>) -> Vec<Topic> {
    let mut topics = canonical_topics();
    for id in topic_ids {
        if !topics.iter().any(|t| t.id == id) {
            topics.push(Topic {
                id: id.to_string(),
                title: id.to_string(),
                policy_dimension: "Other".into(),
            });
        }
    }
    topics
}
