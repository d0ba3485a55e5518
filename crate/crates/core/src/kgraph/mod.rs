//! Camp-specific political knowledge graphs and their triple embeddings.
//!
//! Graphs are built from community posts by lexicon matching plus
//! relation-trigger rules, then embedded with one of three scoring models
//! (RotatE, HAKE, ModE) under the self-adversarial negative-sampling loss.

mod embed;
mod extract;
mod io;
mod train;

pub use embed::{KgEmbedding, KgMethod, TripleGrad};
pub use extract::{
    build_graph, extract_triples, shares_surface_form, EntityMatcher, Mention, DEFAULT_WINDOW,
};
pub use io::{
    load_embedding, load_graph, parse_graph, render_graph, save_embedding, save_graph,
    EMBEDDING_FORMAT_VERSION,
};
pub use train::{
    adversarial_weights, kg_grad_check, kg_loss, kg_loss_and_grad, negative_sample,
    train_kg_embedding, KgGrad, KgTrainConfig,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum KgError {
    #[error("entity id {0} out of range")]
    EntityOutOfRange(usize),
    #[error("relation id {0} out of range")]
    RelationOutOfRange(usize),
    #[error("graph has no triples")]
    EmptyGraph,
    #[error("at least one negative is required")]
    NoNegatives,
    #[error("need at least 2 entities to corrupt a triple")]
    TooFewEntities,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("invalid graph: {0}")]
    BadGraph(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = KgError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Camp {
    Lib,
    Con,
}

impl fmt::Display for Camp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Camp::Lib => "lib",
            Camp::Con => "con",
        })
    }
}

impl FromStr for Camp {
    type Err = KgError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lib" => Ok(Camp::Lib),
            "con" => Ok(Camp::Con),
            other => Err(KgError::BadConfig(format!("unknown camp {other:?}"))),
        }
    }
}

/// Default taxonomy of political entity types.
pub const ENTITY_TYPES: [&str; 18] = [
    "politician",
    "political_party",
    "government_agency",
    "legislature",
    "court",
    "law",
    "policy",
    "election",
    "ideology",
    "advocacy_group",
    "labor_union",
    "media_outlet",
    "corporation",
    "country",
    "military",
    "religious_group",
    "social_movement",
    "event",
];

/// Relation used when no rule fires on the span between two mentions.
pub const FALLBACK_RELATION: &str = "related_to";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityDef {
    pub name: String,
    /// Surface forms matched in text; the name itself is always one of them.
    pub surfaces: Vec<String>,
    pub entity_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationRule {
    pub name: String,
    pub triggers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgLexicon {
    pub entities: Vec<EntityDef>,
    pub rules: Vec<RelationRule>,
}

impl KgLexicon {
    pub fn validate(&self) -> Result<()> {
        if self.entities.is_empty() {
            return Err(KgError::BadConfig("entity lexicon is empty".into()));
        }
        for e in &self.entities {
            if !ENTITY_TYPES.contains(&e.entity_type.as_str()) {
                return Err(KgError::BadConfig(format!(
                    "entity {:?} has unknown type {:?}",
                    e.name, e.entity_type
                )));
            }
        }
        Ok(())
    }

    /// Relation names: the fallback first, then one per rule.
    pub fn relation_names(&self) -> Vec<String> {
        std::iter::once(FALLBACK_RELATION.to_string())
            .chain(self.rules.iter().map(|r| r.name.clone()))
            .collect()
    }
}

fn entity(name: &str, extra: &[&str], ty: &str) -> EntityDef {
    let mut surfaces = vec![name.to_string()];
    surfaces.extend(extra.iter().map(|s| s.to_string()));
    EntityDef {
        name: name.to_string(),
        surfaces,
        entity_type: ty.to_string(),
    }
}

/// Built-in lexicon matching the synthetic corpus generator.
pub fn default_lexicon() -> KgLexicon {
    KgLexicon {
        entities: vec![
            entity("minjoo", &["democratic party"], "political_party"),
            entity("kukhim", &["people power party"], "political_party"),
            entity("kctu", &["confederation of trade unions"], "labor_union"),
            entity("fkti", &[], "labor_union"),
            entity("presidentyoon", &[], "politician"),
            entity("ministercho", &["justice minister"], "politician"),
            entity("firstlady", &["first lady"], "politician"),
            entity("usfk", &["us forces korea"], "military"),
            entity("assembly", &["national assembly"], "legislature"),
            entity("constitutionalcourt", &["constitutional court"], "court"),
            entity("chosunilbo", &[], "media_outlet"),
            entity("hankyoreh", &[], "media_outlet"),
        ],
        rules: ["supports", "opposes", "criticizes", "praises", "funds"]
            .iter()
            .map(|r| RelationRule {
                name: r.to_string(),
                triggers: vec![r.to_string()],
            })
            .collect(),
    }
}

/// Ordered by (head, relation, tail).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    #[serde(rename = "h")]
    pub head: usize,
    #[serde(rename = "r")]
    pub relation: usize,
    #[serde(rename = "t")]
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub camp: Camp,
    pub entities: Vec<EntityDef>,
    pub relations: Vec<String>,
    /// Sorted and duplicate-free.
    pub triples: Vec<Triple>,
}

impl KnowledgeGraph {
    pub fn new(
        camp: Camp,
        entities: Vec<EntityDef>,
        relations: Vec<String>,
        mut triples: Vec<Triple>,
    ) -> Result<Self> {
        triples.sort_unstable();
        triples.dedup();
        for t in &triples {
            if t.head >= entities.len() || t.tail >= entities.len() {
                return Err(KgError::BadGraph(format!(
                    "triple {t:?} references an unknown entity"
                )));
            }
            if t.relation >= relations.len() {
                return Err(KgError::BadGraph(format!(
                    "triple {t:?} references an unknown relation"
                )));
            }
            if t.head == t.tail {
                return Err(KgError::BadGraph(format!(
                    "triple {t:?} has head equal to tail"
                )));
            }
        }
        Ok(Self {
            camp,
            entities,
            relations,
            triples,
        })
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_id(&self, name: &str) -> Option<usize> {
        self.entities.iter().position(|e| e.name == name)
    }

    pub fn relation_id(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r == name)
    }

    pub fn matcher(&self) -> EntityMatcher {
        EntityMatcher::new(&self.entities)
    }
}
