//! Graph files are JSON lines: a header object carrying the camp and both
//! lexicons, then one `{"h","r","t"}` object per triple. Embedding
//! checkpoints are a single JSON document.

use super::{Camp, EntityDef, KgEmbedding, KgError, KnowledgeGraph, Result, Triple};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const EMBEDDING_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphHeader {
    camp: Camp,
    entities: Vec<EntityDef>,
    relations: Vec<String>,
}

pub fn render_graph(graph: &KnowledgeGraph) -> String {
    let header = GraphHeader {
        camp: graph.camp,
        entities: graph.entities.clone(),
        relations: graph.relations.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for t in &graph.triples {
        out.push_str(&serde_json::to_string(t).expect("triple serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_graph(text: &str) -> Result<KnowledgeGraph> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(KgError::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let header: GraphHeader = serde_json::from_str(first).map_err(|e| KgError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let mut triples = Vec::new();
    for (i, line) in lines {
        let t: Triple = serde_json::from_str(line).map_err(|e| KgError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        triples.push(t);
    }
    KnowledgeGraph::new(header.camp, header.entities, header.relations, triples)
}

pub fn save_graph(path: impl AsRef<Path>, graph: &KnowledgeGraph) -> Result<()> {
    fs::write(path, render_graph(graph))?;
    Ok(())
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<KnowledgeGraph> {
    parse_graph(&fs::read_to_string(path)?)
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    #[serde(flatten)]
    embedding: KgEmbedding,
}

pub fn save_embedding(path: impl AsRef<Path>, emb: &KgEmbedding) -> Result<()> {
    let ck = Checkpoint {
        format_version: EMBEDDING_FORMAT_VERSION,
        embedding: emb.clone(),
    };
    fs::write(path, serde_json::to_string(&ck)?)?;
    Ok(())
}

pub fn load_embedding(path: impl AsRef<Path>) -> Result<KgEmbedding> {
    let ck: Checkpoint = serde_json::from_str(&fs::read_to_string(path)?)?;
    if ck.format_version != EMBEDDING_FORMAT_VERSION {
        return Err(KgError::BadGraph(format!(
            "unsupported checkpoint version {}",
            ck.format_version
        )));
    }
    let e = ck.embedding;
    if e.entities.len() != e.n_entities * e.ew() || e.relations.len() != e.n_relations * e.rw() {
        return Err(KgError::BadGraph(
            "checkpoint tensor sizes do not match its metadata".into(),
        ));
    }
    if !e.is_finite() {
        return Err(KgError::BadGraph(
            "checkpoint contains non-finite values".into(),
        ));
    }
    Ok(e)
}
