use super::{Camp, EntityDef, KgLexicon, KnowledgeGraph, Result, Triple};
use crate::corpus::tokenize;
use std::collections::{BTreeSet, HashMap};

/// Maximum distance, in tokens, between the starts of two co-occurring mentions.
pub const DEFAULT_WINDOW: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub entity: usize,
}

/// Greedy longest-match entity tagger over token sequences.
#[derive(Debug, Clone)]
pub struct EntityMatcher {
    by_first: HashMap<String, Vec<(Vec<String>, usize)>>,
}

impl EntityMatcher {
    pub fn new(entities: &[EntityDef]) -> Self {
        let mut by_first: HashMap<String, Vec<(Vec<String>, usize)>> = HashMap::new();
        for (id, e) in entities.iter().enumerate() {
            for surface in e.surfaces.iter().chain(std::iter::once(&e.name)) {
                let toks = tokenize(surface);
                if let Some(first) = toks.first() {
                    let list = by_first.entry(first.clone()).or_default();
                    if !list.iter().any(|(t, i)| *t == toks && *i == id) {
                        list.push((toks, id));
                    }
                }
            }
        }
        for list in by_first.values_mut() {
            list.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1.cmp(&b.1)));
        }
        Self { by_first }
    }

    pub fn mentions<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<Mention> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let hit = self.by_first.get(tokens[i].as_ref()).and_then(|cands| {
                cands.iter().find(|(surface, _)| {
                    surface.len() <= tokens.len() - i
                        && surface
                            .iter()
                            .zip(&tokens[i..])
                            .all(|(a, b)| a == b.as_ref())
                })
            });
            match hit {
                Some((surface, id)) => {
                    out.push(Mention {
                        start: i,
                        end: i + surface.len(),
                        entity: *id,
                    });
                    i += surface.len();
                }
                None => i += 1,
            }
        }
        out
    }

    /// Distinct entities in first-mention order.
    pub fn entities<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        let mut seen = Vec::new();
        for m in self.mentions(tokens) {
            if !seen.contains(&m.entity) {
                seen.push(m.entity);
            }
        }
        seen
    }
}

fn contains_seq<S: AsRef<str>>(hay: &[S], needle: &[String]) -> bool {
    !needle.is_empty()
        && hay.len() >= needle.len()
        && hay
            .windows(needle.len())
            .any(|w| w.iter().zip(needle).all(|(a, b)| a.as_ref() == b))
}

/// Triples from every ordered pair of distinct mentions whose starts lie
/// within `window` tokens. The relation is the first rule with a trigger in
/// the span between the mentions, else the fallback (id 0).
pub fn extract_triples<S: AsRef<str>>(
    posts: &[Vec<S>],
    lexicon: &KgLexicon,
    window: usize,
) -> BTreeSet<Triple> {
    let matcher = EntityMatcher::new(&lexicon.entities);
    let triggers: Vec<Vec<Vec<String>>> = lexicon
        .rules
        .iter()
        .map(|r| r.triggers.iter().map(|t| tokenize(t)).collect())
        .collect();
    let mut out = BTreeSet::new();
    for post in posts {
        let mentions = matcher.mentions(post);
        for (i, a) in mentions.iter().enumerate() {
            for b in &mentions[i + 1..] {
                if b.start - a.start > window {
                    break;
                }
                if a.entity == b.entity {
                    continue;
                }
                let between = &post[a.end..b.start];
                let relation = triggers
                    .iter()
                    .position(|ts| ts.iter().any(|t| contains_seq(between, t)))
                    .map_or(0, |r| r + 1);
                out.insert(Triple::new(a.entity, relation, b.entity));
            }
        }
    }
    out
}

/// Default cleansing predicate: true when head and tail share a surface form.
pub fn shares_surface_form(t: &Triple, entities: &[EntityDef]) -> bool {
    let (h, tl) = (&entities[t.head], &entities[t.tail]);
    h.surfaces.iter().any(|s| tl.surfaces.contains(s))
}

/// Extracts, drops triples for which `reject` holds, and assembles a graph.
pub fn build_graph<S: AsRef<str>>(
    camp: Camp,
    posts: &[Vec<S>],
    lexicon: &KgLexicon,
    window: usize,
    reject: impl Fn(&Triple, &[EntityDef]) -> bool,
) -> Result<KnowledgeGraph> {
    lexicon.validate()?;
    let triples = extract_triples(posts, lexicon, window)
        .into_iter()
        .filter(|t| !reject(t, &lexicon.entities))
        .collect();
    KnowledgeGraph::new(
        camp,
        lexicon.entities.clone(),
        lexicon.relation_names(),
        triples,
    )
}
