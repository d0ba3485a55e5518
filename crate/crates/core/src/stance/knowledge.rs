use crate::kgraph::{EntityMatcher, KgEmbedding, KnowledgeGraph};

/// One camp's graph, its trained embedding and a cached entity matcher.
#[derive(Debug, Clone)]
pub struct CampKnowledge {
    pub graph: KnowledgeGraph,
    pub embedding: KgEmbedding,
    matcher: EntityMatcher,
}

impl CampKnowledge {
    pub fn new(graph: KnowledgeGraph, embedding: KgEmbedding) -> Self {
        let matcher = graph.matcher();
        Self {
            graph,
            embedding,
            matcher,
        }
    }

    /// Length of the flattened entity vectors.
    pub fn entity_dim(&self) -> usize {
        self.embedding.ew()
    }

    /// Distinct graph entities mentioned in `tokens`, in first-mention order.
    pub fn matched_entities<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        self.matcher.entities(tokens)
    }

    /// Mean entity vector over the matched entities, or `None` when nothing
    /// matches. Entities without a vector contribute nothing.
    pub fn mean_entity_vector<S: AsRef<str>>(&self, tokens: &[S]) -> Option<Vec<f64>> {
        let vectors: Vec<Vec<f64>> = self
            .matched_entities(tokens)
            .into_iter()
            .filter_map(|e| self.embedding.entity_vector(e))
            .collect();
        if vectors.is_empty() {
            return None;
        }
        let mut mean = vec![0.0; self.entity_dim()];
        for v in &vectors {
            mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
        }
        let n = vectors.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Some(mean)
    }
}

/// Both camps' knowledge, consumed by the fusion layer.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    pub lib: CampKnowledge,
    pub con: CampKnowledge,
}
