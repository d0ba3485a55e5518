use super::{KgEmbedding, KgError, KgMethod, KnowledgeGraph, Result, Triple};
use crate::linalg::{log_sigmoid, sigmoid, softmax};
use crate::rng::seeded;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KgTrainConfig {
    pub method: KgMethod,
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Margin γ.
    pub margin: f64,
    /// Negatives per positive.
    pub negatives: usize,
    /// Self-adversarial temperature α.
    pub adversarial_temperature: f64,
    pub batch_size: usize,
    pub hake_lambda: f64,
    pub seed: u64,
}

impl Default for KgTrainConfig {
    fn default() -> Self {
        Self {
            method: KgMethod::RotatE,
            dim: 16,
            epochs: 100,
            learning_rate: 1.0,
            margin: 4.0,
            negatives: 8,
            adversarial_temperature: 1.0,
            batch_size: 16,
            hake_lambda: 0.5,
            seed: 0,
        }
    }
}

impl KgTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(KgError::BadConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("margin must be positive");
        }
        if self.negatives == 0 {
            return bad("negatives per positive must be positive");
        }
        if !(self.adversarial_temperature >= 0.0 && self.adversarial_temperature.is_finite()) {
            return bad("adversarial temperature must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.hake_lambda >= 0.0 && self.hake_lambda.is_finite()) {
            return bad("hake lambda must be non-negative");
        }
        Ok(())
    }
}

/// `k` corruptions of `t`: a fair coin picks head or tail, which is replaced
/// by a uniformly drawn entity different from the one it replaces.
pub fn negative_sample(t: &Triple, n_entities: usize, k: usize, seed: u64) -> Result<Vec<Triple>> {
    if n_entities < 2 {
        return Err(KgError::TooFewEntities);
    }
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let corrupt_head: bool = rng.random();
        let old = if corrupt_head { t.head } else { t.tail };
        // uniform over the n-1 entities other than `old`
        let mut e = rng.random_range(0..n_entities - 1);
        if e >= old {
            e += 1;
        }
        out.push(if corrupt_head {
            Triple::new(e, t.relation, t.tail)
        } else {
            Triple::new(t.head, t.relation, e)
        });
    }
    Ok(out)
}

/// Self-adversarial weights `softmax(α · s(neg))`.
pub fn adversarial_weights(neg_scores: &[f64], alpha: f64) -> Vec<f64> {
    let scaled: Vec<f64> = neg_scores.iter().map(|s| alpha * s).collect();
    softmax(&scaled)
}

fn loss_with_weights(pos_score: f64, neg_scores: &[f64], weights: &[f64], margin: f64) -> f64 {
    let neg: f64 = neg_scores
        .iter()
        .zip(weights)
        .map(|(s, w)| w * log_sigmoid(-s - margin))
        .sum();
    -log_sigmoid(margin + pos_score) - neg
}

/// `−log σ(γ + s(pos)) − Σ wᵢ log σ(−s(negᵢ) − γ)`.
pub fn kg_loss(
    emb: &KgEmbedding,
    positive: &Triple,
    negatives: &[Triple],
    margin: f64,
    alpha: f64,
) -> Result<f64> {
    if negatives.is_empty() {
        return Err(KgError::NoNegatives);
    }
    let sp = emb.score(positive)?;
    let sn = negatives
        .iter()
        .map(|t| emb.score(t))
        .collect::<Result<Vec<_>>>()?;
    Ok(loss_with_weights(
        sp,
        &sn,
        &adversarial_weights(&sn, alpha),
        margin,
    ))
}

/// Sparse gradient keyed by entity / relation id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KgGrad {
    pub entities: BTreeMap<usize, Vec<f64>>,
    pub relations: BTreeMap<usize, Vec<f64>>,
}

impl KgGrad {
    fn add(map: &mut BTreeMap<usize, Vec<f64>>, id: usize, scale: f64, g: &[f64]) {
        let slot = map.entry(id).or_insert_with(|| vec![0.0; g.len()]);
        slot.iter_mut().zip(g).for_each(|(s, g)| *s += scale * g);
    }

    fn add_triple(&mut self, t: &Triple, scale: f64, g: &super::TripleGrad) {
        Self::add(&mut self.entities, t.head, scale, &g.head);
        Self::add(&mut self.relations, t.relation, scale, &g.relation);
        Self::add(&mut self.entities, t.tail, scale, &g.tail);
    }

    fn merge(&mut self, other: &KgGrad, scale: f64) {
        for (id, g) in &other.entities {
            Self::add(&mut self.entities, *id, scale, g);
        }
        for (id, g) in &other.relations {
            Self::add(&mut self.relations, *id, scale, g);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entities
            .values()
            .chain(self.relations.values())
            .flatten()
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Loss and its gradient. The adversarial weights are treated as constants
/// (no gradient flows through the softmax), as is usual for this loss.
pub fn kg_loss_and_grad(
    emb: &KgEmbedding,
    positive: &Triple,
    negatives: &[Triple],
    margin: f64,
    alpha: f64,
) -> Result<(f64, KgGrad)> {
    if negatives.is_empty() {
        return Err(KgError::NoNegatives);
    }
    let (sp, gp) = emb.score_with_grad(positive)?;
    let mut sn = Vec::with_capacity(negatives.len());
    let mut gn = Vec::with_capacity(negatives.len());
    for t in negatives {
        let (s, g) = emb.score_with_grad(t)?;
        sn.push(s);
        gn.push(g);
    }
    let w = adversarial_weights(&sn, alpha);
    let loss = loss_with_weights(sp, &sn, &w, margin);
    let mut grad = KgGrad::default();
    grad.add_triple(positive, -sigmoid(-(margin + sp)), &gp);
    for ((t, g), (s, wi)) in negatives.iter().zip(&gn).zip(sn.iter().zip(&w)) {
        grad.add_triple(t, wi * sigmoid(s + margin), g);
    }
    Ok((loss, grad))
}

/// Maximum relative error `|a − n| / max(|a|, |n|, 1e−6)` between the analytic
/// gradient and central differences with step `h`, over every coordinate of
/// every row the positive and negatives touch. The adversarial weights are
/// frozen at the unperturbed point, matching the analytic gradient.
pub fn kg_grad_check(
    emb: &KgEmbedding,
    positive: &Triple,
    negatives: &[Triple],
    margin: f64,
    alpha: f64,
    h: f64,
) -> Result<f64> {
    if h.is_nan() || h <= 0.0 {
        return Err(KgError::BadConfig(
            "finite-difference step must be positive".into(),
        ));
    }
    let (_, grad) = kg_loss_and_grad(emb, positive, negatives, margin, alpha)?;
    let sn = negatives
        .iter()
        .map(|t| emb.score(t))
        .collect::<Result<Vec<_>>>()?;
    let w = adversarial_weights(&sn, alpha);
    let frozen = |e: &KgEmbedding| -> f64 {
        let sp = e.score_unchecked(positive);
        let sn: Vec<f64> = negatives.iter().map(|t| e.score_unchecked(t)).collect();
        loss_with_weights(sp, &sn, &w, margin)
    };

    let all = std::iter::once(positive).chain(negatives);
    let entities: BTreeSet<usize> = all.clone().flat_map(|t| [t.head, t.tail]).collect();
    let relations: BTreeSet<usize> = all.map(|t| t.relation).collect();
    let (ew, rw) = (emb.ew(), emb.rw());
    let mut probe = emb.clone();
    let mut worst: f64 = 0.0;
    let mut compare = |analytic: f64, numeric: f64| {
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(err);
    };
    for &e in &entities {
        for k in 0..ew {
            let i = e * ew + k;
            let orig = probe.entities[i];
            probe.entities[i] = orig + h;
            let up = frozen(&probe);
            probe.entities[i] = orig - h;
            let down = frozen(&probe);
            probe.entities[i] = orig;
            compare(grad.entities[&e][k], (up - down) / (2.0 * h));
        }
    }
    for &r in &relations {
        for k in 0..rw {
            let i = r * rw + k;
            let orig = probe.relations[i];
            probe.relations[i] = orig + h;
            let up = frozen(&probe);
            probe.relations[i] = orig - h;
            let down = frozen(&probe);
            probe.relations[i] = orig;
            compare(grad.relations[&r][k], (up - down) / (2.0 * h));
        }
    }
    Ok(worst)
}

/// Trains an embedding for `graph` with minibatch SGD. Returns the embedding
/// and the mean loss of every epoch.
pub fn train_kg_embedding(
    graph: &KnowledgeGraph,
    config: &KgTrainConfig,
) -> Result<(KgEmbedding, Vec<f64>)> {
    config.validate()?;
    if graph.triples.is_empty() {
        return Err(KgError::EmptyGraph);
    }
    if graph.n_entities() < 2 {
        return Err(KgError::TooFewEntities);
    }
    let mut emb = KgEmbedding::random(
        config.method,
        graph.n_entities(),
        graph.n_relations(),
        config.dim,
        config.hake_lambda,
        config.seed,
    );
    let mut rng = seeded(config.seed ^ 0x6b67_7472_6169_6e00);
    let mut order: Vec<usize> = (0..graph.triples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grad = KgGrad::default();
            let mut batch_loss = 0.0;
            let scale = 1.0 / batch.len() as f64;
            for &ti in batch {
                let t = &graph.triples[ti];
                let negs = negative_sample(t, graph.n_entities(), config.negatives, rng.random())?;
                let (loss, g) = kg_loss_and_grad(
                    &emb,
                    t,
                    &negs,
                    config.margin,
                    config.adversarial_temperature,
                )?;
                batch_loss += loss;
                grad.merge(&g, scale);
            }
            if !batch_loss.is_finite() {
                return Err(KgError::NonFinite {
                    epoch,
                    batch: batch_idx,
                });
            }
            epoch_loss += batch_loss;
            for (id, g) in &grad.entities {
                emb.entity_mut(*id)
                    .iter_mut()
                    .zip(g)
                    .for_each(|(p, g)| *p -= config.learning_rate * g);
            }
            for (id, g) in &grad.relations {
                emb.relation_mut(*id)
                    .iter_mut()
                    .zip(g)
                    .for_each(|(p, g)| *p -= config.learning_rate * g);
            }
            emb.project();
            if !emb.is_finite() {
                return Err(KgError::NonFinite {
                    epoch,
                    batch: batch_idx,
                });
            }
        }
        history.push(epoch_loss / graph.triples.len() as f64);
        emb.epoch = epoch + 1;
    }
    emb.seed = config.seed;
    emb.trained = true;
    Ok((emb, history))
}
