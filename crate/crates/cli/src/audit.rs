//! Central-difference gradient audits over random model configurations.

use anyhow::Result;
use hearhere_core::corpus::Vocab;
use hearhere_core::kgraph::{kg_grad_check, negative_sample, KgEmbedding, KgMethod, Triple};
use hearhere_core::stance::{model_grad_check, EncodedArticle, StanceLabel, StanceModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Finite-difference step of every audit.
pub const GRAD_STEP: f64 = 1e-5;
/// Relative error an analytic gradient must stay under.
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradAudit {
    pub target: String,
    pub configs: usize,
    pub max_rel_error: f64,
    /// Description of the configuration with the largest error.
    pub worst: String,
}

impl GradAudit {
    pub fn passed(&self) -> bool {
        self.max_rel_error < GRAD_TOLERANCE
    }
}

/// Random graphs, embeddings, triples, negatives, margins and temperatures.
pub fn kg_grad_audit(method: KgMethod, configs: usize, seed: u64) -> Result<GradAudit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut audit = GradAudit {
        target: format!("kg/{method}"),
        configs,
        max_rel_error: 0.0,
        worst: String::new(),
    };
    for i in 0..configs {
        let n = rng.random_range(3..9);
        let nr = rng.random_range(1..4);
        let d = rng.random_range(1..7);
        let emb = KgEmbedding::random(method, n, nr, d, rng.random_range(0.1..1.0), rng.random());
        let h = rng.random_range(0..n);
        let t = (h + rng.random_range(1..n)) % n;
        let pos = Triple::new(h, rng.random_range(0..nr), t);
        let k = rng.random_range(1..6);
        let negs = negative_sample(&pos, n, k, rng.random())?;
        let (margin, alpha) = (rng.random_range(0.5..6.0), rng.random_range(0.0..2.0));
        let err = kg_grad_check(&emb, &pos, &negs, margin, alpha, GRAD_STEP)?;
        if err >= audit.max_rel_error {
            audit.max_rel_error = err;
            audit.worst =
                format!("config {i}: {n} entities, {nr} relations, dim {d}, {k} negatives");
        }
    }
    Ok(audit)
}

/// Random vocabularies, widths, articles and labels through the full
/// attention and knowledge-fusion path. Every fourth configuration drops one
/// camp's entities.
pub fn stance_grad_audit(configs: usize, seed: u64) -> Result<GradAudit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut audit = GradAudit {
        target: "stance".into(),
        configs,
        max_rel_error: 0.0,
        worst: String::new(),
    };
    for i in 0..configs {
        let n_vocab = rng.random_range(10..40);
        let vocab = Vocab::from_tokens((0..n_vocab).map(|i| format!("w{i}")).collect(), 1);
        let d_w = rng.random_range(2..=16);
        let (d_lib, d_con) = (rng.random_range(1..7), rng.random_range(1..7));
        let model = StanceModel::new(&vocab, d_w, d_lib, d_con, rng.random());
        let mut seq = |len: usize| {
            (0..len)
                .map(|_| rng.random_range(2..vocab.len()))
                .collect::<Vec<_>>()
        };
        let title = seq(3);
        let sentences: Vec<Vec<usize>> = (0..3).map(|j| seq(2 + j)).collect();
        let mut vector = |d: usize| {
            Some(
                (0..d)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect::<Vec<f64>>(),
            )
        };
        let lib_entities = vector(d_lib);
        let con_entities = if i % 4 == 3 { None } else { vector(d_con) };
        let article = EncodedArticle {
            title,
            sentences,
            lib_entities,
            con_entities,
        };
        let label = StanceLabel::ALL[rng.random_range(0..5)];
        let r = model_grad_check(&model, &article, label, GRAD_STEP)?;
        if r.max_rel_error >= audit.max_rel_error {
            audit.max_rel_error = r.max_rel_error;
            audit.worst = format!(
                "config {i}: d_w {d_w}, d_lib {d_lib}, d_con {d_con}, group {}",
                r.worst_group
            );
        }
    }
    Ok(audit)
}
