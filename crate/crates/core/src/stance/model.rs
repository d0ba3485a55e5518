//! Three-level attention classifier with knowledge fusion.
//!
//! Words are embedded and attention-pooled into sentence vectors and a title
//! vector (shared word-level parameters). Sentence vectors are pooled into a
//! body vector. The title level attends over `{body, title}` with query
//! `u_t + title`. The document vector is then fused with the projected mean
//! entity vectors of both camps through a scalar gate and classified.

use super::attention::{attend, attend_backward, Attended};
use super::knowledge::KnowledgeBase;
use super::{StanceDistribution, StanceError, StanceLabel};
use crate::corpus::{Article, Vocab};
use crate::linalg::{axpy, dot, sigmoid, softmax, Mat};
use crate::rng::seeded;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

type Result<T> = std::result::Result<T, StanceError>;

pub const PARAM_GROUPS: [&str; 12] = [
    "embedding",
    "word_w",
    "word_u",
    "sent_w",
    "sent_u",
    "title_w",
    "title_u",
    "proj_lib",
    "proj_con",
    "gate",
    "cls_w",
    "cls_b",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceParams {
    pub embedding: Mat,
    pub word_w: Mat,
    pub word_u: Vec<f64>,
    pub sent_w: Mat,
    pub sent_u: Vec<f64>,
    pub title_w: Mat,
    pub title_u: Vec<f64>,
    pub proj_lib: Mat,
    pub proj_con: Mat,
    /// Gate over `[doc ‖ e_lib ‖ e_con]`, length `3·d`.
    pub gate: Vec<f64>,
    pub cls_w: Mat,
    pub cls_b: Vec<f64>,
}

impl StanceParams {
    fn zeros(vocab: usize, d: usize, d_lib: usize, d_con: usize) -> Self {
        Self {
            embedding: Mat::zeros(vocab, d),
            word_w: Mat::zeros(d, d),
            word_u: vec![0.0; d],
            sent_w: Mat::zeros(d, d),
            sent_u: vec![0.0; d],
            title_w: Mat::zeros(d, d),
            title_u: vec![0.0; d],
            proj_lib: Mat::zeros(d, d_lib),
            proj_con: Mat::zeros(d, d_con),
            gate: vec![0.0; 3 * d],
            cls_w: Mat::zeros(5, d),
            cls_b: vec![0.0; 5],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(
            self.embedding.rows,
            self.embedding.cols,
            self.proj_lib.cols,
            self.proj_con.cols,
        )
    }

    /// Parameter groups in [`PARAM_GROUPS`] order.
    pub fn groups(&self) -> [(&'static str, &[f64]); 12] {
        [
            ("embedding", &self.embedding.data),
            ("word_w", &self.word_w.data),
            ("word_u", &self.word_u),
            ("sent_w", &self.sent_w.data),
            ("sent_u", &self.sent_u),
            ("title_w", &self.title_w.data),
            ("title_u", &self.title_u),
            ("proj_lib", &self.proj_lib.data),
            ("proj_con", &self.proj_con.data),
            ("gate", &self.gate),
            ("cls_w", &self.cls_w.data),
            ("cls_b", &self.cls_b),
        ]
    }

    pub fn groups_mut(&mut self) -> [(&'static str, &mut [f64]); 12] {
        [
            ("embedding", &mut self.embedding.data),
            ("word_w", &mut self.word_w.data),
            ("word_u", &mut self.word_u),
            ("sent_w", &mut self.sent_w.data),
            ("sent_u", &mut self.sent_u),
            ("title_w", &mut self.title_w.data),
            ("title_u", &mut self.title_u),
            ("proj_lib", &mut self.proj_lib.data),
            ("proj_con", &mut self.proj_con.data),
            ("gate", &mut self.gate),
            ("cls_w", &mut self.cls_w.data),
            ("cls_b", &mut self.cls_b),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.groups()
            .iter()
            .all(|(_, g)| g.iter().all(|x| x.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceModel {
    pub d_w: usize,
    pub d_lib: usize,
    pub d_con: usize,
    pub vocab_size: usize,
    pub vocab_hash: String,
    pub seed: u64,
    pub params: StanceParams,
}

/// A tokenized article ready for the model.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedArticle {
    pub title: Vec<usize>,
    pub sentences: Vec<Vec<usize>>,
    /// Mean raw entity vector per camp; `None` when no entity matched.
    pub lib_entities: Option<Vec<f64>>,
    pub con_entities: Option<Vec<f64>>,
}

impl EncodedArticle {
    /// Copy with knowledge removed (the entity-ablation view).
    pub fn without_entities(&self) -> Self {
        Self {
            lib_entities: None,
            con_entities: None,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.title.is_empty()
            || self.sentences.is_empty()
            || self.sentences.iter().any(Vec::is_empty)
        {
            return Err(StanceError::EmptyArticle);
        }
        Ok(())
    }
}

/// Tokens → ids, plus entity matching against both camps when `knowledge` is given.
pub fn encode_article(
    article: &Article,
    vocab: &Vocab,
    knowledge: Option<&KnowledgeBase>,
) -> Result<EncodedArticle> {
    let enc = EncodedArticle {
        title: vocab.encode(&article.title_tokens),
        sentences: article
            .sentence_tokens
            .iter()
            .map(|s| vocab.encode(s))
            .collect(),
        lib_entities: None,
        con_entities: None,
    };
    enc.validate()?;
    Ok(match knowledge {
        Some(kb) => {
            let tokens: Vec<&String> = article.all_tokens().collect();
            EncodedArticle {
                lib_entities: kb.lib.mean_entity_vector(&tokens),
                con_entities: kb.con.mean_entity_vector(&tokens),
                ..enc
            }
        }
        None => enc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttentionReport {
    /// Word weights per body sentence.
    pub words: Vec<Vec<f64>>,
    pub title_words: Vec<f64>,
    pub sentences: Vec<f64>,
    /// Weights over `[body, title]`.
    pub title_level: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fusion {
    pub fused: Vec<f64>,
    pub beta: f64,
    pub e_lib: Vec<f64>,
    pub e_con: Vec<f64>,
}

/// `fused = doc + β e_lib + (1 − β) e_con` with `β = σ(gᵀ[doc ‖ e_lib ‖ e_con])`
/// and `e_camp = P_camp · mean entity vector` (zero when nothing matched).
pub fn fuse_knowledge(
    params: &StanceParams,
    doc: &[f64],
    lib: Option<&[f64]>,
    con: Option<&[f64]>,
) -> Fusion {
    let d = doc.len();
    let e_lib = lib.map_or_else(|| vec![0.0; d], |m| params.proj_lib.matvec(m));
    let e_con = con.map_or_else(|| vec![0.0; d], |m| params.proj_con.matvec(m));
    let g = &params.gate;
    let beta = sigmoid(dot(&g[..d], doc) + dot(&g[d..2 * d], &e_lib) + dot(&g[2 * d..], &e_con));
    let fused = (0..d)
        .map(|k| doc[k] + beta * e_lib[k] + (1.0 - beta) * e_con[k])
        .collect();
    Fusion {
        fused,
        beta,
        e_lib,
        e_con,
    }
}

struct Trace {
    sent_inputs: Vec<Vec<Vec<f64>>>,
    sent_att: Vec<Attended>,
    title_inputs: Vec<Vec<f64>>,
    title_att: Attended,
    sent_vecs: Vec<Vec<f64>>,
    body_att: Attended,
    top_inputs: Vec<Vec<f64>>,
    top_query: Vec<f64>,
    top_att: Attended,
    fusion: Fusion,
    probs: Vec<f64>,
}

/// Gradient of the loss for one article.
#[derive(Debug, Clone)]
pub struct StanceGrad {
    pub params: StanceParams,
    /// `∂L/∂(sentence vector)` per body sentence.
    pub sentence_vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// When false, entity knowledge is ignored during training (ablation).
    pub use_entities: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.05,
            batch_size: 8,
            seed: 0,
            use_entities: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(StanceError::BadConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(StanceError::BadConfig("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(StanceError::BadConfig(
                "learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches (before each update).
    pub loss: f64,
    /// Training accuracy after the epoch.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledArticle {
    pub input: EncodedArticle,
    pub label: StanceLabel,
}

/// Default embedding width.
pub const DEFAULT_D_W: usize = 32;

impl StanceModel {
    /// Randomly initialized model. `d_lib` / `d_con` are the entity-vector
    /// widths of the two knowledge graphs (use 0 when there is no knowledge).
    pub fn new(vocab: &Vocab, d_w: usize, d_lib: usize, d_con: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let mut p = StanceParams::zeros(vocab.len(), d_w, d_lib, d_con);
        let sd = 1.0 / (d_w as f64).sqrt();
        let mut fill =
            |xs: &mut [f64], a: f64| xs.iter_mut().for_each(|x| *x = rng.random_range(-a..a));
        fill(&mut p.embedding.data, 0.5);
        fill(&mut p.word_w.data, sd);
        fill(&mut p.word_u, sd);
        fill(&mut p.sent_w.data, sd);
        fill(&mut p.sent_u, sd);
        fill(&mut p.title_w.data, sd);
        fill(&mut p.title_u, sd);
        if d_lib > 0 {
            fill(&mut p.proj_lib.data, 1.0 / (d_lib as f64).sqrt());
        }
        if d_con > 0 {
            fill(&mut p.proj_con.data, 1.0 / (d_con as f64).sqrt());
        }
        fill(&mut p.gate, 0.1);
        fill(&mut p.cls_w.data, sd);
        Self {
            d_w,
            d_lib,
            d_con,
            vocab_size: vocab.len(),
            vocab_hash: vocab.hash(),
            seed,
            params: p,
        }
    }

    /// Same architecture sized for `knowledge`.
    pub fn for_knowledge(
        vocab: &Vocab,
        d_w: usize,
        knowledge: Option<&KnowledgeBase>,
        seed: u64,
    ) -> Self {
        let (l, c) = knowledge.map_or((0, 0), |kb| (kb.lib.entity_dim(), kb.con.entity_dim()));
        Self::new(vocab, d_w, l, c, seed)
    }

    fn check(&self, a: &EncodedArticle) -> Result<()> {
        a.validate()?;
        let in_vocab = a
            .title
            .iter()
            .chain(a.sentences.iter().flatten())
            .all(|&t| t < self.vocab_size);
        let lib_ok = a
            .lib_entities
            .as_ref()
            .is_none_or(|v| v.len() == self.d_lib);
        let con_ok = a
            .con_entities
            .as_ref()
            .is_none_or(|v| v.len() == self.d_con);
        if !in_vocab || !lib_ok || !con_ok {
            return Err(StanceError::Shape("article does not fit this model".into()));
        }
        Ok(())
    }

    fn embed(&self, ids: &[usize]) -> Vec<Vec<f64>> {
        ids.iter()
            .map(|&i| self.params.embedding.row(i).to_vec())
            .collect()
    }

    fn forward(&self, a: &EncodedArticle) -> Trace {
        let p = &self.params;
        let sent_inputs: Vec<Vec<Vec<f64>>> = a.sentences.iter().map(|s| self.embed(s)).collect();
        let sent_att: Vec<Attended> = sent_inputs
            .iter()
            .map(|x| attend(x, &p.word_w, &p.word_u))
            .collect();
        let title_inputs = self.embed(&a.title);
        let title_att = attend(&title_inputs, &p.word_w, &p.word_u);
        let sent_vecs: Vec<Vec<f64>> = sent_att.iter().map(|s| s.context.clone()).collect();
        let body_att = attend(&sent_vecs, &p.sent_w, &p.sent_u);
        let title_vec = title_att.context.clone();
        let top_query: Vec<f64> = p
            .title_u
            .iter()
            .zip(&title_vec)
            .map(|(u, t)| u + t)
            .collect();
        let top_inputs = vec![body_att.context.clone(), title_vec];
        let top_att = attend(&top_inputs, &p.title_w, &top_query);
        let fusion = fuse_knowledge(
            p,
            &top_att.context,
            a.lib_entities.as_deref(),
            a.con_entities.as_deref(),
        );
        let mut logits = p.cls_w.matvec(&fusion.fused);
        logits.iter_mut().zip(&p.cls_b).for_each(|(l, b)| *l += b);
        let probs = softmax(&logits);
        Trace {
            sent_inputs,
            sent_att,
            title_inputs,
            title_att,
            sent_vecs,
            body_att,
            top_inputs,
            top_query,
            top_att,
            fusion,
            probs,
        }
    }

    /// Document vector (before fusion) and every attention weight vector.
    pub fn encode_document(&self, a: &EncodedArticle) -> Result<(Vec<f64>, AttentionReport)> {
        self.check(a)?;
        let t = self.forward(a);
        let report = AttentionReport {
            words: t.sent_att.iter().map(|s| s.weights.clone()).collect(),
            title_words: t.title_att.weights.clone(),
            sentences: t.body_att.weights.clone(),
            title_level: t.top_att.weights.clone(),
        };
        Ok((t.top_att.context, report))
    }

    pub fn fuse(&self, a: &EncodedArticle) -> Result<Fusion> {
        self.check(a)?;
        Ok(self.forward(a).fusion)
    }

    pub fn predict(&self, a: &EncodedArticle) -> Result<StanceDistribution> {
        self.check(a)?;
        Ok(StanceDistribution::from_logits(
            &self.logits_of(&self.forward(a)),
        ))
    }

    fn logits_of(&self, t: &Trace) -> Vec<f64> {
        let mut logits = self.params.cls_w.matvec(&t.fusion.fused);
        logits
            .iter_mut()
            .zip(&self.params.cls_b)
            .for_each(|(l, b)| *l += b);
        logits
    }

    pub fn loss(&self, a: &EncodedArticle, label: StanceLabel) -> Result<f64> {
        self.check(a)?;
        Ok(-self.forward(a).probs[label.index()].ln())
    }

    /// Cross-entropy loss and its gradient with respect to every parameter.
    pub fn loss_and_grad(
        &self,
        a: &EncodedArticle,
        label: StanceLabel,
    ) -> Result<(f64, StanceGrad)> {
        self.check(a)?;
        let mut g = self.params.zeros_like();
        let t = self.forward(a);
        let loss = -t.probs[label.index()].ln();
        let sentence_vectors = self.backward(a, label, &t, &mut g);
        Ok((
            loss,
            StanceGrad {
                params: g,
                sentence_vectors,
            },
        ))
    }

    /// Accumulates gradients into `g`; returns `∂L/∂(sentence vectors)`.
    fn backward(
        &self,
        a: &EncodedArticle,
        label: StanceLabel,
        t: &Trace,
        g: &mut StanceParams,
    ) -> Vec<Vec<f64>> {
        let p = &self.params;
        let d = self.d_w;
        let mut d_logits = t.probs.clone();
        d_logits[label.index()] -= 1.0;
        let f = &t.fusion;
        g.cls_w.add_outer(1.0, &d_logits, &f.fused);
        axpy(&mut g.cls_b, 1.0, &d_logits);
        let d_fused = p.cls_w.matvec_t(&d_logits);

        // fusion gate
        let mut d_doc = d_fused.clone();
        let mut d_lib: Vec<f64> = d_fused.iter().map(|x| f.beta * x).collect();
        let mut d_con: Vec<f64> = d_fused.iter().map(|x| (1.0 - f.beta) * x).collect();
        let d_beta: f64 = (0..d).map(|k| d_fused[k] * (f.e_lib[k] - f.e_con[k])).sum();
        let d_pre = d_beta * f.beta * (1.0 - f.beta);
        let doc = &t.top_att.context;
        axpy(&mut g.gate[..d], d_pre, doc);
        axpy(&mut g.gate[d..2 * d], d_pre, &f.e_lib);
        axpy(&mut g.gate[2 * d..], d_pre, &f.e_con);
        axpy(&mut d_doc, d_pre, &p.gate[..d]);
        axpy(&mut d_lib, d_pre, &p.gate[d..2 * d]);
        axpy(&mut d_con, d_pre, &p.gate[2 * d..]);
        if let Some(m) = &a.lib_entities {
            g.proj_lib.add_outer(1.0, &d_lib, m);
        }
        if let Some(m) = &a.con_entities {
            g.proj_con.add_outer(1.0, &d_con, m);
        }

        // title level
        let top = attend_backward(
            &t.top_inputs,
            &p.title_w,
            &t.top_query,
            &t.top_att,
            &d_doc,
            &mut g.title_w,
        );
        axpy(&mut g.title_u, 1.0, &top.d_query);
        let d_body = &top.d_vectors[0];
        let mut d_title = top.d_vectors[1].clone();
        axpy(&mut d_title, 1.0, &top.d_query);

        // sentence level
        let body = attend_backward(
            &t.sent_vecs,
            &p.sent_w,
            &p.sent_u,
            &t.body_att,
            d_body,
            &mut g.sent_w,
        );
        axpy(&mut g.sent_u, 1.0, &body.d_query);

        // word level
        for (s, ids) in a.sentences.iter().enumerate() {
            let w = attend_backward(
                &t.sent_inputs[s],
                &p.word_w,
                &p.word_u,
                &t.sent_att[s],
                &body.d_vectors[s],
                &mut g.word_w,
            );
            axpy(&mut g.word_u, 1.0, &w.d_query);
            for (&id, dv) in ids.iter().zip(&w.d_vectors) {
                axpy(g.embedding.row_mut(id), 1.0, dv);
            }
        }
        let w = attend_backward(
            &t.title_inputs,
            &p.word_w,
            &p.word_u,
            &t.title_att,
            &d_title,
            &mut g.word_w,
        );
        axpy(&mut g.word_u, 1.0, &w.d_query);
        for (&id, dv) in a.title.iter().zip(&w.d_vectors) {
            axpy(g.embedding.row_mut(id), 1.0, dv);
        }
        body.d_vectors
    }

    fn sgd_step(&mut self, grad: &StanceParams, lr: f64) {
        for ((_, p), (_, g)) in self.params.groups_mut().into_iter().zip(grad.groups()) {
            p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g);
        }
    }
}

/// Convenience wrapper: tokenize, match entities and predict.
pub fn predict_stance(
    model: &StanceModel,
    vocab: &Vocab,
    article: &Article,
    knowledge: Option<&KnowledgeBase>,
) -> Result<StanceDistribution> {
    model.predict(&encode_article(article, vocab, knowledge)?)
}

/// Fraction of items whose argmax (lowest index on ties) equals the gold label.
pub fn evaluate_accuracy(model: &StanceModel, data: &[LabeledArticle]) -> Result<f64> {
    if data.is_empty() {
        return Err(StanceError::EmptyDataset);
    }
    let mut correct = 0;
    for item in data {
        if model.predict(&item.input)?.argmax() == item.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Minibatch SGD on mean cross-entropy. Returns the trained model and one
/// [`EpochStats`] per epoch.
pub fn train(
    mut model: StanceModel,
    data: &[LabeledArticle],
    config: &TrainConfig,
) -> Result<(StanceModel, Vec<EpochStats>)> {
    config.validate()?;
    if data.is_empty() {
        return Err(StanceError::EmptyDataset);
    }
    let data: Vec<LabeledArticle> = if config.use_entities {
        data.to_vec()
    } else {
        data.iter()
            .map(|x| LabeledArticle {
                input: x.input.without_entities(),
                label: x.label,
            })
            .collect()
    };
    for item in &data {
        model.check(&item.input)?;
    }
    let mut rng = seeded(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = model.params.zeros_like();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            for (_, g) in grad.groups_mut() {
                g.fill(0.0);
            }
            let mut batch_loss = 0.0;
            for &i in batch {
                let item = &data[i];
                let t = model.forward(&item.input);
                batch_loss += -t.probs[item.label.index()].ln();
                model.backward(&item.input, item.label, &t, &mut grad);
            }
            if !batch_loss.is_finite() {
                return Err(StanceError::NonFinite {
                    epoch,
                    batch: batch_idx,
                });
            }
            total += batch_loss;
            model.sgd_step(&grad, config.learning_rate / batch.len() as f64);
            if !model.params.is_finite() {
                return Err(StanceError::NonFinite {
                    epoch,
                    batch: batch_idx,
                });
            }
        }
        let accuracy = evaluate_accuracy(&model, &data)?;
        history.push(EpochStats {
            epoch: epoch + 1,
            loss: total / data.len() as f64,
            accuracy,
        });
    }
    Ok((model, history))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_group: &'static str,
    pub worst_index: usize,
}

/// Compares the analytic gradient with central differences of step `h` over
/// every parameter group. Embedding rows of tokens absent from the article
/// have zero gradient both ways and are skipped. Relative error is
/// `|a − n| / max(|a|, |n|, 1e−6)`.
pub fn model_grad_check(
    model: &StanceModel,
    article: &EncodedArticle,
    label: StanceLabel,
    h: f64,
) -> Result<GradCheckReport> {
    if h.is_nan() || h <= 0.0 {
        return Err(StanceError::BadConfig(
            "finite-difference step must be positive".into(),
        ));
    }
    let (_, grad) = model.loss_and_grad(article, label)?;
    let rows: BTreeSet<usize> = article
        .title
        .iter()
        .chain(article.sentences.iter().flatten())
        .copied()
        .collect();
    let d = model.d_w;
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_group: PARAM_GROUPS[0],
        worst_index: 0,
    };
    let analytic = grad.params.groups().map(|(_, g)| g.to_vec());
    for (gi, name) in PARAM_GROUPS.iter().enumerate() {
        let len = analytic[gi].len();
        let indices: Vec<usize> = if gi == 0 {
            rows.iter().flat_map(|r| r * d..(r + 1) * d).collect()
        } else {
            (0..len).collect()
        };
        for i in indices {
            let orig = probe.params.groups()[gi].1[i];
            probe.params.groups_mut()[gi].1[i] = orig + h;
            let up = -probe.forward(article).probs[label.index()].ln();
            probe.params.groups_mut()[gi].1[i] = orig - h;
            let down = -probe.forward(article).probs[label.index()].ln();
            probe.params.groups_mut()[gi].1[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[gi][i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if err > report.max_rel_error {
                report = GradCheckReport {
                    max_rel_error: err,
                    worst_group: name,
                    worst_index: i,
                };
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KFoldReport {
    /// Dataset indices of each test fold.
    pub folds: Vec<Vec<usize>>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
}

/// Deterministic fold assignment: a seeded shuffle dealt round-robin.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(StanceError::BadConfig("k must be at least 2".into()));
    }
    if k > n {
        return Err(StanceError::BadConfig(format!(
            "k = {k} exceeds dataset size {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let mut folds = vec![Vec::new(); k];
    for (j, i) in order.into_iter().enumerate() {
        folds[j % k].push(i);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Trains a copy of `template` on each k−1 folds and scores the held-out fold.
pub fn kfold_eval(
    template: &StanceModel,
    data: &[LabeledArticle],
    k: usize,
    config: &TrainConfig,
) -> Result<KFoldReport> {
    let folds = kfold_indices(data.len(), k, config.seed)?;
    let mut accuracies = Vec::with_capacity(k);
    for fold in &folds {
        let held: BTreeSet<usize> = fold.iter().copied().collect();
        let train_set: Vec<LabeledArticle> = (0..data.len())
            .filter(|i| !held.contains(i))
            .map(|i| data[i].clone())
            .collect();
        let test_set: Vec<LabeledArticle> = fold.iter().map(|&i| data[i].clone()).collect();
        let (model, _) = train(template.clone(), &train_set, config)?;
        let test_set: Vec<LabeledArticle> = if config.use_entities {
            test_set
        } else {
            test_set
                .into_iter()
                .map(|x| LabeledArticle {
                    input: x.input.without_entities(),
                    label: x.label,
                })
                .collect()
        };
        accuracies.push(evaluate_accuracy(&model, &test_set)?);
    }
    let mean = accuracies.iter().sum::<f64>() / k as f64;
    Ok(KFoldReport {
        folds,
        accuracies,
        mean,
    })
}
