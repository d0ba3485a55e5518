//! Binary comment classifier. A single word-level attention encoder pools a
//! comment into a `d_c`-dimensional vector (used as the opinion-map input),
//! followed by a two-way softmax head.

use super::attention::{attend, attend_backward, Attended};
use super::model::{EpochStats, TrainConfig};
use super::{Polarity, StanceError};
use crate::corpus::{split_dataset, Comment, Vocab};
use crate::linalg::{argmax, axpy, softmax, Mat};
use crate::rng::seeded;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

type Result<T> = std::result::Result<T, StanceError>;

pub const DEFAULT_D_C: usize = 64;

/// Class index used by the comment head.
pub fn polarity_class(p: Polarity) -> usize {
    match p {
        Polarity::Conservative => 0,
        Polarity::Liberal => 1,
    }
}

pub const COMMENT_PARAM_GROUPS: [&str; 5] = ["embedding", "word_w", "word_u", "cls_w", "cls_b"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentModel {
    pub d_c: usize,
    pub vocab_size: usize,
    pub vocab_hash: String,
    pub seed: u64,
    pub embedding: Mat,
    pub word_w: Mat,
    pub word_u: Vec<f64>,
    pub cls_w: Mat,
    pub cls_b: Vec<f64>,
}

struct Trace {
    inputs: Vec<Vec<f64>>,
    att: Attended,
    probs: Vec<f64>,
}

impl CommentModel {
    pub fn new(vocab: &Vocab, d_c: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let sd = 1.0 / (d_c as f64).sqrt();
        let mut init =
            |rows, cols, a: f64| Mat::from_fn(rows, cols, |_, _| rng.random_range(-a..a));
        let embedding = init(vocab.len(), d_c, 0.5);
        let word_w = init(d_c, d_c, sd);
        let word_u = init(1, d_c, sd).data;
        let cls_w = init(2, d_c, sd);
        Self {
            d_c,
            vocab_size: vocab.len(),
            vocab_hash: vocab.hash(),
            seed,
            embedding,
            word_w,
            word_u,
            cls_w,
            cls_b: vec![0.0; 2],
        }
    }

    fn check(&self, ids: &[usize]) -> Result<()> {
        if ids.is_empty() {
            return Err(StanceError::EmptyComment);
        }
        if ids.iter().any(|&i| i >= self.vocab_size) {
            return Err(StanceError::Shape(
                "token id outside the model vocabulary".into(),
            ));
        }
        Ok(())
    }

    fn forward(&self, ids: &[usize]) -> Trace {
        let inputs: Vec<Vec<f64>> = ids
            .iter()
            .map(|&i| self.embedding.row(i).to_vec())
            .collect();
        let att = attend(&inputs, &self.word_w, &self.word_u);
        let mut logits = self.cls_w.matvec(&att.context);
        logits
            .iter_mut()
            .zip(&self.cls_b)
            .for_each(|(l, b)| *l += b);
        let probs = softmax(&logits);
        Trace { inputs, att, probs }
    }

    /// Pooled pre-classifier vector of length `d_c`.
    pub fn embed_ids(&self, ids: &[usize]) -> Result<Vec<f64>> {
        self.check(ids)?;
        Ok(self.forward(ids).att.context)
    }

    pub fn embed_comment(&self, vocab: &Vocab, comment: &Comment) -> Result<Vec<f64>> {
        self.embed_ids(&vocab.encode(&comment.tokens))
    }

    /// `[p(conservative), p(liberal)]`.
    pub fn probabilities(&self, ids: &[usize]) -> Result<Vec<f64>> {
        self.check(ids)?;
        Ok(self.forward(ids).probs)
    }

    pub fn predict(&self, ids: &[usize]) -> Result<Polarity> {
        let p = self.probabilities(ids)?;
        Ok(if argmax(&p) == 0 {
            Polarity::Conservative
        } else {
            Polarity::Liberal
        })
    }

    /// Probability assigned to `class`.
    pub fn confidence(&self, vocab: &Vocab, comment: &Comment, class: Polarity) -> Result<f64> {
        Ok(self.probabilities(&vocab.encode(&comment.tokens))?[polarity_class(class)])
    }

    pub fn loss(&self, ids: &[usize], class: usize) -> Result<f64> {
        self.check(ids)?;
        Ok(-self.forward(ids).probs[class].ln())
    }

    /// Cross-entropy and gradient, one vector per [`COMMENT_PARAM_GROUPS`] entry.
    pub fn loss_and_grad(&self, ids: &[usize], class: usize) -> Result<(f64, Vec<Vec<f64>>)> {
        self.check(ids)?;
        let mut grads = self.zero_grads();
        let t = self.forward(ids);
        self.backward(ids, class, &t, &mut grads);
        Ok((-t.probs[class].ln(), grads))
    }

    fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.groups().iter().map(|g| vec![0.0; g.len()]).collect()
    }

    fn groups(&self) -> [&[f64]; 5] {
        [
            &self.embedding.data,
            &self.word_w.data,
            &self.word_u,
            &self.cls_w.data,
            &self.cls_b,
        ]
    }

    fn groups_mut(&mut self) -> [&mut [f64]; 5] {
        [
            &mut self.embedding.data,
            &mut self.word_w.data,
            &mut self.word_u,
            &mut self.cls_w.data,
            &mut self.cls_b,
        ]
    }

    fn backward(&self, ids: &[usize], class: usize, t: &Trace, grads: &mut [Vec<f64>]) {
        let d = self.d_c;
        let mut d_logits = t.probs.clone();
        d_logits[class] -= 1.0;
        for (r, &g) in d_logits.iter().enumerate() {
            axpy(&mut grads[3][r * d..(r + 1) * d], g, &t.att.context);
            grads[4][r] += g;
        }
        let d_ctx = self.cls_w.matvec_t(&d_logits);
        let mut dw = Mat {
            rows: d,
            cols: d,
            data: std::mem::take(&mut grads[1]),
        };
        let back = attend_backward(
            &t.inputs,
            &self.word_w,
            &self.word_u,
            &t.att,
            &d_ctx,
            &mut dw,
        );
        grads[1] = dw.data;
        axpy(&mut grads[2], 1.0, &back.d_query);
        for (&id, dv) in ids.iter().zip(&back.d_vectors) {
            axpy(&mut grads[0][id * d..(id + 1) * d], 1.0, dv);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.groups()
            .iter()
            .all(|g| g.iter().all(|x| x.is_finite()))
    }
}

/// Max relative error of the analytic gradient against central differences,
/// over every parameter (embedding rows limited to the comment's tokens).
pub fn comment_grad_check(
    model: &CommentModel,
    ids: &[usize],
    class: usize,
    h: f64,
) -> Result<f64> {
    let (_, grads) = model.loss_and_grad(ids, class)?;
    let d = model.d_c;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut rows = ids.to_vec();
    rows.sort_unstable();
    rows.dedup();
    for (gi, g) in grads.iter().enumerate() {
        let indices: Vec<usize> = if gi == 0 {
            rows.iter().flat_map(|r| r * d..(r + 1) * d).collect()
        } else {
            (0..g.len()).collect()
        };
        for i in indices {
            let orig = probe.groups()[gi][i];
            probe.groups_mut()[gi][i] = orig + h;
            let up = probe.loss(ids, class)?;
            probe.groups_mut()[gi][i] = orig - h;
            let down = probe.loss(ids, class)?;
            probe.groups_mut()[gi][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max((g[i] - numeric).abs() / g[i].abs().max(numeric.abs()).max(1e-6));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct CommentTraining {
    pub model: CommentModel,
    pub history: Vec<EpochStats>,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub held_out_accuracy: f64,
}

/// Share of community comments used for training; the rest is held out.
pub const COMMENT_TRAIN_FRACTION: f64 = 0.75;

/// Splits community comments 75/25, trains on the first part and reports
/// accuracy on the second.
pub fn train_comment_classifier(
    comments: &[Comment],
    vocab: &Vocab,
    d_c: usize,
    config: &TrainConfig,
) -> Result<CommentTraining> {
    config.validate()?;
    let labeled: Vec<(&Comment, usize)> = comments
        .iter()
        .filter_map(|c| c.origin.polarity().map(|p| (c, polarity_class(p))))
        .collect();
    if !labeled.iter().any(|(_, y)| *y == 0) || !labeled.iter().any(|(_, y)| *y == 1) {
        return Err(StanceError::SingleClass);
    }
    let (train_set, test_set) = split_dataset(&labeled, COMMENT_TRAIN_FRACTION, config.seed)?;
    let encode = |set: &[(&Comment, usize)]| -> Vec<(Vec<usize>, usize)> {
        set.iter()
            .map(|(c, y)| (vocab.encode(&c.tokens), *y))
            .collect()
    };
    let (train_data, test_data) = (encode(&train_set), encode(&test_set));
    let mut model = CommentModel::new(vocab, d_c, config.seed);
    for (ids, _) in train_data.iter().chain(&test_data) {
        model.check(ids)?;
    }
    let mut rng = seeded(config.seed ^ 0x636f_6d6d);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut grads = model.zero_grads();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            grads.iter_mut().for_each(|g| g.fill(0.0));
            let mut batch_loss = 0.0;
            for &i in batch {
                let (ids, y) = &train_data[i];
                let t = model.forward(ids);
                batch_loss += -t.probs[*y].ln();
                model.backward(ids, *y, &t, &mut grads);
            }
            if !batch_loss.is_finite() {
                return Err(StanceError::NonFinite {
                    epoch,
                    batch: batch_idx,
                });
            }
            total += batch_loss;
            let lr = config.learning_rate / batch.len() as f64;
            for (p, g) in model.groups_mut().into_iter().zip(&grads) {
                p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g);
            }
            if !model.is_finite() {
                return Err(StanceError::NonFinite {
                    epoch,
                    batch: batch_idx,
                });
            }
        }
        let accuracy = accuracy(&model, &train_data);
        history.push(EpochStats {
            epoch: epoch + 1,
            loss: total / train_data.len() as f64,
            accuracy,
        });
    }
    let held_out_accuracy = accuracy(&model, &test_data);
    Ok(CommentTraining {
        model,
        history,
        train_ids: train_set.iter().map(|(c, _)| c.id.clone()).collect(),
        test_ids: test_set.iter().map(|(c, _)| c.id.clone()).collect(),
        held_out_accuracy,
    })
}

fn accuracy(model: &CommentModel, data: &[(Vec<usize>, usize)]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let correct = data
        .iter()
        .filter(|(ids, y)| argmax(&model.forward(ids).probs) == *y)
        .count();
    correct as f64 / data.len() as f64
}
