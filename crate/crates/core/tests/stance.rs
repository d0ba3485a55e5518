// Index loops mirror the component-wise formulas being checked.
#![allow(clippy::needless_range_loop)]

mod common;

use hearhere_core::corpus::{Article, Vocab};
use hearhere_core::kgraph::KgMethod;
use hearhere_core::linalg::Mat;
use hearhere_core::stance::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_vocab(n: usize) -> Vocab {
    Vocab::from_tokens((0..n).map(|i| format!("w{i}")).collect(), 1)
}

fn random_article(
    rng: &mut ChaCha8Rng,
    vocab: usize,
    d_lib: usize,
    d_con: usize,
) -> EncodedArticle {
    let mut seq = |len: usize| {
        (0..len)
            .map(|_| rng.random_range(2..vocab))
            .collect::<Vec<_>>()
    };
    let title = seq(3);
    let sentences = (0..3).map(|i| seq(2 + i)).collect();
    let mut vec = |d: usize| {
        Some(
            (0..d)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect::<Vec<f64>>(),
        )
    };
    let lib_entities = vec(d_lib);
    let con_entities = vec(d_con);
    EncodedArticle {
        title,
        sentences,
        lib_entities,
        con_entities,
    }
}

// ---------- independent straight-line oracles ----------

fn o_tanh_mv(w: &Mat, v: &[f64]) -> Vec<f64> {
    (0..w.rows)
        .map(|r| {
            (0..w.cols)
                .map(|c| w.data[r * w.cols + c] * v[c])
                .sum::<f64>()
                .tanh()
        })
        .collect()
}

fn o_attend(vs: &[Vec<f64>], w: &Mat, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let scores: Vec<f64> = vs
        .iter()
        .map(|v| o_tanh_mv(w, v).iter().zip(u).map(|(a, b)| a * b).sum())
        .collect();
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    let a: Vec<f64> = e.iter().map(|x| x / z).collect();
    let mut ctx = vec![0.0; vs[0].len()];
    for (v, ai) in vs.iter().zip(&a) {
        for k in 0..ctx.len() {
            ctx[k] += ai * v[k];
        }
    }
    (ctx, a)
}

fn o_doc(m: &StanceModel, a: &EncodedArticle) -> Vec<f64> {
    let p = &m.params;
    let emb = |ids: &[usize]| {
        ids.iter()
            .map(|&i| p.embedding.row(i).to_vec())
            .collect::<Vec<_>>()
    };
    let sents: Vec<Vec<f64>> = a
        .sentences
        .iter()
        .map(|s| o_attend(&emb(s), &p.word_w, &p.word_u).0)
        .collect();
    let body = o_attend(&sents, &p.sent_w, &p.sent_u).0;
    let title = o_attend(&emb(&a.title), &p.word_w, &p.word_u).0;
    let q: Vec<f64> = p.title_u.iter().zip(&title).map(|(u, t)| u + t).collect();
    o_attend(&[body, title], &p.title_w, &q).0
}

fn o_fuse(m: &StanceModel, doc: &[f64], lib: Option<&[f64]>, con: Option<&[f64]>) -> Vec<f64> {
    let d = doc.len();
    let proj = |mat: &Mat, v: Option<&[f64]>| match v {
        Some(v) => (0..d)
            .map(|r| (0..mat.cols).map(|c| mat.get(r, c) * v[c]).sum())
            .collect(),
        None => vec![0.0; d],
    };
    let el: Vec<f64> = proj(&m.params.proj_lib, lib);
    let ec: Vec<f64> = proj(&m.params.proj_con, con);
    let g = &m.params.gate;
    let z: f64 = (0..d)
        .map(|k| g[k] * doc[k] + g[d + k] * el[k] + g[2 * d + k] * ec[k])
        .sum();
    let beta = 1.0 / (1.0 + (-z).exp());
    (0..d)
        .map(|k| doc[k] + beta * el[k] + (1.0 - beta) * ec[k])
        .collect()
}

// ---------- attention ----------

#[test]
fn attend_matches_oracle_on_random_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vs: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let w = Mat::from_fn(8, 8, |_, _| rng.random_range(-0.5..0.5));
    let u: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let got = attend(&vs, &w, &u);
    let (ctx, a) = o_attend(&vs, &w, &u);
    assert!((got.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    for k in 0..8 {
        assert!((got.context[k] - ctx[k]).abs() < 1e-12);
    }
    for i in 0..4 {
        assert!((got.weights[i] - a[i]).abs() < 1e-12);
    }
}

#[test]
fn title_equal_to_single_sentence_gives_even_title_level() {
    let vocab = small_vocab(10);
    let m = StanceModel::new(&vocab, 8, 0, 0, 1);
    let a = EncodedArticle {
        title: vec![3, 4, 5],
        sentences: vec![vec![3, 4, 5]],
        lib_entities: None,
        con_entities: None,
    };
    let (_, report) = m.encode_document(&a).unwrap();
    assert_eq!(report.sentences, vec![1.0]);
    assert!(
        (report.title_level[0] - 0.5).abs() < 1e-15 && (report.title_level[1] - 0.5).abs() < 1e-15
    );
}

#[test]
fn document_vector_and_report_match_oracle() {
    let vocab = small_vocab(30);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..5 {
        let m = StanceModel::new(&vocab, 12, 4, 6, seed);
        let a = random_article(&mut rng, 30, 4, 6);
        let (doc, report) = m.encode_document(&a).unwrap();
        let expect = o_doc(&m, &a);
        for k in 0..12 {
            assert!((doc[k] - expect[k]).abs() < 1e-12);
        }
        let all = report.words.iter().chain([
            &report.title_words,
            &report.sentences,
            &report.title_level,
        ]);
        for w in all {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn sentence_permutation_is_equivariant() {
    let vocab = small_vocab(30);
    let m = StanceModel::new(&vocab, 10, 0, 0, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_article(&mut rng, 30, 0, 0).without_entities();
    let mut b = a.clone();
    b.sentences = vec![
        a.sentences[2].clone(),
        a.sentences[0].clone(),
        a.sentences[1].clone(),
    ];
    let (da, ra) = m.encode_document(&a).unwrap();
    let (db, rb) = m.encode_document(&b).unwrap();
    let perm = [2, 0, 1];
    for (j, &i) in perm.iter().enumerate() {
        assert!((rb.sentences[j] - ra.sentences[i]).abs() < 1e-12);
    }
    for k in 0..10 {
        assert!((da[k] - db[k]).abs() < 1e-12);
    }
}

// ---------- fusion ----------

#[test]
fn fusion_identities_and_oracle() {
    let vocab = small_vocab(30);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = StanceModel::new(&vocab, 8, 5, 5, 2);
    let a = random_article(&mut rng, 30, 5, 5);
    let (doc, _) = m.encode_document(&a).unwrap();

    let bare = fuse_knowledge(&m.params, &doc, None, None);
    assert_eq!(bare.fused, doc);

    let mut same = m.clone();
    same.params.proj_con = same.params.proj_lib.clone();
    let v = a.lib_entities.clone().unwrap();
    let f = fuse_knowledge(&same.params, &doc, Some(&v), Some(&v));
    for k in 0..8 {
        assert!((f.fused[k] - (doc[k] + f.e_lib[k])).abs() < 1e-12);
    }

    let f = m.fuse(&a).unwrap();
    let expect = o_fuse(
        &m,
        &doc,
        a.lib_entities.as_deref(),
        a.con_entities.as_deref(),
    );
    for k in 0..8 {
        assert!((f.fused[k] - expect[k]).abs() < 1e-12);
    }
}

// ---------- prediction ----------

#[test]
fn zero_classifier_predicts_uniform() {
    let vocab = small_vocab(30);
    let mut m = StanceModel::new(&vocab, 8, 0, 0, 2);
    m.params.cls_w = Mat::zeros(5, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = m
        .predict(&random_article(&mut rng, 30, 0, 0).without_entities())
        .unwrap();
    assert_eq!(d.p, [0.2; 5]);
}

#[test]
fn softmax_outputs_are_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10_000 {
        let scale = 10f64.powf(rng.random_range(-2.0..3.0));
        let logits: Vec<f64> = (0..5)
            .map(|_| rng.random_range(-1.0..1.0) * scale)
            .collect();
        let d = StanceDistribution::from_logits(&logits);
        assert!(d.p.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert!((d.p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn empty_article_is_rejected() {
    let vocab = small_vocab(10);
    let m = StanceModel::new(&vocab, 8, 0, 0, 2);
    let a = EncodedArticle {
        title: vec![],
        sentences: vec![vec![3]],
        lib_entities: None,
        con_entities: None,
    };
    assert!(matches!(m.predict(&a), Err(StanceError::EmptyArticle)));
}

// ---------- gradients ----------

#[test]
fn gradient_check_twenty_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..20 {
        let d_w = rng.random_range(2..=16);
        let (d_lib, d_con) = (rng.random_range(1..7), rng.random_range(1..7));
        let vocab = small_vocab(25);
        let m = StanceModel::new(&vocab, d_w, d_lib, d_con, rng.random());
        let mut a = random_article(&mut rng, 25, d_lib, d_con);
        if i % 4 == 3 {
            a.con_entities = None;
        }
        let label = StanceLabel::ALL[rng.random_range(0..5)];
        let r = model_grad_check(&m, &a, label, 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-4, "pair {i}: {r:?}");
    }
}

#[test]
fn entity_free_article_leaves_projections_untouched() {
    let vocab = small_vocab(25);
    let m = StanceModel::new(&vocab, 8, 4, 4, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_article(&mut rng, 25, 4, 4).without_entities();
    let (_, g) = m.loss_and_grad(&a, StanceLabel::Center).unwrap();
    assert!(g.params.proj_lib.data.iter().all(|&x| x == 0.0));
    assert!(g.params.proj_con.data.iter().all(|&x| x == 0.0));
}

#[test]
fn duplicate_sentences_get_equal_gradients() {
    let vocab = small_vocab(25);
    let m = StanceModel::new(&vocab, 8, 0, 0, 3);
    let a = EncodedArticle {
        title: vec![2, 3],
        sentences: vec![vec![4, 5, 6], vec![7, 8], vec![4, 5, 6]],
        lib_entities: None,
        con_entities: None,
    };
    let (_, g) = m.loss_and_grad(&a, StanceLabel::Right).unwrap();
    for k in 0..8 {
        assert!((g.sentence_vectors[0][k] - g.sentence_vectors[2][k]).abs() < 1e-9);
    }
}

// ---------- training and evaluation ----------

#[test]
fn two_articles_are_memorized() {
    let f = common::separable(0);
    let data: Vec<LabeledArticle> = common::labeled(&f, None).into_iter().take(2).collect();
    assert_ne!(data[0].label, data[1].label);
    let m = StanceModel::new(&f.vocab, 16, 0, 0, 1);
    let (m, hist) = train(m, &data, &TrainConfig::default()).unwrap();
    assert_eq!(hist.len(), 50);
    assert_eq!(hist[49].accuracy, 1.0);
    assert_eq!(evaluate_accuracy(&m, &data).unwrap(), 1.0);
}

#[test]
fn separable_corpus_reaches_95_percent_with_knowledge() {
    let f = common::separable(20);
    let kb = common::knowledge(&f.comments, KgMethod::RotatE, 8);
    let data = common::labeled(&f, Some(&kb));
    assert_eq!(data.len(), 120);
    let m = StanceModel::for_knowledge(&f.vocab, DEFAULT_D_W, Some(&kb), 1);
    let (m, hist) = train(m, &data, &TrainConfig::default()).unwrap();
    assert!(hist[49].accuracy >= 0.95, "{:?}", hist.last());
    // gold class gets the argmax on (almost) every training article
    let correct = data
        .iter()
        .filter(|x| m.predict(&x.input).unwrap().argmax() == x.label)
        .count();
    assert!(correct as f64 / 120.0 >= 0.95);

    // the fusion path is live: removing entities moves some prediction
    let moved = data
        .iter()
        .filter(|x| x.input.lib_entities.is_some() || x.input.con_entities.is_some())
        .any(|x| {
            let a = m.predict(&x.input).unwrap();
            let b = m.predict(&x.input.without_entities()).unwrap();
            a.p.iter().zip(b.p).map(|(p, q)| (p - q).abs()).sum::<f64>() > 0.0
        });
    assert!(moved);
}

#[test]
fn training_is_bit_deterministic() {
    let f = common::separable(0);
    let data: Vec<LabeledArticle> = common::labeled(&f, None).into_iter().take(20).collect();
    let cfg = TrainConfig {
        epochs: 3,
        seed: 9,
        ..Default::default()
    };
    let (a, ha) = train(StanceModel::new(&f.vocab, 8, 0, 0, 1), &data, &cfg).unwrap();
    let (b, hb) = train(StanceModel::new(&f.vocab, 8, 0, 0, 1), &data, &cfg).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(a, b);
}

#[test]
fn constant_model_accuracy_is_class_share() {
    let f = common::separable(0);
    let data = common::labeled(&f, None);
    let mut m = StanceModel::new(&f.vocab, 8, 0, 0, 1);
    m.params.cls_w = Mat::zeros(5, 8);
    m.params.cls_b = vec![0.0, 0.0, 1.0, 0.0, 0.0];
    // 120 articles, labels cycle through the five classes: 24 are center.
    assert_eq!(evaluate_accuracy(&m, &data).unwrap(), 24.0 / 120.0);
    // all-zero logits: ties go to the lowest index (left), also 24 of 120
    m.params.cls_b = vec![0.0; 5];
    assert_eq!(evaluate_accuracy(&m, &data).unwrap(), 0.2);
    assert!(matches!(
        evaluate_accuracy(&m, &[]),
        Err(StanceError::EmptyDataset)
    ));
}

#[test]
fn kfold_partitions_and_leave_one_out() {
    let folds = kfold_indices(6, 6, 3).unwrap();
    assert_eq!(folds.len(), 6);
    assert!(folds.iter().all(|f| f.len() == 1));
    for (n, k) in [(37, 3), (120, 10), (10, 2)] {
        let folds = kfold_indices(n, k, 1).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
    assert!(kfold_indices(5, 6, 0).is_err());
    assert!(kfold_indices(5, 1, 0).is_err());
}

#[test]
fn kfold_agrees_with_repeated_holdout() {
    let f = common::separable(0);
    let data = common::labeled(&f, None);
    let template = StanceModel::new(&f.vocab, 16, 0, 0, 2);
    let cfg = TrainConfig {
        epochs: 30,
        learning_rate: 0.2,
        ..Default::default()
    };
    let report = kfold_eval(&template, &data, 3, &cfg).unwrap();
    assert_eq!(report.accuracies.len(), 3);
    let mean = report.accuracies.iter().sum::<f64>() / 3.0;
    assert!((report.mean - mean).abs() < 1e-15);

    // repeated holdout: 3 random two-thirds / one-third splits
    let mut holdout = 0.0;
    for seed in 0..3 {
        let (tr, te) = hearhere_core::corpus::split_dataset(&data, 2.0 / 3.0, 100 + seed).unwrap();
        let (m, _) = train(template.clone(), &tr, &cfg).unwrap();
        holdout += evaluate_accuracy(&m, &te).unwrap() / 3.0;
    }
    assert!(
        (report.mean - holdout).abs() <= 0.05,
        "kfold {} vs holdout {holdout}",
        report.mean
    );
}

// ---------- comment classifier ----------

#[test]
fn comment_classifier_on_separable_comments() {
    let f = common::separable(20);
    let community = f.comments.len();
    let out = train_comment_classifier(&f.comments, &f.vocab, DEFAULT_D_C, &TrainConfig::default())
        .unwrap();
    assert_eq!(
        out.train_ids.len(),
        (community as f64 * 0.75).round() as usize
    );
    assert_eq!(out.train_ids.len() + out.test_ids.len(), community);
    assert!(
        out.held_out_accuracy >= 0.95,
        "held-out {}",
        out.held_out_accuracy
    );

    let again =
        train_comment_classifier(&f.comments, &f.vocab, DEFAULT_D_C, &TrainConfig::default())
            .unwrap();
    assert_eq!(again.model, out.model);

    let m = &out.model;
    let vecs: Vec<(Vec<f64>, Polarity)> = f
        .comments
        .iter()
        .map(|c| {
            (
                m.embed_comment(&f.vocab, c).unwrap(),
                c.origin.polarity().unwrap(),
            )
        })
        .collect();
    assert!(vecs.iter().all(|(v, _)| v.len() == DEFAULT_D_C));
    assert_eq!(
        m.embed_comment(&f.vocab, &f.comments[0]).unwrap(),
        vecs[0].0
    );
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0, 0.0, 0);
    for i in 0..vecs.len() {
        for j in i + 1..vecs.len() {
            let c = hearhere_core::linalg::cosine(&vecs[i].0, &vecs[j].0);
            if vecs[i].1 == vecs[j].1 {
                intra += c;
                ni += 1;
            } else {
                inter += c;
                nx += 1;
            }
        }
    }
    assert!(intra / ni as f64 > inter / nx as f64);
}

#[test]
fn comment_classifier_needs_both_classes() {
    let f = common::separable(5);
    let con: Vec<_> = f
        .comments
        .iter()
        .filter(|c| c.origin.polarity() == Some(Polarity::Conservative))
        .cloned()
        .collect();
    assert!(matches!(
        train_comment_classifier(&con, &f.vocab, 8, &TrainConfig::default()),
        Err(StanceError::SingleClass)
    ));
}

#[test]
fn comment_gradient_check() {
    let vocab = small_vocab(20);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let m = CommentModel::new(&vocab, rng.random_range(2..12), rng.random());
        let ids: Vec<usize> = (0..rng.random_range(1..7))
            .map(|_| rng.random_range(2..20))
            .collect();
        let err = comment_grad_check(&m, &ids, rng.random_range(0..2), 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
    }
}

// ---------- checkpoints ----------

#[test]
fn checkpoints_round_trip_and_check_vocab() {
    let dir = tempfile::tempdir().unwrap();
    let vocab = small_vocab(12);
    let m = StanceModel::new(&vocab, 6, 3, 2, 8);
    save_model(dir.path().join("m.json"), &m).unwrap();
    assert_eq!(load_model(dir.path().join("m.json"), &vocab).unwrap(), m);
    let other = small_vocab(13);
    assert!(matches!(
        load_model(dir.path().join("m.json"), &other),
        Err(StanceError::VocabMismatch { .. })
    ));

    let c = CommentModel::new(&vocab, 4, 1);
    save_comment_model(dir.path().join("c.json"), &c).unwrap();
    assert_eq!(
        load_comment_model(dir.path().join("c.json"), &vocab).unwrap(),
        c
    );
    assert!(load_model(dir.path().join("c.json"), &vocab).is_err());
}

#[test]
fn predict_stance_from_raw_article() {
    let f = common::separable(0);
    let m = StanceModel::new(&f.vocab, 8, 0, 0, 1);
    let a: &Article = &f.articles[0];
    let d = predict_stance(&m, &f.vocab, a, None).unwrap();
    assert!((d.p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

// ---------- binary view ----------

fn side_logits(left: [f64; 2], center: f64, right: [f64; 2]) -> [f64; 5] {
    [left[0], left[1], center, right[0], right[1]]
}

#[test]
fn logit_scaling_can_flip_polarity() {
    // The liberal side holds one large logit, the conservative side two
    // moderate ones. At temperature 1 the pair wins; sharpened, the single
    // large logit dominates.
    let logits = side_logits([2.0, 0.0], 0.0, [1.5, 1.5]);
    let (p1, _) = binary_stance(&StanceDistribution::from_logits(&logits));
    let scaled: Vec<f64> = logits.iter().map(|x| x * 10.0).collect();
    let (p10, _) = binary_stance(&StanceDistribution::from_logits(&scaled));
    assert_eq!(p1, Polarity::Conservative);
    assert_eq!(p10, Polarity::Liberal);
}

proptest! {
    #[test]
    fn polarity_is_shift_invariant(l in prop::array::uniform5(-8.0f64..8.0), c in -20.0f64..20.0) {
        let shifted: Vec<f64> = l.iter().map(|x| x + c).collect();
        let a = binary_stance(&StanceDistribution::from_logits(&l));
        let b = binary_stance(&StanceDistribution::from_logits(&shifted));
        prop_assert_eq!(a.0, b.0);
        prop_assert!((a.1 - b.1).abs() < 1e-9);
    }

    #[test]
    fn polarity_is_scale_invariant_under_dominance(
        lo in prop::array::uniform2(-5.0f64..5.0),
        gap in prop::array::uniform2(0.01f64..5.0),
        center in -5.0f64..5.0,
        k in 0.05f64..20.0,
    ) {
        // sorted conservative logits strictly dominate sorted liberal logits
        let mut lib = lo;
        lib.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let con = [lib[0] + gap[0], lib[1] + gap[1]];
        let logits = side_logits(lib, center, con);
        let scaled: Vec<f64> = logits.iter().map(|x| x * k).collect();
        let (p, _) = binary_stance(&StanceDistribution::from_logits(&scaled));
        prop_assert_eq!(p, Polarity::Conservative);
    }
}
