#![allow(dead_code)]

use hearhere_core::corpus::{build_vocab, synth_corpus, Article, Comment, CorpusSpec, Vocab};
use hearhere_core::kgraph::{
    build_graph, default_lexicon, shares_surface_form, train_kg_embedding, Camp, KgMethod,
    KgTrainConfig, DEFAULT_WINDOW,
};
use hearhere_core::stance::{
    encode_article, CampKnowledge, KnowledgeBase, LabeledArticle, Polarity,
};

pub struct Fixture {
    pub articles: Vec<Article>,
    pub comments: Vec<Comment>,
    pub vocab: Vocab,
}

/// The noise-free six-topic corpus: 120 articles (24 per class).
pub fn separable(comments_per_stance: usize) -> Fixture {
    let spec = CorpusSpec::new(6, 10, comments_per_stance, 0.0, 7);
    let (articles, comments) = synth_corpus(&spec).unwrap();
    let vocab = build_vocab(&articles, &comments, 1).unwrap();
    Fixture {
        articles,
        comments,
        vocab,
    }
}

/// Knowledge graphs built from each community's comments, embedded with `method`.
pub fn knowledge(comments: &[Comment], method: KgMethod, dim: usize) -> KnowledgeBase {
    let lex = default_lexicon();
    let camp = |camp: Camp, side: Polarity| {
        let posts: Vec<Vec<String>> = comments
            .iter()
            .filter(|c| c.origin.polarity() == Some(side))
            .map(|c| c.tokens.clone())
            .collect();
        let graph = build_graph(camp, &posts, &lex, DEFAULT_WINDOW, shares_surface_form).unwrap();
        let cfg = KgTrainConfig {
            method,
            dim,
            epochs: 30,
            seed: 5,
            ..Default::default()
        };
        let (emb, _) = train_kg_embedding(&graph, &cfg).unwrap();
        CampKnowledge::new(graph, emb)
    };
    KnowledgeBase {
        lib: camp(Camp::Lib, Polarity::Liberal),
        con: camp(Camp::Con, Polarity::Conservative),
    }
}

pub fn labeled(f: &Fixture, kb: Option<&KnowledgeBase>) -> Vec<LabeledArticle> {
    f.articles
        .iter()
        .map(|a| LabeledArticle {
            input: encode_article(a, &f.vocab, kb).unwrap(),
            label: a.gold_stance.unwrap(),
        })
        .collect()
}
