//! File-to-file pipeline steps: corpus, vocabulary, knowledge graphs, stance
//! and comment models, and a one-shot bootstrap that produces a servable
//! directory.

use anyhow::{bail, Context, Result};
use hearhere_core::corpus::{
    build_vocab, load_corpus, save_corpus, synth_corpus, Article, CorpusSpec, ExamplePipeline,
    Vocab,
};
use hearhere_core::kgraph::{
    build_graph, default_lexicon, load_embedding, load_graph, save_embedding, save_graph,
    shares_surface_form, train_kg_embedding, Camp, KgTrainConfig, KnowledgeGraph, DEFAULT_WINDOW,
};
use hearhere_core::opinion_map::TsneConfig;
use hearhere_core::stance::{
    band, binary_stance, encode_article, extremeness, kfold_eval, load_model, predict_stance,
    save_comment_model, save_model, train, train_comment_classifier, Band, CampKnowledge,
    EpochStats, KFoldReport, KnowledgeBase, LabeledArticle, Polarity, StanceDistribution,
    StanceLabel, StanceModel, TrainConfig,
};
use hearhere_gateway::config::KnowledgePaths;
use hearhere_gateway::ServerConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const CORPUS_FILE: &str = "corpus.jsonl";

fn read_vocab(path: &Path) -> Result<Vocab> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Vocab::from_json(&text)?)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// Reads a corpus spec from TOML (`.toml`) or JSON.
pub fn read_spec(path: &Path) -> Result<CorpusSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "toml") {
        Ok(toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
    } else {
        Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
    }
}

/// Writes `<out_dir>/corpus.jsonl` and returns its path.
pub fn generate_corpus(spec: &CorpusSpec, out_dir: &Path) -> Result<PathBuf> {
    let (articles, comments) = synth_corpus(spec)?;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(CORPUS_FILE);
    save_corpus(&path, &articles, &comments)?;
    Ok(path)
}

pub fn vocab_file(corpus: &Path, min_freq: usize, out: &Path) -> Result<Vocab> {
    let (articles, comments) = load_corpus(corpus)?;
    let vocab = build_vocab(&articles, &comments, min_freq)?;
    ensure_parent(out)?;
    std::fs::write(out, vocab.to_json())?;
    Ok(vocab)
}

/// Builds one camp's graph from that community's comments.
pub fn extract_graph(corpus: &Path, camp: Camp, out: &Path) -> Result<KnowledgeGraph> {
    let (_, comments) = load_corpus(corpus)?;
    let side = match camp {
        Camp::Lib => Polarity::Liberal,
        Camp::Con => Polarity::Conservative,
    };
    let posts: Vec<Vec<String>> = comments
        .iter()
        .filter(|c| c.origin.polarity() == Some(side))
        .map(|c| c.tokens.clone())
        .collect();
    let graph = build_graph(
        camp,
        &posts,
        &default_lexicon(),
        DEFAULT_WINDOW,
        shares_surface_form,
    )?;
    ensure_parent(out)?;
    save_graph(out, &graph)?;
    Ok(graph)
}

/// Trains and saves an embedding; returns the per-epoch mean loss.
pub fn train_graph(graph: &Path, config: &KgTrainConfig, out: &Path) -> Result<Vec<f64>> {
    let graph = load_graph(graph)?;
    let (emb, losses) = train_kg_embedding(&graph, config)?;
    ensure_parent(out)?;
    save_embedding(out, &emb)?;
    Ok(losses)
}

pub fn load_knowledge(paths: &KnowledgePaths) -> Result<KnowledgeBase> {
    Ok(KnowledgeBase {
        lib: CampKnowledge::new(
            load_graph(&paths.lib_graph)?,
            load_embedding(&paths.lib_embedding)?,
        ),
        con: CampKnowledge::new(
            load_graph(&paths.con_graph)?,
            load_embedding(&paths.con_embedding)?,
        ),
    })
}

pub fn labeled_articles(
    articles: &[Article],
    vocab: &Vocab,
    kb: Option<&KnowledgeBase>,
) -> Result<Vec<LabeledArticle>> {
    let mut out = Vec::with_capacity(articles.len());
    for a in articles {
        let Some(label) = a.gold_stance else { continue };
        out.push(LabeledArticle {
            input: encode_article(a, vocab, kb)?,
            label,
        });
    }
    if out.is_empty() {
        bail!("the corpus holds no labelled articles");
    }
    Ok(out)
}

/// Trains the stance model on every labelled article and saves it.
pub fn train_stance(
    corpus: &Path,
    vocab: &Path,
    knowledge: Option<&KnowledgePaths>,
    config: &TrainConfig,
    d_w: usize,
    out: &Path,
) -> Result<Vec<EpochStats>> {
    let (articles, _) = load_corpus(corpus)?;
    let vocab = read_vocab(vocab)?;
    let kb = knowledge.map(load_knowledge).transpose()?;
    let data = labeled_articles(&articles, &vocab, kb.as_ref())?;
    let model = StanceModel::for_knowledge(&vocab, d_w, kb.as_ref(), config.seed);
    let (model, history) = train(model, &data, config)?;
    ensure_parent(out)?;
    save_model(out, &model)?;
    Ok(history)
}

pub fn eval_stance(
    corpus: &Path,
    vocab: &Path,
    knowledge: Option<&KnowledgePaths>,
    config: &TrainConfig,
    d_w: usize,
    k: usize,
) -> Result<KFoldReport> {
    let (articles, _) = load_corpus(corpus)?;
    let vocab = read_vocab(vocab)?;
    let kb = knowledge.map(load_knowledge).transpose()?;
    let data = labeled_articles(&articles, &vocab, kb.as_ref())?;
    let template = StanceModel::for_knowledge(&vocab, d_w, kb.as_ref(), config.seed);
    Ok(kfold_eval(&template, &data, k, config)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub id: String,
    pub label: StanceLabel,
    pub distribution: StanceDistribution,
    pub stance: Polarity,
    pub extremeness: f64,
    pub band: Band,
}

/// Predicts every article in a corpus-format file.
pub fn predict_file(
    model: &Path,
    vocab: &Path,
    knowledge: Option<&KnowledgePaths>,
    articles: &Path,
) -> Result<Vec<Prediction>> {
    let vocab = read_vocab(vocab)?;
    let model = load_model(model, &vocab)?;
    let kb = knowledge.map(load_knowledge).transpose()?;
    let (articles, _) = load_corpus(articles)?;
    articles
        .iter()
        .map(|a| {
            let d = predict_stance(&model, &vocab, a, kb.as_ref())?;
            Ok(Prediction {
                id: a.id.clone(),
                label: d.argmax(),
                stance: binary_stance(&d).0,
                extremeness: extremeness(&d),
                band: band(&d),
                distribution: d,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommentSummary {
    pub train: usize,
    pub test: usize,
    pub held_out_accuracy: f64,
    pub final_training_accuracy: f64,
}

pub fn train_comments(
    corpus: &Path,
    vocab: &Path,
    config: &TrainConfig,
    d_c: usize,
    out: &Path,
) -> Result<CommentSummary> {
    let (_, comments) = load_corpus(corpus)?;
    let vocab = read_vocab(vocab)?;
    let t = train_comment_classifier(&comments, &vocab, d_c, config)?;
    ensure_parent(out)?;
    save_comment_model(out, &t.model)?;
    Ok(CommentSummary {
        train: t.train_ids.len(),
        test: t.test_ids.len(),
        held_out_accuracy: t.held_out_accuracy,
        final_training_accuracy: t.history.last().map(|h| h.accuracy).unwrap_or(0.0),
    })
}

/// Settings of a full bootstrap run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapOptions {
    pub corpus: CorpusSpec,
    pub min_freq: usize,
    pub kg: KgTrainConfig,
    pub stance: TrainConfig,
    pub comment: TrainConfig,
    pub d_w: usize,
    pub d_c: usize,
    pub bind: String,
    pub tsne: TsneConfig,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            corpus: CorpusSpec::new(6, 15, 30, 0.0, 7),
            min_freq: 1,
            kg: KgTrainConfig {
                dim: 8,
                epochs: 30,
                seed: 5,
                ..KgTrainConfig::default()
            },
            stance: TrainConfig {
                seed: 1,
                ..TrainConfig::default()
            },
            comment: TrainConfig::default(),
            d_w: hearhere_core::stance::DEFAULT_D_W,
            d_c: hearhere_core::stance::DEFAULT_D_C,
            bind: "127.0.0.1:8080".into(),
            tsne: TsneConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub config: PathBuf,
    pub articles: usize,
    pub stance_training_accuracy: f64,
    pub comment_held_out_accuracy: f64,
}

/// Generates a corpus and trains every model into `out`, then writes
/// `out/server.toml` pointing at the results.
pub fn bootstrap(out: &Path, opts: &BootstrapOptions) -> Result<BootstrapSummary> {
    std::fs::create_dir_all(out)?;
    let corpus = generate_corpus(&opts.corpus, out)?;
    let vocab = out.join("vocab.json");
    vocab_file(&corpus, opts.min_freq, &vocab)?;
    let knowledge = KnowledgePaths {
        lib_graph: out.join("kg/lib.graph.jsonl"),
        lib_embedding: out.join("kg/lib.emb.json"),
        con_graph: out.join("kg/con.graph.jsonl"),
        con_embedding: out.join("kg/con.emb.json"),
    };
    for (camp, graph, emb) in [
        (Camp::Lib, &knowledge.lib_graph, &knowledge.lib_embedding),
        (Camp::Con, &knowledge.con_graph, &knowledge.con_embedding),
    ] {
        extract_graph(&corpus, camp, graph)?;
        train_graph(graph, &opts.kg, emb)?;
    }
    let stance_model = out.join("models/stance.json");
    let history = train_stance(
        &corpus,
        &vocab,
        Some(&knowledge),
        &opts.stance,
        opts.d_w,
        &stance_model,
    )?;
    let comment_model = out.join("models/comment.json");
    let comments = train_comments(&corpus, &vocab, &opts.comment, opts.d_c, &comment_model)?;

    let per_side = opts.corpus.comments_per_topic_per_stance;
    let select = 10.min(per_side);
    let relative = |p: &Path| {
        p.strip_prefix(out)
            .map(Path::to_path_buf)
            .unwrap_or_else(|_| p.to_path_buf())
    };
    let config = ServerConfig {
        bind: opts
            .bind
            .parse()
            .with_context(|| format!("bind address {}", opts.bind))?,
        corpus: relative(&corpus),
        vocab: relative(&vocab),
        stance_model: relative(&stance_model),
        comment_model: relative(&comment_model),
        knowledge: Some(KnowledgePaths {
            lib_graph: relative(&knowledge.lib_graph),
            lib_embedding: relative(&knowledge.lib_embedding),
            con_graph: relative(&knowledge.con_graph),
            con_embedding: relative(&knowledge.con_embedding),
        }),
        data_dir: PathBuf::from("data"),
        seed: opts.corpus.seed,
        tsne: opts.tsne.clone(),
        examples: ExamplePipeline {
            collect: per_side,
            sample: per_side.min(50).max(select),
            select,
        },
        max_comments_per_topic: 500,
        report_read_kind: hearhere_core::feed::ReadKind::ArticleOpen,
        static_dir: None,
    };
    let config_path = out.join("server.toml");
    std::fs::write(&config_path, toml::to_string(&config)?)?;
    Ok(BootstrapSummary {
        config: config_path,
        articles: opts.corpus.n_topics * 2 * opts.corpus.articles_per_topic_per_stance,
        stance_training_accuracy: history.last().map(|h| h.accuracy).unwrap_or(0.0),
        comment_held_out_accuracy: comments.held_out_accuracy,
    })
}
