use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hearhere_cli::audit::{kg_grad_audit, stance_grad_audit, GradAudit};
use hearhere_cli::pipeline::{self, BootstrapOptions};
use hearhere_cli::report::report_from_files;
use hearhere_core::feed::ReadKind;
use hearhere_core::kgraph::{Camp, KgMethod, KgTrainConfig};
use hearhere_core::stance::{TrainConfig, DEFAULT_D_C, DEFAULT_D_W};
use hearhere_core::study::render_report_text;
use hearhere_gateway::config::KnowledgePaths;
use hearhere_gateway::{readiness_line, Server, ServerConfig};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "hearhere",
    version,
    about = "Balanced political news reader: pipeline, study report and server"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic corpus and vocabulary files.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Knowledge-graph extraction and embedding.
    #[command(subcommand)]
    Kg(KgCmd),
    /// Stance and comment classifiers.
    #[command(subcommand)]
    Stance(StanceCmd),
    /// Survey statistics.
    #[command(subcommand)]
    Study(StudyCmd),
    /// Run the HTTP gateway.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a corpus, train every model and write a server config.
    Bootstrap {
        #[arg(long)]
        out: PathBuf,
        /// TOML file with bootstrap options; defaults otherwise.
        #[arg(long)]
        options: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    Vocab {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 1)]
        min_freq: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CampArg {
    Lib,
    Con,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Rotate,
    Hake,
    Mode,
}

impl From<MethodArg> for KgMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rotate => KgMethod::RotatE,
            MethodArg::Hake => KgMethod::Hake,
            MethodArg::Mode => KgMethod::ModE,
        }
    }
}

#[derive(Subcommand)]
enum KgCmd {
    Extract {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        camp: CampArg,
        #[arg(long)]
        out: PathBuf,
    },
    Train {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "rotate")]
        method: MethodArg,
        /// TOML training config; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    CheckGrad {
        /// All three methods when omitted.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long, default_value_t = 20)]
        configs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct KnowledgeArgs {
    #[arg(long, requires_all = ["lib_embedding", "con_graph", "con_embedding"])]
    lib_graph: Option<PathBuf>,
    #[arg(long)]
    lib_embedding: Option<PathBuf>,
    #[arg(long)]
    con_graph: Option<PathBuf>,
    #[arg(long)]
    con_embedding: Option<PathBuf>,
}

impl KnowledgeArgs {
    fn paths(&self) -> Result<Option<KnowledgePaths>> {
        match (
            &self.lib_graph,
            &self.lib_embedding,
            &self.con_graph,
            &self.con_embedding,
        ) {
            (None, None, None, None) => Ok(None),
            (Some(lg), Some(le), Some(cg), Some(ce)) => Ok(Some(KnowledgePaths {
                lib_graph: lg.clone(),
                lib_embedding: le.clone(),
                con_graph: cg.clone(),
                con_embedding: ce.clone(),
            })),
            _ => bail!("give all four knowledge files or none"),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ignore entity knowledge (ablation).
    #[arg(long)]
    no_entities: bool,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.lr,
            batch_size: self.batch_size,
            seed: self.seed,
            use_entities: !self.no_entities,
        }
    }
}

#[derive(Subcommand)]
enum StanceCmd {
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[command(flatten)]
        knowledge: KnowledgeArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = DEFAULT_D_W)]
        d_w: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the binary comment classifier behind opinion maps.
    TrainComments {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = DEFAULT_D_C)]
        d_c: usize,
        #[arg(long)]
        out: PathBuf,
    },
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[command(flatten)]
        knowledge: KnowledgeArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = DEFAULT_D_W)]
        d_w: usize,
        #[arg(long, default_value_t = 5)]
        kfold: usize,
    },
    Predict {
        /// Corpus-format file with one or more articles.
        #[arg(long)]
        article: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[command(flatten)]
        knowledge: KnowledgeArgs,
    },
    CheckGrad {
        #[arg(long, default_value_t = 20)]
        configs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReadKindArg {
    ThumbnailView,
    ArticleOpen,
    ScrollComplete,
}

impl From<ReadKindArg> for ReadKind {
    fn from(k: ReadKindArg) -> Self {
        match k {
            ReadKindArg::ThumbnailView => ReadKind::ThumbnailView,
            ReadKindArg::ArticleOpen => ReadKind::ArticleOpen,
            ReadKindArg::ScrollComplete => ReadKind::ScrollComplete,
        }
    }
}

#[derive(Subcommand)]
enum StudyCmd {
    Report {
        #[arg(long)]
        surveys: PathBuf,
        /// Read log; requires --article-stances.
        #[arg(long, requires = "article_stances")]
        logs: Option<PathBuf>,
        /// Article id to binary stance map written by the server.
        #[arg(long, requires = "logs")]
        article_stances: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "article-open")]
        read_kind: ReadKindArg,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn print_audits(audits: &[GradAudit]) -> Result<()> {
    print_json(&audits)?;
    if let Some(bad) = audits.iter().find(|a| !a.passed()) {
        bail!(
            "{} gradient check failed: max relative error {:e} ({})",
            bad.target,
            bad.max_rel_error,
            bad.worst
        );
    }
    Ok(())
}

fn kg_config(path: Option<&Path>) -> Result<KgTrainConfig> {
    match path {
        None => Ok(KgTrainConfig::default()),
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Corpus(CorpusCmd::Gen { spec, seed, out }) => {
            let mut spec = pipeline::read_spec(&spec)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let path = pipeline::generate_corpus(&spec, &out)?;
            println!("{}", path.display());
        }
        Command::Corpus(CorpusCmd::Vocab {
            corpus,
            min_freq,
            out,
        }) => {
            let vocab = pipeline::vocab_file(&corpus, min_freq, &out)?;
            print_json(&serde_json::json!({ "size": vocab.len(), "hash": vocab.hash() }))?;
        }
        Command::Kg(KgCmd::Extract { corpus, camp, out }) => {
            let camp = match camp {
                CampArg::Lib => Camp::Lib,
                CampArg::Con => Camp::Con,
            };
            let g = pipeline::extract_graph(&corpus, camp, &out)?;
            print_json(
                &serde_json::json!({ "entities": g.n_entities(), "relations": g.n_relations(), "triples": g.triples.len() }),
            )?;
        }
        Command::Kg(KgCmd::Train {
            graph,
            method,
            config,
            dim,
            epochs,
            seed,
            out,
        }) => {
            let mut cfg = kg_config(config.as_deref())?;
            cfg.method = method.into();
            cfg.dim = dim.unwrap_or(cfg.dim);
            cfg.epochs = epochs.unwrap_or(cfg.epochs);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let losses = pipeline::train_graph(&graph, &cfg, &out)?;
            print_json(
                &serde_json::json!({ "method": cfg.method, "epochs": losses.len(), "final_loss": losses.last() }),
            )?;
        }
        Command::Kg(KgCmd::CheckGrad {
            method,
            configs,
            seed,
        }) => {
            let methods: Vec<KgMethod> = match method {
                Some(m) => vec![m.into()],
                None => KgMethod::ALL.to_vec(),
            };
            let audits = methods
                .into_iter()
                .map(|m| kg_grad_audit(m, configs, seed))
                .collect::<Result<Vec<_>>>()?;
            print_audits(&audits)?;
        }
        Command::Stance(StanceCmd::Train {
            corpus,
            vocab,
            knowledge,
            train,
            d_w,
            out,
        }) => {
            let history = pipeline::train_stance(
                &corpus,
                &vocab,
                knowledge.paths()?.as_ref(),
                &train.config(),
                d_w,
                &out,
            )?;
            print_json(&history.last())?;
        }
        Command::Stance(StanceCmd::TrainComments {
            corpus,
            vocab,
            train,
            d_c,
            out,
        }) => {
            print_json(&pipeline::train_comments(
                &corpus,
                &vocab,
                &train.config(),
                d_c,
                &out,
            )?)?;
        }
        Command::Stance(StanceCmd::Eval {
            corpus,
            vocab,
            knowledge,
            train,
            d_w,
            kfold,
        }) => {
            print_json(&pipeline::eval_stance(
                &corpus,
                &vocab,
                knowledge.paths()?.as_ref(),
                &train.config(),
                d_w,
                kfold,
            )?)?;
        }
        Command::Stance(StanceCmd::Predict {
            article,
            model,
            vocab,
            knowledge,
        }) => {
            print_json(&pipeline::predict_file(
                &model,
                &vocab,
                knowledge.paths()?.as_ref(),
                &article,
            )?)?;
        }
        Command::Stance(StanceCmd::CheckGrad { configs, seed }) => {
            print_audits(&[stance_grad_audit(configs, seed)?])?;
        }
        Command::Study(StudyCmd::Report {
            surveys,
            logs,
            article_stances,
            alpha,
            read_kind,
            json_out,
        }) => {
            let report = report_from_files(
                &surveys,
                logs.as_deref(),
                article_stances.as_deref(),
                alpha,
                read_kind.into(),
            )?;
            let json = serde_json::to_string_pretty(&report)?;
            match json_out {
                Some(path) => std::fs::write(&path, json)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => println!("{json}\n"),
            }
            print!("{}", render_report_text(&report));
        }
        Command::Serve { config } => {
            let config = ServerConfig::load(&config)?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let server = Server::bind(&config).await?;
                println!("{}", readiness_line(server.local_addr()?));
                server.run().await?;
                anyhow::Ok(())
            })?;
        }
        Command::Bootstrap { out, options, bind } => {
            let mut opts = match options {
                None => BootstrapOptions::default(),
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .with_context(|| format!("reading {}", p.display()))?;
                    toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
                }
            };
            if let Some(bind) = bind {
                opts.bind = bind;
            }
            print_json(&pipeline::bootstrap(&out, &opts)?)?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    run(Cli::parse())
}
