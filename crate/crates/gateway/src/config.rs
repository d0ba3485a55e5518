use crate::GatewayError;
use hearhere_core::corpus::ExamplePipeline;
use hearhere_core::feed::ReadKind;
use hearhere_core::opinion_map::TsneConfig;
use serde::{Deserialize, Serialize};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

/// Overrides the configured bind address.
pub const ENV_BIND: &str = "HEARHERE_BIND";
/// Overrides the configured data directory.
pub const ENV_DATA_DIR: &str = "HEARHERE_DATA_DIR";

/// Per-camp knowledge graphs and their trained embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgePaths {
    pub lib_graph: PathBuf,
    pub lib_embedding: PathBuf,
    pub con_graph: PathBuf,
    pub con_embedding: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    /// JSON-lines corpus with articles and community comments.
    pub corpus: PathBuf,
    pub vocab: PathBuf,
    pub stance_model: PathBuf,
    pub comment_model: PathBuf,
    #[serde(default)]
    pub knowledge: Option<KnowledgePaths>,
    /// Session, read, survey and opinion logs live here.
    pub data_dir: PathBuf,
    /// Seeds example sampling; the t-SNE seed lives in `tsne`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tsne: TsneConfig,
    #[serde(default)]
    pub examples: ExamplePipeline,
    /// Community comments per topic placed on the map, and user opinions
    /// accepted per topic.
    #[serde(default = "default_max_comments")]
    pub max_comments_per_topic: usize,
    /// Event kind counted as a read in consumption reports.
    #[serde(default = "default_read_kind")]
    pub report_read_kind: ReadKind,
    /// Built web UI assets served under `/`.
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
}

fn default_max_comments() -> usize {
    500
}

fn default_read_kind() -> ReadKind {
    ReadKind::ArticleOpen
}

impl ServerConfig {
    /// Reads a TOML config, resolves relative paths against its directory
    /// and applies environment overrides.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let mut config: ServerConfig = toml::from_str(&text)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.apply_env(|k| std::env::var(k).ok())?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.vocab);
        fix(&mut self.stance_model);
        fix(&mut self.comment_model);
        fix(&mut self.data_dir);
        if let Some(k) = &mut self.knowledge {
            fix(&mut k.lib_graph);
            fix(&mut k.lib_embedding);
            fix(&mut k.con_graph);
            fix(&mut k.con_embedding);
        }
        if let Some(s) = &mut self.static_dir {
            fix(s);
        }
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), GatewayError> {
        if let Some(bind) = var(ENV_BIND) {
            self.bind = bind
                .parse()
                .map_err(|e| GatewayError::Config(format!("{ENV_BIND}={bind}: {e}")))?;
        }
        if let Some(dir) = var(ENV_DATA_DIR) {
            self.data_dir = PathBuf::from(dir);
        }
        Ok(())
    }

    /// Input files that must exist before the server starts.
    pub fn required_inputs(&self) -> Vec<&Path> {
        let mut v = vec![
            self.corpus.as_path(),
            self.vocab.as_path(),
            self.stance_model.as_path(),
            self.comment_model.as_path(),
        ];
        if let Some(k) = &self.knowledge {
            v.extend([
                k.lib_graph.as_path(),
                k.lib_embedding.as_path(),
                k.con_graph.as_path(),
                k.con_embedding.as_path(),
            ]);
        }
        if let Some(s) = &self.static_dir {
            v.push(s);
        }
        v
    }

    pub fn check_inputs(&self) -> Result<(), GatewayError> {
        let missing: Vec<String> = self
            .required_inputs()
            .into_iter()
            .filter(|p| !p.exists())
            .map(|p| p.display().to_string())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(GatewayError::Config(format!(
                "missing input(s): {}",
                missing.join(", ")
            )))
        }
    }
}
