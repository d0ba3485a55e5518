//! Political-stance classification: labels and distributions, the
//! hierarchical attention classifier with knowledge fusion, and the binary
//! comment classifier whose pooled vectors feed the opinion map.

mod attention;
mod checkpoint;
mod comment;
mod knowledge;
mod labels;
mod model;

pub use attention::{attend, attend_backward, Attended, AttentionGrad};
pub use checkpoint::{
    load_comment_model, load_model, save_comment_model, save_model, CHECKPOINT_VERSION,
};
pub use comment::{
    comment_grad_check, polarity_class, train_comment_classifier, CommentModel, CommentTraining,
    COMMENT_PARAM_GROUPS, COMMENT_TRAIN_FRACTION, DEFAULT_D_C,
};
pub use knowledge::{CampKnowledge, KnowledgeBase};
pub use labels::*;
pub use model::{
    encode_article, evaluate_accuracy, fuse_knowledge, kfold_eval, kfold_indices, model_grad_check,
    predict_stance, train, AttentionReport, EncodedArticle, EpochStats, Fusion, GradCheckReport,
    KFoldReport, LabeledArticle, StanceGrad, StanceModel, StanceParams, TrainConfig, DEFAULT_D_W,
    PARAM_GROUPS,
};

#[derive(Debug, thiserror::Error)]
pub enum StanceError {
    #[error("article has an empty title or body")]
    EmptyArticle,
    #[error("comment has no tokens")]
    EmptyComment,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("article {0:?} has no gold label")]
    MissingLabel(String),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("checkpoint vocabulary hash {found} does not match vocabulary {expected}")]
    VocabMismatch { expected: String, found: String },
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
