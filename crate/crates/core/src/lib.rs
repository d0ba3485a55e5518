//! Engine behind a balanced political-news reader.
//!
//! The crate is organised by subsystem:
//!
//! - [`corpus`]: articles, comments, tokenization, vocabulary, dataset splits,
//!   topic bundles and a deterministic synthetic corpus generator.
//! - [`kgraph`]: camp-specific political knowledge graphs and RotatE / HAKE /
//!   ModE triple embeddings trained with self-adversarial negative sampling.
//! - [`stance`]: the three-level hierarchical attention classifier with
//!   knowledge fusion, plus the binary comment classifier used for opinion maps.
//! - [`opinion_map`]: exact t-SNE and the red/blue/yellow comment map.
//! - [`feed`]: ratio-bar composition, extremeness sorting, read logging and
//!   consumption analytics.
//! - [`study`]: the echo-chamber survey instrument and the statistics kernel.

pub mod corpus;
pub mod feed;
pub mod kgraph;
pub mod linalg;
pub mod opinion_map;
pub mod stance;
pub mod study;

pub(crate) mod rng;
