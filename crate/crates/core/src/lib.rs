//! Informed data selection: order an unlabeled corpus so that the first
//! documents sent to annotators cover every class quickly, then measure how
//! many annotations a few-shot dataset actually costs.
//!
//! Selectors: [`selectors::random_order`], [`selectors::rss_order`] (farthest
//! point traversal), [`selectors::oc_order`] (round robin over HDBSCAN
//! clusters) and [`selectors::lls_order`] (BLEU-filtered shuffle).

pub mod annotation;
pub mod clustering;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod geometry;
pub mod lexical;
pub mod selectors;
pub mod synthetic;

pub use annotation::{simulate, theta, SessionConfig, SessionExport, SessionState, SessionStatus};
pub use clustering::{hdbscan, ClusterModel, ClusterParams};
pub use corpus::{Corpus, Document, LabelSet};
pub use error::{Error, Result};
pub use geometry::{EmbeddingSet, SimilarityMatrix};
pub use selectors::{LlsMode, Method, SelectionOrder};
