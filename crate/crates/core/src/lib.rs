//! Full-scan hybrid retrieval.
//!
//! Every query is answered by scanning the whole index: boolean term
//! matching first, an optional sign-quantized pre-selection, then exact
//! inner-product scoring of the survivors and a bucketized top-K. Because
//! nothing is skipped heuristically, the result with pre-selection disabled
//! is exactly the brute-force filtered KNN answer.
//!
//! Alongside the engine live the two learners that feed it:
//! [`link_learner`] mines explainable seeker/job links from confirmed hires
//! and exports them as term attributes, and [`two_tower`] trains the
//! embeddings with in-batch, easy and hard negatives.

pub mod bench;
pub mod corpus;
pub mod knn;
pub mod link_learner;
pub mod pipeline;
pub mod quantizer;
pub mod synth;
pub mod term_match;
pub mod two_tower;

pub use corpus::{CorpusError, DocumentInput, FrozenIndex, IndexBuilder, IndexSchema};
pub use knn::{Hit, TopKResult};
pub use pipeline::{Executor, ExecutorConfig, HybridQuery, QueryError, QueryOptions};
pub use quantizer::{QuantCodec, Signature};
pub use term_match::{CnfQuery, Messenger};
