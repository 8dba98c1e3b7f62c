//! Classify-then-extract evidence extraction.
//!
//! A linear document classifier is trained on every labeled document while
//! a label-conditioned linear-chain CRF is trained on the (few) documents
//! whose evidence tokens are annotated. Both read the same token
//! embeddings. At inference the classifier's predicted label selects the
//! CRF's emission block, and Viterbi decoding yields the evidence mask.

#![allow(clippy::needless_range_loop)]

pub mod classifier;
pub mod cli;
pub mod corpus;
pub mod crf;
pub mod error;
pub mod eval;
pub mod math;
pub mod trainer;

pub use classifier::ClassifierParams;
pub use corpus::{Corpus, Document, FeatureSpace, FeaturizedDoc};
pub use crf::{CrfParams, EmissionMode, PotentialTable};
pub use error::{Error, Result};
pub use trainer::{Model, TrainConfig, Variant};
