//! # semihash-core
//!
//! Desk-scale, framework-free semi-supervised learning-to-hash.
//!
//! The pipeline: a small feedforward [`encoder`] maps inputs to a feature
//! vector, a sigmoid hash layer producing relaxed codes in `[0,1]^q`, and a
//! classifier head. Training ([`trainer`]) minimizes a three-term loss
//! ([`loss`]): a supervised triplet ranking term over labeled samples, a
//! contrastive embedding term over neighbor/non-neighbor pairs from an
//! online per-batch kNN graph ([`graph`]), and a contrastive pseudo-label
//! term driven by the classifier's predictions, plus cross-entropy on the
//! classifier branch. Trained outputs are thresholded into bit-packed
//! binary codes ([`codes`]) and served by exhaustive Hamming ranking,
//! scored with MAP / precision-recall / precision@k ([`eval`]).
//!
//! Data ingestion, reproducible query/database/training splits, and
//! mini-batch sampling live in [`dataio`].

pub mod codes;
pub mod dataio;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod graph;
pub mod loss;
pub mod mat;
pub mod trainer;

pub use error::{Error, Result};
pub use mat::Mat;
