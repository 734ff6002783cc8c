//! Feature extraction and statistics for studying how expressive piano
//! performance shapes perceived emotion.
//!
//! The pipeline has three stages:
//!
//! 1. ingest a clip manifest, listener annotations, and per-clip feature
//!    tables into a [`corpus::Dataset`],
//! 2. compute features: low-level audio descriptors ([`lowlevel`]), score
//!    descriptors ([`score`]), and embedding features compressed by PCA
//!    ([`embed`]),
//! 3. run the regression, mixed-model, outlier, and classification battery
//!    ([`stats`]) and serialize the resulting tables ([`report`]).
//!
//! All operations are deterministic: the same inputs produce bit-identical
//! outputs regardless of thread count.

pub mod audio;
pub mod corpus;
pub mod embed;
pub mod lowlevel;
pub mod report;
pub mod score;
pub mod stats;

mod util;
