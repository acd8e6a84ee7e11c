//! Pollution source apportionment and station grouping for spatiotemporal
//! air-quality measurements.
//!
//! The pipeline factorizes an unfolded species tensor with NMF, summarizes
//! each station's source contributions over time with a two-step reduction
//! (PCA over time, then a 2-D embedding), clusters the stations, and
//! characterizes each cluster against the rest with contrastive PCA.

pub mod analytics;
pub mod contrastive;
pub mod data;
pub mod error;
pub mod factorization;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod multidr;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
