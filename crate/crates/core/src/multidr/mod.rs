//! Two-step reduction of the contribution tensor to a 2-D station layout,
//! and clustering of that layout.

mod cluster;
mod embed;
mod first_step;
mod umap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use cluster::{cluster_stations, KMeans, KMeansFit, StationClusterer};
pub use embed::{pca2, second_step_embed, DrMethod};
pub use first_step::{first_step_pca, instance_matrix, ContributionTensor, FirstStep};
pub use umap::{fit_ab, umap_embed, UmapParams};

use crate::error::Result;

/// Output dimensionality of the first (temporal) reduction step.
pub const FIRST_STEP_COMPONENTS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiDrConfig {
    pub k: usize,
    pub dr_method: DrMethod,
    pub umap: UmapParams,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationEmbedding {
    /// Station x source summary from the temporal reduction.
    pub y: Array2<f64>,
    /// Station coordinates, `n x 2`.
    pub z: Array2<f64>,
    pub pc1_explained: f64,
    pub first_step_degenerate: bool,
    pub cluster_labels: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

/// Runs both reduction steps and k-means on the result.
pub fn embed_stations(tensor: &ContributionTensor, config: &MultiDrConfig) -> Result<StationEmbedding> {
    let first = first_step_pca(tensor)?;
    let z = second_step_embed(&first.y, config.dr_method, &config.umap, config.seed)?;
    let labels = cluster_stations(&z, config.k, config.seed)?;
    let k = labels.iter().max().map_or(0, |m| m + 1);
    Ok(StationEmbedding {
        y: first.y,
        z,
        pc1_explained: first.pc1_explained,
        first_step_degenerate: first.degenerate,
        cluster_labels: labels,
        k,
        seed: config.seed,
    })
}
